use grw_lab::experiments::{normalized, pointer_partition, standard_experiment, StandardSetup};
use grw_lab::linalg::{self, StateVector};
use grw_lab::master::DensityOperator;
use grw_lab::model::{GrwModel, HamiltonianSpec, LatticeParams, SystemSplit};
use grw_lab::verify::*;
use grw_lab::GrwError;

fn lattice(n: usize, lambda: f64, mass: f64) -> LatticeParams {
    LatticeParams { n_particles: n, sites: 4, spacing: 1.0, lambda, sigma: 1.0, masses: vec![mass; n] }
}

fn hopping(contact: f64) -> HamiltonianSpec {
    HamiltonianSpec::Hopping { onsite: None, contact, mobile: None }
}

fn bell() -> StateVector {
    let mut v = vec![0.0; 16];
    v[0] = 1.0;
    v[15] = 1.0;
    normalized(&v)
}

#[test]
fn coarse_classes_are_distinct() {
    let s = CoarseStatistic::halves(4);
    assert_eq!(s.n_classes(), 19);
    let h = grw_lab::jump::FlashHistory::empty(0.0, 1.0);
    assert_eq!(s.class(&h.events, (0.0, 1.0)), 0);
}

#[test]
fn conditional_probability_and_control() {
    let model = GrwModel::from_spec(lattice(1, 1.0, 10.0), &hopping(0.0)).unwrap();
    let psi = normalized(&[1.0, 0.0, 0.0, 1.0]);
    let r = conditional_probability(&model, &psi, 1.0, 2.0, 20_000, 3, RestartState::Collapsed).unwrap();
    println!("{}", serde_json::to_string(&r).unwrap());
    assert!(r.pass);
    let c = conditional_probability(&model, &psi, 1.0, 2.0, 20_000, 3, RestartState::Uncollapsed).unwrap().expect_rejection(1e-6);
    println!("{}", serde_json::to_string(&c).unwrap());
    assert!(c.pass);
}

#[test]
fn trivial_rate_conditional_passes() {
    let model = GrwModel::from_spec(lattice(1, 0.0, 1.0), &hopping(0.0)).unwrap();
    let psi = normalized(&[1.0, 0.0, 0.0, 1.0]);
    let r = conditional_probability(&model, &psi, 0.5, 1.0, 500, 3, RestartState::Collapsed).unwrap();
    assert!(r.pass);
}

#[test]
fn marginal_probability_isolated_and_control() {
    let sp = SystemSplit::labels(&[0]);
    let model = GrwModel::from_spec(lattice(2, 0.5, 1.0), &hopping(0.0)).unwrap();
    let r = test_marginal_probability(&model, &sp, &bell(), (0.0, 2.0), 20_000, 5).unwrap();
    println!("{}", serde_json::to_string(&r).unwrap());
    assert!(r.pass);
    let inter = GrwModel::from_spec(lattice(2, 1.0, 1.0), &hopping(5.0)).unwrap();
    assert!(matches!(test_marginal_probability(&inter, &sp, &bell(), (0.0, 2.0), 10, 5), Err(GrwError::NotIsolated)));
    let psi = linalg::tensor_vec(&linalg::basis_vector(4, 1), &linalg::basis_vector(4, 2));
    let c = compare_marginal_flashes(&inter, &sp, &psi, (0.0, 2.0), 20_000, 5).unwrap().expect_rejection(ALPHA);
    println!("{}", serde_json::to_string(&c).unwrap());
    assert!(c.pass);
}

#[test]
fn independence_and_control() {
    let sp = SystemSplit::labels(&[0]);
    let model = GrwModel::from_spec(lattice(2, 0.5, 1.0), &hopping(0.0)).unwrap();
    let a = normalized(&[1.0, 0.0, 0.5, 1.0]);
    let b = normalized(&[0.0, 1.0, 1.0, 0.3]);
    let r = test_independence(&model, &sp, &linalg::tensor_vec(&a, &b), (0.0, 2.0), 20_000, 8).unwrap();
    println!("{}", serde_json::to_string(&r).unwrap());
    assert!(r.pass);
    let c = independence_statistic(&model, &sp, &bell(), (0.0, 2.0), 20_000, 8).unwrap().expect_rejection(1e-6);
    println!("{}", serde_json::to_string(&c).unwrap());
    assert!(c.pass);
}

#[test]
fn marginal_master_entangled() {
    let sp = SystemSplit::labels(&[1]);
    let model = GrwModel::from_spec(lattice(2, 0.5, 1.0), &hopping(0.0)).unwrap();
    let mut v = vec![0.0; 16];
    v[1] = 1.0;
    v[14] = 0.7;
    v[6] = 0.4;
    let r = test_marginal_master(&model, &sp, &DensityOperator::pure(&normalized(&v)), (0.0, 1.0)).unwrap();
    println!("{}", serde_json::to_string(&r).unwrap());
    assert!(r.pass);
    let inter = GrwModel::from_spec(lattice(2, 0.5, 1.0), &hopping(5.0)).unwrap();
    let c = test_marginal_master(&inter, &sp, &DensityOperator::pure(&normalized(&v)), (0.0, 1.0)).unwrap();
    assert!(!c.pass && c.value > 1e-3, "{}", c.value);
}

#[test]
fn density_sufficiency_and_matter_contrast() {
    let model = GrwModel::from_spec(lattice(1, 1.0, 1.0), &HamiltonianSpec::Zero).unwrap();
    let u = linalg::basis_vector(4, 0);
    let d = linalg::basis_vector(4, 3);
    let l = normalized(&[1.0, 0.0, 0.0, 1.0]);
    let r = normalized(&[1.0, 0.0, 0.0, -1.0]);
    let a = (vec![0.5, 0.5], vec![u, d]);
    let b = (vec![0.5, 0.5], vec![l, r]);
    let rep = test_density_sufficiency(&model, &a, &b, (0.0, 1.0), 20_000, 4).unwrap();
    println!("{}", serde_json::to_string(&rep).unwrap());
    assert!(rep.pass);
    let which = SufficiencyStatistic::MatterDensity(pointer_partition(4));
    let c = density_sufficiency(&model, &a, &b, (0.0, 1.0), 20_000, 4, &which).unwrap().expect_rejection(1e-4);
    println!("{}", serde_json::to_string(&c).unwrap());
    assert!(c.pass);
    let bad = (vec![0.7, 0.3], a.1.clone());
    assert!(matches!(density_sufficiency(&model, &bad, &b, (0.0, 1.0), 10, 4, &which), Err(GrwError::MixturesDiffer(_))));
}

#[test]
fn linearity_in_rho() {
    let exp = standard_experiment(&StandardSetup { lambda: 0.3, ..StandardSetup::default() }).unwrap();
    let ra = linalg::projector(&normalized(&[1.0, 0.2, 0.7, 0.1]));
    let rb = linalg::projector(&normalized(&[0.0, 1.0, -0.4, 0.9]));
    let r = test_linearity_in_rho(&exp, &ra, &rb, 0.5, 20_000, 6).unwrap();
    println!("{}", serde_json::to_string(&r).unwrap());
    assert!(r.pass);
}

#[test]
fn poisson_counts_fit() {
    let model = GrwModel::from_spec(lattice(2, 1.0, 1.0), &hopping(0.0)).unwrap();
    let r = test_poisson_counts(&model, (0.0, 1.0), 20_000, 2).unwrap();
    println!("{}", serde_json::to_string(&r).unwrap());
    assert!(r.pass);
    let zero = GrwModel::from_spec(lattice(2, 0.0, 1.0), &hopping(0.0)).unwrap();
    assert!(test_poisson_counts(&zero, (0.0, 1.0), 100, 2).unwrap().pass);
}

use grw_lab::experiments::{normalized, pointer_partition};
use grw_lab::jump::{history_density, l_operator, simulate, FlashEvent, FlashHistory, Simulator};
use grw_lab::linalg::*;
use grw_lab::master::{build_channel, evolve_density, DensityOperator, Lindblad};
use grw_lab::model::*;
use grw_lab::ontology::{macro_state_f, macro_state_m, matter_density, Readout};
use grw_lab::rng::StreamRng;
use grw_lab::GrwError;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::RngCore;

fn params(n: usize, l: usize, lambda: f64) -> LatticeParams {
    LatticeParams { n_particles: n, sites: l, spacing: 1.0, lambda, sigma: 1.0, masses: vec![1.0; n] }
}

fn hopping() -> HamiltonianSpec {
    HamiltonianSpec::Hopping { onsite: None, contact: 0.0, mobile: None }
}

fn model(lambda: f64) -> GrwModel {
    GrwModel::from_spec(params(1, 4, lambda), &hopping()).unwrap()
}

#[test]
fn streams_are_independent_of_order() {
    let a: Vec<u64> = (0..4).map(|k| StreamRng::new(7, k).next_u64()).collect();
    let b: Vec<u64> = (0..4).rev().map(|k| StreamRng::new(7, k).next_u64()).collect();
    assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    assert_ne!(a[0], a[1]);
}

#[test]
fn categorical_skips_zero_weights() {
    let mut r = StreamRng::new(1, 0);
    for _ in 0..100 {
        assert_eq!(r.categorical(&[0.0, 2.0, 0.0]), 1);
    }
}

#[test]
fn site_indexing_is_particle_major() {
    assert_eq!(site_of(7, 0, 2, 4), 1);
    assert_eq!(site_of(7, 1, 2, 4), 3);
}

#[test]
fn permutation_swaps_labels() {
    let perm = label_permutation(2, 3, &[1, 0]);
    assert_eq!(perm[1], 3);
}

#[test]
fn validation_rejects_bad_parameters() {
    let mut p = params(1, 4, 0.1);
    p.sigma = -1.0;
    assert!(p.validate().is_err());
    let mut p = params(1, 4, 0.1);
    p.lambda = -1.0;
    assert!(p.validate().is_err());
    let mut p = params(2, 4, 0.1);
    p.masses = vec![1.0];
    assert!(p.validate().is_err());
}

#[test]
fn hopping_hamiltonian_matches_second_difference() {
    let p = LatticeParams { n_particles: 1, sites: 5, spacing: 0.5, lambda: 0.0, sigma: 1.0, masses: vec![2.0] };
    let h = build_hamiltonian(&p, &hopping()).unwrap();
    let c = 1.0 / (2.0 * 2.0 * 0.25);
    for r in 0..5usize {
        for k in 0..5 {
            let want = if r == k { 2.0 * c } else if r.abs_diff(k) == 1 { -c } else { 0.0 };
            assert!((h[(r, k)] - real(want)).norm() < 1e-14);
        }
    }
}

#[test]
fn contact_energy_sits_on_coincident_configurations() {
    let p = params(2, 3, 0.0);
    let h = build_hamiltonian(&p, &HamiltonianSpec::Hopping { onsite: None, contact: 4.0, mobile: Some(vec![]) }).unwrap();
    for q in 0..9 {
        let want = if q / 3 == q % 3 { 4.0 } else { 0.0 };
        assert_eq!(h[(q, q)].re, want);
    }
    assert!(h.iter().enumerate().all(|(k, z)| k % 10 == 0 || *z == C0));
}

#[test]
fn diag_eig_is_sorted() {
    let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![real(3.0), real(1.0)]));
    let (v, _) = herm_eig(&m).unwrap();
    assert_eq!(v.as_slice(), &[1.0, 3.0]);
}

#[test]
fn non_hermitian_rejected() {
    let m = ComplexMatrix::from_row_slice(2, 2, &[C0, C1, C0, C0]);
    assert!(matches!(herm_eig(&m), Err(GrwError::NotHermitian(_))));
}

#[test]
fn propagator_matches_series_exponential() {
    let h = ComplexMatrix::from_row_slice(2, 2, &[real(1.0), CI, -CI, real(-0.5)]);
    let p = Propagator::new(&h).unwrap();
    let u = (h * Complex64::new(0.0, -0.7)).exp();
    let psi = StateVector::from_vec(vec![real(0.6), Complex64::new(0.0, 0.8)]);
    assert!((p.apply(0.7, &psi) - &u * &psi).norm() < 1e-13);
}

#[test]
fn partial_trace_of_product() {
    let a = projector(&normalized(&[1.0, 2.0]));
    let b = projector(&normalized(&[0.0, 1.0, 1.0]));
    let ab = tensor_product(&a, &b);
    assert!(max_abs(&(partial_trace(&ab, (2, 3), Factor::Env).unwrap() - &a)) < 1e-14);
    assert!(max_abs(&(partial_trace(&ab, (2, 3), Factor::Sys).unwrap() - &b)) < 1e-14);
}

#[test]
fn trace_distance_of_orthogonal_states_is_one() {
    let a = projector(&basis_vector(3, 0));
    let b = projector(&basis_vector(3, 2));
    assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn zero_rate_has_no_flashes() {
    let tr = simulate(&model(0.0), &basis_vector(4, 1), (0.0, 3.0), 1, 0).unwrap();
    assert!(tr.history.is_empty());
    assert_eq!(tr.checkpoints.len(), 2);
}

#[test]
fn unordered_history_rejected() {
    let f = FlashHistory {
        events: vec![FlashEvent { site: 0, time: 0.5, label: 0 }, FlashEvent { site: 0, time: 0.2, label: 0 }],
        start: 0.0,
        end: 1.0,
    };
    assert!(matches!(l_operator(&model(1.0), &f, (0.0, 1.0)), Err(GrwError::UnorderedHistory)));
}

#[test]
fn no_flash_density_is_the_poisson_factor() {
    let m = model(0.7);
    let d = history_density(&m, &basis_vector(4, 2), &FlashHistory::empty(0.0, 1.5), (0.0, 1.5)).unwrap();
    assert!((d - (-0.7f64 * 1.5).exp()).abs() < 1e-13);
}

#[test]
fn one_flash_densities_integrate_to_the_poisson_weight() {
    // ∫_0^t Σ_x ‖L(x, s)ψ‖² ds = λt e^{-λt} with H = 0.
    let m = GrwModel::from_spec(params(1, 4, 0.8), &HamiltonianSpec::Zero).unwrap();
    let psi = normalized(&[1.0, 0.5, 0.0, 1.0]);
    let total: f64 = (0..4)
        .map(|x| {
            let f = FlashHistory { events: vec![FlashEvent { site: x, time: 0.3, label: 0 }], start: 0.0, end: 1.0 };
            history_density(&m, &psi, &f, (0.0, 1.0)).unwrap()
        })
        .sum();
    assert!((total - 0.8 * (-0.8f64).exp()).abs() < 1e-12);
}

#[test]
fn flash_counts_have_poisson_mean() {
    let m = GrwModel::from_spec(params(2, 4, 0.5), &hopping()).unwrap();
    let sim = Simulator::new(&m).unwrap();
    let psi = tensor_vec(&basis_vector(4, 0), &basis_vector(4, 3));
    let n = 4000;
    let counts = sim.ensemble(&psi, (0.0, 2.0), 9, n, grw_lab::jump::CheckpointMode::Endpoints, |t| t.history.len()).unwrap();
    let mean = counts.iter().sum::<usize>() as f64 / n as f64;
    assert!((mean - 2.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "{mean}");
}

#[test]
fn lindblad_superoperator_matches_rhs() {
    let m = model(0.9);
    let lb = Lindblad::new(&m);
    let rho = projector(&normalized(&[1.0, 0.2, -0.4, 0.7]));
    let v = lb.superoperator() * vec_op(&rho);
    assert!(max_abs(&(unvec_op(&v, 4) - lb.rhs(&rho))) < 1e-13);
}

#[test]
fn channel_agrees_with_density_evolution() {
    let m = model(0.6);
    let psi = normalized(&[0.3, 1.0, 0.0, 0.5]);
    let ch = build_channel(&m, (0.0, 0.8), None);
    let a = ch.apply(&projector(&psi));
    let b = evolve_density(&m, &DensityOperator::pure(&psi), (0.0, 0.8), None).unwrap();
    assert!(trace_distance(&a, b.matrix()).unwrap() < 1e-8);
    assert!(ch.trace_preservation_error() < 1e-8);
}

#[test]
fn pure_collapse_keeps_diagonal() {
    let m = GrwModel::from_spec(params(1, 4, 2.0), &HamiltonianSpec::Zero).unwrap();
    let rho0 = projector(&normalized(&[1.0, 1.0, 0.0, 1.0]));
    let rho = evolve_density(&m, &DensityOperator::new(rho0.clone()).unwrap(), (0.0, 1.0), None).unwrap();
    let k = m.dissipation_kernel();
    for r in 0..4 {
        for c in 0..4 {
            let want = rho0[(r, c)] * (2.0 * (k[(r, c)] - 1.0)).exp();
            assert!((rho.matrix()[(r, c)] - want).norm() < 1e-9);
        }
    }
}

#[test]
fn matter_density_and_readouts() {
    let m = GrwModel::from_spec(params(1, 4, 0.0), &HamiltonianSpec::Zero).unwrap();
    let f = matter_density(&m, &normalized(&[1.0, 0.0, 0.0, 0.1]), None);
    assert!((f.total_mass() - 1.0).abs() < 1e-14);
    let p = pointer_partition(4);
    assert_eq!(macro_state_m(&f, &p), Readout::Region(p.regions[0].0.clone()));
    let even = matter_density(&m, &normalized(&[1.0, 0.0, 0.0, 1.0]), None);
    assert_eq!(macro_state_m(&even, &p), Readout::Ambiguous);
    let h = FlashHistory {
        events: vec![FlashEvent { site: 3, time: 0.1, label: 0 }, FlashEvent { site: 2, time: 0.6, label: 0 }],
        start: 0.0,
        end: 1.0,
    };
    assert_eq!(macro_state_f(&h, &p, (0.0, 1.0)), Readout::Region(p.regions[1].0.clone()));
    assert_eq!(macro_state_f(&h, &p, (0.7, 1.0)), Readout::Ambiguous);
}

use grw_lab::experiments::{pointer_partition, site_projector, standard_experiment, StandardSetup};
use grw_lab::formalism::compose::Gap;
use grw_lab::formalism::conditional::{conditional_density_matrix, ConditionalMethod, HistoryEvent};
use grw_lab::formalism::runtime::time_marginal;
use grw_lab::formalism::*;
use grw_lab::linalg::{self, real};
use grw_lab::master::{evolve_density, DensityOperator};

fn setup(lambda: f64) -> StandardSetup {
    StandardSetup { lambda, ..StandardSetup::default() }
}

#[test]
fn ideal_measurement_at_zero_rate() {
    let exp = standard_experiment(&setup(0.0)).unwrap();
    let qu = quantum_povm(&exp).unwrap();
    let (grw, rem) = grw_povm_exact(&exp, &ExactSettings::new(2)).unwrap();
    assert_eq!(rem, 0.0);
    let p_left = site_projector(4, &[0, 1]);
    let p_right = site_projector(4, &[2, 3]);
    assert!(linalg::max_abs(&(&qu.effects[0] - &p_left)) < 1e-10);
    assert!(linalg::max_abs(&(&qu.effects[1] - &p_right)) < 1e-10);
    for (a, b) in grw.effects.iter().zip(&qu.effects) {
        assert!(linalg::max_abs(&(a - b)) < 1e-10);
    }
}

#[test]
fn exact_povm_is_complete_within_remainder() {
    let exp = standard_experiment(&setup(0.5)).unwrap();
    let (povm, rem) = grw_povm_exact(&exp, &ExactSettings::new(3)).unwrap();
    assert!(povm.completeness_error() <= 1e-3 + rem, "{} vs {}", povm.completeness_error(), rem);
    assert!(povm.min_eigenvalue().unwrap() > -1e-10);
    let outcomes = povm.outcomes.clone();
    assert_eq!(outcomes, vec!["left".to_string(), "right".to_string()]);
}

#[test]
fn exact_superops_match_effects() {
    let exp = standard_experiment(&setup(0.3)).unwrap();
    let settings = ExactSettings::new(3);
    let (povm, _) = grw_povm_exact(&exp, &settings).unwrap();
    let c = grw_superops_exact(&exp, &settings).unwrap();
    assert!(consistency_error(&povm, &c.kraus) <= 1e-8);
    let q = quantum_superops(&exp).unwrap();
    let qp = quantum_povm(&exp).unwrap();
    assert!(consistency_error(&qp, &q.kraus) <= 1e-8);
}

#[test]
fn rate_increases_deviation() {
    let base = standard_experiment(&setup(0.0)).unwrap();
    let qu = quantum_povm(&base).unwrap();
    let d = |l: f64| {
        let exp = standard_experiment(&setup(l)).unwrap();
        let (p, _) = grw_povm_exact(&exp, &ExactSettings::new(3)).unwrap();
        grw_lab::experiments::deviation(&p, &qu)
    };
    let (a, b) = (d(0.01), d(0.1));
    assert!(a > 0.0 && b > 5.0 * a, "{a} {b}");
}

#[test]
fn random_runtime_povm_with_first_flash() {
    let mut exp = standard_experiment(&setup(0.3)).unwrap();
    exp.stopping = Some(StoppingRule::FirstFlashInRegion {
        labels: vec![1],
        partition: pointer_partition(4),
        grid: vec![0.25, 0.5, 0.75, 1.0],
        binning: Binning::Ceil,
    });
    let settings = ExactSettings::new(4);
    let povm = random_runtime_povm(&exp, RuntimeMethod::Exact(settings)).unwrap();
    assert_eq!(povm.outcomes.len(), 9);
    assert!(povm.completeness_error() <= 1e-6 + povm.meta.remainder_bound);
    let marg = time_marginal(&povm);
    assert_eq!(marg.outcomes, vec!["left", "right", "none"]);
    let sup = random_runtime_superops(&exp, None).unwrap();
    assert!(consistency_error(&povm, &sup.kraus) <= povm.meta.remainder_bound + 1e-6);
}

#[test]
fn conditional_methods_agree() {
    let exp = standard_experiment(&setup(0.4)).unwrap();
    let psi = linalg::tensor_vec(
        &grw_lab::experiments::normalized(&[0.0, 1.0, 1.0, 0.0]),
        &linalg::basis_vector(4, 0),
    );
    let rho = DensityOperator::pure(&psi);
    let w = exp.window;
    let any = conditional_density_matrix(&exp.model, &rho, &HistoryEvent::Any, w, ConditionalMethod::Flow { steps: None }).unwrap();
    let me = evolve_density(&exp.model, &rho, w, None).unwrap();
    assert!(linalg::trace_distance(any.rho.matrix(), me.matrix()).unwrap() < 1e-8);
    let ev = HistoryEvent::AtLeast { n: 1 };
    let a = conditional_density_matrix(&exp.model, &rho, &ev, w, ConditionalMethod::Flow { steps: None }).unwrap();
    let b = conditional_density_matrix(&exp.model, &rho, &ev, w, ConditionalMethod::Quadrature(ExactSettings::new(4))).unwrap();
    assert!((a.probability - (1.0 - (-0.8f64).exp())).abs() < 1e-8);
    assert!(linalg::trace_distance(a.rho.matrix(), b.rho.matrix()).unwrap() < 1e-3);
}

#[test]
fn ideal_commuting_composition_is_idempotent() {
    let exp = standard_experiment(&setup(0.0)).unwrap();
    let p = quantum_povm(&exp).unwrap();
    let c = quantum_superops(&exp).unwrap();
    let comp = compose_experiments((&p, &c.kraus), (&p, &c.kraus), &Gap::None).unwrap();
    for z in &p.outcomes {
        let e = comp.povm.effect(&format!("{z},{z}")).unwrap();
        assert!(linalg::op_norm(&(e * e - e)) <= 1e-9);
    }
    let off = comp.povm.effect("left,right").unwrap();
    assert!(linalg::op_norm(off) < 1e-9);
    let _ = real(0.0);
}

#[test]
fn mc_tomography_roughly_matches_exact() {
    let exp = standard_experiment(&setup(0.3)).unwrap();
    let mc = grw_povm_mc(&exp, 4000, 11).unwrap();
    let (ex, _) = grw_povm_exact(&exp, &ExactSettings::new(4)).unwrap();
    let se = mc.meta.std_errors.as_ref().unwrap();
    for (k, (a, b)) in mc.effects.iter().zip(&ex.effects).enumerate() {
        for r in 0..4 {
            for c in 0..4 {
                let (sr, si) = se[k][r][c];
                let d = a[(r, c)] - b[(r, c)];
                assert!(d.re.abs() <= 6.0 * sr + 1e-9 && d.im.abs() <= 6.0 * si + 1e-9, "{k} {r} {c} {d}");
            }
        }
    }
}

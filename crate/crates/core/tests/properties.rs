use grw_lab::experiments::{pointer_partition, pointer_projectors};
use grw_lab::formalism::experiment::{Binning, Calibration, StoppingRule, Terminal};
use grw_lab::formalism::Povm;
use grw_lab::io::{povm_from_json, povm_to_json, TrajectoryRecord};
use grw_lab::jump::{CheckpointMode, FlashEvent, FlashHistory, Simulator};
use grw_lab::linalg::{self, ComplexMatrix, StateVector};
use grw_lab::master::{evolve_density, DensityOperator};
use grw_lab::model::{GrwModel, HamiltonianSpec, LatticeParams};
use grw_lab::ontology::MacroPartition;
use grw_lab::rng::StreamRng;
use grw_lab::stats::{bonferroni, chi_square_gof, poisson_pmf};
use grw_lab::verify::CoarseStatistic;
use num_complex::Complex64;
use proptest::prelude::*;

const L: usize = 6;

fn history() -> impl Strategy<Value = FlashHistory> {
    prop::collection::vec((0.0f64..1.0, 0..L, 0usize..2), 0..8).prop_map(|mut ev| {
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        ev.dedup_by(|a, b| a.0 == b.0);
        FlashHistory { events: ev.into_iter().map(|(time, site, label)| FlashEvent { site, time, label }).collect(), start: 0.0, end: 1.0 }
    })
}

fn partition() -> MacroPartition {
    MacroPartition::new(vec![("left".into(), vec![0, 1]), ("right".into(), vec![4, 5])], 0.75)
}

fn state(dim: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let s = StateVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| Complex64::new(a, b)));
            s.normalize()
        })
}

fn automaton_outcome(cal: &Calibration, h: &FlashHistory) -> Option<usize> {
    let a = cal.automaton(&[], 8).unwrap();
    match a.terminal[a.run(h)] {
        Terminal::Outcome(z) | Terminal::Absorbed(z) => Some(z),
        Terminal::Pointer => None,
    }
}

proptest! {
    #[test]
    fn calibration_automata_match_direct_evaluation(h in history(), th in 1usize..4) {
        let cals = [
            Calibration::LastFlashRegion { labels: vec![0], partition: partition() },
            Calibration::MajorityInWindow { labels: vec![0, 1], partition: partition(), window: (0.3, 1.0) },
            Calibration::FlashCountThreshold { labels: vec![1], threshold: th, window: Some((0.2, 0.9)), below: "lo".into(), above: "hi".into() },
        ];
        for c in &cals {
            prop_assert_eq!(automaton_outcome(c, &h), c.evaluate(&h));
        }
    }

    #[test]
    fn stopping_automata_match_direct_evaluation(h in history(), n in 1usize..4) {
        let grid = vec![0.25, 0.5, 0.75, 1.0];
        let rules = [
            StoppingRule::FirstFlashInRegion { labels: vec![0], partition: partition(), grid: grid.clone(), binning: Binning::Ceil },
            StoppingRule::NthFlash { n, labels: vec![0, 1], partition: partition(), grid, binning: Binning::Ceil },
        ];
        for r in &rules {
            let a = r.automaton().unwrap();
            let z = match a.terminal[a.run(&h)] {
                Terminal::Outcome(z) | Terminal::Absorbed(z) => z,
                Terminal::Pointer => unreachable!(),
            };
            let (direct, count) = r.evaluate(&h).unwrap();
            prop_assert_eq!(z, direct);
            prop_assert!(count <= h.len());
        }
    }

    #[test]
    fn coarse_class_is_in_range(h in history()) {
        let s = CoarseStatistic::halves(L);
        let c = s.class(&h.events, (0.0, 1.0));
        prop_assert!(c < s.n_classes());
        prop_assert_eq!(c == 0, h.is_empty());
    }

    #[test]
    fn collapse_family_resolves_identity(sites in 2usize..9, sigma in 0.2f64..3.0, a in 0.3f64..2.0) {
        let p = LatticeParams { n_particles: 1, sites, spacing: a, lambda: 1.0, sigma, masses: vec![1.0] };
        let m = GrwModel::from_spec(p, &HamiltonianSpec::Zero).unwrap();
        for y in 0..sites {
            let s: f64 = (0..sites).map(|x| a * m.collapse.weight(y, x)).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let k = m.collapse.kernel_1p[y * sites + y];
            prop_assert!((k - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn master_equation_keeps_a_density_matrix(psi in state(4), lambda in 0.0f64..3.0, t in 0.05f64..1.5) {
        let p = LatticeParams { n_particles: 1, sites: 4, spacing: 1.0, lambda, sigma: 1.0, masses: vec![1.0] };
        let m = GrwModel::from_spec(p, &HamiltonianSpec::Hopping { onsite: None, contact: 0.0, mobile: None }).unwrap();
        let rho = evolve_density(&m, &DensityOperator::pure(&psi), (0.0, t), None).unwrap();
        let r = rho.matrix();
        prop_assert!((linalg::trace(r).re - 1.0).abs() < 1e-9);
        prop_assert!(linalg::hermitian_residual(r) < 1e-10);
        prop_assert!(linalg::min_eigenvalue(r).unwrap() > -1e-9);
        let purity = linalg::trace(&(r * r)).re;
        prop_assert!(purity <= 1.0 + 1e-9);
    }

    #[test]
    fn trajectories_stay_normalized_and_ordered(psi in state(4), seed in any::<u64>(), stream in 0u64..1000) {
        let p = LatticeParams { n_particles: 1, sites: 4, spacing: 1.0, lambda: 3.0, sigma: 1.0, masses: vec![1.0] };
        let m = GrwModel::from_spec(p, &HamiltonianSpec::Hopping { onsite: None, contact: 0.0, mobile: None }).unwrap();
        let sim = Simulator::new(&m).unwrap();
        let tr = sim.trajectory(&psi, (0.0, 1.0), seed, stream, CheckpointMode::Flashes).unwrap();
        prop_assert!(tr.history.is_ordered());
        prop_assert!(tr.history.events.iter().all(|e| e.time >= 0.0 && e.time < 1.0 && e.site < 4));
        for (_, s) in &tr.checkpoints {
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
        let again = sim.trajectory(&psi, (0.0, 1.0), seed, stream, CheckpointMode::Flashes).unwrap();
        let (a, b) = (TrajectoryRecord::from_trajectory(&tr), TrajectoryRecord::from_trajectory(&again));
        prop_assert_eq!(a.to_line().unwrap(), b.to_line().unwrap());
        prop_assert_eq!(TrajectoryRecord::from_line(&a.to_line().unwrap()).unwrap(), a);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), stream in any::<u64>(), w in prop::collection::vec(0.0f64..1.0, 1..6)) {
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let mut a = StreamRng::new(seed, stream);
        let mut b = StreamRng::new(seed, stream);
        for _ in 0..20 {
            let u = a.uniform();
            prop_assert_eq!(u, b.uniform());
            prop_assert!((0.0..1.0).contains(&u));
            let k = a.categorical(&w);
            prop_assert_eq!(k, b.categorical(&w));
            prop_assert!(w[k] > 0.0);
        }
    }

    #[test]
    fn chi_square_p_values_are_probabilities(obs in prop::collection::vec(0usize..200, 2..8)) {
        prop_assume!(obs.iter().sum::<usize>() > 0);
        let probs = vec![1.0 / obs.len() as f64; obs.len()];
        let c = chi_square_gof(&obs, &probs);
        prop_assert!((0.0..=1.0).contains(&c.p_value));
        prop_assert!(c.statistic >= 0.0);
    }

    #[test]
    fn bonferroni_bounds(ps in prop::collection::vec(0.0f64..=1.0, 1..10)) {
        let b = bonferroni(&ps);
        let min = ps.iter().cloned().fold(1.0, f64::min);
        prop_assert!(b >= min && b <= 1.0);
    }

    #[test]
    fn poisson_pmf_is_a_subdistribution(mean in 0.0f64..6.0, len in 1usize..30) {
        let p = poisson_pmf(mean, len);
        prop_assert_eq!(p.len(), len);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn povm_from_unitary_frame_is_valid_and_round_trips(psi in state(4), phi in state(4)) {
        // Effects |ψ⟩⟨ψ|, the remainder of the projector on span{ψ, φ'},
        // and the complement: a valid rank-split POVM.
        let a = linalg::projector(&psi);
        let perp = &phi - &psi * psi.dotc(&phi);
        prop_assume!(perp.norm() > 1e-3);
        let b = linalg::projector(&perp.normalize());
        let c = linalg::identity(4) - &a - &b;
        let p = Povm::new(vec!["a".into(), "b".into(), "c".into()], vec![a, b, c]);
        prop_assert!(p.completeness_error() < 1e-12);
        prop_assert!(p.min_eigenvalue().unwrap() > -1e-10);
        let probs = p.expectation(&phi);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let q = povm_from_json(&povm_to_json(&p).unwrap()).unwrap();
        for (x, y) in p.effects.iter().zip(&q.effects) {
            prop_assert_eq!(x, y);
        }
    }
}

#[test]
fn pointer_projectors_partition_unity() {
    let ps = pointer_projectors(4);
    let sum = ps.iter().fold(ComplexMatrix::zeros(4, 4), |a, (_, p)| a + p);
    assert!(linalg::max_abs(&(sum - linalg::identity(4))) < 1e-15);
    assert!(pointer_partition(4).is_disjoint());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_povms_satisfy_the_axioms(lambda in 0.0f64..0.6, n_max in 1usize..4) {
        use grw_lab::experiments::{standard_experiment, StandardSetup};
        use grw_lab::formalism::{grw_povm_exact, ExactSettings};
        let exp = standard_experiment(&StandardSetup { lambda, ..StandardSetup::default() }).unwrap();
        let (p, rem) = grw_povm_exact(&exp, &ExactSettings::new(n_max)).unwrap();
        prop_assert!(p.completeness_error() <= rem + 1e-9);
        prop_assert!(p.min_eigenvalue().unwrap() >= -1e-8);
        prop_assert!(p.hermitian_residual() < 1e-10);
    }
}

// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiments with a random run-time given by a stopping rule.

use super::exact::{channels_from_outputs, contract_app, grw_povm_exact, ExactSettings, Superops, TreeEngine};
use super::experiment::{joint_id, Experiment, StoppingRule};
use super::flow::automaton_flow;
use super::povm::{choi_kraus, Povm, PovmMeta};
use super::quadrature::poisson_tail;
use super::tomography::grw_povm_mc;
use crate::error::{GrwError, Result};
use crate::linalg::{self, Factor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuntimeMethod {
    /// History summation truncated at `n_max` flashes before the decision.
    Exact(ExactSettings),
    /// Tomography with `m` trajectories per probe state.
    MonteCarlo { m: usize, seed: u64 },
}

fn rule_of(exp: &Experiment) -> Option<&StoppingRule> {
    exp.stopping.as_ref().filter(|r| **r != StoppingRule::Fixed)
}

/// `E^GRW_{z,t} = tr_app([I ⊗ ρ_app] G(ζ⁻¹(z) ∩ τ⁻¹(t)))` on `𝒱 × 𝒯`.
///
/// Without a stopping rule this is the fixed-window POVM with outcomes
/// relabeled `z@t`.
pub fn random_runtime_povm(exp: &Experiment, method: RuntimeMethod) -> Result<Povm> {
    exp.validate()?;
    let Some(rule) = rule_of(exp) else {
        let mut povm = match method {
            RuntimeMethod::Exact(settings) => grw_povm_exact(exp, &settings)?.0,
            RuntimeMethod::MonteCarlo { m, seed } => grw_povm_mc(exp, m, seed)?,
        };
        povm.outcomes = povm.outcomes.iter().map(|z| joint_id(z, exp.window.1)).collect();
        return Ok(povm);
    };
    match method {
        RuntimeMethod::Exact(settings) => {
            let auto = rule.automaton()?;
            let engine = TreeEngine::new(&exp.model, &auto, &[], exp.window, &settings)?;
            let effects = engine.effects().iter().map(|g| linalg::hermitize(&contract_app(exp, g))).collect();
            let remainder = poisson_tail(exp.model.total_rate() * (exp.window.1 - exp.window.0), settings.n_max);
            let mut povm = Povm::new(auto.outcomes.clone(), effects);
            povm.meta = PovmMeta { remainder_bound: remainder, tolerance: 1e-8, method: Some("exact".into()), ..PovmMeta::default() };
            Ok(povm)
        }
        RuntimeMethod::MonteCarlo { m, seed } => grw_povm_mc(exp, m, seed),
    }
}

/// `C^GRW_{z,t}(T) = tr_app ∫ L_{[s,t)} [T ⊗ ρ_app] L*_{[s,t)}` over histories
/// stopped with `(z, t)`, from the automaton-augmented master equation. The
/// flashes between the stop and the grid time `t` are included.
pub fn random_runtime_superops(exp: &Experiment, steps: Option<usize>) -> Result<Superops> {
    exp.validate()?;
    let rule = rule_of(exp).ok_or_else(|| GrwError::InvalidExperiment("no stopping rule".into()))?;
    let auto = rule.automaton()?;
    let harvest: Vec<f64> = rule.joint_pairs().iter().map(|p| p.1).collect();
    let (ds, da) = exp.dims();
    let inputs: Vec<_> = (0..ds * ds)
        .map(|c| linalg::tensor_product(&linalg::matrix_unit(ds, c % ds, c / ds), &exp.rho_app))
        .collect();
    let out = automaton_flow(&exp.model, &auto, &[], exp.window, Some(harvest), &inputs, steps)?;
    let reduced: Vec<Vec<_>> = out
        .iter()
        .map(|row| row.iter().map(|y| linalg::partial_trace(y, (ds, da), Factor::Env).expect("dims")).collect())
        .collect();
    let channels = channels_from_outputs(ds, &reduced, auto.outcomes.len());
    let kraus = channels.iter().map(choi_kraus).collect::<Result<Vec<_>>>()?;
    Ok(Superops { outcomes: auto.outcomes.clone(), channels, kraus, remainder_bound: 0.0 })
}

/// Marginal over `𝒯`: sums `E_{z,t}` over `t` for each `z`.
pub fn time_marginal(povm: &Povm) -> Povm {
    povm.coarsen(|o| o.split('@').next().unwrap_or(o).to_string())
}

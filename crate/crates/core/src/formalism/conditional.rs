// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Conditional density matrices `ρ_{t|B} = (1/N) ∫_B L ρ₀ L*`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::{event_outputs, ExactSettings};
use super::experiment::{Automaton, Terminal};
use super::flow::automaton_flow;
use super::tomography::eigen_ensemble;
use crate::error::{GrwError, Result};
use crate::jump::{CheckpointMode, FlashHistory, Simulator};
use crate::linalg::{self, real, ComplexMatrix};
use crate::master::DensityOperator;
use crate::model::GrwModel;
use crate::rng::StreamRng;

/// Smallest conditioning probability accepted.
pub const MIN_EVENT_PROBABILITY: f64 = 1e-6;

/// Cylinder events on the flashes in the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryEvent {
    Any,
    NoFlashes,
    AtLeast { n: usize },
    Exactly { n: usize },
    /// The first flash among `labels` occurs at one of `sites`.
    FirstFlashIn { labels: Vec<usize>, sites: Vec<usize> },
}

impl HistoryEvent {
    pub fn contains(&self, h: &FlashHistory) -> bool {
        match self {
            HistoryEvent::Any => true,
            HistoryEvent::NoFlashes => h.is_empty(),
            HistoryEvent::AtLeast { n } => h.len() >= *n,
            HistoryEvent::Exactly { n } => h.len() == *n,
            HistoryEvent::FirstFlashIn { labels, sites } => {
                h.events.iter().find(|e| labels.contains(&e.label)).is_some_and(|e| sites.contains(&e.site))
            }
        }
    }

    /// Two-outcome automaton: outcome 0 is `B`, outcome 1 its complement.
    pub fn automaton(&self) -> Automaton {
        let outcomes = vec!["in".to_string(), "out".to_string()];
        let counting = |cap: usize, inside: Arc<dyn Fn(usize) -> bool + Send + Sync>| Automaton {
            n_states: cap + 1,
            initial: 0,
            step: Arc::new(move |s, _, _, _| (s + 1).min(cap)),
            terminal: (0..=cap).map(|s| Terminal::Outcome(usize::from(!inside(s)))).collect(),
            breakpoints: vec![],
            outcomes: outcomes.clone(),
        };
        match self {
            HistoryEvent::Any => counting(0, Arc::new(|_| true)),
            HistoryEvent::NoFlashes => counting(1, Arc::new(|s| s == 0)),
            HistoryEvent::AtLeast { n } => {
                let n = *n;
                counting(n, Arc::new(move |s| s >= n))
            }
            HistoryEvent::Exactly { n } => {
                let n = *n;
                counting(n + 1, Arc::new(move |s| s == n))
            }
            HistoryEvent::FirstFlashIn { labels, sites } => {
                let (labels, sites) = (labels.clone(), sites.clone());
                Automaton {
                    n_states: 3,
                    initial: 0,
                    step: Arc::new(move |s, i, x, _| {
                        if s != 0 || !labels.contains(&i) {
                            s
                        } else if sites.contains(&x) {
                            1
                        } else {
                            2
                        }
                    }),
                    terminal: vec![Terminal::Outcome(1), Terminal::Outcome(0), Terminal::Outcome(1)],
                    breakpoints: vec![],
                    outcomes,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionalMethod {
    /// Gauss–Legendre history sum truncated at `n_max` flashes.
    Quadrature(ExactSettings),
    /// Automaton-augmented master equation (no truncation).
    Flow { steps: Option<usize> },
    /// Average of `|ψ_t⟩⟨ψ_t|` over simulated trajectories in `B`.
    MonteCarlo { m: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct Conditioned {
    pub rho: DensityOperator,
    /// `P(F ∈ B)` (estimated for Monte Carlo).
    pub probability: f64,
    /// Trajectories that hit `B` (Monte Carlo only).
    pub hits: Option<usize>,
}

fn normalize(m: ComplexMatrix, p: f64, hits: Option<usize>) -> Result<Conditioned> {
    if !(p >= MIN_EVENT_PROBABILITY) {
        return Err(GrwError::RareEvent(p));
    }
    let tr = linalg::trace(&m).re;
    let rho = DensityOperator::new(linalg::hermitize(&(m * real(1.0 / tr))))?;
    Ok(Conditioned { rho, probability: p, hits })
}

/// `ρ_{t|B}` for an initial density matrix over `window`.
pub fn conditional_density_matrix(
    model: &GrwModel,
    rho0: &DensityOperator,
    event: &HistoryEvent,
    window: (f64, f64),
    method: ConditionalMethod,
) -> Result<Conditioned> {
    match method {
        ConditionalMethod::Quadrature(settings) => {
            let out = event_outputs(model, &event.automaton(), rho0.matrix(), window, &settings)?;
            let p = linalg::trace(&out[0]).re;
            normalize(out[0].clone(), p, None)
        }
        ConditionalMethod::Flow { steps } => {
            let out = automaton_flow(model, &event.automaton(), &[], window, None, std::slice::from_ref(rho0.matrix()), steps)?;
            let p = linalg::trace(&out[0][0]).re;
            normalize(out[0][0].clone(), p, None)
        }
        ConditionalMethod::MonteCarlo { m, seed } => {
            let sim = Simulator::new(model)?;
            let (weights, states) = eigen_ensemble(rho0.matrix())?;
            let d = model.dim();
            let (sum, hits) = (0..m as u64)
                .into_par_iter()
                .map(|k| -> Result<Option<ComplexMatrix>> {
                    let mut rng = StreamRng::new(seed, k);
                    let psi0 = &states[rng.categorical(&weights)];
                    let (h, cps) = sim.run(psi0, window, &mut rng, CheckpointMode::Endpoints)?;
                    Ok(event.contains(&h).then(|| linalg::projector(&cps.last().expect("final state").1)))
                })
                .try_fold(
                    || (ComplexMatrix::zeros(d, d), 0usize),
                    |(acc, n), r| r.map(|o| match o {
                        Some(p) => (acc + p, n + 1),
                        None => (acc, n),
                    }),
                )
                .try_reduce(|| (ComplexMatrix::zeros(d, d), 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
            if hits == 0 {
                return Err(GrwError::RareEvent(0.0));
            }
            normalize(sum, hits as f64 / m as f64, Some(hits))
        }
    }
}

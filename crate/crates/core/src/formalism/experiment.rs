// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Modeled experiments: object plus apparatus, ready state, calibration
//! function and optional stopping rule.
//!
//! Built-in calibrations and stopping rules are encoded as finite automata
//! driven by the flashes. The exact engines integrate over histories while
//! tracking the automaton state; Monte Carlo runs evaluate ζ directly on the
//! sampled history.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GrwError, Result};
use crate::jump::FlashHistory;
use crate::linalg::{self, ComplexMatrix, StateVector};
use crate::model::GrwModel;
use crate::ontology::MacroPartition;
use crate::rng::StreamRng;

/// Outcome label used when no flash decides the outcome.
pub const NONE_OUTCOME: &str = "none";
pub const AMBIGUOUS_OUTCOME: &str = "ambiguous";

/// Calibration function ζ mapping flash histories to outcomes.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibration {
    /// Every history gives the same outcome.
    Constant { outcome: String },
    /// Idealized macroscopic readout of the apparatus at the end of the
    /// window with the pointer projectors. This is the abundant-late-flash
    /// limit of the flash-based readouts and reduces to the quantum law at
    /// λ = 0.
    TerminalPointer,
    /// Region of the last flash among `labels`; `none` if there is none or
    /// it lies outside every region.
    LastFlashRegion { labels: Vec<usize>, partition: MacroPartition },
    /// Region holding a fraction ≥ θ of the `labels` flashes in `window`,
    /// otherwise `ambiguous`.
    MajorityInWindow { labels: Vec<usize>, partition: MacroPartition, window: (f64, f64) },
    /// `above` when at least `threshold` flashes of `labels` fall in `window`.
    FlashCountThreshold {
        labels: Vec<usize>,
        threshold: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<(f64, f64)>,
        below: String,
        above: String,
    },
    /// A user-supplied pure function of the history (Monte Carlo only).
    #[serde(skip)]
    Custom { outcomes: Vec<String>, f: Arc<dyn Fn(&FlashHistory) -> String + Send + Sync> },
}

impl std::fmt::Debug for Calibration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Calibration::Custom { outcomes, .. } => write!(f, "Custom({outcomes:?})"),
            other => write!(f, "{}", serde_json::to_string(other).unwrap_or_default()),
        }
    }
}

/// Built-in stopping rules τ, binned to the grid `𝒯` by rounding up:
/// a stop at `T ∈ [g_{j-1}, g_j)` reports `τ = g_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingRule {
    /// The window end.
    Fixed,
    /// First flash of `labels` inside any region of `partition`; the
    /// outcome is that region. Without such a flash: `none` at the last
    /// grid time.
    FirstFlashInRegion { labels: Vec<usize>, partition: MacroPartition, grid: Vec<f64>, #[serde(default)] binning: Binning },
    /// The `n`-th flash of `labels`; the outcome is its region (`none` when
    /// outside the partition or when fewer than `n` flashes occur).
    NthFlash { n: usize, labels: Vec<usize>, partition: MacroPartition, grid: Vec<f64>, #[serde(default)] binning: Binning },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Round the stopping time up to the next grid point.
    #[default]
    Ceil,
    /// Round to the nearest grid point. Not adapted: rejected.
    Nearest,
}

/// What an automaton state contributes at the end of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// Outcome fixed by the flashes.
    Outcome(usize),
    /// Outcome read off by the pointer projectors.
    Pointer,
    /// Stopped earlier with this outcome; later flashes are irrelevant.
    Absorbed(usize),
}

type StepFn = dyn Fn(usize, usize, usize, f64) -> usize + Send + Sync;

/// Finite automaton over flashes `(label, site, time)`.
#[derive(Clone)]
pub struct Automaton {
    pub n_states: usize,
    pub initial: usize,
    pub step: Arc<StepFn>,
    pub terminal: Vec<Terminal>,
    /// Times at which the transition function may change.
    pub breakpoints: Vec<f64>,
    pub outcomes: Vec<String>,
}

impl Automaton {
    pub fn run(&self, history: &FlashHistory) -> usize {
        history.events.iter().fold(self.initial, |s, e| (self.step)(s, e.label, e.site, e.time))
    }

    pub fn has_absorbing(&self) -> bool {
        self.terminal.iter().any(|t| matches!(t, Terminal::Absorbed(_)))
    }
}

fn in_window(t: f64, w: Option<(f64, f64)>) -> bool {
    w.map_or(true, |(a, b)| t >= a && t < b)
}

/// Encodes count vectors with entries in `0..=cap` as integers.
fn encode(counts: &[usize], cap: usize) -> usize {
    counts.iter().fold(0, |acc, &c| acc * (cap + 1) + c)
}

fn decode(mut s: usize, len: usize, cap: usize) -> Vec<usize> {
    let mut v = vec![0; len];
    for k in (0..len).rev() {
        v[k] = s % (cap + 1);
        s /= cap + 1;
    }
    v
}

impl Calibration {
    /// Outcome space; `pointer` names the pointer projectors.
    pub fn outcomes(&self, pointer: &[String]) -> Vec<String> {
        match self {
            Calibration::Constant { outcome } => vec![outcome.clone()],
            Calibration::TerminalPointer => pointer.to_vec(),
            Calibration::LastFlashRegion { partition, .. } => {
                let mut o = vec![NONE_OUTCOME.to_string()];
                o.extend(partition.regions.iter().map(|r| r.0.clone()));
                o
            }
            Calibration::MajorityInWindow { partition, .. } => {
                let mut o: Vec<String> = partition.regions.iter().map(|r| r.0.clone()).collect();
                o.push(AMBIGUOUS_OUTCOME.to_string());
                o
            }
            Calibration::FlashCountThreshold { below, above, .. } => vec![below.clone(), above.clone()],
            Calibration::Custom { outcomes, .. } => outcomes.clone(),
        }
    }

    /// Automaton for histories with at most `n_max` flashes.
    pub fn automaton(&self, pointer: &[String], n_max: usize) -> Result<Automaton> {
        let outcomes = self.outcomes(pointer);
        Ok(match self {
            Calibration::Constant { .. } => Automaton {
                n_states: 1,
                initial: 0,
                step: Arc::new(|s, _, _, _| s),
                terminal: vec![Terminal::Outcome(0)],
                breakpoints: vec![],
                outcomes,
            },
            Calibration::TerminalPointer => Automaton {
                n_states: 1,
                initial: 0,
                step: Arc::new(|s, _, _, _| s),
                terminal: vec![Terminal::Pointer],
                breakpoints: vec![],
                outcomes,
            },
            Calibration::LastFlashRegion { labels, partition } => {
                let labels = labels.clone();
                let p = partition.clone();
                let n = p.regions.len() + 1;
                Automaton {
                    n_states: n,
                    initial: 0,
                    step: Arc::new(move |s, i, x, _| {
                        if labels.contains(&i) {
                            p.region_of(x).map_or(0, |r| r + 1)
                        } else {
                            s
                        }
                    }),
                    terminal: (0..n).map(Terminal::Outcome).collect(),
                    breakpoints: vec![],
                    outcomes,
                }
            }
            Calibration::MajorityInWindow { labels, partition, window } => {
                // State: capped counts per region plus flashes outside all regions.
                let r = partition.regions.len();
                let len = r + 1;
                let cap = n_max;
                let n_states = (cap + 1).pow(len as u32);
                let labels = labels.clone();
                let p = partition.clone();
                let w = *window;
                let step_p = p.clone();
                let step = Arc::new(move |s: usize, i: usize, x: usize, t: f64| {
                    if !labels.contains(&i) || !in_window(t, Some(w)) {
                        return s;
                    }
                    let mut c = decode(s, len, cap);
                    let k = step_p.region_of(x).unwrap_or(r);
                    c[k] = (c[k] + 1).min(cap);
                    encode(&c, cap)
                });
                let terminal = (0..n_states)
                    .map(|s| {
                        let c = decode(s, len, cap);
                        let total: usize = c.iter().sum();
                        let win = (0..r).find(|&k| total > 0 && c[k] as f64 >= p.theta * total as f64);
                        Terminal::Outcome(win.unwrap_or(r))
                    })
                    .collect();
                Automaton { n_states, initial: 0, step, terminal, breakpoints: vec![w.0, w.1], outcomes }
            }
            Calibration::FlashCountThreshold { labels, threshold, window, .. } => {
                let labels = labels.clone();
                let th = *threshold;
                let w = *window;
                Automaton {
                    n_states: th + 1,
                    initial: 0,
                    step: Arc::new(move |s, i, _, t| if labels.contains(&i) && in_window(t, w) { (s + 1).min(th) } else { s }),
                    terminal: (0..=th).map(|s| Terminal::Outcome(usize::from(s >= th))).collect(),
                    breakpoints: w.map_or(vec![], |(a, b)| vec![a, b]),
                    outcomes,
                }
            }
            Calibration::Custom { .. } => {
                return Err(GrwError::InvalidExperiment("custom calibrations have no exact route".into()))
            }
        })
    }

    /// Direct evaluation of ζ on a history (no automaton). `None` for
    /// readouts that need the final state.
    pub fn evaluate(&self, history: &FlashHistory) -> Option<usize> {
        let outcomes = self.outcomes(&[]);
        let pos = |z: &str| outcomes.iter().position(|o| o == z);
        match self {
            Calibration::Constant { .. } => Some(0),
            Calibration::TerminalPointer => None,
            Calibration::LastFlashRegion { labels, partition } => {
                let last = history.events.iter().rev().find(|e| labels.contains(&e.label));
                Some(last.and_then(|e| partition.region_of(e.site)).map_or(0, |r| r + 1))
            }
            Calibration::MajorityInWindow { labels, partition, window } => {
                let mut h = history.clone();
                h.events.retain(|e| labels.contains(&e.label));
                match crate::ontology::macro_state_f(&h, partition, *window) {
                    crate::ontology::Readout::Region(r) => pos(&r),
                    crate::ontology::Readout::Ambiguous => pos(AMBIGUOUS_OUTCOME),
                }
            }
            Calibration::FlashCountThreshold { labels, threshold, window, .. } => {
                let c = history.events.iter().filter(|e| labels.contains(&e.label) && in_window(e.time, *window)).count();
                Some(usize::from(c >= *threshold))
            }
            Calibration::Custom { f, .. } => pos(&f(history)),
        }
    }

    pub fn validate(&self, model: &GrwModel) -> Result<()> {
        let check_labels = |l: &[usize]| {
            if l.iter().any(|&i| i >= model.n()) {
                Err(GrwError::InvalidExperiment("calibration label out of range".into()))
            } else {
                Ok(())
            }
        };
        let check_partition = |p: &MacroPartition| {
            if !p.is_disjoint() || p.regions.iter().any(|(_, r)| r.iter().any(|&x| x >= model.sites())) {
                Err(GrwError::InvalidExperiment("partition regions must be disjoint lattice sites".into()))
            } else if !(p.theta > 0.5 && p.theta <= 1.0) {
                Err(GrwError::InvalidExperiment("theta must lie in (0.5, 1]".into()))
            } else {
                Ok(())
            }
        };
        match self {
            Calibration::LastFlashRegion { labels, partition } => {
                check_labels(labels)?;
                check_partition(partition)
            }
            Calibration::MajorityInWindow { labels, partition, .. } => {
                check_labels(labels)?;
                check_partition(partition)
            }
            Calibration::FlashCountThreshold { labels, threshold, .. } => {
                check_labels(labels)?;
                if *threshold == 0 {
                    return Err(GrwError::InvalidExperiment("threshold must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl StoppingRule {
    pub fn grid(&self) -> Option<&[f64]> {
        match self {
            StoppingRule::Fixed => None,
            StoppingRule::FirstFlashInRegion { grid, .. } | StoppingRule::NthFlash { grid, .. } => Some(grid),
        }
    }

    fn parts(&self) -> Option<(&[usize], &MacroPartition, &[f64], Binning)> {
        match self {
            StoppingRule::Fixed => None,
            StoppingRule::FirstFlashInRegion { labels, partition, grid, binning }
            | StoppingRule::NthFlash { labels, partition, grid, binning, .. } => Some((labels, partition, grid, *binning)),
        }
    }

    /// Checks the grid and adaptedness for a window starting at `s`.
    pub fn validate(&self, s: f64, model: &GrwModel) -> Result<()> {
        let Some((labels, partition, grid, binning)) = self.parts() else { return Ok(()) };
        if binning == Binning::Nearest {
            return Err(GrwError::NotAdapted(
                "nearest-point binning can report a time before the deciding flash".into(),
            ));
        }
        if grid.is_empty() || grid[0] <= s || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GrwError::InvalidExperiment("time grid must be strictly increasing and after s".into()));
        }
        if labels.iter().any(|&i| i >= model.n()) {
            return Err(GrwError::InvalidExperiment("stopping label out of range".into()));
        }
        if !partition.is_disjoint() {
            return Err(GrwError::InvalidExperiment("stopping regions must be disjoint".into()));
        }
        if let StoppingRule::NthFlash { n, .. } = self {
            if *n == 0 {
                return Err(GrwError::InvalidExperiment("n must be positive".into()));
            }
        }
        Ok(())
    }

    /// Outcome names `z` (without times).
    pub fn outcome_names(&self) -> Vec<String> {
        match self.parts() {
            None => vec![],
            Some((_, p, _, _)) => {
                let mut o: Vec<String> = p.regions.iter().map(|r| r.0.clone()).collect();
                o.push(NONE_OUTCOME.to_string());
                o
            }
        }
    }

    /// Joint outcome ids `z@t` in order `(z, j)` then the timeout.
    pub fn joint_outcomes(&self) -> Vec<String> {
        self.joint_pairs().iter().map(|(z, t)| joint_id(z, *t)).collect()
    }

    /// `(z, t)` pairs in the order of [`Self::joint_outcomes`].
    pub fn joint_pairs(&self) -> Vec<(String, f64)> {
        let Some((_, p, grid, _)) = self.parts() else { return vec![] };
        let mut o = Vec::new();
        for (name, _) in &p.regions {
            for g in grid {
                o.push((name.clone(), *g));
            }
        }
        if matches!(self, StoppingRule::NthFlash { .. }) {
            for g in grid {
                o.push((NONE_OUTCOME.to_string(), *g));
            }
        }
        let tmax = *grid.last().unwrap();
        if !o.iter().any(|(z, t)| z == NONE_OUTCOME && *t == tmax) {
            o.push((NONE_OUTCOME.to_string(), tmax));
        }
        o
    }

    fn bin(grid: &[f64], t: f64) -> usize {
        grid.iter().position(|&g| t < g).unwrap_or(grid.len() - 1)
    }

    /// Evaluates the rule on a history: `(outcome index into joint_outcomes,
    /// number of flashes up to and including the decision)`.
    pub fn evaluate(&self, history: &FlashHistory) -> Option<(usize, usize)> {
        let (labels, p, grid, _) = self.parts()?;
        let outcomes = self.joint_outcomes();
        let idx = |z: &str, g: f64| outcomes.iter().position(|o| *o == joint_id(z, g)).expect("known outcome");
        let tmax = *grid.last().unwrap();
        let mut count = 0;
        for (k, e) in history.events.iter().enumerate() {
            if e.time >= tmax {
                break;
            }
            if !labels.contains(&e.label) {
                continue;
            }
            let g = grid[Self::bin(grid, e.time)];
            match self {
                StoppingRule::FirstFlashInRegion { .. } => {
                    if let Some(r) = p.region_of(e.site) {
                        return Some((idx(&p.regions[r].0, g), k + 1));
                    }
                }
                StoppingRule::NthFlash { n, .. } => {
                    count += 1;
                    if count == *n {
                        let z = p.region_of(e.site).map_or(NONE_OUTCOME.to_string(), |r| p.regions[r].0.clone());
                        return Some((idx(&z, g), k + 1));
                    }
                }
                StoppingRule::Fixed => unreachable!(),
            }
        }
        Some((idx(NONE_OUTCOME, tmax), history.count_in(history.start, tmax)))
    }

    /// Automaton whose absorbed states carry the joint outcome.
    pub fn automaton(&self) -> Result<Automaton> {
        let (labels, p, grid, _) = self
            .parts()
            .ok_or_else(|| GrwError::InvalidExperiment("fixed stopping rule has no automaton".into()))?;
        let outcomes = self.joint_outcomes();
        let n_out = outcomes.len();
        let running = match self {
            StoppingRule::NthFlash { n, .. } => *n,
            _ => 1,
        };
        let labels = labels.to_vec();
        let p = p.clone();
        let grid = grid.to_vec();
        let rule = self.clone();
        let outs = outcomes.clone();
        let tmax = *grid.last().unwrap();
        let timeout = outcomes.iter().position(|o| *o == joint_id(NONE_OUTCOME, tmax)).unwrap();
        let step = Arc::new(move |s: usize, i: usize, x: usize, t: f64| {
            if s >= running || !labels.contains(&i) {
                return s;
            }
            let g = grid[Self::bin(&grid, t)];
            let absorb = |z: &str| running + outs.iter().position(|o| *o == joint_id(z, g)).unwrap();
            match &rule {
                StoppingRule::FirstFlashInRegion { .. } => p.region_of(x).map_or(s, |r| absorb(&p.regions[r].0)),
                StoppingRule::NthFlash { n, .. } => {
                    if s + 1 == *n {
                        absorb(&p.region_of(x).map_or(NONE_OUTCOME.to_string(), |r| p.regions[r].0.clone()))
                    } else {
                        s + 1
                    }
                }
                StoppingRule::Fixed => s,
            }
        });
        let mut terminal = vec![Terminal::Outcome(timeout); running];
        terminal.extend((0..n_out).map(Terminal::Absorbed));
        Ok(Automaton {
            n_states: running + n_out,
            initial: 0,
            step,
            terminal,
            breakpoints: self.grid().unwrap().to_vec(),
            outcomes,
        })
    }
}

pub fn joint_id(z: &str, t: f64) -> String {
    format!("{z}@{t}")
}

/// Object plus apparatus, modeled jointly as one GRW model whose first
/// `n_obj` labels form the object.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: GrwModel,
    pub n_obj: usize,
    pub rho_app: ComplexMatrix,
    pub window: (f64, f64),
    pub calibration: Calibration,
    /// Pointer projectors `P_z^app` used by the quantum law and by
    /// [`Calibration::TerminalPointer`].
    pub pointer: Vec<(String, ComplexMatrix)>,
    pub stopping: Option<StoppingRule>,
}

impl Experiment {
    pub fn dims(&self) -> (usize, usize) {
        let l = self.model.sites();
        (l.pow(self.n_obj as u32), l.pow((self.model.n() - self.n_obj) as u32))
    }

    pub fn d_sys(&self) -> usize {
        self.dims().0
    }

    pub fn d_app(&self) -> usize {
        self.dims().1
    }

    pub fn pointer_names(&self) -> Vec<String> {
        self.pointer.iter().map(|p| p.0.clone()).collect()
    }

    pub fn outcomes(&self) -> Vec<String> {
        match &self.stopping {
            Some(rule) if *rule != StoppingRule::Fixed => rule.joint_outcomes(),
            _ => self.calibration.outcomes(&self.pointer_names()),
        }
    }

    /// Pointer projectors lifted to the joint space, `I ⊗ P_z`.
    pub fn joint_pointer(&self) -> Vec<ComplexMatrix> {
        let id = linalg::identity(self.d_sys());
        self.pointer.iter().map(|(_, p)| linalg::tensor_product(&id, p)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_obj == 0 || self.n_obj > self.model.n() {
            return Err(GrwError::InvalidExperiment("n_obj must be between 1 and N".into()));
        }
        let da = self.d_app();
        if self.rho_app.shape() != (da, da) {
            return Err(GrwError::Dimension(format!("ready state must be {da}x{da}")));
        }
        crate::master::DensityOperator::new(self.rho_app.clone())?;
        if self.window.1 <= self.window.0 {
            return Err(GrwError::InvalidExperiment("window must have positive length".into()));
        }
        if !self.pointer.is_empty() {
            let mut sum = ComplexMatrix::zeros(da, da);
            for (_, p) in &self.pointer {
                if p.shape() != (da, da) {
                    return Err(GrwError::Dimension("pointer projector shape".into()));
                }
                sum += p;
            }
            let r = linalg::max_abs(&(sum - linalg::identity(da)));
            if r > 1e-10 {
                return Err(GrwError::IncompleteProjectors(r));
            }
        } else if matches!(self.calibration, Calibration::TerminalPointer) {
            return Err(GrwError::InvalidExperiment("terminal pointer readout needs pointer projectors".into()));
        }
        self.calibration.validate(&self.model)?;
        if let Some(rule) = &self.stopping {
            rule.validate(self.window.0, &self.model)?;
            if let Some(g) = rule.grid() {
                if (g[g.len() - 1] - self.window.1).abs() > 1e-12 {
                    return Err(GrwError::InvalidExperiment("last grid time must equal the window end".into()));
                }
            }
        }
        Ok(())
    }

    /// Evaluates ζ for a sampled joint trajectory. `TerminalPointer` samples
    /// the pointer outcome from the final state with Born weights.
    pub fn calibrate(&self, history: &FlashHistory, final_state: &StateVector, rng: &mut StreamRng) -> usize {
        match &self.calibration {
            Calibration::TerminalPointer => {
                let w: Vec<f64> = self
                    .joint_pointer()
                    .iter()
                    .map(|q| (final_state.adjoint() * q * final_state)[(0, 0)].re.max(0.0))
                    .collect();
                rng.categorical(&w)
            }
            Calibration::Custom { outcomes, f } => {
                let z = f(history);
                outcomes.iter().position(|o| *o == z).expect("custom calibration returned an unknown outcome")
            }
            other => other.evaluate(history).expect("fixed-window calibration"),
        }
    }
}

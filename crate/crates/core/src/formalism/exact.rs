// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact GRW laws of operators by summation over flash histories.
//!
//! Histories with at most `n_max` flashes are enumerated as a tree whose
//! levels are flash times on nested Gauss–Legendre rules (`t_k ∈ [t_{k-1}, t)`,
//! split at the automaton's breakpoints). Sites and labels are not enumerated
//! one by one: since `Λ_i(x)` is diagonal, the sum over all flashes leading
//! from automaton state σ to σ' acts as an elementwise product with the
//! kernel `K_{σσ'} = Σ λ a √Λ_i(x) √Λ_i(x)ᵀ`.
//!
//! Effects come from a Heisenberg (post-order) pass and superoperators from a
//! Schrödinger (pre-order) pass over the same nodes, so the identity
//! `tr(T E_z) = tr C_z(T)` holds up to rounding.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::experiment::{Automaton, Calibration, Experiment, StoppingRule, Terminal};
use super::povm::{choi_kraus, KrausMap, Povm, PovmMeta};
use super::quadrature::{composite_nodes, gauss_legendre, poisson_tail};
use crate::error::{GrwError, Result};
use crate::linalg::{self, real, ComplexMatrix, Factor, Propagator};
use crate::master::ChannelMatrix;
use crate::model::GrwModel;

/// Truncation and quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSettings {
    pub n_max: usize,
    /// Gauss–Legendre nodes per time dimension and cell.
    pub k: usize,
    /// Refuse when `(L·N·K)^{n_max}` exceeds this.
    pub budget: f64,
}

impl Default for ExactSettings {
    fn default() -> Self {
        Self { n_max: 3, k: 8, budget: 1e10 }
    }
}

impl ExactSettings {
    pub fn new(n_max: usize) -> Self {
        Self { n_max, ..Self::default() }
    }

    pub fn check_cost(&self, model: &GrwModel) -> Result<()> {
        let cost = ((model.sites() * model.n() * self.k) as f64).powi(self.n_max as i32);
        if cost > self.budget {
            return Err(GrwError::CostGuard { cost, budget: self.budget });
        }
        Ok(())
    }
}

/// Per source state: `(target state, summed flash kernel)`.
pub(crate) type Kernels = Vec<Vec<(usize, DMatrix<f64>)>>;

/// `(label, site, λ_i a √Λ_i(x) √Λ_i(x)ᵀ)` for every active label and site.
pub(crate) fn flash_kernels(model: &GrwModel) -> Vec<(usize, usize, DMatrix<f64>)> {
    let mut flash = Vec::new();
    for i in model.active_labels() {
        let c = model.label_rate(i) * model.a();
        for x in 0..model.sites() {
            let s = model.collapse.sqrt_diag(i, x);
            flash.push((i, x, &s * s.transpose() * c));
        }
    }
    flash
}

/// Flash kernels grouped by automaton transition at time `t`.
pub(crate) fn transition_kernels(flash: &[(usize, usize, DMatrix<f64>)], auto: &Automaton, t: f64) -> Kernels {
    let mut out: Kernels = vec![vec![]; auto.n_states];
    for (s, slot) in out.iter_mut().enumerate() {
        if matches!(auto.terminal[s], Terminal::Absorbed(_)) {
            continue;
        }
        for (i, x, k) in flash {
            let n = (auto.step)(s, *i, *x, t);
            match slot.iter_mut().find(|(m, _)| *m == n) {
                Some((_, m)) => *m += k,
                None => slot.push((n, k.clone())),
            }
        }
    }
    out
}
type Slot = Option<ComplexMatrix>;

pub(crate) struct TreeEngine<'a> {
    auto: &'a Automaton,
    pointer: &'a [ComplexMatrix],
    prop: Propagator,
    window: (f64, f64),
    n_max: usize,
    rule: (Vec<f64>, Vec<f64>),
    rate: f64,
    dim: usize,
    n_out: usize,
    /// `(label, site)` flash kernels `λ_i a √Λ √Λᵀ`.
    flash: Vec<(usize, usize, DMatrix<f64>)>,
    cache: Mutex<HashMap<usize, std::sync::Arc<Kernels>>>,
    /// States reachable after exactly k flashes.
    reach: Vec<Vec<bool>>,
}

fn hadamard(k: &DMatrix<f64>, m: &ComplexMatrix, out: &mut ComplexMatrix) {
    for (o, (a, b)) in out.iter_mut().zip(k.iter().zip(m.iter())) {
        *o += b * *a;
    }
}

fn add_to(slot: &mut Slot, m: ComplexMatrix) {
    match slot {
        Some(x) => *x += m,
        None => *slot = Some(m),
    }
}

impl<'a> TreeEngine<'a> {
    pub(crate) fn new(model: &GrwModel, auto: &'a Automaton, pointer: &'a [ComplexMatrix], window: (f64, f64), settings: &ExactSettings) -> Result<Self> {
        settings.check_cost(model)?;
        let prop = Propagator::new(&model.hamiltonian)?;
        let flash = flash_kernels(model);
        let n_out = auto.outcomes.len();
        let mut e = Self {
            auto,
            pointer,
            prop,
            window,
            n_max: settings.n_max,
            rule: gauss_legendre(settings.k),
            rate: model.total_rate(),
            dim: model.dim(),
            n_out,
            flash,
            cache: Mutex::new(HashMap::new()),
            reach: vec![],
        };
        e.reach = e.reachability();
        Ok(e)
    }

    fn sample_times(&self) -> Vec<f64> {
        let (s, t) = self.window;
        let mut edges = vec![s];
        edges.extend(self.auto.breakpoints.iter().copied().filter(|&b| b > s && b < t));
        edges.push(t);
        edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn reachability(&self) -> Vec<Vec<bool>> {
        let ns = self.auto.n_states;
        let mut reach = vec![vec![false; ns]; self.n_max + 1];
        reach[0][self.auto.initial] = true;
        let times = self.sample_times();
        for k in 0..self.n_max {
            for s in 0..ns {
                if !reach[k][s] {
                    continue;
                }
                if matches!(self.auto.terminal[s], Terminal::Absorbed(_)) {
                    continue;
                }
                for &(i, x, _) in &self.flash {
                    for &t in &times {
                        let n = (self.auto.step)(s, i, x, t);
                        reach[k + 1][n] = true;
                    }
                }
            }
        }
        reach
    }

    fn kernels(&self, cell: usize, t: f64) -> std::sync::Arc<Kernels> {
        if let Some(k) = self.cache.lock().unwrap().get(&cell) {
            return k.clone();
        }
        let arc = std::sync::Arc::new(transition_kernels(&self.flash, self.auto, t));
        self.cache.lock().unwrap().insert(cell, arc.clone());
        arc
    }

    fn children(&self, tau: f64) -> Vec<(f64, f64, usize)> {
        composite_nodes(tau, self.window.1, &self.auto.breakpoints, &self.rule)
    }

    /// Heisenberg pass: `[σ][z]` operators at a node of time `tau` and depth.
    fn heis(&self, tau: f64, depth: usize) -> Vec<Vec<Slot>> {
        let ns = self.auto.n_states;
        let d = self.dim;
        let t = self.window.1;
        let decay = (-self.rate * (t - tau)).exp();
        let mut out: Vec<Vec<Slot>> = vec![vec![None; self.n_out]; ns];
        let mut pointer_terms: Option<Vec<ComplexMatrix>> = None;
        for s in 0..ns {
            if !self.reach[depth][s] {
                continue;
            }
            match self.auto.terminal[s] {
                Terminal::Outcome(z) => out[s][z] = Some(linalg::identity(d) * real(decay)),
                Terminal::Absorbed(z) => out[s][z] = Some(linalg::identity(d)),
                Terminal::Pointer => {
                    let terms = pointer_terms.get_or_insert_with(|| {
                        let u = self.prop.unitary(t - tau);
                        let ua = u.adjoint();
                        self.pointer.iter().map(|q| &ua * q * &u * real(decay)).collect()
                    });
                    for (z, b) in terms.iter().enumerate() {
                        out[s][z] = Some(b.clone());
                    }
                }
            }
        }
        if depth >= self.n_max {
            return out;
        }
        let children = self.children(tau);
        let contribution = |&(tc, wc, cell): &(f64, f64, usize)| -> Vec<Vec<Slot>> {
            let sub = self.heis(tc, depth + 1);
            let kern = self.kernels(cell, tc);
            let u = self.prop.unitary(tc - tau);
            let ua = u.adjoint();
            let f = real(wc * (-self.rate * (tc - tau)).exp());
            let mut part: Vec<Vec<Slot>> = vec![vec![None; self.n_out]; ns];
            for s in 0..ns {
                if !self.reach[depth][s] || matches!(self.auto.terminal[s], Terminal::Absorbed(_)) {
                    continue;
                }
                for z in 0..self.n_out {
                    let mut j: Slot = None;
                    for (n, k) in &kern[s] {
                        if let Some(m) = &sub[*n][z] {
                            let acc = j.get_or_insert_with(|| ComplexMatrix::zeros(d, d));
                            hadamard(k, m, acc);
                        }
                    }
                    if let Some(j) = j {
                        part[s][z] = Some(&ua * j * &u * f);
                    }
                }
            }
            part
        };
        let parts: Vec<Vec<Vec<Slot>>> = if depth == 0 {
            children.par_iter().map(contribution).collect()
        } else {
            children.iter().map(contribution).collect()
        };
        for part in parts {
            for (s, row) in part.into_iter().enumerate() {
                for (z, m) in row.into_iter().enumerate() {
                    if let Some(m) = m {
                        add_to(&mut out[s][z], m);
                    }
                }
            }
        }
        out
    }

    /// Joint effects `G_z = Σ ∫ L† Q_z L`.
    pub(crate) fn effects(&self) -> Vec<ComplexMatrix> {
        let root = self.heis(self.window.0, 0);
        root[self.auto.initial]
            .iter()
            .map(|m| m.clone().unwrap_or_else(|| ComplexMatrix::zeros(self.dim, self.dim)))
            .collect()
    }

    /// Schrödinger pass for several inputs; `r[input][σ]`.
    fn fwd(&self, tau: f64, depth: usize, r: &[Vec<Slot>], acc: &mut [Vec<ComplexMatrix>]) {
        let t = self.window.1;
        let decay = real((-self.rate * (t - tau)).exp());
        let u = self.prop.unitary(t - tau);
        let ua = u.adjoint();
        for (inp, states) in r.iter().enumerate() {
            for (s, m) in states.iter().enumerate() {
                let Some(m) = m else { continue };
                let y = &u * m * &ua * decay;
                match self.auto.terminal[s] {
                    Terminal::Outcome(z) => acc[inp][z] += y,
                    Terminal::Pointer => {
                        for (z, q) in self.pointer.iter().enumerate() {
                            acc[inp][z] += q * &y * q;
                        }
                    }
                    Terminal::Absorbed(_) => unreachable!("forward pass rejects absorbing automata"),
                }
            }
        }
        if depth >= self.n_max {
            return;
        }
        for (tc, wc, cell) in self.children(tau) {
            let kern = self.kernels(cell, tc);
            let u = self.prop.unitary(tc - tau);
            let ua = u.adjoint();
            let f = real(wc * (-self.rate * (tc - tau)).exp());
            let next: Vec<Vec<Slot>> = r
                .iter()
                .map(|states| {
                    let mut nx: Vec<Slot> = vec![None; self.auto.n_states];
                    for (s, m) in states.iter().enumerate() {
                        let Some(m) = m else { continue };
                        let moved = &u * m * &ua * f;
                        for (n, k) in &kern[s] {
                            let slot = nx[*n].get_or_insert_with(|| ComplexMatrix::zeros(self.dim, self.dim));
                            hadamard(k, &moved, slot);
                        }
                    }
                    nx
                })
                .collect();
            self.fwd(tc, depth + 1, &next, acc);
        }
    }

    /// `Y_z(X) = Σ ∫ Q_z L X L† Q_z` for each input `X`; `[input][z]`.
    pub(crate) fn outputs(&self, inputs: &[ComplexMatrix]) -> Result<Vec<Vec<ComplexMatrix>>> {
        if self.auto.has_absorbing() {
            return Err(GrwError::InvalidExperiment("forward pass needs a fixed window".into()));
        }
        let d = self.dim;
        let mut acc = vec![vec![ComplexMatrix::zeros(d, d); self.n_out]; inputs.len()];
        let r: Vec<Vec<Slot>> = inputs
            .iter()
            .map(|x| {
                let mut v: Vec<Slot> = vec![None; self.auto.n_states];
                v[self.auto.initial] = Some(x.clone());
                v
            })
            .collect();
        self.fwd(self.window.0, 0, &r, &mut acc);
        Ok(acc)
    }
}

fn fixed_window_automaton(exp: &Experiment, settings: &ExactSettings) -> Result<Automaton> {
    if let Some(rule) = &exp.stopping {
        if *rule != StoppingRule::Fixed {
            return Err(GrwError::InvalidExperiment("use random_runtime_povm for stopping rules".into()));
        }
    }
    if matches!(exp.calibration, Calibration::Custom { .. }) {
        return Err(GrwError::InvalidExperiment("custom calibrations have no exact route".into()));
    }
    exp.calibration.automaton(&exp.pointer_names(), settings.n_max)
}

/// `tr_app([I ⊗ ρ_app] G)`.
pub fn contract_app(exp: &Experiment, g: &ComplexMatrix) -> ComplexMatrix {
    let (ds, da) = exp.dims();
    let lift = linalg::tensor_product(&linalg::identity(ds), &exp.rho_app);
    linalg::partial_trace(&(lift * g), (ds, da), Factor::Env).expect("joint dimensions")
}

/// Joint-space effects `G_z` before contraction with the ready state.
pub fn joint_effects(exp: &Experiment, settings: &ExactSettings) -> Result<(Vec<String>, Vec<ComplexMatrix>)> {
    exp.validate()?;
    let auto = fixed_window_automaton(exp, settings)?;
    let pointer = exp.joint_pointer();
    let engine = TreeEngine::new(&exp.model, &auto, &pointer, exp.window, settings)?;
    Ok((auto.outcomes.clone(), engine.effects()))
}

/// `E^GRW_z = tr_app ∫_{ζ⁻¹(z)} [I ⊗ ρ_app] L* L`, truncated at `n_max`
/// flashes. Returns the POVM and the Poisson-tail remainder bound.
pub fn grw_povm_exact(exp: &Experiment, settings: &ExactSettings) -> Result<(Povm, f64)> {
    let (outcomes, g) = joint_effects(exp, settings)?;
    let effects = g.iter().map(|g| linalg::hermitize(&contract_app(exp, g))).collect();
    let remainder = poisson_tail(exp.model.total_rate() * (exp.window.1 - exp.window.0), settings.n_max);
    let mut povm = Povm::new(outcomes, effects);
    povm.meta = PovmMeta { remainder_bound: remainder, tolerance: 1e-8, method: Some("exact".into()), ..PovmMeta::default() };
    Ok((povm, remainder))
}

/// Superoperators `C_z` of a fixed-window experiment.
#[derive(Debug, Clone)]
pub struct Superops {
    pub outcomes: Vec<String>,
    pub channels: Vec<ChannelMatrix>,
    pub kraus: Vec<KrausMap>,
    pub remainder_bound: f64,
}

impl Superops {
    pub fn total_channel(&self) -> ChannelMatrix {
        let d = self.channels[0].dim;
        let m = self.channels.iter().fold(ComplexMatrix::zeros(d * d, d * d), |a, c| a + &c.matrix);
        ChannelMatrix { dim: d, matrix: m }
    }
}

/// Channel matrices from per-basis outputs `C(E_jk)`.
pub fn channels_from_outputs(ds: usize, outputs: &[Vec<ComplexMatrix>], n_out: usize) -> Vec<ChannelMatrix> {
    (0..n_out)
        .map(|z| {
            let mut m = ComplexMatrix::zeros(ds * ds, ds * ds);
            for j in 0..ds {
                for k in 0..ds {
                    let v = linalg::vec_op(&outputs[k * ds + j][z]);
                    m.set_column(k * ds + j, &v);
                }
            }
            ChannelMatrix { dim: ds, matrix: m }
        })
        .collect()
}

/// `C^GRW_z(T) = tr_app ∫_{ζ⁻¹(z)} L [T ⊗ ρ_app] L*`, truncated at `n_max`.
pub fn grw_superops_exact(exp: &Experiment, settings: &ExactSettings) -> Result<Superops> {
    exp.validate()?;
    let auto = fixed_window_automaton(exp, settings)?;
    let pointer = exp.joint_pointer();
    let engine = TreeEngine::new(&exp.model, &auto, &pointer, exp.window, settings)?;
    let (ds, da) = exp.dims();
    let inputs: Vec<ComplexMatrix> = (0..ds * ds)
        .map(|c| linalg::tensor_product(&linalg::matrix_unit(ds, c % ds, c / ds), &exp.rho_app))
        .collect();
    let out = engine.outputs(&inputs)?;
    let reduced: Vec<Vec<ComplexMatrix>> = out
        .iter()
        .map(|row| row.iter().map(|y| linalg::partial_trace(y, (ds, da), Factor::Env).expect("dims")).collect())
        .collect();
    let channels = channels_from_outputs(ds, &reduced, auto.outcomes.len());
    let kraus = channels.iter().map(choi_kraus).collect::<Result<Vec<_>>>()?;
    let remainder = poisson_tail(exp.model.total_rate() * (exp.window.1 - exp.window.0), settings.n_max);
    Ok(Superops { outcomes: auto.outcomes.clone(), channels, kraus, remainder_bound: remainder })
}

/// Unnormalized `∫_B L ρ L*` on the full space for an automaton whose
/// outcome 0 marks the event `B`. Returns one operator per outcome.
pub fn event_outputs(model: &GrwModel, auto: &Automaton, rho0: &ComplexMatrix, window: (f64, f64), settings: &ExactSettings) -> Result<Vec<ComplexMatrix>> {
    let engine = TreeEngine::new(model, auto, &[], window, settings)?;
    Ok(engine.outputs(std::slice::from_ref(rho0))?.remove(0))
}


// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Master equation augmented with an automaton state.
//!
//! `ρ_σ(t)` is the unnormalized state summed over histories that lead the
//! automaton to σ. Between flashes every branch evolves with
//! `−i[H,·] − R·`; flashes move weight along transitions through the
//! elementwise kernels. Absorbed branches keep evolving with the full
//! master equation until their harvest time. No truncation in the number of
//! flashes is involved, only the RK4 step error.

use nalgebra::DMatrix;

use super::exact::{flash_kernels, transition_kernels, Kernels};
use super::experiment::{Automaton, Terminal};
use crate::error::{GrwError, Result};
use crate::linalg::{real, ComplexMatrix, CI};
use crate::master::Lindblad;
use crate::model::GrwModel;

pub(crate) struct Flow<'a> {
    auto: &'a Automaton,
    pointer: &'a [ComplexMatrix],
    lb: Lindblad,
    flash: Vec<(usize, usize, DMatrix<f64>)>,
    window: (f64, f64),
    /// Harvest time per outcome for absorbed branches.
    harvest: Vec<f64>,
    steps: usize,
}

fn hadamard_add(k: &DMatrix<f64>, m: &ComplexMatrix, out: &mut ComplexMatrix) {
    for (o, (a, b)) in out.iter_mut().zip(k.iter().zip(m.iter())) {
        *o += b * *a;
    }
}

impl<'a> Flow<'a> {
    pub(crate) fn new(
        model: &GrwModel,
        auto: &'a Automaton,
        pointer: &'a [ComplexMatrix],
        window: (f64, f64),
        harvest: Option<Vec<f64>>,
        steps: Option<usize>,
    ) -> Result<Self> {
        let lb = Lindblad::new(model);
        let harvest = harvest.unwrap_or_else(|| vec![window.1; auto.outcomes.len()]);
        if harvest.len() != auto.outcomes.len() || harvest.iter().any(|&h| h <= window.0 || h > window.1) {
            return Err(GrwError::InvalidExperiment("harvest times must lie in the window".into()));
        }
        let steps = steps.unwrap_or_else(|| lb.default_steps(window.1 - window.0));
        Ok(Self { auto, pointer, lb, flash: flash_kernels(model), window, harvest, steps })
    }

    /// Derivative of `(branches, accumulators)`.
    fn rhs(&self, kern: &Kernels, run: &[ComplexMatrix], acc: &[ComplexMatrix], live: &[bool]) -> (Vec<ComplexMatrix>, Vec<ComplexMatrix>) {
        let d = self.lb.dim();
        let h = &self.lb.h;
        let decay = real(self.lb.rate);
        let mut drun: Vec<ComplexMatrix> = run.iter().map(|r| (h * r - r * h) * (-CI) - r * decay).collect();
        let mut dacc: Vec<ComplexMatrix> = acc
            .iter()
            .zip(live)
            .map(|(a, &l)| if l { self.lb.rhs(a) } else { ComplexMatrix::zeros(d, d) })
            .collect();
        for (s, moves) in kern.iter().enumerate() {
            if run[s].iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            for (n, k) in moves {
                match self.auto.terminal[*n] {
                    Terminal::Absorbed(o) => hadamard_add(k, &run[s], &mut dacc[o]),
                    _ => hadamard_add(k, &run[s], &mut drun[*n]),
                }
            }
        }
        (drun, dacc)
    }

    fn combine(base: &[ComplexMatrix], k: &[ComplexMatrix], f: f64) -> Vec<ComplexMatrix> {
        base.iter().zip(k).map(|(b, k)| b + k * real(f)).collect()
    }

    /// Outputs `[outcome]` for a single input.
    pub(crate) fn run(&self, input: &ComplexMatrix) -> Vec<ComplexMatrix> {
        let (s, t) = self.window;
        let d = self.lb.dim();
        let ns = self.auto.n_states;
        let n_out = self.auto.outcomes.len();
        let mut run = vec![ComplexMatrix::zeros(d, d); ns];
        run[self.auto.initial] = input.clone();
        let mut acc = vec![ComplexMatrix::zeros(d, d); n_out];
        let mut out = vec![ComplexMatrix::zeros(d, d); n_out];
        let mut live = vec![true; n_out];

        let mut edges: Vec<f64> = vec![s, t];
        edges.extend(self.auto.breakpoints.iter().copied().filter(|&b| b > s && b < t));
        edges.extend(self.harvest.iter().copied().filter(|&b| b > s && b < t));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let n = ((self.steps as f64) * (hi - lo) / (t - s)).ceil().max(1.0) as usize;
            let dt = (hi - lo) / n as f64;
            let mid = 0.5 * (lo + hi);
            let kern = transition_kernels(&self.flash, self.auto, mid);
            for _ in 0..n {
                let (k1r, k1a) = self.rhs(&kern, &run, &acc, &live);
                let (r2, a2) = (Self::combine(&run, &k1r, dt / 2.0), Self::combine(&acc, &k1a, dt / 2.0));
                let (k2r, k2a) = self.rhs(&kern, &r2, &a2, &live);
                let (r3, a3) = (Self::combine(&run, &k2r, dt / 2.0), Self::combine(&acc, &k2a, dt / 2.0));
                let (k3r, k3a) = self.rhs(&kern, &r3, &a3, &live);
                let (r4, a4) = (Self::combine(&run, &k3r, dt), Self::combine(&acc, &k3a, dt));
                let (k4r, k4a) = self.rhs(&kern, &r4, &a4, &live);
                for (i, r) in run.iter_mut().enumerate() {
                    *r += (&k1r[i] + (&k2r[i] + &k3r[i]) * real(2.0) + &k4r[i]) * real(dt / 6.0);
                }
                for (i, a) in acc.iter_mut().enumerate() {
                    *a += (&k1a[i] + (&k2a[i] + &k3a[i]) * real(2.0) + &k4a[i]) * real(dt / 6.0);
                }
            }
            for o in 0..n_out {
                if live[o] && (self.harvest[o] - hi).abs() < 1e-12 {
                    out[o] += &acc[o];
                    acc[o].fill(real(0.0));
                    live[o] = false;
                }
            }
        }
        for (sidx, r) in run.iter().enumerate() {
            match self.auto.terminal[sidx] {
                Terminal::Outcome(z) => out[z] += r,
                Terminal::Pointer => {
                    for (z, q) in self.pointer.iter().enumerate() {
                        out[z] += q * r * q;
                    }
                }
                Terminal::Absorbed(_) => {}
            }
        }
        out
    }
}

/// `∫_{σ-paths ending in z} L X L†` for each input `X`, without truncation.
/// `harvest[o]` is the time at which absorbed outcome `o` is read out
/// (default: window end). Returns `[input][outcome]`.
pub fn automaton_flow(
    model: &GrwModel,
    auto: &Automaton,
    pointer: &[ComplexMatrix],
    window: (f64, f64),
    harvest: Option<Vec<f64>>,
    inputs: &[ComplexMatrix],
    steps: Option<usize>,
) -> Result<Vec<Vec<ComplexMatrix>>> {
    let flow = Flow::new(model, auto, pointer, window, harvest, steps)?;
    use rayon::prelude::*;
    Ok(inputs.par_iter().map(|x| flow.run(x)).collect())
}

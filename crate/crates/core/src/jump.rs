// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! The GRW jump process: trajectories, flash histories and the
//! operator-valued likelihood `L(f)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GrwError, Result};
use crate::linalg::{real, ComplexMatrix, Propagator, StateVector};
use crate::model::GrwModel;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlashEvent {
    #[serde(rename = "x")]
    pub site: usize,
    #[serde(rename = "t")]
    pub time: f64,
    #[serde(rename = "i")]
    pub label: usize,
}

/// Time-ordered flashes in a window `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashHistory {
    pub events: Vec<FlashEvent>,
    pub start: f64,
    pub end: f64,
}

impl FlashHistory {
    pub fn empty(start: f64, end: f64) -> Self {
        Self { events: vec![], start, end }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_ordered(&self) -> bool {
        let mut last = self.start;
        for (k, e) in self.events.iter().enumerate() {
            if e.time < self.start || e.time >= self.end || (k > 0 && e.time <= last) {
                return false;
            }
            last = e.time;
        }
        true
    }

    /// Flashes in `[a, b)`, as a history on that window.
    pub fn restrict(&self, a: f64, b: f64) -> FlashHistory {
        FlashHistory {
            events: self.events.iter().filter(|e| e.time >= a && e.time < b).copied().collect(),
            start: a,
            end: b,
        }
    }

    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.events.iter().filter(|e| e.time >= a && e.time < b).count()
    }
}

/// How much state information a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckpointMode {
    /// Initial state, every post-collapse state, final state.
    #[default]
    Flashes,
    /// Initial and final state only.
    Endpoints,
    /// Flashes plus a uniform grid with the given number of intervals.
    Grid(usize),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub history: FlashHistory,
    pub checkpoints: Vec<(f64, StateVector)>,
    pub seed: u64,
    pub stream: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        &self.checkpoints.last().expect("trajectory has a final checkpoint").1
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.checkpoints[0].1
    }

    /// Latest checkpoint at or before `t`.
    pub fn state_at_checkpoint(&self, t: f64) -> &StateVector {
        let mut best = &self.checkpoints[0].1;
        for (ct, s) in &self.checkpoints {
            if *ct <= t {
                best = s;
            }
        }
        best
    }
}

/// A model prepared for repeated simulation.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: GrwModel,
    pub propagator: Propagator,
    labels: Vec<usize>,
    sqrt_tables: Vec<Vec<f64>>,
}

impl Simulator {
    pub fn new(model: &GrwModel) -> Result<Self> {
        let propagator = Propagator::new(&model.hamiltonian)?;
        let labels = model.active_labels();
        let l = model.sites();
        let sqrt_tables = (0..l)
            .map(|x| (0..l).map(|y| model.collapse.weight(y, x).sqrt()).collect())
            .collect();
        Ok(Self { model: model.clone(), propagator, labels, sqrt_tables })
    }

    pub fn sample_collapse_center(&self, psi: &StateVector, label: usize, rng: &mut StreamRng) -> usize {
        let p = self.model.collapse.center_distribution(psi, label);
        rng.categorical(&p)
    }

    /// `Λ_i(x)^{1/2} ψ`, unnormalized.
    pub fn apply_sqrt_collapse(&self, psi: &StateVector, label: usize, x: usize) -> StateVector {
        let (n, l) = (self.model.n(), self.model.sites());
        let tab = &self.sqrt_tables[x];
        let mut out = psi.clone();
        for (q, z) in out.iter_mut().enumerate() {
            *z *= tab[crate::model::site_of(q, label, n, l)];
        }
        out
    }

    /// Runs the jump process from `psi0` over `[t0, t1)`.
    pub fn run(&self, psi0: &StateVector, window: (f64, f64), rng: &mut StreamRng, mode: CheckpointMode) -> Result<(FlashHistory, Vec<(f64, StateVector)>)> {
        let (t0, t1) = window;
        let rate = self.model.total_rate();
        let mut t = t0;
        let mut psi = psi0.clone();
        let mut events = Vec::new();
        let mut checkpoints = vec![(t0, psi0.clone())];
        let grid: Vec<f64> = match mode {
            CheckpointMode::Grid(k) if k > 0 => (1..k).map(|j| t0 + (t1 - t0) * j as f64 / k as f64).collect(),
            _ => vec![],
        };
        let mut g = 0;
        loop {
            let next = t + rng.exponential(rate);
            while g < grid.len() && grid[g] < next.min(t1) {
                let s = self.propagator.apply(grid[g] - t, &psi);
                checkpoints.push((grid[g], s.clone()));
                psi = s;
                t = grid[g];
                g += 1;
            }
            if next >= t1 {
                break;
            }
            psi = self.propagator.apply(next - t, &psi);
            t = next;
            let label = self.labels[rng.index(self.labels.len())];
            let x = self.sample_collapse_center(&psi, label, rng);
            let collapsed = self.apply_sqrt_collapse(&psi, label, x);
            let nrm2 = collapsed.norm_squared();
            if nrm2 < 1e-300 {
                return Err(GrwError::CollapseUnderflow(nrm2));
            }
            psi = collapsed / real(nrm2.sqrt());
            events.push(FlashEvent { site: x, time: t, label });
            if mode != CheckpointMode::Endpoints {
                checkpoints.push((t, psi.clone()));
            }
        }
        psi = self.propagator.apply(t1 - t, &psi);
        checkpoints.push((t1, psi));
        Ok((FlashHistory { events, start: t0, end: t1 }, checkpoints))
    }

    pub fn trajectory(&self, psi0: &StateVector, window: (f64, f64), seed: u64, stream: u64, mode: CheckpointMode) -> Result<Trajectory> {
        let mut rng = StreamRng::new(seed, stream);
        let (history, checkpoints) = self.run(psi0, window, &mut rng, mode)?;
        Ok(Trajectory { history, checkpoints, seed, stream })
    }

    /// Simulates `m` trajectories on streams `0..m` and maps each through `f`.
    pub fn ensemble<T, F>(&self, psi0: &StateVector, window: (f64, f64), seed: u64, m: usize, mode: CheckpointMode, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Trajectory) -> T + Sync,
    {
        (0..m as u64)
            .into_par_iter()
            .map(|k| self.trajectory(psi0, window, seed, k, mode).map(&f))
            .collect()
    }
}

pub fn simulate(model: &GrwModel, psi0: &StateVector, window: (f64, f64), seed: u64, stream: u64) -> Result<Trajectory> {
    check_normalized(psi0)?;
    Simulator::new(model)?.trajectory(psi0, window, seed, stream, CheckpointMode::Flashes)
}

pub fn sample_collapse_center(model: &GrwModel, psi: &StateVector, label: usize, rng: &mut StreamRng) -> usize {
    rng.categorical(&model.collapse.center_distribution(psi, label))
}

pub fn check_normalized(psi: &StateVector) -> Result<()> {
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-10 {
        return Err(GrwError::InvalidModel(format!("state not normalized (norm {n})")));
    }
    Ok(())
}

/// `L(f) = Π_k (λ_{i_k} a)^{1/2} e^{−Nλ(t−s)/2} U_{t−t_n} Λ^{1/2} … U_{t_1−s}`.
///
/// The factor `a` per flash makes `‖L(f)ψ‖²` a density with respect to
/// site counting times Lebesgue time.
pub fn l_operator(model: &GrwModel, f: &FlashHistory, window: (f64, f64)) -> Result<ComplexMatrix> {
    let prop = Propagator::new(&model.hamiltonian)?;
    l_operator_with(model, &prop, f, window)
}

pub fn l_operator_with(model: &GrwModel, prop: &Propagator, f: &FlashHistory, window: (f64, f64)) -> Result<ComplexMatrix> {
    let (s, t) = window;
    let h = FlashHistory { events: f.events.clone(), start: s, end: t };
    if !h.is_ordered() {
        return Err(GrwError::UnorderedHistory);
    }
    let mut l = ComplexMatrix::identity(model.dim(), model.dim());
    let mut last = s;
    let mut amp = (-model.total_rate() * (t - s) / 2.0).exp();
    for e in &f.events {
        l = prop.unitary(e.time - last) * l;
        let d = model.collapse.sqrt_diag(e.label, e.site);
        for c in 0..l.ncols() {
            for (r, w) in d.iter().enumerate() {
                l[(r, c)] *= *w;
            }
        }
        amp *= (model.label_rate(e.label) * model.a()).sqrt();
        last = e.time;
    }
    l = prop.unitary(t - last) * l;
    Ok(l * real(amp))
}

/// Joint flash density `‖L(f)ψ0‖²`.
pub fn history_density(model: &GrwModel, psi0: &StateVector, f: &FlashHistory, window: (f64, f64)) -> Result<f64> {
    Ok((l_operator(model, f, window)? * psi0).norm_squared())
}

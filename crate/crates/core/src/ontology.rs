// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Matter density (GRWm) and flash (GRWf) readouts of macroscopic facts.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::jump::FlashHistory;
use crate::linalg::{ComplexMatrix, StateVector};
use crate::model::{site_of, GrwModel, SystemSplit};

/// `m(x)` per site, in mass per lattice length.
#[derive(Debug, Clone, PartialEq)]
pub struct MatterDensityField {
    pub values: Vec<f64>,
    pub spacing: f64,
}

impl MatterDensityField {
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing
    }
}

/// Named disjoint site regions with a dominance threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPartition {
    pub regions: Vec<(String, Vec<usize>)>,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    0.9
}

impl MacroPartition {
    pub fn new(regions: Vec<(String, Vec<usize>)>, theta: f64) -> Self {
        Self { regions, theta }
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.regions.iter().all(|(_, r)| r.iter().all(|x| seen.insert(*x)))
    }

    pub fn region_of(&self, site: usize) -> Option<usize> {
        self.regions.iter().position(|(_, r)| r.contains(&site))
    }

    /// Region whose weight is at least a fraction `theta` of `total`.
    fn dominant(&self, weights: &[f64], total: f64) -> Readout {
        if total <= 0.0 {
            return Readout::Ambiguous;
        }
        for (k, w) in weights.iter().enumerate() {
            if *w >= self.theta * total {
                return Readout::Region(self.regions[k].0.clone());
            }
        }
        Readout::Ambiguous
    }
}

/// A macroscopic readout: a region name or "ambiguous".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Readout {
    Region(String),
    Ambiguous,
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Readout::Region(r) => write!(f, "{r}"),
            Readout::Ambiguous => write!(f, "ambiguous"),
        }
    }
}

/// `m(x) = Σ_i m_i Σ_{q: q_i = x} |ψ(q)|² / a`, restricted to the split's
/// system labels and region when given.
pub fn matter_density(model: &GrwModel, psi: &StateVector, split: Option<&SystemSplit>) -> MatterDensityField {
    let (n, l, a) = (model.n(), model.sites(), model.a());
    let mut values = vec![0.0; l];
    for (q, z) in psi.iter().enumerate() {
        let p = z.norm_sqr();
        for i in 0..n {
            let x = site_of(q, i, n, l);
            if split.map_or(true, |s| s.is_sys_flash(i, x)) {
                values[x] += model.params.masses[i] * p / a;
            }
        }
    }
    MatterDensityField { values, spacing: a }
}

/// Matter density from a density matrix on the full space, using its diagonal.
pub fn matter_density_rho(model: &GrwModel, rho: &ComplexMatrix) -> MatterDensityField {
    let (n, l, a) = (model.n(), model.sites(), model.a());
    let mut values = vec![0.0; l];
    for q in 0..rho.nrows() {
        let p = rho[(q, q)].re;
        for i in 0..n {
            values[site_of(q, i, n, l)] += model.params.masses[i] * p / a;
        }
    }
    MatterDensityField { values, spacing: a }
}

pub fn macro_state_m(field: &MatterDensityField, partition: &MacroPartition) -> Readout {
    let w: Vec<f64> = partition
        .regions
        .iter()
        .map(|(_, r)| r.iter().map(|&x| field.values.get(x).copied().unwrap_or(0.0)).sum())
        .collect();
    let total = w.iter().sum();
    partition.dominant(&w, total)
}

/// Majority readout of the flashes in `[readout.0, readout.1)`.
pub fn macro_state_f(history: &FlashHistory, partition: &MacroPartition, readout: (f64, f64)) -> Readout {
    let mut w = vec![0.0; partition.regions.len()];
    let mut total = 0.0;
    for e in history.events.iter().filter(|e| e.time >= readout.0 && e.time < readout.1) {
        total += 1.0;
        if let Some(k) = partition.region_of(e.site) {
            w[k] += 1.0;
        }
    }
    partition.dominant(&w, total)
}

/// Trailing readout window covering the final `fraction` of `[s, t)`.
pub fn trailing_window(window: (f64, f64), fraction: f64) -> (f64, f64) {
    (window.1 - fraction * (window.1 - window.0), window.1)
}

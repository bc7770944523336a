// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Two experiments in a row.

use super::povm::{choi_kraus, KrausMap, Povm, PovmMeta};
use crate::error::{GrwError, Result};
use crate::linalg::{ComplexMatrix, Propagator};
use crate::master::ChannelMatrix;

/// Evolution of the object between the two experiments.
#[derive(Debug, Clone)]
pub enum Gap {
    None,
    /// Free Schrödinger evolution `e^{−iHt}`.
    Unitary { h: ComplexMatrix, duration: f64 },
    /// A channel such as the master-equation map `A_{[t₁,s₂)}`.
    Channel(ChannelMatrix),
}

impl Gap {
    fn kraus(&self, d: usize) -> Result<KrausMap> {
        match self {
            Gap::None => KrausMap::new(vec![crate::linalg::identity(d)], d, d),
            Gap::Unitary { h, duration } => KrausMap::new(vec![Propagator::new(h)?.unitary(*duration)], d, d),
            Gap::Channel(c) => choi_kraus(c),
        }
    }
}

/// Joint outcome id `z₁,z₂`.
pub fn pair_id(z1: &str, z2: &str) -> String {
    format!("{z1},{z2}")
}

#[derive(Debug, Clone)]
pub struct Composed {
    pub povm: Povm,
    pub maps: Vec<KrausMap>,
}

/// `E_{(z₁,z₂)} = Σ_i R*_{1,z₁,i} G*(E_{2,z₂}) R_{1,z₁,i}` and
/// `C_{(z₁,z₂)} = C_{2,z₂} ∘ G ∘ C_{1,z₁}`.
pub fn compose_experiments(first: (&Povm, &[KrausMap]), second: (&Povm, &[KrausMap]), gap: &Gap) -> Result<Composed> {
    let (p1, c1) = first;
    let (p2, c2) = second;
    let d = p1.dim();
    if p2.dim() != d || c1.iter().chain(c2).any(|k| k.d_in != d || k.d_out != d) {
        return Err(GrwError::Dimension("composed experiments act on different spaces".into()));
    }
    if c1.len() != p1.outcomes.len() || c2.len() != p2.outcomes.len() {
        return Err(GrwError::Dimension("one Kraus map per outcome required".into()));
    }
    let g = gap.kraus(d)?;
    let mut outcomes = Vec::new();
    let mut effects = Vec::new();
    let mut maps = Vec::new();
    for (z1, k1) in p1.outcomes.iter().zip(c1) {
        let first = g.after(k1);
        for (z2, (e2, k2)) in p2.outcomes.iter().zip(p2.effects.iter().zip(c2)) {
            let e = first.ops.iter().fold(ComplexMatrix::zeros(d, d), |acc, r| acc + r.adjoint() * e2 * r);
            outcomes.push(pair_id(z1, z2));
            effects.push(e);
            maps.push(k2.after(&first));
        }
    }
    let mut povm = Povm::new(outcomes, effects);
    povm.meta = PovmMeta {
        remainder_bound: p1.meta.remainder_bound + p2.meta.remainder_bound,
        tolerance: p1.meta.tolerance.max(p2.meta.tolerance),
        method: Some("composed".into()),
        ..PovmMeta::default()
    };
    Ok(Composed { povm, maps })
}

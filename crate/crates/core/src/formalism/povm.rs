// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! POVMs, Kraus maps and the Choi–Kraus decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{GrwError, Result};
use crate::linalg::{self, real, ComplexMatrix, StateVector};
use crate::master::ChannelMatrix;

/// Bookkeeping attached to a constructed POVM.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PovmMeta {
    /// Bound on the probability of histories left out by truncation.
    pub remainder_bound: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Per-outcome standard errors of `(Re, Im)` entries, for Monte Carlo POVMs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<Vec<Vec<(f64, f64)>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub outcomes: Vec<String>,
    pub effects: Vec<ComplexMatrix>,
    pub meta: PovmMeta,
}

impl Povm {
    pub fn new(outcomes: Vec<String>, effects: Vec<ComplexMatrix>) -> Self {
        Self { outcomes, effects, meta: PovmMeta::default() }
    }

    pub fn dim(&self) -> usize {
        self.effects.first().map_or(0, |e| e.nrows())
    }

    pub fn effect(&self, z: &str) -> Option<&ComplexMatrix> {
        self.outcomes.iter().position(|o| o == z).map(|k| &self.effects[k])
    }

    pub fn total(&self) -> ComplexMatrix {
        let d = self.dim();
        self.effects.iter().fold(ComplexMatrix::zeros(d, d), |a, e| a + e)
    }

    /// `‖Σ_z E_z − I‖_op`.
    pub fn completeness_error(&self) -> f64 {
        linalg::op_norm(&(self.total() - linalg::identity(self.dim())))
    }

    /// Smallest eigenvalue over all effects.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut m = f64::INFINITY;
        for e in &self.effects {
            m = m.min(linalg::min_eigenvalue(&linalg::hermitize(e))?);
        }
        Ok(m)
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.effects.iter().map(linalg::hermitian_residual).fold(0.0, f64::max)
    }

    /// Checks PSD effects and completeness within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let min = self.min_eigenvalue()?;
        if min < -tol {
            return Err(GrwError::NotPositive(min));
        }
        let c = self.completeness_error();
        if c > tol {
            return Err(GrwError::IncompleteProjectors(c));
        }
        Ok(())
    }

    /// `tr(ρ E_z)` per outcome.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| linalg::trace(&(rho * e)).re).collect()
    }

    pub fn expectation(&self, psi: &StateVector) -> Vec<f64> {
        self.effects.iter().map(|e| (psi.adjoint() * e * psi)[(0, 0)].re).collect()
    }

    /// Image POVM under an outcome map `f`: `E'(y) = Σ_{f(z)=y} E_z`.
    pub fn coarsen(&self, f: impl Fn(&str) -> String) -> Povm {
        let mut outcomes: Vec<String> = Vec::new();
        let mut effects: Vec<ComplexMatrix> = Vec::new();
        for (z, e) in self.outcomes.iter().zip(&self.effects) {
            let y = f(z);
            match outcomes.iter().position(|o| *o == y) {
                Some(k) => effects[k] += e,
                None => {
                    outcomes.push(y);
                    effects.push(e.clone());
                }
            }
        }
        Povm { outcomes, effects, meta: self.meta.clone() }
    }

    /// Contraction with a fixed normalized state of the second factor:
    /// `E'_z = (I ⊗ ⟨φ|) E_z (I ⊗ |φ⟩)`.
    pub fn reduce(&self, phi: &StateVector, dims: (usize, usize)) -> Result<Povm> {
        let (ds, de) = dims;
        if ds * de != self.dim() || phi.len() != de {
            return Err(GrwError::Dimension("reduce: incompatible dimensions".into()));
        }
        let v = linalg::tensor_product(&linalg::identity(ds), &ComplexMatrix::from_column_slice(de, 1, phi.as_slice()));
        let effects = self.effects.iter().map(|e| v.adjoint() * e * &v).collect();
        Ok(Povm { outcomes: self.outcomes.clone(), effects, meta: self.meta.clone() })
    }
}

/// A completely positive map `T ↦ Σ R T R†` with `R: d_in → d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausMap {
    pub ops: Vec<ComplexMatrix>,
    pub d_in: usize,
    pub d_out: usize,
}

impl KrausMap {
    pub fn new(ops: Vec<ComplexMatrix>, d_in: usize, d_out: usize) -> Result<Self> {
        if ops.iter().any(|r| r.shape() != (d_out, d_in)) {
            return Err(GrwError::Dimension("Kraus operator shape".into()));
        }
        Ok(Self { ops, d_in, d_out })
    }

    pub fn apply(&self, t: &ComplexMatrix) -> ComplexMatrix {
        self.ops.iter().fold(ComplexMatrix::zeros(self.d_out, self.d_out), |acc, r| acc + r * t * r.adjoint())
    }

    /// `Σ R†R`.
    pub fn effect(&self) -> ComplexMatrix {
        self.ops.iter().fold(ComplexMatrix::zeros(self.d_in, self.d_in), |acc, r| acc + r.adjoint() * r)
    }

    pub fn to_channel(&self) -> Result<ChannelMatrix> {
        if self.d_in != self.d_out {
            return Err(GrwError::Dimension("channel matrix needs a square map".into()));
        }
        let d = self.d_in;
        let mut m = ComplexMatrix::zeros(d * d, d * d);
        for r in &self.ops {
            m += linalg::tensor_product(&r.conjugate(), r);
        }
        Ok(ChannelMatrix { dim: d, matrix: m })
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &KrausMap) -> KrausMap {
        let mut ops = Vec::with_capacity(self.ops.len() * first.ops.len());
        for a in &self.ops {
            for b in &first.ops {
                ops.push(a * b);
            }
        }
        KrausMap { ops, d_in: first.d_in, d_out: self.d_out }
    }
}

/// Kraus operators from the eigendecomposition of the Choi matrix, keeping
/// eigenvalues above `1e-10`.
pub fn choi_kraus(channel: &ChannelMatrix) -> Result<KrausMap> {
    let d = channel.dim;
    let choi = channel.choi();
    let scale = linalg::max_abs(&choi).max(1.0);
    if linalg::hermitian_residual(&choi) > 1e-8 * scale {
        return Err(GrwError::ChoiNotPsd(f64::NAN));
    }
    let (vals, vecs) = linalg::herm_eig(&linalg::hermitize(&choi))?;
    if vals[0] < -1e-8 * scale {
        return Err(GrwError::ChoiNotPsd(vals[0]));
    }
    let mut ops = Vec::new();
    for (k, &mu) in vals.iter().enumerate() {
        if mu <= 1e-10 {
            continue;
        }
        let v = vecs.column(k);
        let r = ComplexMatrix::from_fn(d, d, |row, col| v[col * d + row] * real(mu.sqrt()));
        ops.push(r);
    }
    Ok(KrausMap { ops, d_in: d, d_out: d })
}

/// `E_z = Σ_i R_{zi}† R_{zi}`; checks completeness when `Σ_z C_z` is trace preserving.
pub fn povm_from_kraus(outcomes: &[String], maps: &[KrausMap], tol: Option<f64>) -> Result<Povm> {
    let povm = Povm::new(outcomes.to_vec(), maps.iter().map(KrausMap::effect).collect());
    if let Some(tol) = tol {
        let c = povm.completeness_error();
        if c > tol {
            return Err(GrwError::IncompleteProjectors(c));
        }
    }
    Ok(povm)
}

/// Largest `|tr(T E_z) − tr C_z(T)|` over the matrix-unit basis of `T`.
pub fn consistency_error(povm: &Povm, maps: &[KrausMap]) -> f64 {
    let d = povm.dim();
    let mut err: f64 = 0.0;
    for (e, c) in povm.effects.iter().zip(maps) {
        for j in 0..d {
            for k in 0..d {
                let t = linalg::matrix_unit(d, j, k);
                let lhs = linalg::trace(&(&t * e));
                let rhs = linalg::trace(&c.apply(&t));
                err = err.max((lhs - rhs).norm());
            }
        }
    }
    err
}

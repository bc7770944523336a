// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! The GRW master equation and the channels it generates.
//!
//! Since every `Λ_i(x)` is diagonal the dissipator reduces to an elementwise
//! product, `Σ_i Σ_x a Λ^{1/2} ρ Λ^{1/2} = κ ∘ ρ`.

use nalgebra::DMatrix;

use crate::error::{GrwError, Result};
use crate::linalg::{self, real, ComplexMatrix, CI};
use crate::model::GrwModel;

/// A valid density matrix: Hermitian, PSD, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !linalg::is_hermitian(&matrix, 1e-12) {
            return Err(GrwError::NotHermitian(linalg::hermitian_residual(&matrix)));
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(GrwError::InvalidModel(format!("density matrix trace {tr}")));
        }
        let min = linalg::min_eigenvalue(&matrix)?;
        if min < -1e-10 {
            return Err(GrwError::NotPositive(min));
        }
        Ok(Self { matrix })
    }

    pub fn pure(psi: &linalg::StateVector) -> Self {
        Self { matrix: linalg::projector(psi) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Precomputed generator of the master equation.
#[derive(Debug, Clone)]
pub struct Lindblad {
    pub h: ComplexMatrix,
    pub lambda: f64,
    pub rate: f64,
    pub kernel: DMatrix<f64>,
}

impl Lindblad {
    pub fn new(model: &GrwModel) -> Self {
        Self { h: model.hamiltonian.clone(), lambda: model.lambda(), rate: model.total_rate(), kernel: model.dissipation_kernel() }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `−i[H,ρ] + λ κ∘ρ − Nλρ`.
    pub fn rhs(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let hr = &self.h * rho;
        let mut out = (&hr - rho * &self.h) * (-CI);
        if self.lambda > 0.0 {
            for c in 0..rho.ncols() {
                for r in 0..rho.nrows() {
                    out[(r, c)] += rho[(r, c)] * (self.lambda * self.kernel[(r, c)] - self.rate);
                }
            }
        }
        out
    }

    /// Steps for `[s,t)` such that `λ dt ≤ 1e-3` and `‖H‖ dt ≤ 1e-2`.
    pub fn default_steps(&self, duration: f64) -> usize {
        let hnorm = linalg::op_norm(&self.h);
        let by_lambda = self.lambda * duration / 1e-3;
        let by_h = hnorm * duration / 1e-2;
        (by_lambda.max(by_h).ceil() as usize).max(1)
    }

    fn rk4_step(&self, rho: &ComplexMatrix, dt: f64) -> ComplexMatrix {
        let h = real(dt);
        let half = real(dt / 2.0);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + &k1 * half));
        let k3 = self.rhs(&(rho + &k2 * half));
        let k4 = self.rhs(&(rho + &k3 * h));
        rho + (k1 + (k2 + k3) * real(2.0) + k4) * real(dt / 6.0)
    }

    /// Fixed-step RK4 for a general (not necessarily Hermitian) operator.
    pub fn integrate_operator(&self, x: &ComplexMatrix, duration: f64, steps: usize, hermitize: bool) -> ComplexMatrix {
        let dt = duration / steps as f64;
        let mut rho = x.clone();
        for _ in 0..steps {
            rho = self.rk4_step(&rho, dt);
            if hermitize {
                rho = linalg::hermitize(&rho);
            }
        }
        rho
    }

    /// Superoperator matrix of the generator in column-stacking convention.
    pub fn superoperator(&self) -> ComplexMatrix {
        let d = self.dim();
        let id = linalg::identity(d);
        let mut l = (linalg::tensor_product(&id, &self.h) - linalg::tensor_product(&self.h.transpose(), &id)) * (-CI);
        for c in 0..d {
            for r in 0..d {
                l[(c * d + r, c * d + r)] += real(self.lambda * self.kernel[(r, c)] - self.rate);
            }
        }
        l
    }

    /// Channel matrix equal to `steps` RK4 steps of length `duration/steps`.
    pub fn rk4_channel(&self, duration: f64, steps: usize) -> ChannelMatrix {
        let d = self.dim();
        let hl = self.superoperator() * real(duration / steps as f64);
        let id = linalg::identity(d * d);
        // RK4 on a linear ODE is the degree-4 Taylor polynomial of exp(hL).
        let mut step = id.clone();
        let mut term = id.clone();
        for k in 1..=4 {
            term = &term * &hl * real(1.0 / k as f64);
            step += &term;
        }
        ChannelMatrix { dim: d, matrix: matrix_power(&step, steps) }
    }
}

fn matrix_power(m: &ComplexMatrix, mut e: usize) -> ComplexMatrix {
    let mut result = linalg::identity(m.nrows());
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn lindblad_rhs(model: &GrwModel, rho: &DensityOperator) -> ComplexMatrix {
    Lindblad::new(model).rhs(rho.matrix())
}

/// RK4 solution of the master equation over `[s,t)`. `steps = None` uses
/// [`Lindblad::default_steps`].
pub fn evolve_density(model: &GrwModel, rho0: &DensityOperator, window: (f64, f64), steps: Option<usize>) -> Result<DensityOperator> {
    let lb = Lindblad::new(model);
    let duration = window.1 - window.0;
    let steps = steps.unwrap_or_else(|| lb.default_steps(duration));
    let rho = lb.integrate_operator(rho0.matrix(), duration, steps, true);
    let min = linalg::min_eigenvalue(&rho)?;
    if min < -1e-6 {
        return Err(GrwError::PsdViolation(min));
    }
    Ok(DensityOperator { matrix: rho })
}

/// A linear map on `d×d` operators as a `d²×d²` matrix on column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub dim: usize,
    pub matrix: ComplexMatrix,
}

impl ChannelMatrix {
    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: linalg::identity(dim * dim) }
    }

    /// Conjugation `X ↦ K X K†`, via `vec(KXK†) = (conj(K) ⊗ K) vec(X)`.
    pub fn conjugation(k: &ComplexMatrix) -> Self {
        Self { dim: k.nrows(), matrix: linalg::tensor_product(&k.conjugate(), k) }
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        linalg::unvec_op(&(&self.matrix * linalg::vec_op(x)), self.dim)
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &ChannelMatrix) -> ChannelMatrix {
        ChannelMatrix { dim: self.dim, matrix: &self.matrix * &first.matrix }
    }

    /// Heisenberg-picture dual `A*`, the adjoint for `⟨Y,X⟩ = tr(Y†X)`.
    /// For Hermiticity-preserving maps it satisfies `tr(A*(Y) X) = tr(Y A(X))`.
    pub fn dual(&self) -> ChannelMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d * d, d * d);
        for a in 0..d * d {
            for b in 0..d * d {
                m[(b, a)] = self.matrix[(a, b)].conj();
            }
        }
        ChannelMatrix { dim: d, matrix: m }
    }

    /// Choi matrix `Σ_{jk} |j⟩⟨k| ⊗ A(|j⟩⟨k|)`.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut c = ComplexMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for k in 0..d {
                let col = self.matrix.column(k * d + j);
                for r in 0..d {
                    for s in 0..d {
                        c[(j * d + r, k * d + s)] = col[s * d + r];
                    }
                }
            }
        }
        c
    }

    /// Largest deviation of `tr A(E_jk)` from `δ_jk`.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.dim;
        let mut err: f64 = 0.0;
        for j in 0..d {
            for k in 0..d {
                let col = self.matrix.column(k * d + j);
                let tr: num_complex::Complex64 = (0..d).map(|r| col[r * d + r]).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                err = err.max((tr - real(target)).norm());
            }
        }
        err
    }
}

/// The channel `A_{[s,t)}` of the master equation.
pub fn build_channel(model: &GrwModel, window: (f64, f64), steps: Option<usize>) -> ChannelMatrix {
    let lb = Lindblad::new(model);
    let duration = window.1 - window.0;
    let steps = steps.unwrap_or_else(|| lb.default_steps(duration));
    lb.rk4_channel(duration, steps)
}

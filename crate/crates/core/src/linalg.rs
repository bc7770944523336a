// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra on small Hilbert spaces.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Tensor products use the
//! sys-major Kronecker convention `r = r_a * rows_b + r_b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{GrwError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);
pub const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance used when checking the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_CLAMP` are clamped to zero in PSD operations.
pub const PSD_CLAMP: f64 = 1e-10;

/// Which tensor factor to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Sys,
    Env,
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_vec(a: &StateVector, b: &StateVector) -> StateVector {
    a.kronecker(b)
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on factor `pos` of `n` equal factors.
pub fn embed(op: &ComplexMatrix, pos: usize, n: usize) -> ComplexMatrix {
    let l = op.nrows();
    let before = identity(l.pow(pos as u32));
    let after = identity(l.pow((n - pos - 1) as u32));
    tensor_product(&tensor_product(&before, op), &after)
}

/// Partial trace of a `(d_sys*d_env)`-square matrix over the chosen factor.
pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), over: Factor) -> Result<ComplexMatrix> {
    let (ds, de) = dims;
    let d = ds * de;
    if m.nrows() != d || m.ncols() != d {
        return Err(GrwError::Dimension(format!(
            "partial_trace expects {d}x{d}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(match over {
        Factor::Env => ComplexMatrix::from_fn(ds, ds, |i, j| {
            (0..de).map(|k| m[(i * de + k, j * de + k)]).sum()
        }),
        Factor::Sys => ComplexMatrix::from_fn(de, de, |i, j| {
            (0..ds).map(|k| m[(k * de + i, k * de + j)]).sum()
        }),
    })
}

/// Largest absolute entry of `m - m†`.
pub fn hermitian_residual(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermitian_residual(m) <= tol * (1.0 + m.norm())
}

pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn require_hermitian(m: &ComplexMatrix) -> Result<()> {
    let r = hermitian_residual(m);
    if r > HERMITIAN_TOL * (1.0 + m.norm()) {
        return Err(GrwError::NotHermitian(r));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &ComplexMatrix) -> Result<(DVector<f64>, ComplexMatrix)> {
    require_hermitian(m)?;
    let n = m.nrows();
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(k));
    }
    Ok((vals, vecs))
}

/// `V f(Λ) V†` for a real function of the eigenvalues.
pub fn spectral_map(vals: &DVector<f64>, vecs: &ComplexMatrix, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
    let mut scaled = vecs.clone();
    for (c, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for z in scaled.column_mut(c).iter_mut() {
            *z *= fv;
        }
    }
    scaled * vecs.adjoint()
}

pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = herm_eig(m)?;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -PSD_CLAMP * (1.0 + m.norm()) {
        return Err(GrwError::NotPositive(min));
    }
    Ok(spectral_map(&vals, &vecs, |v| Complex64::new(v.max(0.0).sqrt(), 0.0)))
}

/// `U_t = exp(-i h t)` via eigendecomposition.
pub fn expm_skew_herm(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let (vals, vecs) = herm_eig(h)?;
    Ok(spectral_map(&vals, &vecs, |v| Complex64::from_polar(1.0, -v * t)))
}

/// Precomputed eigenbasis of a Hamiltonian for repeated propagation.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub energies: DVector<f64>,
    pub basis: ComplexMatrix,
    basis_adj: ComplexMatrix,
}

impl Propagator {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        let (energies, basis) = herm_eig(h)?;
        let basis_adj = basis.adjoint();
        Ok(Self { energies, basis, basis_adj })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        spectral_map(&self.energies, &self.basis, |v| Complex64::from_polar(1.0, -v * t))
    }

    /// `U_t ψ` without forming `U_t`.
    pub fn apply(&self, t: f64, psi: &StateVector) -> StateVector {
        if t == 0.0 {
            return psi.clone();
        }
        let mut c = &self.basis_adj * psi;
        for (k, z) in c.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, -self.energies[k] * t);
        }
        &self.basis * c
    }

    pub fn spectral_radius(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(GrwError::Dimension("trace_distance shape mismatch".into()));
    }
    let (vals, _) = herm_eig(&(a - b))?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// Operator norm (largest singular value).
pub fn op_norm(m: &ComplexMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    let (vals, _) = herm_eig(m)?;
    Ok(vals[0])
}

/// Column-stacking vectorization.
pub fn vec_op(m: &ComplexMatrix) -> StateVector {
    StateVector::from_column_slice(m.as_slice())
}

pub fn unvec_op(v: &StateVector, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(n, n, v.as_slice())
}

pub fn projector(psi: &StateVector) -> ComplexMatrix {
    psi * psi.adjoint()
}

pub fn basis_vector(n: usize, k: usize) -> StateVector {
    let mut v = StateVector::zeros(n);
    v[k] = C1;
    v
}

/// Matrix unit `|j⟩⟨k|`.
pub fn matrix_unit(n: usize, j: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    m[(j, k)] = C1;
    m
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

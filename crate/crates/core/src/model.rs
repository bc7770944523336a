// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! The lattice GRW universe: configuration space, Hamiltonian, collapse rate
//! operators and system/environment splittings.
//!
//! Configurations of N particles on L sites are indexed particle-major,
//! `q = Σ_i q_i L^{N-1-i}`, so particle 0 is the most significant factor and
//! the index agrees with [`crate::linalg::tensor_product`] of single-particle
//! spaces in label order. Labels are 0-based.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GrwError, Result};
use crate::linalg::{self, real, ComplexMatrix, Factor};

/// Hamiltonian families understood by [`build_hamiltonian`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HamiltonianSpec {
    Zero,
    Hopping {
        /// Single-particle potential applied to every particle (length L).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        onsite: Option<Vec<f64>>,
        /// Energy of every pair of particles sharing a site.
        #[serde(default)]
        contact: f64,
        /// Particles carrying a kinetic term; all when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mobile: Option<Vec<usize>>,
    },
}

/// Geometry and constants shared by a model and its Hamiltonian builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub n_particles: usize,
    pub sites: usize,
    pub spacing: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub masses: Vec<f64>,
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GrwError::InvalidModel(m.to_string()));
        if self.n_particles == 0 {
            return bad("n_particles must be positive");
        }
        if self.sites == 0 {
            return bad("sites must be positive");
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return bad("spacing must be positive");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be non-negative");
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad("sigma must be positive");
        }
        if self.masses.len() != self.n_particles {
            return bad("masses must have one entry per particle");
        }
        if self.masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return bad("masses must be positive");
        }
        let dim = (self.sites as f64).powi(self.n_particles as i32);
        if dim > 4096.0 {
            return bad("Hilbert dimension exceeds 4096");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sites.pow(self.n_particles as u32)
    }
}

/// A GRW model on a one-dimensional lattice.
#[derive(Debug, Clone)]
pub struct GrwModel {
    pub params: LatticeParams,
    pub hamiltonian: ComplexMatrix,
    /// Labels that undergo collapses. All labels unless restricted for a
    /// diagnostic sweep.
    pub active: Vec<bool>,
    pub collapse: CollapseOperatorFamily,
}

impl GrwModel {
    pub fn new(params: LatticeParams, hamiltonian: ComplexMatrix) -> Result<Self> {
        params.validate()?;
        let d = params.dim();
        if hamiltonian.shape() != (d, d) {
            return Err(GrwError::Dimension(format!("hamiltonian must be {d}x{d}")));
        }
        if !linalg::is_hermitian(&hamiltonian, 1e-12) {
            return Err(GrwError::NotHermitian(linalg::hermitian_residual(&hamiltonian)));
        }
        let collapse = build_collapse_operators(&params);
        let active = vec![true; params.n_particles];
        Ok(Self { params, hamiltonian, active, collapse })
    }

    pub fn from_spec(params: LatticeParams, spec: &HamiltonianSpec) -> Result<Self> {
        params.validate()?;
        let h = build_hamiltonian(&params, spec)?;
        Self::new(params, h)
    }

    /// Model with dimension 1 and no particles (the trivial environment).
    pub fn trivial(lambda: f64, sigma: f64, spacing: f64, sites: usize) -> Self {
        let params = LatticeParams { n_particles: 0, sites, spacing, lambda, sigma, masses: vec![] };
        let collapse = CollapseOperatorFamily { n_particles: 0, sites, spacing, table: vec![], kernel_1p: vec![] };
        Self { params, hamiltonian: ComplexMatrix::zeros(1, 1), active: vec![], collapse }
    }

    pub fn with_hamiltonian(&self, h: ComplexMatrix) -> Result<Self> {
        let mut m = Self::new(self.params.clone(), h)?;
        m.active = self.active.clone();
        Ok(m)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut p = self.params.clone();
        p.lambda = lambda;
        let mut m = Self::new(p, self.hamiltonian.clone())?;
        m.active = self.active.clone();
        Ok(m)
    }

    /// Restricts collapses to a subset of labels.
    pub fn with_active_labels(&self, labels: &[usize]) -> Result<Self> {
        if labels.iter().any(|&i| i >= self.n()) {
            return Err(GrwError::InvalidModel("active label out of range".into()));
        }
        let mut m = self.clone();
        m.active = (0..self.n()).map(|i| labels.contains(&i)).collect();
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.params.n_particles
    }
    pub fn sites(&self) -> usize {
        self.params.sites
    }
    pub fn a(&self) -> f64 {
        self.params.spacing
    }
    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }
    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn active_labels(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.active[i]).collect()
    }

    /// Collapse rate of a single label.
    pub fn label_rate(&self, i: usize) -> f64 {
        if self.active.get(i).copied().unwrap_or(false) {
            self.params.lambda
        } else {
            0.0
        }
    }

    /// Total collapse rate, `Nλ` when all labels are active.
    pub fn total_rate(&self) -> f64 {
        self.params.lambda * self.active_labels().len() as f64
    }

    /// Site of particle `i` in configuration `q`.
    pub fn site_of(&self, q: usize, i: usize) -> usize {
        site_of(q, i, self.n(), self.sites())
    }

    /// Elementwise dissipation kernel `κ(q,q') = Σ_i active Σ_x a √Λ_i(x)(q) √Λ_i(x)(q')`.
    ///
    /// The GRW dissipator acts as `ρ ↦ λ κ∘ρ − Nλρ`.
    pub fn dissipation_kernel(&self) -> nalgebra::DMatrix<f64> {
        let d = self.dim();
        let labels = self.active_labels();
        nalgebra::DMatrix::from_fn(d, d, |q, p| {
            labels
                .iter()
                .map(|&i| self.collapse.kernel_1p[self.site_of(q, i) * self.sites() + self.site_of(p, i)])
                .sum()
        })
    }
}

pub fn site_of(q: usize, i: usize, n: usize, l: usize) -> usize {
    (q / l.pow((n - 1 - i) as u32)) % l
}

/// Diagonal collapse rate operators `Λ_i(x)`.
///
/// The diagonal entry of `Λ_i(x)` at configuration `q` depends only on `q_i`,
/// so the family is stored as the single-particle table `g[q_i][x]`.
#[derive(Debug, Clone)]
pub struct CollapseOperatorFamily {
    pub n_particles: usize,
    pub sites: usize,
    pub spacing: f64,
    /// `table[y * L + x]`: weight of `Λ(x)` at single-particle site `y`.
    pub table: Vec<f64>,
    /// `kernel_1p[y * L + y'] = Σ_x a √g(y,x) √g(y',x)`.
    pub kernel_1p: Vec<f64>,
}

impl CollapseOperatorFamily {
    pub fn weight(&self, y: usize, x: usize) -> f64 {
        self.table[y * self.sites + x]
    }

    /// Diagonal of `Λ_i(x)` over all configurations.
    pub fn diag(&self, i: usize, x: usize) -> DVector<f64> {
        let l = self.sites;
        let d = l.pow(self.n_particles as u32);
        DVector::from_fn(d, |q, _| self.weight(site_of(q, i, self.n_particles, l), x))
    }

    pub fn sqrt_diag(&self, i: usize, x: usize) -> DVector<f64> {
        self.diag(i, x).map(f64::sqrt)
    }

    pub fn operator(&self, i: usize, x: usize) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&self.diag(i, x).map(real))
    }

    /// `a ⟨ψ|Λ_i(x)|ψ⟩` for every site `x`.
    pub fn center_distribution(&self, psi: &linalg::StateVector, i: usize) -> Vec<f64> {
        let l = self.sites;
        let mut marg = vec![0.0; l];
        for (q, z) in psi.iter().enumerate() {
            marg[site_of(q, i, self.n_particles, l)] += z.norm_sqr();
        }
        (0..l)
            .map(|x| self.spacing * (0..l).map(|y| marg[y] * self.weight(y, x)).sum::<f64>())
            .collect()
    }
}

pub fn build_collapse_operators(p: &LatticeParams) -> CollapseOperatorFamily {
    let l = p.sites;
    let a = p.spacing;
    let mut table = vec![0.0; l * l];
    for y in 0..l {
        let raw: Vec<f64> = (0..l)
            .map(|x| {
                let d = (y as f64 - x as f64) * a;
                (-(d * d) / (2.0 * p.sigma * p.sigma)).exp()
            })
            .collect();
        let norm: f64 = raw.iter().sum::<f64>() * a;
        for x in 0..l {
            table[y * l + x] = raw[x] / norm;
        }
    }
    let mut kernel_1p = vec![0.0; l * l];
    for y in 0..l {
        for z in 0..l {
            kernel_1p[y * l + z] = (0..l).map(|x| a * (table[y * l + x] * table[z * l + x]).sqrt()).sum();
        }
    }
    CollapseOperatorFamily { n_particles: p.n_particles, sites: l, spacing: a, table, kernel_1p }
}

pub fn build_hamiltonian(p: &LatticeParams, spec: &HamiltonianSpec) -> Result<ComplexMatrix> {
    let (n, l, a) = (p.n_particles, p.sites, p.spacing);
    let d = p.dim();
    let mut h = ComplexMatrix::zeros(d, d);
    let (onsite, contact, mobile) = match spec {
        HamiltonianSpec::Zero => return Ok(h),
        HamiltonianSpec::Hopping { onsite, contact, mobile } => (onsite, *contact, mobile),
    };
    if let Some(v) = onsite {
        if v.len() != l || v.iter().any(|x| !x.is_finite()) {
            return Err(GrwError::InvalidModel("onsite potential must have L finite entries".into()));
        }
    }
    if !contact.is_finite() {
        return Err(GrwError::InvalidModel("contact energy must be finite".into()));
    }
    let movers: Vec<usize> = match mobile {
        Some(m) => {
            if m.iter().any(|&i| i >= n) {
                return Err(GrwError::InvalidModel("mobile label out of range".into()));
            }
            m.clone()
        }
        None => (0..n).collect(),
    };
    for q in 0..d {
        let mut diag = 0.0;
        for i in 0..n {
            let y = site_of(q, i, n, l);
            if let Some(v) = onsite {
                diag += v[y];
            }
            if movers.contains(&i) {
                let m = p.masses[i];
                diag += 1.0 / (m * a * a);
                if y + 1 < l {
                    let stride = l.pow((n - 1 - i) as u32);
                    let hop = real(-1.0 / (2.0 * m * a * a));
                    h[(q, q + stride)] += hop;
                    h[(q + stride, q)] += hop;
                }
            }
            for j in (i + 1)..n {
                if site_of(q, j, n, l) == y {
                    diag += contact;
                }
            }
        }
        h[(q, q)] += real(diag);
    }
    Ok(h)
}

/// Splitting of the labels (and optionally the sites) into system and environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSplit {
    pub sys_labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sys_region: Option<Vec<usize>>,
}

impl SystemSplit {
    pub fn labels(labels: &[usize]) -> Self {
        Self { sys_labels: labels.to_vec(), sys_region: None }
    }

    pub fn is_sys_flash(&self, label: usize, site: usize) -> bool {
        self.sys_labels.contains(&label) && self.sys_region.as_ref().map_or(true, |r| r.contains(&site))
    }

    fn check(&self, model: &GrwModel) -> Result<()> {
        let n = model.n();
        let mut seen = vec![false; n];
        for &i in &self.sys_labels {
            if i >= n {
                return Err(GrwError::InvalidSplit(format!("label {i} out of range")));
            }
            if seen[i] {
                return Err(GrwError::InvalidSplit(format!("label {i} repeated")));
            }
            seen[i] = true;
        }
        if let Some(r) = &self.sys_region {
            if r.iter().any(|&x| x >= model.sites()) {
                return Err(GrwError::InvalidSplit("region site out of range".into()));
            }
        }
        Ok(())
    }

    pub fn env_labels(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.sys_labels.contains(i)).collect()
    }

    /// Label order with system labels first.
    pub fn order(&self, n: usize) -> Vec<usize> {
        let mut o = self.sys_labels.clone();
        o.extend(self.env_labels(n));
        o
    }

    pub fn dims(&self, model: &GrwModel) -> (usize, usize) {
        let l = model.sites();
        (l.pow(self.sys_labels.len() as u32), l.pow((model.n() - self.sys_labels.len()) as u32))
    }
}

/// Maps each configuration index to its index after reordering labels so
/// that `order[k]` becomes position `k`.
pub fn label_permutation(n: usize, l: usize, order: &[usize]) -> Vec<usize> {
    let d = l.pow(n as u32);
    (0..d)
        .map(|q| order.iter().fold(0, |acc, &i| acc * l + site_of(q, i, n, l)))
        .collect()
}

pub fn permute_matrix(m: &ComplexMatrix, perm: &[usize]) -> ComplexMatrix {
    let d = m.nrows();
    let mut out = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            out[(perm[r], perm[c])] = m[(r, c)];
        }
    }
    out
}

pub fn permute_vector(v: &linalg::StateVector, perm: &[usize]) -> linalg::StateVector {
    let mut out = v.clone();
    for (q, z) in v.iter().enumerate() {
        out[perm[q]] = *z;
    }
    out
}

/// Result of [`split`].
#[derive(Debug, Clone)]
pub struct SplitModels {
    pub model_sys: GrwModel,
    pub model_env: GrwModel,
    pub is_isolated: bool,
    /// Largest entry of `H − (H_sys⊗I + I⊗H_env)` in the reordered basis.
    pub residual: f64,
    /// Configuration permutation into the sys-major basis.
    pub permutation: Vec<usize>,
}

/// Splits a model into system and environment parts and tests isolation.
pub fn split(model: &GrwModel, s: &SystemSplit) -> Result<SplitModels> {
    s.check(model)?;
    let n = model.n();
    let l = model.sites();
    let order = s.order(n);
    let perm = label_permutation(n, l, &order);
    let h = permute_matrix(&model.hamiltonian, &perm);
    let (ds, de) = s.dims(model);
    let d = ds * de;
    let tr = linalg::trace(&h);
    let h_sys = linalg::partial_trace(&h, (ds, de), Factor::Env)? / real(de as f64);
    let h_env = linalg::partial_trace(&h, (ds, de), Factor::Sys)? / real(ds as f64)
        - linalg::identity(de) * (tr / real(d as f64));
    let approx = linalg::tensor_product(&h_sys, &linalg::identity(de)) + linalg::tensor_product(&linalg::identity(ds), &h_env);
    let residual = linalg::max_abs(&(h - approx));
    let scale = linalg::max_abs(&model.hamiltonian).max(1.0);
    let mut isolated = residual <= 1e-10 * scale;

    // Collapse operators of every label must act on one factor only.
    let sub = |labels: &[usize]| LatticeParams {
        n_particles: labels.len(),
        sites: l,
        spacing: model.a(),
        lambda: model.lambda(),
        sigma: model.params.sigma,
        masses: labels.iter().map(|&i| model.params.masses[i]).collect(),
    };
    let env_labels = s.env_labels(n);
    for (k, &i) in order.iter().enumerate() {
        for x in 0..l {
            let full = model.collapse.diag(i, x);
            let permuted = {
                let mut v = full.clone();
                for q in 0..d {
                    v[perm[q]] = full[q];
                }
                v
            };
            for q in 0..d {
                let expected = model.collapse.weight(site_of(q, k, n, l), x);
                if (permuted[q] - expected).abs() > 1e-14 {
                    isolated = false;
                }
            }
        }
    }

    let build = |labels: &[usize], h: ComplexMatrix| -> Result<GrwModel> {
        if labels.is_empty() {
            return Ok(GrwModel::trivial(model.lambda(), model.params.sigma, model.a(), l));
        }
        let mut m = GrwModel::new(sub(labels), linalg::hermitize(&h))?;
        m.active = labels.iter().map(|&i| model.active[i]).collect();
        Ok(m)
    };
    Ok(SplitModels {
        model_sys: build(&s.sys_labels, h_sys)?,
        model_env: build(&env_labels, h_env)?,
        is_isolated: isolated,
        residual,
        permutation: perm,
    })
}

// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo POVMs by tomography over simulated joint trajectories.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::experiment::{Experiment, StoppingRule};
use super::povm::{Povm, PovmMeta};
use crate::error::{GrwError, Result};
use crate::jump::{CheckpointMode, Simulator};
use crate::linalg::{self, real, ComplexMatrix, StateVector, CI};
use crate::rng::StreamRng;

/// The `d²` pure probe states `|j⟩`, `(|j⟩+|k⟩)/√2`, `(|j⟩+i|k⟩)/√2`.
pub fn probe_states(d: usize) -> Vec<StateVector> {
    let mut out: Vec<StateVector> = (0..d).map(|j| linalg::basis_vector(d, j)).collect();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in j + 1..d {
            let (ej, ek) = (linalg::basis_vector(d, j), linalg::basis_vector(d, k));
            out.push((&ej + &ek) * real(h));
            out.push((&ej + &ek * CI) * real(h));
        }
    }
    out
}

/// Real Hermitian basis `B_p`: `|j⟩⟨j|`, `|j⟩⟨k|+|k⟩⟨j|`, `i|j⟩⟨k|−i|k⟩⟨j|`.
fn hermitian_basis(d: usize) -> Vec<(usize, usize, bool)> {
    let mut b: Vec<(usize, usize, bool)> = (0..d).map(|j| (j, j, false)).collect();
    for j in 0..d {
        for k in j + 1..d {
            b.push((j, k, false));
            b.push((j, k, true));
        }
    }
    b
}

fn basis_matrix(d: usize, (j, k, imag): (usize, usize, bool)) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    if j == k {
        m[(j, j)] = real(1.0);
    } else if imag {
        m[(j, k)] = CI;
        m[(k, j)] = -CI;
    } else {
        m[(j, k)] = real(1.0);
        m[(k, j)] = real(1.0);
    }
    m
}

/// Linear tomography solver: estimates Hermitian `E` from probe
/// expectations `⟨ψ_b|E|ψ_b⟩` with standard errors.
#[derive(Debug, Clone)]
pub struct Tomography {
    d: usize,
    basis: Vec<(usize, usize, bool)>,
    pinv: DMatrix<f64>,
    pub condition_number: f64,
}

impl Tomography {
    pub fn new(d: usize) -> Result<Self> {
        let probes = probe_states(d);
        let basis = hermitian_basis(d);
        let mats: Vec<ComplexMatrix> = basis.iter().map(|&b| basis_matrix(d, b)).collect();
        let a = DMatrix::from_fn(probes.len(), basis.len(), |r, c| (probes[r].adjoint() * &mats[c] * &probes[r])[(0, 0)].re);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-12 * smax {
            return Err(GrwError::SingularTomography(smin / smax));
        }
        let pinv = svd.pseudo_inverse(1e-12 * smax).map_err(|_| GrwError::SingularTomography(smin / smax))?;
        Ok(Self { d, basis, pinv, condition_number: smax / smin })
    }

    /// `E` and per-entry `(Re, Im)` standard errors from probe values and errors.
    pub fn solve(&self, values: &[f64], errors: &[f64]) -> (ComplexMatrix, Vec<Vec<(f64, f64)>>) {
        let x = &self.pinv * DVector::from_column_slice(values);
        let var: Vec<f64> = (0..self.basis.len())
            .map(|p| (0..values.len()).map(|b| (self.pinv[(p, b)] * errors[b]).powi(2)).sum())
            .collect();
        let d = self.d;
        let mut e = ComplexMatrix::zeros(d, d);
        let mut se = vec![vec![(0.0, 0.0); d]; d];
        for (p, &(j, k, imag)) in self.basis.iter().enumerate() {
            e += basis_matrix(d, (j, k, imag)) * real(x[p]);
            let s = var[p].sqrt();
            if j == k {
                se[j][j].0 = s;
            } else if imag {
                se[j][k].1 = s;
                se[k][j].1 = s;
            } else {
                se[j][k].0 = s;
                se[k][j].0 = s;
            }
        }
        (e, se)
    }
}

/// Eigen-ensemble `(p_k, |k⟩)` of `rho`, dropping zero weights.
pub(crate) fn eigen_ensemble(rho: &ComplexMatrix) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let (vals, vecs) = linalg::herm_eig(rho)?;
    let mut p = Vec::new();
    let mut states = Vec::new();
    for (k, &v) in vals.iter().enumerate() {
        if v > 1e-14 {
            p.push(v);
            states.push(vecs.column(k).into_owned());
        }
    }
    Ok((p, states))
}

/// Outcome of one simulated joint trajectory.
pub(crate) fn sample_outcome(exp: &Experiment, sim: &Simulator, psi_sys: &StateVector, app: &(Vec<f64>, Vec<StateVector>), seed: u64, stream: u64) -> Result<(usize, usize)> {
    let mut rng = StreamRng::new(seed, stream);
    let phi = &app.1[rng.categorical(&app.0)];
    let psi0 = linalg::tensor_vec(psi_sys, phi);
    let (hist, cps) = sim.run(&psi0, exp.window, &mut rng, CheckpointMode::Endpoints)?;
    match &exp.stopping {
        Some(rule) if *rule != StoppingRule::Fixed => Ok(rule.evaluate(&hist).expect("stopping rule")),
        _ => {
            let z = exp.calibrate(&hist, &cps.last().expect("final state").1, &mut rng);
            Ok((z, hist.len()))
        }
    }
}

/// Outcome counts of `m` joint trajectories from `ψ_sys ⊗ φ` with `φ`
/// drawn from the eigen-ensemble of `ρ_app`. Streams `offset..offset+m`.
pub fn outcome_counts(exp: &Experiment, psi_sys: &StateVector, m: usize, seed: u64, offset: u64) -> Result<Vec<usize>> {
    let sim = Simulator::new(&exp.model)?;
    let app = eigen_ensemble(&exp.rho_app)?;
    let n_out = exp.outcomes().len();
    let outcomes: Vec<usize> = (0..m as u64)
        .into_par_iter()
        .map(|k| sample_outcome(exp, &sim, psi_sys, &app, seed, offset + k).map(|r| r.0))
        .collect::<Result<_>>()?;
    let mut counts = vec![0; n_out];
    for z in outcomes {
        counts[z] += 1;
    }
    Ok(counts)
}

/// `E_z` by tomography: `m` trajectories per probe state; standard errors
/// use the binomial variance with a floor of `1/m` per frequency.
pub fn grw_povm_mc(exp: &Experiment, m: usize, seed: u64) -> Result<Povm> {
    exp.validate()?;
    if m == 0 {
        return Err(GrwError::InsufficientSamples("no trajectories requested".into()));
    }
    let ds = exp.d_sys();
    let tomo = Tomography::new(ds)?;
    let outcomes = exp.outcomes();
    let probes = probe_states(ds);
    let mut freq = vec![vec![0.0; probes.len()]; outcomes.len()];
    for (b, psi) in probes.iter().enumerate() {
        let counts = outcome_counts(exp, psi, m, seed, (b * m) as u64)?;
        for (z, c) in counts.iter().enumerate() {
            freq[z][b] = *c as f64 / m as f64;
        }
    }
    let mut effects = Vec::new();
    let mut errors = Vec::new();
    for f in &freq {
        let se: Vec<f64> = f.iter().map(|&p| ((p * (1.0 - p)).max(1.0 / m as f64) / m as f64).sqrt()).collect();
        let (e, s) = tomo.solve(f, &se);
        effects.push(e);
        errors.push(s);
    }
    let mut povm = Povm::new(outcomes, effects);
    povm.meta = PovmMeta {
        remainder_bound: 0.0,
        tolerance: 0.0,
        seeds: vec![seed],
        std_errors: Some(errors),
        condition_number: Some(tomo.condition_number),
        method: Some("mc-tomography".into()),
    };
    Ok(povm)
}

// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! The quantum law of operators: unitary evolution of object plus apparatus
//! followed by the pointer projectors.

use super::exact::{contract_app, Superops};
use super::experiment::Experiment;
use super::povm::{KrausMap, Povm, PovmMeta};
use crate::error::{GrwError, Result};
use crate::linalg::{self, real, ComplexMatrix, Propagator};

fn check_pointer(exp: &Experiment) -> Result<()> {
    if exp.pointer.is_empty() {
        return Err(GrwError::IncompleteProjectors(1.0));
    }
    exp.validate()
}

/// `E^Qu_z = tr_app([I ⊗ ρ_app] U* [I ⊗ P_z] U)` over the window.
pub fn quantum_povm(exp: &Experiment) -> Result<Povm> {
    check_pointer(exp)?;
    let u = Propagator::new(&exp.model.hamiltonian)?.unitary(exp.window.1 - exp.window.0);
    let ua = u.adjoint();
    let effects = exp
        .joint_pointer()
        .iter()
        .map(|q| linalg::hermitize(&contract_app(exp, &(&ua * q * &u))))
        .collect();
    let mut povm = Povm::new(exp.pointer_names(), effects);
    povm.meta = PovmMeta { tolerance: 1e-10, method: Some("quantum".into()), ..PovmMeta::default() };
    Ok(povm)
}

/// Kraus operators `R_{z,k,e} = (I ⊗ ⟨e|)(I ⊗ P_z) U (I ⊗ √p_k |k⟩)` where
/// `ρ_app = Σ_k p_k |k⟩⟨k|`.
pub fn quantum_superops(exp: &Experiment) -> Result<Superops> {
    check_pointer(exp)?;
    let (ds, da) = exp.dims();
    let u = Propagator::new(&exp.model.hamiltonian)?.unitary(exp.window.1 - exp.window.0);
    let (vals, vecs) = linalg::herm_eig(&exp.rho_app)?;
    let id = linalg::identity(ds);
    let inject: Vec<ComplexMatrix> = vals
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-14)
        .map(|(k, &p)| {
            let col = ComplexMatrix::from_column_slice(da, 1, vecs.column(k).as_slice()) * real(p.sqrt());
            linalg::tensor_product(&id, &col)
        })
        .collect();
    let mut kraus = Vec::new();
    for q in exp.joint_pointer() {
        let qu = &q * &u;
        let mut ops = Vec::new();
        for v in &inject {
            let m = &qu * v;
            for e in 0..da {
                let bra = linalg::tensor_product(&id, &ComplexMatrix::from_fn(1, da, |_, c| real(if c == e { 1.0 } else { 0.0 })));
                let r = bra * &m;
                if linalg::max_abs(&r) > 0.0 {
                    ops.push(r);
                }
            }
        }
        kraus.push(KrausMap::new(ops, ds, ds)?);
    }
    let channels = kraus.iter().map(KrausMap::to_channel).collect::<Result<Vec<_>>>()?;
    Ok(Superops { outcomes: exp.pointer_names(), channels, kraus, remainder_bound: 0.0 })
}

/// Apparatus projector `P^app_{z,t}` recording outcome `z` and finishing time `t`.
#[derive(Debug, Clone)]
pub struct TimedProjector {
    pub outcome: String,
    pub time: f64,
    pub projector: ComplexMatrix,
}

/// Random run-time quantum law:
/// `E^Qu_{z,t} = tr_app([I ⊗ ρ_app] U*_{t−s} [I ⊗ P_{z,t}] U_{t−s})`.
///
/// Completeness is reported, not enforced: it holds when the apparatus keeps
/// permanent records of `(z, t)`.
pub fn quantum_random_runtime_povm(exp: &Experiment, projectors: &[TimedProjector]) -> Result<Povm> {
    let (ds, da) = exp.dims();
    let prop = Propagator::new(&exp.model.hamiltonian)?;
    let id = linalg::identity(ds);
    let mut outcomes = Vec::new();
    let mut effects = Vec::new();
    for p in projectors {
        if p.projector.shape() != (da, da) {
            return Err(GrwError::Dimension("timed projector shape".into()));
        }
        if p.time < exp.window.0 {
            return Err(GrwError::InvalidExperiment("finishing time before the start".into()));
        }
        let u = prop.unitary(p.time - exp.window.0);
        let q = linalg::tensor_product(&id, &p.projector);
        effects.push(linalg::hermitize(&contract_app(exp, &(u.adjoint() * q * &u))));
        outcomes.push(super::experiment::joint_id(&p.outcome, p.time));
    }
    let mut povm = Povm::new(outcomes, effects);
    povm.meta.method = Some("quantum-random-runtime".into());
    povm.meta.tolerance = povm.completeness_error();
    Ok(povm)
}

/// Superoperators `C^Qu_{z,t}(ρ) = tr_app([I ⊗ P] U [ρ ⊗ ρ_app] U* [I ⊗ P])`
/// as channel matrices.
pub fn quantum_random_runtime_superops(exp: &Experiment, projectors: &[TimedProjector]) -> Result<Vec<crate::master::ChannelMatrix>> {
    let (ds, da) = exp.dims();
    let prop = Propagator::new(&exp.model.hamiltonian)?;
    let id = linalg::identity(ds);
    let mut out = Vec::new();
    for p in projectors {
        let u = prop.unitary(p.time - exp.window.0);
        let q = linalg::tensor_product(&id, &p.projector);
        let qu = &q * &u;
        let qua = qu.adjoint();
        let outputs: Vec<Vec<ComplexMatrix>> = (0..ds * ds)
            .map(|c| {
                let x = linalg::tensor_product(&linalg::matrix_unit(ds, c % ds, c / ds), &exp.rho_app);
                let y = &qu * x * &qua;
                vec![linalg::partial_trace(&y, (ds, da), linalg::Factor::Env).expect("dims")]
            })
            .collect();
        out.push(super::exact::channels_from_outputs(ds, &outputs, 1).remove(0));
    }
    Ok(out)
}

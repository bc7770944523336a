// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum GrwError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("negative eigenvalue {0:.3e} below clamp threshold")]
    NotPositive(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("flash history is not strictly time ordered or leaves the window")]
    UnorderedHistory,
    #[error("collapse norm underflow ({0:.3e})")]
    CollapseUnderflow(f64),
    #[error("PSD violation {0:.3e} in density evolution; use more steps")]
    PsdViolation(f64),
    #[error("cost guard: {cost:.3e} work units exceed budget {budget:.3e}")]
    CostGuard { cost: f64, budget: f64 },
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("stopping rule not adapted: {0}")]
    NotAdapted(String),
    #[error("pointer projectors do not sum to the identity (residual {0:.3e})")]
    IncompleteProjectors(f64),
    #[error("Choi matrix not PSD (min eigenvalue {0:.3e})")]
    ChoiNotPsd(f64),
    #[error("singular tomography system (condition number {0:.3e})")]
    SingularTomography(f64),
    #[error("conditioning event too rare (probability {0:.3e})")]
    RareEvent(f64),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("split is not isolated")]
    NotIsolated,
    #[error("density matrices of the two mixtures differ (trace distance {0:.3e})")]
    MixturesDiffer(f64),
    #[error("packets not separated: overlap factor {0:.3e} > 0.01")]
    PacketOverlap(f64),
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("config has {} error(s): {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    ConfigErrors(Vec<GrwError>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GrwError>;

// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! POVMs and completely positive superoperators for modeled experiments.

pub mod compose;
pub mod conditional;
pub mod exact;
pub mod experiment;
pub mod flow;
pub mod povm;
pub mod quadrature;
pub mod quantum;
pub mod runtime;
pub mod tomography;

pub use compose::{compose_experiments, Composed, Gap};
pub use conditional::{conditional_density_matrix, ConditionalMethod, Conditioned, HistoryEvent};
pub use exact::{grw_povm_exact, grw_superops_exact, ExactSettings, Superops};
pub use experiment::{Binning, Calibration, Experiment, StoppingRule};
pub use povm::{choi_kraus, consistency_error, povm_from_kraus, KrausMap, Povm, PovmMeta};
pub use quantum::{quantum_povm, quantum_superops};
pub use runtime::{random_runtime_povm, random_runtime_superops, RuntimeMethod};
pub use tomography::grw_povm_mc;

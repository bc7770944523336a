// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation of the GRW collapse process on finite lattice models, and
//! construction of the quantum and GRW laws of operators for modeled
//! experiments.

pub mod error;
pub mod experiments;
pub mod formalism;
pub mod io;
pub mod jump;
pub mod linalg;
pub mod master;
pub mod model;
pub mod ontology;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{GrwError, Result};

// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configurations, POVM and report files, and trajectory records.
//!
//! Complex numbers are written as `[re, im]` pairs. Floats use the
//! shortest decimal form that round-trips, so `read(write(x)) == x`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GrwError, Result};
use crate::experiments::{Consecutive, CollapseDetection, DeviationSweep, StandardSetup, TwoPointer, Warming};
use crate::formalism::experiment::{Calibration, Experiment, StoppingRule};
use crate::formalism::povm::{Povm, PovmMeta};
use crate::jump::{FlashEvent, Trajectory};
use crate::linalg::{self, ComplexMatrix, StateVector, C0};
use crate::model::{GrwModel, HamiltonianSpec, LatticeParams, SystemSplit};
use num_complex::Complex64;

/// Format version written to every file; loaders accept the same major.
pub const FORMAT_VERSION: &str = "1.0";

fn check_version(v: &str, path: &str) -> Result<()> {
    let major = FORMAT_VERSION.split('.').next().unwrap_or_default();
    if v.split('.').next() != Some(major) {
        return Err(GrwError::Config { path: path.into(), msg: format!("unsupported format version {v} (expected {major}.x)") });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Configuration

/// A pure state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    /// A configuration basis vector.
    Basis { index: usize },
    /// Equal superposition of configuration basis vectors.
    Superposition { indices: Vec<usize> },
    /// Amplitudes as `[re, im]` pairs (normalized on load).
    Amplitudes { amplitudes: Vec<[f64; 2]> },
    /// Tensor product of single-factor amplitude vectors.
    Product { factors: Vec<Vec<[f64; 2]>> },
}

fn complex_vec(a: &[[f64; 2]]) -> StateVector {
    StateVector::from_iterator(a.len(), a.iter().map(|p| Complex64::new(p[0], p[1])))
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<StateVector> {
        let err = |m: &str| GrwError::Config { path: "state".into(), msg: m.into() };
        let v = match self {
            StateSpec::Basis { index } => {
                if *index >= dim {
                    return Err(err("basis index out of range"));
                }
                linalg::basis_vector(dim, *index)
            }
            StateSpec::Superposition { indices } => {
                let mut v = StateVector::from_element(dim, C0);
                for &i in indices {
                    if i >= dim {
                        return Err(err("basis index out of range"));
                    }
                    v[i] += linalg::real(1.0);
                }
                v
            }
            StateSpec::Amplitudes { amplitudes } => complex_vec(amplitudes),
            StateSpec::Product { factors } => {
                factors.iter().fold(StateVector::from_element(1, linalg::real(1.0)), |acc, f| linalg::tensor_vec(&acc, &complex_vec(f)))
            }
        };
        if v.len() != dim {
            return Err(err(&format!("state has dimension {}, expected {dim}", v.len())));
        }
        let n = v.norm();
        if !(n > 0.0) {
            return Err(err("zero state"));
        }
        Ok(v / linalg::real(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_particles: usize,
    pub sites: usize,
    #[serde(default = "one")]
    pub spacing: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// One per particle; all 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    pub hamiltonian: HamiltonianSpec,
    /// Labels that collapse; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_labels: Option<Vec<usize>>,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn params(&self) -> LatticeParams {
        LatticeParams {
            n_particles: self.n_particles,
            sites: self.sites,
            spacing: self.spacing,
            lambda: self.lambda,
            sigma: self.sigma,
            masses: self.masses.clone().unwrap_or_else(|| vec![1.0; self.n_particles]),
        }
    }

    pub fn build(&self) -> Result<GrwModel> {
        let m = GrwModel::from_spec(self.params(), &self.hamiltonian)?;
        match &self.active_labels {
            Some(l) => m.with_active_labels(l),
            None => Ok(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Number of trajectories.
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointerSpec {
    pub name: String,
    /// Apparatus configuration indices spanned by the projector.
    pub configs: Vec<usize>,
}

/// An experiment: the standard object-plus-pointer setup, or a custom one
/// on the configured model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Standard {
        #[serde(default)]
        setup: StandardSetup,
        #[serde(default = "terminal_pointer")]
        calibration: Calibration,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stopping: Option<StoppingRule>,
    },
    Custom {
        n_obj: usize,
        app_state: StateSpec,
        window: (f64, f64),
        calibration: Calibration,
        #[serde(default)]
        pointer: Vec<PointerSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stopping: Option<StoppingRule>,
    },
}

fn terminal_pointer() -> Calibration {
    Calibration::TerminalPointer
}

impl ExperimentSpec {
    pub fn build(&self, model: Option<&GrwModel>) -> Result<Experiment> {
        let mut exp = match self {
            ExperimentSpec::Standard { setup, calibration, stopping } => {
                let mut e = setup.experiment(calibration.clone())?;
                e.stopping = stopping.clone();
                e
            }
            ExperimentSpec::Custom { n_obj, app_state, window, calibration, pointer, stopping } => {
                let model = model.ok_or_else(|| GrwError::Config { path: "/model".into(), msg: "custom experiment needs a model".into() })?;
                let da = model.sites().pow((model.n() - n_obj.min(&model.n())) as u32);
                let phi = app_state.build(da)?;
                let pointer = pointer
                    .iter()
                    .map(|p| {
                        let mut m = ComplexMatrix::zeros(da, da);
                        for &c in &p.configs {
                            if c < da {
                                m[(c, c)] = linalg::real(1.0);
                            }
                        }
                        (p.name.clone(), m)
                    })
                    .collect();
                Experiment {
                    model: model.clone(),
                    n_obj: *n_obj,
                    rho_app: linalg::projector(&phi),
                    window: *window,
                    calibration: calibration.clone(),
                    pointer,
                    stopping: stopping.clone(),
                }
            }
        };
        if exp.stopping == Some(StoppingRule::Fixed) {
            exp.stopping = None;
        }
        exp.validate()?;
        Ok(exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PovmMethodSpec {
    Quantum,
    Exact { n_max: usize },
    MonteCarlo { m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmSpec {
    pub method: PovmMethodSpec,
    /// Also report the distance to the quantum POVM.
    #[serde(default)]
    pub compare_quantum: bool,
}

/// One check of the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum VerifyTest {
    ConditionalProbability { s: f64 },
    MarginalProbability,
    Independence {
        /// Product initial state; the configured one when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<StateSpec>,
    },
    MarginalMaster,
    PoissonCounts,
    DensitySufficiency { ensemble_a: Vec<(f64, StateSpec)>, ensemble_b: Vec<(f64, StateSpec)> },
    LinearityInRho { state_b: StateSpec, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SystemSplit>,
    pub tests: Vec<VerifyTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioSpec {
    CollapseDetection(CollapseDetection),
    TwoPointer(TwoPointer),
    Consecutive(Consecutive),
    DeviationSweep(DeviationSweep),
    Warming(Warming),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladSpec {
    /// Output rows after the initial one.
    #[serde(default = "ten")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub format_version: String,
    /// Master seed of every random stream.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<PovmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad: Option<LindbladSpec>,
    /// Default output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl RunConfig {
    /// Every semantic problem, each with the path of the offending field.
    pub fn problems(&self) -> Vec<GrwError> {
        let mut out = Vec::new();
        let mut bad = |path: &str, msg: &str| out.push(GrwError::Config { path: path.into(), msg: msg.into() });
        if let Err(GrwError::Config { msg, .. }) = check_version(&self.format_version, "/format_version") {
            bad("/format_version", &msg);
        }
        if let Some(m) = &self.model {
            if m.n_particles == 0 {
                bad("/model/n_particles", "must be positive");
            }
            if m.sites == 0 {
                bad("/model/sites", "must be positive");
            }
            if !(m.spacing > 0.0 && m.spacing.is_finite()) {
                bad("/model/spacing", "must be positive");
            }
            if !(m.lambda >= 0.0 && m.lambda.is_finite()) {
                bad("/model/lambda", "must be non-negative");
            }
            if !(m.sigma > 0.0 && m.sigma.is_finite()) {
                bad("/model/sigma", "must be positive");
            }
            if let Some(ms) = &m.masses {
                if ms.len() != m.n_particles {
                    bad("/model/masses", "needs one entry per particle");
                }
                for (k, x) in ms.iter().enumerate() {
                    if !(*x > 0.0 && x.is_finite()) {
                        bad(&format!("/model/masses/{k}"), "must be positive");
                    }
                }
            }
            if let Some(a) = &m.active_labels {
                for (k, &i) in a.iter().enumerate() {
                    if i >= m.n_particles {
                        bad(&format!("/model/active_labels/{k}"), "label out of range");
                    }
                }
            }
            if m.n_particles > 0 && m.sites > 0 && (m.sites as f64).powi(m.n_particles as i32) > 4096.0 {
                bad("/model", "Hilbert dimension exceeds 4096");
            }
        }
        if let Some(w) = self.window {
            if !(w.1 > w.0) {
                bad("/window", "end must be after start");
            }
        }
        if let Some(e) = &self.ensemble {
            if e.m == 0 {
                bad("/ensemble/m", "must be positive");
            }
        }
        if let Some(ExperimentSpec::Standard { setup, .. }) = &self.experiment {
            if !(setup.sigma > 0.0) {
                bad("/experiment/setup/sigma", "must be positive");
            }
            if !(setup.lambda >= 0.0) {
                bad("/experiment/setup/lambda", "must be non-negative");
            }
            if !(setup.window.1 > setup.window.0) {
                bad("/experiment/setup/window", "end must be after start");
            }
        }
        if let Some(v) = &self.verify {
            if v.tests.is_empty() {
                bad("/verify/tests", "no tests listed");
            }
            for (k, t) in v.tests.iter().enumerate() {
                let needs_split = matches!(t, VerifyTest::MarginalProbability | VerifyTest::Independence { .. } | VerifyTest::MarginalMaster);
                if needs_split && v.split.is_none() {
                    bad(&format!("/verify/tests/{k}"), "needs /verify/split");
                }
                if let VerifyTest::LinearityInRho { p, .. } = t {
                    if !(0.0..=1.0).contains(p) {
                        bad(&format!("/verify/tests/{k}/p"), "must lie in [0, 1]");
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let mut p = self.problems();
        match p.len() {
            0 => Ok(()),
            1 => Err(p.remove(0)),
            _ => Err(GrwError::ConfigErrors(p)),
        }
    }

    pub fn model(&self) -> Result<GrwModel> {
        self.model.as_ref().ok_or_else(|| missing("/model"))?.build()
    }

    pub fn window(&self) -> Result<(f64, f64)> {
        self.window.ok_or_else(|| missing("/window"))
    }

    pub fn initial_state(&self, dim: usize) -> Result<StateVector> {
        self.initial_state.as_ref().ok_or_else(|| missing("/initial_state"))?.build(dim)
    }

    pub fn trajectories(&self) -> Result<usize> {
        Ok(self.ensemble.as_ref().ok_or_else(|| missing("/ensemble"))?.m)
    }
}

pub fn missing(path: &str) -> GrwError {
    GrwError::Config { path: path.into(), msg: "required field is missing".into() }
}

/// Parses a config; type errors report the path of the first offending
/// field, semantic checks report every problem.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "/".to_string() } else { format!("/{}", path.replace('.', "/")) };
        GrwError::Config { path, msg: e.inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

pub fn write_config(cfg: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    write_json(cfg, path)
}

// ---------------------------------------------------------------------------
// Generic writers

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// POVM files

#[derive(Serialize, Deserialize)]
struct PovmFile {
    format_version: String,
    dim: usize,
    outcomes: Vec<String>,
    /// Row-major `[re, im]` entries per effect.
    effects: Vec<Vec<Vec<[f64; 2]>>>,
    meta: PovmMeta,
}

pub fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

pub fn pairs_to_matrix(p: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let n = p.len();
    if p.iter().any(|r| r.len() != n) {
        return Err(GrwError::Dimension("matrix is not square".into()));
    }
    Ok(ComplexMatrix::from_fn(n, n, |r, c| Complex64::new(p[r][c][0], p[r][c][1])))
}

pub fn povm_to_json(povm: &Povm) -> Result<String> {
    let f = PovmFile {
        format_version: FORMAT_VERSION.into(),
        dim: povm.dim(),
        outcomes: povm.outcomes.clone(),
        effects: povm.effects.iter().map(matrix_to_pairs).collect(),
        meta: povm.meta.clone(),
    };
    Ok(serde_json::to_string_pretty(&f)?)
}

pub fn povm_from_json(text: &str) -> Result<Povm> {
    let f: PovmFile = serde_json::from_str(text)?;
    check_version(&f.format_version, "/format_version")?;
    let effects = f.effects.iter().map(|e| pairs_to_matrix(e)).collect::<Result<Vec<_>>>()?;
    if effects.len() != f.outcomes.len() || effects.iter().any(|e| e.nrows() != f.dim) {
        return Err(GrwError::Dimension("POVM file is inconsistent".into()));
    }
    Ok(Povm { outcomes: f.outcomes, effects, meta: f.meta })
}

pub fn write_povm(povm: &Povm, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, povm_to_json(povm)? + "\n")?;
    Ok(())
}

pub fn read_povm(path: impl AsRef<Path>) -> Result<Povm> {
    povm_from_json(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Reports

/// Verification results with the inputs that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub format_version: String,
    pub seed: u64,
    pub pass: bool,
    pub reports: Vec<crate::verify::GofReport>,
}

impl Report {
    pub fn new(seed: u64, reports: Vec<crate::verify::GofReport>) -> Self {
        let pass = reports.iter().all(|r| r.pass);
        Self { format_version: FORMAT_VERSION.into(), seed, pass, reports }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(crate::verify::GofReport::csv_header());
        s.push('\n');
        for r in &self.reports {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`.
pub fn write_report(report: &Report, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_json(report, dir.join(format!("{stem}.json")))?;
    fs::write(dir.join(format!("{stem}.csv")), report.to_csv())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Trajectory records

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub x: usize,
    pub i: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub t: f64,
    /// SHA-256 of the state's little-endian `(re, im)` bytes.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub format_version: String,
    pub id: u64,
    pub seed: u64,
    pub window: (f64, f64),
    pub events: Vec<EventRecord>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub final_state_hash: String,
}

pub fn state_digest(psi: &StateVector) -> String {
    let mut h = Sha256::new();
    for z in psi.iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl TrajectoryRecord {
    pub fn from_trajectory(tr: &Trajectory) -> Self {
        let events = tr.history.events.iter().map(|e: &FlashEvent| EventRecord { t: e.time, x: e.site, i: e.label }).collect();
        let checkpoints = tr.checkpoints.iter().map(|(t, s)| CheckpointRecord { t: *t, digest: state_digest(s) }).collect();
        Self {
            format_version: FORMAT_VERSION.into(),
            id: tr.stream,
            seed: tr.seed,
            window: (tr.history.start, tr.history.end),
            events,
            checkpoints,
            final_state_hash: state_digest(tr.final_state()),
        }
    }

    /// One JSONL line without the trailing newline.
    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(line)?;
        check_version(&r.format_version, "/format_version")?;
        if r.events.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(GrwError::UnorderedHistory);
        }
        Ok(r)
    }
}

/// Writes records as JSONL, in the given order, from a single writer.
pub fn write_jsonl(records: &[TrajectoryRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        writeln!(f, "{}", r.to_line()?)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<(String, TrajectoryRecord)>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok((l.to_string(), TrajectoryRecord::from_line(l)?)))
        .collect()
}

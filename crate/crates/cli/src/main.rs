// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! `grw-lab` command-line front end.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 invalid config.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use grw_lab::experiments::{self, ScenarioResult};
use grw_lab::formalism::{self, ExactSettings, RuntimeMethod};
use grw_lab::io::{self, RunConfig, ScenarioSpec, VerifyTest};
use grw_lab::jump::{CheckpointMode, Simulator};
use grw_lab::master::{evolve_density, DensityOperator};
use grw_lab::rng::derive_seed;
use grw_lab::verify::{self, GofReport};
use grw_lab::{linalg, GrwError, Result};

#[derive(Parser)]
#[command(name = "grw-lab", version, about = "GRW collapse simulations and laws of operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "GRW_LAB_JOBS")]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write them as JSONL.
    Simulate,
    /// Integrate the master equation and tabulate the density matrix.
    Lindblad,
    /// Construct a POVM for the configured experiment.
    Povm,
    /// Run the configured verification checks.
    Verify,
    /// Run the configured scenario.
    Scenario,
    /// Re-simulate trajectory records and compare them byte for byte.
    Replay {
        /// JSONL file of trajectory records.
        records: PathBuf,
    },
}

enum Failure {
    Config(GrwError),
    Check(String),
    Runtime(GrwError),
}

impl From<GrwError> for Failure {
    fn from(e: GrwError) -> Self {
        match e {
            GrwError::Config { .. } | GrwError::ConfigErrors(_) => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        // Fails only if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            match e {
                GrwError::ConfigErrors(list) => {
                    for e in list {
                        eprintln!("config error: {e}");
                    }
                }
                e => eprintln!("config error: {e}"),
            }
            ExitCode::from(2)
        }
    }
}

fn load(cli: &Cli) -> std::result::Result<RunConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config(io::missing("--config")))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(GrwError::Config { path: path.display().to_string(), msg: e.to_string() }))?;
    let mut cfg = io::parse_config(&text).map_err(Failure::Config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cli.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn config_err(e: GrwError) -> Failure {
    match e {
        GrwError::Config { .. } => Failure::Config(e),
        other => Failure::Runtime(other),
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let cfg = load(cli)?;
    let out = out_dir(cli, &cfg)?;
    match &cli.command {
        Command::Simulate => simulate(&cfg, &out),
        Command::Lindblad => lindblad(&cfg, &out, cli.format),
        Command::Povm => povm(&cfg, &out),
        Command::Verify => verify_suite(&cfg, &out),
        Command::Scenario => scenario(&cfg, &out, cli.seed),
        Command::Replay { records } => replay(&cfg, records, &out),
    }
}

fn simulate(cfg: &RunConfig, out: &Path) -> std::result::Result<(), Failure> {
    let model = cfg.model().map_err(config_err)?;
    let psi = cfg.initial_state(model.dim()).map_err(config_err)?;
    let window = cfg.window().map_err(config_err)?;
    let m = cfg.trajectories().map_err(config_err)?;
    let sim = Simulator::new(&model)?;
    let records = sim.ensemble(&psi, window, cfg.seed, m, CheckpointMode::Flashes, |tr| io::TrajectoryRecord::from_trajectory(&tr))?;
    let path = out.join("trajectories.jsonl");
    io::write_jsonl(&records, &path)?;
    println!("wrote {} trajectories to {}", records.len(), path.display());
    Ok(())
}

fn lindblad(cfg: &RunConfig, out: &Path, format: Format) -> std::result::Result<(), Failure> {
    let model = cfg.model().map_err(config_err)?;
    let psi = cfg.initial_state(model.dim()).map_err(config_err)?;
    let window = cfg.window().map_err(config_err)?;
    let spec = cfg.lindblad.clone().unwrap_or(io::LindbladSpec { points: 10, steps: None });
    let points = spec.points.max(1);
    let d = model.dim();
    let mut rho = DensityOperator::pure(&psi);
    let dt = (window.1 - window.0) / points as f64;
    let mut rows = Vec::new();
    let row = |t: f64, rho: &DensityOperator| {
        let m = rho.matrix();
        let mut r = vec![t, linalg::trace(m).re, linalg::trace(&(m * m)).re];
        r.extend((0..d).map(|q| m[(q, q)].re));
        r
    };
    rows.push(row(window.0, &rho));
    for k in 0..points {
        let a = window.0 + k as f64 * dt;
        let steps = spec.steps.map(|s| (s / points).max(1));
        rho = evolve_density(&model, &rho, (a, a + dt), steps)?;
        rows.push(row(a + dt, &rho));
    }
    let mut columns = vec!["t".to_string(), "trace".into(), "purity".into()];
    columns.extend((0..d).map(|q| format!("p{q}")));
    let curve = experiments::Curve { name: "lindblad".into(), columns, rows };
    let path = match format {
        Format::Csv => {
            let p = out.join("lindblad.csv");
            fs::write(&p, curve.to_csv()).map_err(GrwError::from)?;
            p
        }
        Format::Json => {
            let p = out.join("lindblad.json");
            io::write_json(&curve, &p)?;
            p
        }
    };
    println!("wrote {}", path.display());
    Ok(())
}

fn povm(cfg: &RunConfig, out: &Path) -> std::result::Result<(), Failure> {
    let model = cfg.model.as_ref().map(|m| m.build()).transpose()?;
    let exp = cfg.experiment.as_ref().ok_or_else(|| Failure::Config(io::missing("/experiment")))?.build(model.as_ref())?;
    let spec = cfg.povm.clone().ok_or_else(|| Failure::Config(io::missing("/povm")))?;
    let random = exp.stopping.is_some();
    let povm = match spec.method {
        io::PovmMethodSpec::Quantum => formalism::quantum_povm(&exp)?,
        io::PovmMethodSpec::Exact { n_max } if random => formalism::random_runtime_povm(&exp, RuntimeMethod::Exact(ExactSettings::new(n_max)))?,
        io::PovmMethodSpec::Exact { n_max } => formalism::grw_povm_exact(&exp, &ExactSettings::new(n_max))?.0,
        io::PovmMethodSpec::MonteCarlo { m } if random => formalism::random_runtime_povm(&exp, RuntimeMethod::MonteCarlo { m, seed: cfg.seed })?,
        io::PovmMethodSpec::MonteCarlo { m } => formalism::grw_povm_mc(&exp, m, cfg.seed)?,
    };
    io::write_povm(&povm, out.join("povm.json"))?;
    println!("wrote {} effects, completeness error {:.3e}", povm.effects.len(), povm.completeness_error());
    if spec.compare_quantum && !random {
        let qu = formalism::quantum_povm(&exp)?;
        let d = experiments::deviation(&povm, &qu);
        io::write_json(&serde_json::json!({ "format_version": io::FORMAT_VERSION, "deviation_op_norm": d }), out.join("comparison.json"))?;
        println!("max operator-norm distance to the quantum POVM: {d:.6e}");
    }
    Ok(())
}

fn verify_suite(cfg: &RunConfig, out: &Path) -> std::result::Result<(), Failure> {
    let spec = cfg.verify.as_ref().ok_or_else(|| Failure::Config(io::missing("/verify")))?;
    let model = cfg.model().map_err(config_err)?;
    let window = cfg.window().map_err(config_err)?;
    let m = cfg.trajectories().map_err(config_err)?;
    let psi = cfg.initial_state(model.dim()).map_err(config_err)?;
    let mut reports: Vec<GofReport> = Vec::new();
    for (k, test) in spec.tests.iter().enumerate() {
        let seed = derive_seed(cfg.seed, k as u64);
        let split = || spec.split.clone().ok_or_else(|| Failure::Config(io::missing("/verify/split")));
        let r = match test {
            VerifyTest::ConditionalProbability { s } => verify::test_conditional_probability(&model, &psi, *s, window.1, m, seed)?,
            VerifyTest::MarginalProbability => verify::test_marginal_probability(&model, &split()?, &psi, window, m, seed)?,
            VerifyTest::Independence { state } => {
                let psi = match state {
                    Some(s) => s.build(model.dim()).map_err(config_err)?,
                    None => psi.clone(),
                };
                verify::test_independence(&model, &split()?, &psi, window, m, seed)?
            }
            VerifyTest::MarginalMaster => verify::test_marginal_master(&model, &split()?, &DensityOperator::pure(&psi), window)?,
            VerifyTest::PoissonCounts => verify::test_poisson_counts(&model, window, m, seed)?,
            VerifyTest::DensitySufficiency { ensemble_a, ensemble_b } => {
                let build = |e: &Vec<(f64, io::StateSpec)>| -> Result<verify::Ensemble> {
                    let states = e.iter().map(|(_, s)| s.build(model.dim())).collect::<Result<Vec<_>>>()?;
                    Ok((e.iter().map(|p| p.0).collect(), states))
                };
                let (a, b) = (build(ensemble_a).map_err(config_err)?, build(ensemble_b).map_err(config_err)?);
                verify::test_density_sufficiency(&model, &a, &b, window, m, seed)?
            }
            VerifyTest::LinearityInRho { state_b, p } => {
                let exp = cfg.experiment.as_ref().ok_or_else(|| Failure::Config(io::missing("/experiment")))?.build(Some(&model))?;
                let ds = exp.d_sys();
                let a = cfg.initial_state(ds).map_err(config_err)?;
                let b = state_b.build(ds).map_err(config_err)?;
                verify::test_linearity_in_rho(&exp, &linalg::projector(&a), &linalg::projector(&b), *p, m, seed)?
            }
        };
        println!("{} {} (value {:.4e}, threshold {:.1e})", if r.pass { "PASS" } else { "FAIL" }, r.test, r.value, r.threshold);
        reports.push(r);
    }
    let report = io::Report::new(cfg.seed, reports);
    io::write_report(&report, out, "report")?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check("verification suite".into()))
    }
}

fn scenario(cfg: &RunConfig, out: &Path, seed: Option<u64>) -> std::result::Result<(), Failure> {
    let spec = cfg.scenario.clone().ok_or_else(|| Failure::Config(io::missing("/scenario")))?;
    let s = seed.unwrap_or(cfg.seed);
    let r: ScenarioResult = match spec {
        ScenarioSpec::CollapseDetection(c) => experiments::run_collapse_detection(&experiments::CollapseDetection { seed: s, ..c })?,
        ScenarioSpec::TwoPointer(c) => experiments::run_two_pointer(&experiments::TwoPointer { seed: s, ..c })?,
        ScenarioSpec::Consecutive(c) => experiments::run_consecutive(&experiments::Consecutive { seed: s, ..c })?,
        ScenarioSpec::DeviationSweep(c) => experiments::run_deviation_sweep(&c)?,
        ScenarioSpec::Warming(c) => experiments::run_warming(&experiments::Warming { seed: s, ..c })?,
    };
    io::write_json(&r, out.join(format!("{}.json", r.id)))?;
    for c in &r.curves {
        fs::write(out.join(format!("{}_{}.csv", r.id, c.name)), c.to_csv()).map_err(GrwError::from)?;
    }
    for q in &r.quantities {
        let tag = match q.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        println!("{tag} {} = {} ± {}", q.name, q.value, q.std_error);
    }
    if r.pass {
        Ok(())
    } else {
        Err(Failure::Check(format!("scenario {}", r.id)))
    }
}

fn replay(cfg: &RunConfig, records: &Path, out: &Path) -> std::result::Result<(), Failure> {
    let model = cfg.model().map_err(config_err)?;
    let psi = cfg.initial_state(model.dim()).map_err(config_err)?;
    let sim = Simulator::new(&model)?;
    let input = io::read_jsonl(records)?;
    let mut replayed = Vec::new();
    let mut mismatches = 0;
    for (line, rec) in &input {
        let tr = sim.trajectory(&psi, rec.window, rec.seed, rec.id, CheckpointMode::Flashes)?;
        let again = io::TrajectoryRecord::from_trajectory(&tr);
        if again.to_line()? != *line {
            mismatches += 1;
            eprintln!("trajectory {} differs", rec.id);
        }
        replayed.push(again);
    }
    io::write_jsonl(&replayed, out.join("replayed.jsonl"))?;
    println!("replayed {} trajectories, {} mismatches", input.len(), mismatches);
    if mismatches == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{mismatches} replayed trajectories differ")))
    }
}

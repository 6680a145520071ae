//! Batch front end: plant registry lookup, config-driven evaluation and
//! synthesis runs, and table reproduction as CSV.

pub mod config;
pub mod tables;

use std::path::Path;

use coherent_core::closedloop::{ControllerRealization, DirectCoupling};
use coherent_core::ga::{run_ga, GaConfig, SearchSpace, SynthesisResult};
use coherent_core::lmi::{alternating_projection_solve, verify_candidate, CandidateSolution, LmiConfig, VerificationReport};
use coherent_core::performance::{evaluate, PerformanceReport};
use coherent_core::{io, Error};
use serde::{Deserialize, Serialize};

pub use config::{RunConfig, Subcommand};

pub const DEFAULT_LMI_GAMMA_L: f64 = 2.5;
pub const DEFAULT_LMI_GAMMA_INF: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("no solution: {0}")]
    Infeasible(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Infeasible(_) => 2,
            Failure::Config(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoFeasible | Error::MaxIterations { .. } => Failure::Infeasible(e.to_string()),
            Error::Config(_) | Error::InvalidParams(_) | Error::Serde(_) => Failure::Config(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn save<T: Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    write(path, &(io::to_string(value)? + "\n"))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))
}

/// Controller file shared by the synthesis commands and `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredController {
    pub plant: String,
    pub controller: ControllerRealization,
    pub coupling: Option<DirectCoupling>,
    pub report: PerformanceReport,
}

pub fn report_csv(report: &PerformanceReport) -> String {
    format!("{}\n{}\n", PerformanceReport::CSV_HEADER, report.csv_fields().join(","))
}

/// Re-evaluates a stored controller against the configured plant.
pub fn run_evaluate(cfg: &RunConfig) -> Result<PerformanceReport, Failure> {
    let path = cfg.controller.as_ref().ok_or_else(|| Failure::Config("evaluate needs --controller".into()))?;
    let stored: StoredController = io::load(path)?;
    let plant = cfg.plant_model()?;
    let (_, report) = evaluate(&plant, &stored.controller, stored.coupling.as_ref())?;
    Ok(report)
}

/// Runs the GA and writes `controller.json`, `trace.csv` and `report.csv` to the
/// output directory. When both thresholds are set, an H-infinity value at or
/// above `gamma_inf` is reported as infeasible after the files are written.
pub fn run_synthesize_ga(cfg: &RunConfig) -> Result<SynthesisResult, Failure> {
    let plant = cfg.plant_model()?;
    let space = SearchSpace::for_plant(&plant, cfg.mode);
    let ga = GaConfig {
        population_size: cfg.pop,
        generations: cfg.gens,
        rng_seed: cfg.seed,
        constraint: cfg.ga_constraint(),
        execution: cfg.execution,
        ..GaConfig::default()
    };
    let result = run_ga(&plant, &space, &ga)?;
    create_dir(&cfg.out)?;
    let stored = StoredController {
        plant: cfg.plant.clone(),
        controller: result.controller.clone(),
        coupling: result.coupling.clone(),
        report: result.report.clone(),
    };
    save(&stored, &cfg.out.join("controller.json"))?;
    write(&cfg.out.join("trace.csv"), &result.trace_csv())?;
    write(&cfg.out.join("report.csv"), &report_csv(&result.report))?;
    if let (Some(_), Some(gi)) = (cfg.gamma_l, cfg.gamma_inf) {
        match result.report.hinf {
            Some(h) if h < gi => {}
            h => return Err(Failure::Infeasible(format!("H-infinity {h:?} does not meet {gi}"))),
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiOutcome {
    pub gamma_l: f64,
    pub gamma_inf: f64,
    pub candidate: CandidateSolution,
    pub verification: VerificationReport,
}

/// Runs the alternating-projection heuristic at the configured thresholds
/// (default `gamma_l = 2.5`, `gamma_inf = 0.1`) and writes the candidate and
/// its verification report. The best unverified candidate is still written.
pub fn run_synthesize_lmi(cfg: &RunConfig) -> Result<LmiOutcome, Failure> {
    let plant = cfg.plant_model()?;
    let gamma_l = cfg.gamma_l.unwrap_or(DEFAULT_LMI_GAMMA_L);
    let gamma_inf = cfg.gamma_inf.unwrap_or(DEFAULT_LMI_GAMMA_INF);
    let lmi = LmiConfig {
        restarts: cfg.restarts,
        max_iterations: cfg.max_iterations,
        seed: cfg.seed,
        execution: cfg.execution,
        ..LmiConfig::default()
    };
    let (candidate, converged) = match alternating_projection_solve(&plant, gamma_l, gamma_inf, &lmi) {
        Ok(c) => (c, true),
        Err(Error::MaxIterations { best, .. }) => (*best, false),
        Err(e) => return Err(e.into()),
    };
    let verification = verify_candidate(&candidate, &plant, gamma_l, gamma_inf)?;
    create_dir(&cfg.out)?;
    let outcome = LmiOutcome { gamma_l, gamma_inf, candidate, verification };
    save(&outcome, &cfg.out.join("candidate.json"))?;
    save(&outcome.verification, &cfg.out.join("verification.json"))?;
    if let Some(k) = &outcome.candidate.controller {
        if let Ok((_, report)) = evaluate(&plant, k, None) {
            let stored = StoredController { plant: cfg.plant.clone(), controller: k.clone(), coupling: None, report };
            save(&stored, &cfg.out.join("controller.json"))?;
        }
    }
    if !converged || !outcome.verification.pass {
        return Err(Failure::Infeasible(format!(
            "no verified candidate after {} iterations",
            outcome.candidate.iterations
        )));
    }
    Ok(outcome)
}

/// Writes the four table CSVs and `timings.csv` to the output directory.
pub fn run_reproduce_tables(cfg: &RunConfig) -> Result<tables::TableSet, Failure> {
    let set = tables::reproduce_tables(cfg)?;
    create_dir(&cfg.out)?;
    for (name, text) in set.files() {
        write(&cfg.out.join(name), text)?;
    }
    Ok(set)
}

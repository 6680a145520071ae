use std::path::{Path, PathBuf};

use coherent_core::closedloop::PlantModel;
use coherent_core::exec::Execution;
use coherent_core::ga::{Constraint, Index, Interval, SearchMode};
use coherent_core::{io, registry};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Evaluate,
    SynthesizeGa,
    SynthesizeLmi,
    ReproduceTables,
}

/// Parameters of one run. Every field has a default, so a config file may
/// name any subset of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<Subcommand>,
    /// `cavity`, `dpa`, or the path of a plant JSON file.
    pub plant: String,
    pub mode: SearchMode,
    pub gamma_l: Option<f64>,
    pub gamma_inf: Option<f64>,
    /// Index minimized by `synthesize-ga` when no threshold is given.
    pub objective: Index,
    pub seed: u64,
    pub pop: usize,
    pub gens: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stored controller read by `evaluate`.
    pub controller: Option<PathBuf>,
    pub out: PathBuf,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: None,
            plant: "cavity".into(),
            mode: SearchMode::PassiveOnly,
            gamma_l: None,
            gamma_inf: None,
            objective: Index::Lqg,
            seed: 1,
            pop: 50,
            gens: 200,
            restarts: 4,
            max_iterations: 300,
            controller: None,
            out: PathBuf::from("out"),
            execution: Execution::available(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        for (name, g) in [("gamma_l", self.gamma_l), ("gamma_inf", self.gamma_inf)] {
            if let Some(g) = g {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Failure::Config(format!("{name} must be positive, got {g}")));
                }
            }
        }
        if self.pop < 2 || !self.pop.is_multiple_of(2) {
            return Err(Failure::Config(format!("pop must be even and at least 2, got {}", self.pop)));
        }
        if self.gens == 0 || self.restarts == 0 || self.max_iterations == 0 {
            return Err(Failure::Config("gens, restarts and max_iterations must be positive".into()));
        }
        if !matches!(self.plant.as_str(), "cavity" | "dpa") && !Path::new(&self.plant).is_file() {
            return Err(Failure::Config(format!("unknown plant or missing file: {}", self.plant)));
        }
        if let Some(c) = &self.controller {
            if !c.is_file() {
                return Err(Failure::Config(format!("controller file not found: {}", c.display())));
            }
        }
        Ok(())
    }

    pub fn plant_model(&self) -> Result<PlantModel, Failure> {
        let plant = resolve_plant(&self.plant)?;
        plant.validate().map_err(|e| Failure::Config(format!("plant {}: {e}", self.plant)))?;
        Ok(plant)
    }

    /// GA constraint implied by the thresholds. With both thresholds the LQG
    /// bound is enforced during the search and the H-infinity bound checked
    /// on the result.
    pub fn ga_constraint(&self) -> Constraint {
        match (self.gamma_l, self.gamma_inf) {
            (Some(gl), _) => Constraint::FixLqg { interval: Interval { lo: 0.0, hi: gl } },
            (None, Some(gi)) => Constraint::FixHinf { interval: Interval { lo: 0.0, hi: gi } },
            (None, None) => Constraint::None { minimize: self.objective },
        }
    }
}

pub fn resolve_plant(name: &str) -> Result<PlantModel, Failure> {
    match name {
        "cavity" => Ok(registry::cavity()),
        "dpa" => Ok(registry::dpa()),
        path => io::load(path).map_err(|e| Failure::Config(e.to_string())),
    }
}

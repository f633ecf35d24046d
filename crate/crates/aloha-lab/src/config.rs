//! Scenario files: JSON documents carrying the system parameters plus optional
//! simulation and solver blocks.

use std::path::Path;

use aloha_energy::optimize::SolverOptions;
use aloha_energy::sim::SimParams;
use aloha_energy::SystemConfig;
use serde::Deserialize;

use crate::CliError;

/// Parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: SystemConfig,
    pub labels: Option<Vec<String>>,
    pub sim: SimParams,
    pub solver: SolverOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    c1: f64,
    c2: f64,
    energy_budgets: Vec<f64>,
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    sim: SimBlock,
    #[serde(default)]
    solver: SolverBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimBlock {
    #[serde(default = "default_frames")]
    frames: u64,
    #[serde(default = "default_slots")]
    slots_per_frame: u32,
    #[serde(default = "default_seed")]
    seed: u64,
}

impl Default for SimBlock {
    fn default() -> Self {
        Self {
            frames: default_frames(),
            slots_per_frame: default_slots(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverBlock {
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default)]
    n_guard_override: bool,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            n_guard_override: false,
        }
    }
}

fn default_frames() -> u64 {
    100_000
}
fn default_slots() -> u32 {
    100
}
fn default_seed() -> u64 {
    42
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    10_000
}

/// Loads a scenario file. Unreadable paths are I/O failures; malformed
/// documents and invariant violations are configuration errors with a
/// line/field diagnostic.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses a scenario document from a string.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!(
            "line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let system = SystemConfig::new(file.energy_budgets, file.c1, file.c2)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(labels) = &file.labels {
        if labels.len() != system.num_users() {
            return Err(CliError::Config(format!(
                "field labels: {} labels for {} users",
                labels.len(),
                system.num_users()
            )));
        }
    }
    if file.sim.frames == 0 || file.sim.slots_per_frame == 0 {
        return Err(CliError::Config(
            "field sim: frames and slots_per_frame must be at least 1".into(),
        ));
    }
    if !file.solver.tol.is_finite() || file.solver.tol <= 0.0 || file.solver.max_iter == 0 {
        return Err(CliError::Config(
            "field solver: tol must be positive and max_iter at least 1".into(),
        ));
    }
    Ok(Scenario {
        system,
        labels: file.labels,
        sim: SimParams {
            frames: file.sim.frames,
            slots_per_frame: file.sim.slots_per_frame,
            seed: file.sim.seed,
        },
        solver: SolverOptions {
            tol: file.solver.tol,
            max_iter: file.solver.max_iter,
            override_user_guard: file.solver.n_guard_override,
        },
    })
}

//! Subcommand implementations. Each produces rows in the shared schema;
//! human-readable detail goes to stderr so machine output stays clean.

use aloha_energy::game::{self, DynamicsKind, DynamicsOptions};
use aloha_energy::model::{self, StrategyProfile, Variant, DEFAULT_FEASIBILITY_TOL};
use aloha_energy::optimize::{self, OracleOptions};
use aloha_energy::sim::{self, SimParams};
use aloha_energy::{Error, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Scenario;
use crate::rows::ResultRow;
use crate::CliError;

fn from_core(e: Error) -> CliError {
    match e {
        Error::NoConvergence { .. }
        | Error::TooManyUsers { .. }
        | Error::AllCandidatesFailed { .. } => CliError::Solver(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn user_name(scenario: &Scenario, i: usize) -> String {
    scenario
        .labels
        .as_ref()
        .map(|l| l[i].clone())
        .unwrap_or_else(|| format!("user{}", i + 1))
}

pub fn analyze(
    scenario: &Scenario,
    variant: Variant,
    access: Vec<f64>,
    on: Vec<f64>,
    tol: Option<f64>,
) -> Result<Vec<ResultRow>, CliError> {
    let profile = StrategyProfile::new(variant, access, on).map_err(from_core)?;
    let metrics = model::evaluate(&profile, &scenario.system).map_err(from_core)?;
    let feasibility = model::is_feasible(
        &profile,
        &scenario.system,
        tol.unwrap_or(DEFAULT_FEASIBILITY_TOL),
    )
    .map_err(from_core)?;

    eprintln!(
        "{} profile, {}:",
        variant.name(),
        if feasibility.feasible {
            "feasible"
        } else {
            "infeasible"
        }
    );
    for i in 0..profile.len() {
        eprintln!(
            "  {}: throughput {:.6}, energy {:.4}, slack {:+.4}",
            user_name(scenario, i),
            metrics.throughput[i],
            metrics.energy[i],
            feasibility.slack[i],
        );
    }

    let mut row = ResultRow::new("analyze");
    row.total_throughput = Some(metrics.total_throughput);
    if !feasibility.feasible {
        row.status = "infeasible".into();
    }
    Ok(vec![row])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Alg1,
    Fair,
    Alg2,
    Oracle,
}

pub fn optimize_cmd(
    scenario: &Scenario,
    method: Method,
    samples: Option<usize>,
    step: Option<f64>,
    seed: Option<u64>,
) -> Result<Vec<ResultRow>, CliError> {
    let system = &scenario.system;
    let (label, total) = match method {
        Method::Alg1 => {
            let result = optimize::optimal_activation(system);
            eprintln!(
                "activation schedule: {} of {} users enabled, q = {:?}",
                result.active_set.len(),
                system.num_users(),
                result.profile.on_probs()
            );
            ("alg1", result.total_throughput)
        }
        Method::Fair => {
            let profile = optimize::fair_allocation(system, None).map_err(from_core)?;
            let metrics = model::evaluate(&profile, system).map_err(from_core)?;
            eprintln!("fair allocation: q = {:?}", profile.on_probs());
            ("fair", metrics.total_throughput)
        }
        Method::Alg2 => {
            let schedule =
                optimize::optimal_partition(system, &scenario.solver).map_err(from_core)?;
            eprintln!(
                "partition schedule: aggressive {:?}, conservative {:?}, passive {:?}{}",
                schedule.assignment.aggressive,
                schedule.assignment.conservative,
                schedule.assignment.passive,
                if schedule.single_user_fallback {
                    " (single-user fallback)"
                } else {
                    ""
                }
            );
            ("alg2", schedule.total_throughput)
        }
        Method::Oracle => {
            let opts = OracleOptions {
                step: step.unwrap_or(0.05),
                samples: samples.unwrap_or(10_000),
                seed: seed.unwrap_or(scenario.sim.seed),
            };
            let result = optimize::grid_oracle(system, &opts).map_err(from_core)?;
            eprintln!("oracle best profile: q = {:?}", result.profile.on_probs());
            ("oracle", result.total_throughput)
        }
    };
    let mut row = ResultRow::new(label);
    row.total_throughput = Some(total);
    Ok(vec![row])
}

pub enum GameAction {
    NepOriginal,
    Enumerate,
    Dynamics {
        seed_profile: Option<u64>,
        max_rounds: Option<usize>,
        order_seed: Option<u64>,
    },
}

pub fn game_cmd(scenario: &Scenario, action: GameAction) -> Result<Vec<ResultRow>, CliError> {
    let system = &scenario.system;
    match action {
        GameAction::NepOriginal => {
            let nep = game::nep_original(system);
            let metrics = model::evaluate(&nep, system).map_err(from_core)?;
            let poa = game::price_of_anarchy_original(system);
            eprintln!("original-game equilibrium: q = {:?}", nep.on_probs());
            let mut row = ResultRow::new("nep_original");
            row.total_throughput = Some(metrics.total_throughput);
            row.poa = Some(poa);
            Ok(vec![row])
        }
        GameAction::Enumerate => {
            let report = game::equilibrium_report(system, &scenario.solver).map_err(from_core)?;
            for (k, eq) in report.equilibria.iter().enumerate() {
                eprintln!(
                    "equilibrium {}: backoff {:?}, q {:?}, total {:.6}{}",
                    k + 1,
                    eq.profile.access_probs(),
                    eq.profile.on_probs(),
                    eq.metrics.total_throughput,
                    if eq.payoff_equivalent {
                        " (payoff-equivalent)"
                    } else {
                        ""
                    }
                );
            }
            let mut row = ResultRow::new("modified_game");
            row.total_throughput = Some(report.mean_total_throughput);
            row.poa = Some(report.poa);
            row.pos = Some(report.pos);
            row.mean_total = Some(report.mean_total_throughput);
            row.nep_count = Some(report.equilibria.len());
            if report.skipped_patterns > 0 {
                row.status = format!("ok ({} patterns skipped)", report.skipped_patterns);
            }
            Ok(vec![row])
        }
        GameAction::Dynamics {
            seed_profile,
            max_rounds,
            order_seed,
        } => {
            let caps = system.energy_caps();
            let n = system.num_users();
            let initial = match seed_profile {
                None => StrategyProfile::modified(vec![1.0; n], caps.values().to_vec())
                    .map_err(from_core)?,
                Some(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let backoff: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                    let q: Vec<f64> = (0..n).map(|i| rng.gen::<f64>() * caps.get(i)).collect();
                    StrategyProfile::modified(backoff, q).map_err(from_core)?
                }
            };
            let mut opts = DynamicsOptions {
                order_seed,
                ..DynamicsOptions::default()
            };
            if let Some(rounds) = max_rounds {
                opts.max_rounds = rounds;
            }
            let outcome =
                game::best_response_dynamics(system, &initial, &opts).map_err(from_core)?;
            let metrics = model::evaluate(&outcome.final_profile, system).map_err(from_core)?;
            eprintln!(
                "dynamics: {:?} after {} rounds ({} profiles visited), final backoff {:?}, q {:?}",
                outcome.kind,
                outcome.rounds,
                outcome.trajectory_length,
                outcome.final_profile.access_probs(),
                outcome.final_profile.on_probs()
            );
            let mut row = ResultRow::new("modified_dynamics");
            row.total_throughput = Some(metrics.total_throughput);
            row.status = match outcome.kind {
                DynamicsKind::Converged => "converged".into(),
                DynamicsKind::Cycle => "cycle".into(),
                DynamicsKind::MaxRounds => "max_rounds".into(),
            };
            Ok(vec![row])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SimScheme {
    Alg1,
    Fair,
    Nep,
    Alg2,
}

pub struct SimulateArgs {
    pub variant: Option<Variant>,
    pub scheme: Option<SimScheme>,
    pub access: Option<Vec<f64>>,
    pub on: Option<Vec<f64>>,
    pub frames: Option<u64>,
    pub slots: Option<u32>,
    pub seed: Option<u64>,
}

pub fn simulate_cmd(scenario: &Scenario, args: SimulateArgs) -> Result<Vec<ResultRow>, CliError> {
    let system = &scenario.system;
    let explicit = args.access.is_some() || args.on.is_some();
    if explicit && args.scheme.is_some() {
        return Err(CliError::Config(
            "--scheme conflicts with an explicit --p/--q profile".into(),
        ));
    }
    let profile = if explicit {
        let (Some(access), Some(on)) = (args.access, args.on) else {
            return Err(CliError::Config(
                "an explicit profile needs both --p and --q".into(),
            ));
        };
        let variant = args.variant.unwrap_or(Variant::Original);
        StrategyProfile::new(variant, access, on).map_err(from_core)?
    } else {
        let scheme = args.scheme.unwrap_or(match args.variant {
            Some(Variant::Modified) => SimScheme::Alg2,
            _ => SimScheme::Alg1,
        });
        let profile = match scheme {
            SimScheme::Alg1 => optimize::optimal_activation(system).profile,
            SimScheme::Fair => optimize::fair_allocation(system, None).map_err(from_core)?,
            // Full access at the caps; spelled out so simulation does not
            // depend on the game solvers.
            SimScheme::Nep => StrategyProfile::original(
                vec![1.0; system.num_users()],
                system.energy_caps().values().to_vec(),
            )
            .map_err(from_core)?,
            SimScheme::Alg2 => {
                optimize::optimal_partition(system, &scenario.solver)
                    .map_err(from_core)?
                    .profile
            }
        };
        if let Some(requested) = args.variant {
            if requested != profile.variant() {
                return Err(CliError::Config(format!(
                    "scheme {:?} plays the {} variant, not {}",
                    scheme,
                    profile.variant().name(),
                    requested.name()
                )));
            }
        }
        profile
    };

    let params = SimParams {
        frames: args.frames.unwrap_or(scenario.sim.frames),
        slots_per_frame: args.slots.unwrap_or(scenario.sim.slots_per_frame),
        seed: args.seed.unwrap_or(scenario.sim.seed),
    };
    let estimate = sim::simulate(&profile, system, &params).map_err(from_core)?;
    eprintln!(
        "simulated {} frames x {} slots (seed {}), {} variant:",
        params.frames,
        params.slots_per_frame,
        params.seed,
        profile.variant().name()
    );
    for i in 0..system.num_users() {
        eprintln!(
            "  {}: throughput {:.6} (se {:.2e}), energy {:.4} (se {:.2e}), on {} frames",
            user_name(scenario, i),
            estimate.mean_throughput[i],
            estimate.stderr_throughput[i],
            estimate.mean_energy[i],
            estimate.stderr_energy[i],
            estimate.frames_on[i],
        );
    }
    let mut row = ResultRow::new("simulate");
    row.total_throughput = Some(estimate.mean_throughput.iter().sum());
    Ok(vec![row])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    E1,
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepScheme {
    Alg1,
    Fair,
    #[value(name = "nep_original")]
    NepOriginal,
    #[value(name = "modified_opt")]
    ModifiedOpt,
    #[value(name = "modified_game")]
    ModifiedGame,
}

impl SweepScheme {
    pub const ALL: [SweepScheme; 5] = [
        SweepScheme::Alg1,
        SweepScheme::Fair,
        SweepScheme::NepOriginal,
        SweepScheme::ModifiedOpt,
        SweepScheme::ModifiedGame,
    ];

    fn label(self) -> &'static str {
        match self {
            SweepScheme::Alg1 => "alg1",
            SweepScheme::Fair => "fair",
            SweepScheme::NepOriginal => "nep_original",
            SweepScheme::ModifiedOpt => "modified_opt",
            SweepScheme::ModifiedGame => "modified_game",
        }
    }
}

pub struct SweepArgs {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub schemes: Vec<SweepScheme>,
}

pub fn sweep_cmd(scenario: &Scenario, args: SweepArgs) -> Result<Vec<ResultRow>, CliError> {
    if !args.from.is_finite() || !args.to.is_finite() || args.from >= args.to {
        return Err(CliError::Config(format!(
            "--from {} must be below --to {}",
            args.from, args.to
        )));
    }
    if args.steps < 2 {
        return Err(CliError::Config("--steps must be at least 2".into()));
    }
    if args.from < 0.0 {
        return Err(CliError::Config("swept values must be non-negative".into()));
    }

    let values: Vec<f64> = (0..args.steps)
        .map(|k| args.from + (args.to - args.from) * k as f64 / (args.steps - 1) as f64)
        .collect();
    let mut rows: Vec<ResultRow> = values
        .par_iter()
        .map(|&value| sweep_point(scenario, args.param, value, &args.schemes))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        a.param_value
            .partial_cmp(&b.param_value)
            .unwrap()
            .then_with(|| a.scheme.cmp(&b.scheme))
    });
    Ok(rows)
}

fn sweep_point(
    scenario: &Scenario,
    param: SweepParam,
    value: f64,
    schemes: &[SweepScheme],
) -> Vec<ResultRow> {
    let configured: Result<SystemConfig, Error> = match param {
        SweepParam::E1 => scenario.system.with_budget(0, value),
        SweepParam::C2 => scenario.system.with_tx_cost(value),
    };
    let system = match configured {
        Ok(system) => system,
        Err(e) => {
            return schemes
                .iter()
                .map(|scheme| {
                    let mut row = ResultRow::new(scheme.label());
                    row.param_value = Some(value);
                    row.status = format!("error: {e}");
                    row
                })
                .collect();
        }
    };

    let benchmark: Result<f64, String> = optimize::optimal_partition(&system, &scenario.solver)
        .map(|s| s.total_throughput)
        .map_err(|e| e.to_string());

    schemes
        .iter()
        .map(|&scheme| {
            let mut row = ResultRow::new(scheme.label());
            row.param_value = Some(value);
            let total: Result<f64, String> = match scheme {
                SweepScheme::Alg1 => Ok(optimize::optimal_activation(&system).total_throughput),
                SweepScheme::Fair => optimize::fair_allocation(&system, None)
                    .and_then(|p| model::evaluate(&p, &system))
                    .map(|m| m.total_throughput)
                    .map_err(|e| e.to_string()),
                SweepScheme::NepOriginal => {
                    let nep = game::nep_original(&system);
                    model::evaluate(&nep, &system)
                        .map(|m| m.total_throughput)
                        .map_err(|e| e.to_string())
                }
                SweepScheme::ModifiedOpt => benchmark.clone(),
                SweepScheme::ModifiedGame => {
                    match game::equilibrium_report(&system, &scenario.solver) {
                        Ok(report) => {
                            row.poa = Some(report.poa);
                            row.pos = Some(report.pos);
                            row.mean_total = Some(report.mean_total_throughput);
                            row.nep_count = Some(report.equilibria.len());
                            Ok(report.mean_total_throughput)
                        }
                        Err(e) => Err(e.to_string()),
                    }
                }
            };
            match (&total, &benchmark) {
                (Ok(total), Ok(benchmark)) => {
                    row.total_throughput = Some(*total);
                    row.degradation = Some(game::benchmark_ratio(*benchmark, *total));
                }
                (Ok(total), Err(bench_err)) => {
                    row.total_throughput = Some(*total);
                    row.status = format!("error: benchmark failed: {bench_err}");
                }
                (Err(err), _) => {
                    row.status = format!("error: {err}");
                }
            }
            row
        })
        .collect()
}

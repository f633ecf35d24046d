//! `aloha-lab`: experiment runner for the energy-constrained slotted-ALOHA
//! toolkit. Every subcommand reads a JSON scenario file, writes rows in a
//! fixed CSV/JSON schema, and is deterministic given its flags.
//!
//! Exit codes: 0 success, 2 invalid config or flags, 3 solver failure (all
//! rows), 4 I/O failure.

mod commands;
mod config;
mod rows;

use std::path::PathBuf;

use aloha_energy::model::Variant;
use clap::{Args, Parser, Subcommand};

use commands::{GameAction, Method, SimScheme, SimulateArgs, SweepArgs, SweepParam, SweepScheme};
use rows::{OutputFormat, ResultRow};

/// Errors carrying their process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or flags (exit 2).
    Config(String),
    /// Solver failure (exit 3).
    Solver(String),
    /// I/O failure (exit 4).
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "aloha-lab",
    version,
    about = "Schedulers, game solvers and a Monte Carlo simulator for energy-constrained slotted ALOHA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output encoding
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and enumerations (0 = automatic)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum VariantArg {
    Original,
    Modified,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Original => Variant::Original,
            VariantArg::Modified => Variant::Modified,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate throughput, energy and feasibility of a given profile
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "original")]
        variant: VariantArg,
        /// Per-user access probabilities (original) or backoff probabilities (modified)
        #[arg(long, required = true, value_delimiter = ',')]
        p: Vec<f64>,
        /// Per-user ON probabilities
        #[arg(long, required = true, value_delimiter = ',')]
        q: Vec<f64>,
        /// Feasibility tolerance in energy units
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a scheduler
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        method: Method,
        /// Random profiles tried by the oracle
        #[arg(long)]
        samples: Option<usize>,
        /// Grid resolution of the oracle
        #[arg(long)]
        step: Option<f64>,
        /// Oracle seed (defaults to the scenario's sim seed)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Equilibrium analysis of either game
    Game {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Enumerate every equilibrium of the modified game (default)
        #[arg(long)]
        enumerate: bool,
        /// Play round-robin best-response dynamics instead
        #[arg(long)]
        dynamics: bool,
        /// Draw the initial dynamics profile from this seed (default: all-aggressive)
        #[arg(long)]
        seed_profile: Option<u64>,
        /// Round budget for the dynamics
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Reshuffle the update order each round from this seed
        #[arg(long)]
        order_seed: Option<u64>,
    },
    /// Monte Carlo estimate of a profile or a scheduler's output
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Simulate a scheduler's profile instead of an explicit one
        #[arg(long, value_enum)]
        scheme: Option<SimScheme>,
        /// Explicit access/backoff probabilities
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        /// Explicit ON probabilities
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        slots: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one parameter and compare schemes at every point
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Swept parameter: the first energy budget or the transmission cost
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Range start (default: 5 for e1, 10 for c2)
        #[arg(long)]
        from: Option<f64>,
        /// Range end (default: 200)
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        steps: usize,
        /// Schemes to evaluate (default: all)
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<SweepScheme>>,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    });
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let common = match &cli.command {
        Command::Analyze { common, .. }
        | Command::Optimize { common, .. }
        | Command::Game { common, .. }
        | Command::Simulate { common, .. }
        | Command::Sweep { common, .. } => common,
    };
    let scenario = config::load_scenario(&common.config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;

    let format = common.format;
    let out = common.out.clone();
    let rows: Vec<ResultRow> = pool.install(|| match cli.command {
        Command::Analyze {
            variant, p, q, tol, ..
        } => commands::analyze(&scenario, variant.into(), p, q, tol),
        Command::Optimize {
            method,
            samples,
            step,
            seed,
            ..
        } => commands::optimize_cmd(&scenario, method, samples, step, seed),
        Command::Game {
            variant,
            enumerate,
            dynamics,
            seed_profile,
            max_rounds,
            order_seed,
            ..
        } => {
            if enumerate && dynamics {
                return Err(CliError::Config(
                    "--enumerate and --dynamics are mutually exclusive".into(),
                ));
            }
            let action = match variant {
                VariantArg::Original => {
                    if enumerate || dynamics {
                        return Err(CliError::Config(
                            "--enumerate/--dynamics apply to the modified game only".into(),
                        ));
                    }
                    GameAction::NepOriginal
                }
                VariantArg::Modified => {
                    if dynamics {
                        GameAction::Dynamics {
                            seed_profile,
                            max_rounds,
                            order_seed,
                        }
                    } else {
                        GameAction::Enumerate
                    }
                }
            };
            commands::game_cmd(&scenario, action)
        }
        Command::Simulate {
            variant,
            scheme,
            p,
            q,
            frames,
            slots,
            seed,
            ..
        } => commands::simulate_cmd(
            &scenario,
            SimulateArgs {
                variant: variant.map(Into::into),
                scheme,
                access: p,
                on: q,
                frames,
                slots,
                seed,
            },
        ),
        Command::Sweep {
            param,
            from,
            to,
            steps,
            schemes,
            ..
        } => {
            // Default bounds bracket the saturation point c1 + c2.
            let default_from = match param {
                SweepParam::E1 => 5.0,
                SweepParam::C2 => 10.0,
            };
            commands::sweep_cmd(
                &scenario,
                SweepArgs {
                    param,
                    from: from.unwrap_or(default_from),
                    to: to.unwrap_or(200.0),
                    steps,
                    schemes: schemes.unwrap_or_else(|| SweepScheme::ALL.to_vec()),
                },
            )
        }
    })?;

    rows::emit(&rows, format, out.as_deref())?;
    if !rows.is_empty() && rows.iter().all(ResultRow::failed) {
        return Ok(3);
    }
    Ok(0)
}

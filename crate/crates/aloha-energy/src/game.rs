//! Non-cooperative analysis of the contention system.
//!
//! In the original game each user maximises its own mean throughput subject to
//! its energy budget. Throughput rises with both control knobs, so every user
//! transmits at full access and pushes its ON probability to the cap: the game
//! has a single equilibrium, [`nep_original`]. The gap to the coordinated
//! optimum is measured by [`price_of_anarchy_original`].
//!
//! The backoff variant yields a richer game. A user's payoff is monotone in
//! its backoff probability, so the best response sits at an endpoint: stay
//! aggressive after collisions or give up the frame entirely, with the ON
//! probability pinned by the budget ([`best_response`]). The induced game has
//! multiple equilibria; [`enumerate_neps`] finds them exhaustively and
//! [`best_response_dynamics`] plays the game round by round.
//! [`degradation_report`] bundles the equilibrium metrics with the scheduler
//! baselines for a full instance comparison.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{self, PerUserMetrics, StrategyProfile, SystemConfig, Variant};
use crate::optimize::{self, SolverOptions};

/// Largest user count for the equilibrium pattern enumeration.
pub const NEP_ENUMERATION_MAX_USERS: usize = 20;

/// Two equilibria closer than this in max-norm are reported once.
pub const NEP_DEDUP_TOL: f64 = 1e-6;

/// The unique equilibrium of the original game: full access with every ON
/// probability at its energy cap, independently of the other users.
pub fn nep_original(config: &SystemConfig) -> StrategyProfile {
    let caps = config.energy_caps();
    StrategyProfile::original(vec![1.0; config.num_users()], caps.values().to_vec())
        .expect("caps are valid probabilities")
}

/// Ratio of a benchmark total to an achieved total, with the empty-system
/// conventions: 1 when both are zero, infinite when only the achieved total is.
pub fn benchmark_ratio(benchmark: f64, achieved: f64) -> f64 {
    if achieved > 0.0 {
        benchmark / achieved
    } else if benchmark > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Price of anarchy of the original game: coordinated optimum over the unique
/// equilibrium. Infinite when saturated users jam each other into zero
/// throughput while the optimum is positive.
pub fn price_of_anarchy_original(config: &SystemConfig) -> f64 {
    let optimum = optimize::optimal_activation(config).total_throughput;
    let nep = nep_original(config);
    let nep_total = model::evaluate(&nep, config)
        .expect("profile built from config")
        .total_throughput;
    benchmark_ratio(optimum, nep_total)
}

/// Products over the other users needed by the best response of `user`:
/// `Π_{j≠i}(1 − q_j)` and `Π_{j≠i}(1 − b_j q_j)`.
fn opponent_products(user: usize, profile: &StrategyProfile) -> (f64, f64) {
    let mut others_off = 1.0;
    let mut others_quiet = 1.0;
    for j in 0..profile.len() {
        if j == user {
            continue;
        }
        let q = profile.on_probs()[j];
        let b = profile.access_probs()[j];
        others_off *= 1.0 - q;
        others_quiet *= 1.0 - b * q;
    }
    (others_off, others_quiet)
}

/// Budget-tight ON probability for a given backoff choice:
/// `min{1, budget / (c1 + c2 [b + (1−b)·others_off])}`.
fn budget_tight_on_prob(config: &SystemConfig, user: usize, backoff: f64, others_off: f64) -> f64 {
    let denom = config.on_cost() + config.tx_cost() * (backoff + (1.0 - backoff) * others_off);
    (config.budget(user) / denom).min(1.0)
}

/// Best response of one user in the backoff game, the others held fixed.
///
/// The payoff is monotone in the backoff probability, so the response is an
/// endpoint: aggressive (1) when
/// `(c1 + c2·others_off)·others_quiet > (c1 + c2)·others_off`, conservative
/// (0) otherwise, ties resolved towards 0. The ON probability then exhausts
/// the budget.
pub fn best_response(
    user: usize,
    profile: &StrategyProfile,
    config: &SystemConfig,
) -> Result<(f64, f64)> {
    if profile.len() != config.num_users() {
        return Err(Error::DimensionMismatch {
            profile_len: profile.len(),
            config_len: config.num_users(),
        });
    }
    if profile.variant() != Variant::Modified {
        return Err(Error::InvalidProfile(
            "best response is defined for the modified variant".into(),
        ));
    }
    let (c1, c2) = (config.on_cost(), config.tx_cost());
    let (others_off, others_quiet) = opponent_products(user, profile);
    let stay_aggressive =
        (c1 + c2 * others_off) * others_quiet > (c1 + c2) * others_off;
    let backoff = if stay_aggressive { 1.0 } else { 0.0 };
    let on_prob = budget_tight_on_prob(config, user, backoff, others_off);
    Ok((backoff, on_prob))
}

/// How a best-response play ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    /// A full round left every user unchanged; the final profile is an equilibrium.
    Converged,
    /// A previously visited profile recurred.
    Cycle,
    /// The round budget ran out first.
    MaxRounds,
}

/// Outcome of [`best_response_dynamics`].
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOutcome {
    pub kind: DynamicsKind,
    /// Distinct profiles visited, the initial one included.
    pub trajectory_length: usize,
    /// Full rounds played.
    pub rounds: usize,
    pub final_profile: StrategyProfile,
}

/// Controls for [`best_response_dynamics`].
#[derive(Debug, Clone, Copy)]
pub struct DynamicsOptions {
    pub max_rounds: usize,
    /// Per-user change below which a round counts as a fixed point, and the
    /// quantum used for cycle detection.
    pub tol: f64,
    /// When set, the update order is reshuffled every round from this seed;
    /// otherwise users move in index order.
    pub order_seed: Option<u64>,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            max_rounds: 1_000,
            tol: 1e-9,
            order_seed: None,
        }
    }
}

fn quantize_profile(profile: &StrategyProfile, quantum: f64) -> Vec<(i64, i64)> {
    profile
        .access_probs()
        .iter()
        .zip(profile.on_probs())
        .map(|(&b, &q)| ((b / quantum).round() as i64, (q / quantum).round() as i64))
        .collect()
}

/// True when every user's best response against `profile` reproduces its own
/// strategy within `tol`. Threshold ties admit either backoff endpoint.
pub fn verifies_as_nep(profile: &StrategyProfile, config: &SystemConfig, tol: f64) -> Result<bool> {
    if profile.len() != config.num_users() {
        return Err(Error::DimensionMismatch {
            profile_len: profile.len(),
            config_len: config.num_users(),
        });
    }
    if profile.variant() != Variant::Modified {
        return Err(Error::InvalidProfile(
            "equilibrium verification applies to the modified variant".into(),
        ));
    }
    let (c1, c2) = (config.on_cost(), config.tx_cost());
    let tie_eps = 1e-9 * (c1 + c2);
    for user in 0..profile.len() {
        let (others_off, others_quiet) = opponent_products(user, profile);
        let lhs = (c1 + c2 * others_off) * others_quiet;
        let rhs = (c1 + c2) * others_off;
        let backoff = profile.access_probs()[user];
        let aggressive = backoff > 0.5;
        if lhs > rhs + tie_eps && !aggressive {
            return Ok(false);
        }
        if lhs < rhs - tie_eps && aggressive {
            return Ok(false);
        }
        let endpoint = if aggressive { 1.0 } else { 0.0 };
        if (backoff - endpoint).abs() > tol {
            return Ok(false);
        }
        let tight = budget_tight_on_prob(config, user, endpoint, others_off);
        if (profile.on_probs()[user] - tight).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Plays the backoff game round-robin: each round every user in turn replaces
/// its strategy with its best response to the current profile. Ends with
/// [`DynamicsKind::Converged`] when a round changes nobody by more than `tol`
/// (verified as an equilibrium), [`DynamicsKind::Cycle`] when a quantized
/// profile recurs, [`DynamicsKind::MaxRounds`] otherwise.
pub fn best_response_dynamics(
    config: &SystemConfig,
    initial: &StrategyProfile,
    opts: &DynamicsOptions,
) -> Result<DynamicsOutcome> {
    if initial.variant() != Variant::Modified {
        return Err(Error::InvalidProfile(
            "dynamics is defined for the modified variant".into(),
        ));
    }
    if initial.len() != config.num_users() {
        return Err(Error::DimensionMismatch {
            profile_len: initial.len(),
            config_len: config.num_users(),
        });
    }
    let n = config.num_users();
    let mut profile = initial.clone();
    let mut seen: HashSet<Vec<(i64, i64)>> = HashSet::new();
    seen.insert(quantize_profile(&profile, opts.tol));
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = opts
        .order_seed
        .map(rand_chacha::ChaCha8Rng::seed_from_u64);

    let mut rounds = 0;
    let mut kind = DynamicsKind::MaxRounds;
    while rounds < opts.max_rounds {
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut max_change: f64 = 0.0;
        for &user in &order {
            let (backoff, on_prob) = best_response(user, &profile, config)?;
            let db = (backoff - profile.access_probs()[user]).abs();
            let dq = (on_prob - profile.on_probs()[user]).abs();
            max_change = max_change.max(db).max(dq);
            profile.set_user(user, backoff, on_prob);
        }
        rounds += 1;
        if max_change <= opts.tol {
            if verifies_as_nep(&profile, config, opts.tol)? {
                kind = DynamicsKind::Converged;
                break;
            }
            // Sub-tolerance drift that is not yet a fixed point: keep playing
            // without feeding the cycle detector.
            continue;
        }
        if !seen.insert(quantize_profile(&profile, opts.tol)) {
            kind = DynamicsKind::Cycle;
            break;
        }
    }
    Ok(DynamicsOutcome {
        kind,
        trajectory_length: seen.len(),
        rounds,
        final_profile: profile,
    })
}

/// Equilibria of the backoff game plus the number of candidate patterns whose
/// fixed point failed to converge.
#[derive(Debug, Clone, PartialEq)]
pub struct NepEnumeration {
    /// Verified equilibria, deduplicated, sorted by total throughput descending.
    pub equilibria: Vec<StrategyProfile>,
    pub skipped_patterns: usize,
}

/// Exhaustively enumerates the equilibria of the backoff game.
///
/// For every backoff pattern `b ∈ {0,1}^N` the aggressive users are pinned at
/// their caps, the conservative ON probabilities are solved as a fixed point,
/// and the resulting profile is kept when every user's best response
/// reproduces it.
pub fn enumerate_neps(config: &SystemConfig, opts: &SolverOptions) -> Result<NepEnumeration> {
    let n = config.num_users();
    if n > NEP_ENUMERATION_MAX_USERS && !opts.override_user_guard {
        return Err(Error::TooManyUsers {
            context: "equilibrium enumeration",
            max: NEP_ENUMERATION_MAX_USERS,
            actual: n,
        });
    }
    enum PatternOutcome {
        Nep(StrategyProfile),
        Rejected,
        Skipped,
    }

    let caps = config.energy_caps();
    let outcomes: Vec<PatternOutcome> = (0u64..(1u64 << n))
        .into_par_iter()
        .map(|pattern| {
            let mut pinned: Vec<Option<f64>> = vec![None; n];
            let mut backoff = vec![0.0; n];
            for user in 0..n {
                if pattern & (1 << user) != 0 {
                    pinned[user] = Some(caps.get(user));
                    backoff[user] = 1.0;
                }
            }
            let q = match optimize::solve_backoff_fixed_point(
                &pinned,
                config,
                opts.tol,
                opts.max_iter,
            ) {
                Ok(q) => q,
                Err(_) => return PatternOutcome::Skipped,
            };
            let profile =
                StrategyProfile::modified(backoff, q).expect("solver output is in range");
            match verifies_as_nep(&profile, config, opts.tol) {
                Ok(true) => PatternOutcome::Nep(profile),
                _ => PatternOutcome::Rejected,
            }
        })
        .collect();

    // A user that is never ON plays the same strategy whatever its backoff
    // bit says, so the bit is ignored when comparing equilibria.
    let canonical = |p: &StrategyProfile| -> Vec<(f64, f64)> {
        p.access_probs()
            .iter()
            .zip(p.on_probs())
            .map(|(&b, &q)| (if q == 0.0 { 0.0 } else { b }, q))
            .collect()
    };

    let mut skipped = 0usize;
    let mut kept: Vec<StrategyProfile> = Vec::new();
    for outcome in outcomes {
        match outcome {
            PatternOutcome::Skipped => skipped += 1,
            PatternOutcome::Rejected => {}
            PatternOutcome::Nep(profile) => {
                let key = canonical(&profile);
                let duplicate = kept.iter().any(|other| {
                    canonical(other)
                        .iter()
                        .zip(&key)
                        .all(|(a, b)| (a.0 - b.0).abs() < NEP_DEDUP_TOL && (a.1 - b.1).abs() < NEP_DEDUP_TOL)
                });
                if !duplicate {
                    kept.push(profile);
                }
            }
        }
    }

    let mut with_totals: Vec<(f64, StrategyProfile)> = kept
        .into_iter()
        .map(|p| {
            let total = model::evaluate(&p, config)
                .expect("profile matches config")
                .total_throughput;
            (total, p)
        })
        .collect();
    with_totals.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    Ok(NepEnumeration {
        equilibria: with_totals.into_iter().map(|(_, p)| p).collect(),
        skipped_patterns: skipped,
    })
}

/// One verified equilibrium with its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub profile: StrategyProfile,
    pub metrics: PerUserMetrics,
    /// True when another reported equilibrium delivers the same per-user
    /// throughput (strategy-distinct but payoff-equivalent).
    pub payoff_equivalent: bool,
}

/// Equilibrium set of the backoff game with its efficiency ratios against a
/// benchmark total (the partition-search optimum).
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    /// Sorted by total throughput descending.
    pub equilibria: Vec<Equilibrium>,
    /// Benchmark over the worst equilibrium.
    pub poa: f64,
    /// Benchmark over the best equilibrium.
    pub pos: f64,
    /// Unweighted mean of the equilibrium totals.
    pub mean_total_throughput: f64,
    pub benchmark_total: f64,
    pub skipped_patterns: usize,
}

/// Builds the equilibrium report of the backoff game against the
/// partition-search benchmark.
pub fn equilibrium_report(config: &SystemConfig, opts: &SolverOptions) -> Result<EquilibriumReport> {
    let benchmark_total = optimize::optimal_partition(config, opts)?.total_throughput;
    equilibrium_report_with_benchmark(config, opts, benchmark_total)
}

fn equilibrium_report_with_benchmark(
    config: &SystemConfig,
    opts: &SolverOptions,
    benchmark_total: f64,
) -> Result<EquilibriumReport> {
    let enumeration = enumerate_neps(config, opts)?;
    let metrics: Vec<PerUserMetrics> = enumeration
        .equilibria
        .iter()
        .map(|p| model::evaluate(p, config))
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = metrics.iter().map(|m| m.total_throughput).collect();
    let (poa, pos, mean_total) = if totals.is_empty() {
        (f64::INFINITY, f64::INFINITY, 0.0)
    } else {
        let worst = totals.iter().cloned().fold(f64::INFINITY, f64::min);
        let best = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (
            benchmark_ratio(benchmark_total, worst),
            benchmark_ratio(benchmark_total, best),
            totals.iter().sum::<f64>() / totals.len() as f64,
        )
    };
    let equilibria: Vec<Equilibrium> = enumeration
        .equilibria
        .iter()
        .zip(metrics.iter())
        .map(|(profile, m)| {
            let payoff_equivalent = metrics.iter().any(|other| {
                !std::ptr::eq(other, m)
                    && other
                        .throughput
                        .iter()
                        .zip(&m.throughput)
                        .all(|(&a, &b)| (a - b).abs() < 1e-9)
            });
            Equilibrium {
                profile: profile.clone(),
                metrics: m.clone(),
                payoff_equivalent,
            }
        })
        .collect();
    Ok(EquilibriumReport {
        equilibria,
        poa,
        pos,
        mean_total_throughput: mean_total,
        benchmark_total,
        skipped_patterns: enumeration.skipped_patterns,
    })
}

/// Baseline schemes compared against the partition-search benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Greedy activation schedule (original variant optimum).
    Activation,
    /// Budget-proportional fair allocation.
    Fair,
    /// Unique equilibrium of the original game.
    NepOriginal,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Activation => "alg1",
            Scheme::Fair => "fair",
            Scheme::NepOriginal => "nep_original",
        }
    }
}

/// Total throughput of one baseline and its ratio to the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeDegradation {
    pub scheme: Scheme,
    pub total_throughput: f64,
    pub degradation: f64,
}

/// Everything needed for one instance comparison: the benchmark, each
/// baseline's total with its degradation ratio, and the backoff-game
/// equilibrium report.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationReport {
    pub benchmark_total: f64,
    pub schemes: Vec<SchemeDegradation>,
    pub game: EquilibriumReport,
}

/// Compares the schedulers and both games on one instance, using the
/// partition-search total as the benchmark numerator throughout.
pub fn degradation_report(config: &SystemConfig, opts: &SolverOptions) -> Result<DegradationReport> {
    let benchmark_total = optimize::optimal_partition(config, opts)?.total_throughput;
    let game = equilibrium_report_with_benchmark(config, opts, benchmark_total)?;

    let activation_total = optimize::optimal_activation(config).total_throughput;
    let fair_profile = optimize::fair_allocation(config, None)?;
    let fair_total = model::evaluate(&fair_profile, config)?.total_throughput;
    let nep = nep_original(config);
    let nep_total = model::evaluate(&nep, config)?.total_throughput;

    let schemes = vec![
        SchemeDegradation {
            scheme: Scheme::Activation,
            total_throughput: activation_total,
            degradation: benchmark_ratio(benchmark_total, activation_total),
        },
        SchemeDegradation {
            scheme: Scheme::Fair,
            total_throughput: fair_total,
            degradation: benchmark_ratio(benchmark_total, fair_total),
        },
        SchemeDegradation {
            scheme: Scheme::NepOriginal,
            total_throughput: nep_total,
            degradation: benchmark_ratio(benchmark_total, nep_total),
        },
    ];
    Ok(DegradationReport {
        benchmark_total,
        schemes,
        game,
    })
}

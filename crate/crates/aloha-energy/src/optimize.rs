//! Throughput-optimal and fair schedulers.
//!
//! With full access inside ON frames (see [`crate::model::to_full_access`])
//! the system objective collapses to `T(q) = Σ q_i Π_{j≠i}(1 − q_j)` over the
//! box `0 ≤ q_i ≤ cap_i`. Its maximiser is a corner point: every user sits at
//! 0 or at its cap, and the set of enabled users is a prefix of the
//! decreasing-budget order. [`optimal_activation`] finds it in linear time by
//! admitting users while the contention load `Σ q/(1−q)` of the already
//! admitted ones stays below 1.
//!
//! [`fair_allocation`] solves the weighted proportional-fairness objective
//! `Σ w_i log T_i` in closed form, and [`optimal_partition`] searches the
//! backoff variant's aggressive/conservative/passive role assignments
//! exhaustively. [`grid_oracle`] is an independent brute-force reference used
//! to validate the schedulers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{self, StrategyProfile, SystemConfig};

/// Iteration controls shared by the exhaustive searches and fixed-point solves.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Residual target of fixed-point solves.
    pub tol: f64,
    /// Iteration budget of fixed-point solves.
    pub max_iter: usize,
    /// Allow exhaustive searches beyond their user-count guards.
    pub override_user_guard: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            override_user_guard: false,
        }
    }
}

/// Damping of the successive-substitution fixed point.
const FIXED_POINT_DAMPING: f64 = 0.5;

/// Largest user count for the partition search without an override.
pub const PARTITION_SEARCH_MAX_USERS: usize = 14;

/// Largest user count for the brute-force oracle's subset enumeration.
pub const ORACLE_MAX_USERS: usize = 20;

/// Result of the greedy activation scheduler: which users are enabled, the
/// full-access profile that realises it, and the total throughput.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationResult {
    /// Enabled users in activation order (decreasing budget, stable on index).
    pub active_set: Vec<usize>,
    /// Full-access profile: `p = 1`, `q_i = cap_i` on the active set, 0 elsewhere.
    pub profile: StrategyProfile,
    pub total_throughput: f64,
}

/// Contention load `q / (1 − q)` of one enabled user; a cap-1 user saturates
/// the medium on its own.
fn contention_load(q: f64) -> f64 {
    if q >= 1.0 {
        f64::INFINITY
    } else {
        q / (1.0 - q)
    }
}

/// Greedy activation scheduler.
///
/// Users are visited in decreasing-budget order and admitted at their cap while
/// the contention load of the already admitted ones is below 1. The result is
/// the throughput-optimal probabilistic schedule: for every enabled user `k`
/// the load of the other enabled users stays below 1, and when anyone is left
/// out the enabled load has reached 1.
pub fn optimal_activation(config: &SystemConfig) -> ActivationResult {
    let n = config.num_users();
    let caps = config.energy_caps();
    let mut on_probs = vec![0.0; n];
    let mut active_set = Vec::new();
    let mut load = 0.0;
    for user in config.order_by_budget() {
        if load >= 1.0 {
            break;
        }
        let cap = caps.get(user);
        if cap <= 0.0 {
            // Zero-budget users are sorted last and contribute nothing.
            break;
        }
        on_probs[user] = cap;
        active_set.push(user);
        load += contention_load(cap);
    }
    let profile = StrategyProfile::original(vec![1.0; n], on_probs)
        .expect("caps are valid probabilities");
    let total_throughput = model::evaluate(&profile, config)
        .expect("profile built from config")
        .total_throughput;
    ActivationResult {
        active_set,
        profile,
        total_throughput,
    }
}

/// Positive weights summing to one, used by the fairness objective.
#[derive(Debug, Clone, PartialEq)]
pub struct FairWeights {
    weights: Vec<f64>,
}

impl FairWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("weights must not be empty".into()));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidConfig(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Weights proportional to the energy budgets. Errors when all budgets are zero.
    pub fn proportional_to_budgets(config: &SystemConfig) -> Result<Self> {
        let total: f64 = config.energy_budgets().iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidConfig(
                "cannot derive weights from an all-zero budget vector".into(),
            ));
        }
        Ok(Self {
            weights: config
                .energy_budgets()
                .iter()
                .map(|&e| e / total)
                .collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Closed-form solution of the weighted proportional-fairness objective:
/// full access with `q_i = min{w_i, cap_i}`. With no explicit weights the
/// budget-proportional ones are used.
pub fn fair_allocation(
    config: &SystemConfig,
    weights: Option<&FairWeights>,
) -> Result<StrategyProfile> {
    let derived;
    let weights = match weights {
        Some(w) => {
            if w.len() != config.num_users() {
                return Err(Error::DimensionMismatch {
                    profile_len: w.len(),
                    config_len: config.num_users(),
                });
            }
            w
        }
        None => {
            derived = FairWeights::proportional_to_budgets(config)?;
            &derived
        }
    };
    let caps = config.energy_caps();
    let on_probs: Vec<f64> = weights
        .values()
        .iter()
        .enumerate()
        .map(|(i, &w)| w.min(caps.get(i)))
        .collect();
    StrategyProfile::original(vec![1.0; config.num_users()], on_probs)
}

/// Weighted log-throughput utility `Σ w_i log T_i`. Returns `-inf` as soon as
/// any user has zero throughput.
pub fn fair_utility(
    profile: &StrategyProfile,
    weights: &FairWeights,
    config: &SystemConfig,
) -> Result<f64> {
    if weights.len() != config.num_users() {
        return Err(Error::DimensionMismatch {
            profile_len: weights.len(),
            config_len: config.num_users(),
        });
    }
    let throughput = model::mean_throughput(profile, config)?;
    if throughput.iter().any(|&t| t <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(weights
        .values()
        .iter()
        .zip(&throughput)
        .map(|(&w, &t)| w * t.ln())
        .sum())
}

/// The aggressive/conservative/passive role split of the backoff variant.
///
/// Aggressive users keep transmitting after a collision, conservative ones
/// transmit only the probe slot of an otherwise empty frame, passive ones stay
/// off entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionAssignment {
    pub aggressive: Vec<usize>,
    pub conservative: Vec<usize>,
    pub passive: Vec<usize>,
}

impl PartitionAssignment {
    /// Validates that the three sets partition `0..num_users` and that both the
    /// aggressive and the conservative set are non-empty when `num_users ≥ 2`.
    pub fn new(
        aggressive: Vec<usize>,
        conservative: Vec<usize>,
        passive: Vec<usize>,
        num_users: usize,
    ) -> Result<Self> {
        let mut seen = vec![false; num_users];
        for &i in aggressive.iter().chain(&conservative).chain(&passive) {
            if i >= num_users {
                return Err(Error::InvalidConfig(format!("user {i} out of range")));
            }
            if seen[i] {
                return Err(Error::InvalidConfig(format!(
                    "user {i} assigned to more than one role"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidConfig(
                "every user needs a role in the partition".into(),
            ));
        }
        if num_users >= 2 && (aggressive.is_empty() || conservative.is_empty()) {
            return Err(Error::InvalidConfig(
                "need at least one aggressive and one conservative user".into(),
            ));
        }
        Ok(Self {
            aggressive,
            conservative,
            passive,
        })
    }
}

/// Solves `q_i = min{1, budget_i / (c1 + c2 Π_{j≠i}(1 − q_j))}` for the users
/// marked `None` in `pinned`, holding the `Some` entries fixed, by damped
/// successive substitution from zero. Returns the full ON vector.
pub(crate) fn solve_backoff_fixed_point(
    pinned: &[Option<f64>],
    config: &SystemConfig,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = config.num_users();
    debug_assert_eq!(pinned.len(), n);
    let (c1, c2) = (config.on_cost(), config.tx_cost());

    // Budget-tight targets for the free users and the worst residual at `q`.
    let eval = |q: &[f64]| -> (f64, Vec<f64>) {
        let off: Vec<f64> = q.iter().map(|&q| 1.0 - q).collect();
        let others_off = model::leave_one_out_products(&off);
        let mut residual = 0.0f64;
        let mut targets = q.to_vec();
        for i in 0..n {
            if pinned[i].is_some() {
                continue;
            }
            let target = (config.budget(i) / (c1 + c2 * others_off[i])).min(1.0);
            residual = residual.max((target - q[i]).abs());
            targets[i] = target;
        }
        (residual, targets)
    };

    let mut q: Vec<f64> = pinned.iter().map(|p| p.unwrap_or(0.0)).collect();
    let mut converged = false;
    let mut last_residual = f64::INFINITY;
    for _ in 0..max_iter {
        let (residual, targets) = eval(&q);
        last_residual = residual;
        if residual < tol {
            converged = true;
            break;
        }
        for i in 0..n {
            if pinned[i].is_some() {
                continue;
            }
            // Jump straight onto the clip so capped users sit exactly at 1.
            q[i] = if targets[i] >= 1.0 {
                1.0
            } else {
                q[i] + FIXED_POINT_DAMPING * (targets[i] - q[i])
            };
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: max_iter,
            residual: last_residual,
        });
    }

    // A few undamped sweeps land uncoupled users exactly on their fixed point.
    let (mut residual, mut targets) = eval(&q);
    for _ in 0..4 {
        if residual == 0.0 {
            break;
        }
        let mut candidate = q.clone();
        for i in 0..n {
            if pinned[i].is_none() {
                candidate[i] = targets[i];
            }
        }
        let (cand_residual, cand_targets) = eval(&candidate);
        if cand_residual <= residual {
            q = candidate;
            residual = cand_residual;
            targets = cand_targets;
        } else {
            break;
        }
    }
    Ok(q)
}

/// ON probabilities induced by a role partition: aggressive users at their
/// caps, passive users off, conservative users at the fixed point of
/// `q_k = min{1, budget_k / (c1 + c2 Π_{j≠k}(1 − q_j))}`.
pub fn conservative_fixed_point(
    partition: &PartitionAssignment,
    config: &SystemConfig,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let caps = config.energy_caps();
    let mut pinned: Vec<Option<f64>> = vec![None; config.num_users()];
    for &i in &partition.aggressive {
        pinned[i] = Some(caps.get(i));
    }
    for &i in &partition.passive {
        pinned[i] = Some(0.0);
    }
    solve_backoff_fixed_point(&pinned, config, tol, max_iter)
}

/// Result of the exhaustive partition search for the backoff variant.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSchedule {
    pub assignment: PartitionAssignment,
    /// Modified-variant profile realising the assignment.
    pub profile: StrategyProfile,
    pub total_throughput: f64,
    /// Candidates dropped because their fixed point did not converge.
    pub skipped_candidates: usize,
    /// Set when `num_users == 1`, where the two-role constraint cannot hold and
    /// the single user is scheduled aggressively.
    pub single_user_fallback: bool,
}

fn partition_profile(
    assignment: &PartitionAssignment,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<(StrategyProfile, f64)> {
    let n = config.num_users();
    let q = conservative_fixed_point(assignment, config, opts.tol, opts.max_iter)?;
    let mut backoff = vec![0.0; n];
    for &i in &assignment.aggressive {
        backoff[i] = 1.0;
    }
    let profile = StrategyProfile::modified(backoff, q)?;
    let total = model::evaluate(&profile, config)?.total_throughput;
    Ok((profile, total))
}

/// Exhaustive search over all aggressive/conservative/passive assignments with
/// at least one aggressive and one conservative user. Ties are broken towards
/// the lexicographically smallest aggressive set, then conservative set.
///
/// The search is exponential in the user count and refuses more than
/// [`PARTITION_SEARCH_MAX_USERS`] users unless the guard override is set.
pub fn optimal_partition(config: &SystemConfig, opts: &SolverOptions) -> Result<PartitionSchedule> {
    let n = config.num_users();
    if n > PARTITION_SEARCH_MAX_USERS && !opts.override_user_guard {
        return Err(Error::TooManyUsers {
            context: "partition search",
            max: PARTITION_SEARCH_MAX_USERS,
            actual: n,
        });
    }
    if n == 1 {
        // The two-role constraint is unsatisfiable; schedule the user aggressively.
        let assignment = PartitionAssignment {
            aggressive: vec![0],
            conservative: vec![],
            passive: vec![],
        };
        let cap = config.energy_caps().get(0);
        let profile = StrategyProfile::modified(vec![1.0], vec![cap])?;
        let total = model::evaluate(&profile, config)?.total_throughput;
        return Ok(PartitionSchedule {
            assignment,
            profile,
            total_throughput: total,
            skipped_candidates: 0,
            single_user_fallback: true,
        });
    }

    let codes: u64 = 3u64.pow(n as u32);
    let candidates: Vec<(PartitionAssignment, Result<(StrategyProfile, f64)>)> = (0..codes)
        .into_par_iter()
        .filter_map(|code| {
            let mut aggressive = Vec::new();
            let mut conservative = Vec::new();
            let mut passive = Vec::new();
            let mut rest = code;
            for user in 0..n {
                match rest % 3 {
                    0 => aggressive.push(user),
                    1 => conservative.push(user),
                    _ => passive.push(user),
                }
                rest /= 3;
            }
            if aggressive.is_empty() || conservative.is_empty() {
                return None;
            }
            let assignment = PartitionAssignment {
                aggressive,
                conservative,
                passive,
            };
            let outcome = partition_profile(&assignment, config, opts);
            Some((assignment, outcome))
        })
        .collect();

    let total_candidates = candidates.len();
    let mut skipped = 0usize;
    let mut best: Option<(PartitionAssignment, StrategyProfile, f64)> = None;
    for (assignment, outcome) in candidates {
        let (profile, total) = match outcome {
            Ok(v) => v,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let better = match &best {
            None => true,
            Some((best_assignment, _, best_total)) => {
                total > *best_total
                    || (total == *best_total
                        && (assignment.aggressive.clone(), assignment.conservative.clone())
                            < (
                                best_assignment.aggressive.clone(),
                                best_assignment.conservative.clone(),
                            ))
            }
        };
        if better {
            best = Some((assignment, profile, total));
        }
    }
    match best {
        Some((assignment, profile, total_throughput)) => Ok(PartitionSchedule {
            assignment,
            profile,
            total_throughput,
            skipped_candidates: skipped,
            single_user_fallback: false,
        }),
        None => Err(Error::AllCandidatesFailed {
            candidates: total_candidates,
        }),
    }
}

/// Controls for the brute-force oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Resolution of the exhaustive per-user grid branch, in cap fractions.
    /// The grid branch only runs when `(1/step + 1)^N` stays small.
    pub step: f64,
    /// Number of random feasible ON vectors to try.
    pub samples: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            step: 0.05,
            samples: 10_000,
            seed: 0,
        }
    }
}

/// Best profile found by the brute-force oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub profile: StrategyProfile,
    pub total_throughput: f64,
}

/// Total throughput of a full-access ON vector, `Σ q_i Π_{j≠i}(1 − q_j)`.
fn full_access_total(q: &[f64]) -> f64 {
    let off: Vec<f64> = q.iter().map(|&q| 1.0 - q).collect();
    let others_off = model::leave_one_out_products(&off);
    q.iter().zip(&others_off).map(|(&q, &rest)| q * rest).sum()
}

/// Brute-force reference for the activation scheduler: tries every
/// activate-at-cap subset, random feasible ON vectors, and (when tractable) an
/// exhaustive per-user grid, and returns the best profile seen.
pub fn grid_oracle(config: &SystemConfig, opts: &OracleOptions) -> Result<OracleResult> {
    use rand::{Rng, SeedableRng};

    let n = config.num_users();
    if n > ORACLE_MAX_USERS {
        return Err(Error::TooManyUsers {
            context: "oracle subset enumeration",
            max: ORACLE_MAX_USERS,
            actual: n,
        });
    }
    if !(opts.step > 0.0 && opts.step <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "oracle step {} must lie in (0, 1]",
            opts.step
        )));
    }
    let caps = config.energy_caps();
    let mut best_q = vec![0.0; n];
    let mut best_total = 0.0;
    let mut consider = |q: &[f64]| {
        let total = full_access_total(q);
        if total > best_total {
            best_total = total;
            best_q = q.to_vec();
        }
    };

    // Every activate-at-cap subset.
    let mut q = vec![0.0; n];
    for mask in 0u64..(1u64 << n) {
        for (i, slot) in q.iter_mut().enumerate() {
            *slot = if mask & (1 << i) != 0 { caps.get(i) } else { 0.0 };
        }
        consider(&q);
    }

    // Exhaustive per-user grid over multiples of step·cap, when tractable.
    let levels = (1.0 / opts.step).floor() as usize + 1;
    if (levels as f64).powi(n as i32) <= 2e5 {
        let mut idx = vec![0usize; n];
        loop {
            for i in 0..n {
                let frac = (idx[i] as f64 * opts.step).min(1.0);
                q[i] = frac * caps.get(i);
            }
            consider(&q);
            let mut carry = 0;
            while carry < n {
                idx[carry] += 1;
                if idx[carry] < levels {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == n {
                break;
            }
        }
    }

    // Random feasible ON vectors in the cap box.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.samples {
        for (i, slot) in q.iter_mut().enumerate() {
            *slot = rng.gen::<f64>() * caps.get(i);
        }
        consider(&q);
    }

    let profile = StrategyProfile::original(vec![1.0; n], best_q)?;
    Ok(OracleResult {
        total_throughput: best_total,
        profile,
    })
}

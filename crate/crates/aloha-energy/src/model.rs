//! Domain types and exact analytic evaluation of the sleep-mode contention model.
//!
//! `N` saturated users share a slotted channel. Time is organised in frames of
//! many slots; at each frame boundary a user is ON (radio awake) with
//! probability `q_i`, otherwise it sleeps the whole frame. An ON frame costs
//! `c1` energy units; transmitting through a full frame costs a further `c2`.
//! Each user must respect a mean energy budget per frame.
//!
//! Two access disciplines are supported inside ON frames:
//!
//! * [`Variant::Original`] — the user transmits in every slot independently
//!   with probability `p_i`:
//!
//!   ```text
//!   T_i = p_i q_i Π_{j≠i} (1 − p_j q_j)          (successes per slot)
//!   E_i = q_i (c1 + c2 p_i)                      (energy per frame)
//!   ```
//!
//! * [`Variant::Modified`] — the user probes the first slot of each ON frame;
//!   on success it keeps the channel for the rest of the frame, on collision it
//!   falls back to a per-slot backoff probability `b_i`:
//!
//!   ```text
//!   T_i = q_i [ (1 − b_i) Π_{j≠i}(1 − q_j) + b_i Π_{j≠i}(1 − b_j q_j) ]
//!   E_i = q_i { c1 + c2 [ b_i + (1 − b_i) Π_{j≠i}(1 − q_j) ] }
//!   ```
//!
//! All operations are pure functions of their arguments; the types are
//! immutable after construction and can be shared freely across threads.

use crate::error::{Error, Result};

/// Default tolerance of [`is_feasible`], in energy units.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Static parameters of a contention instance: per-user mean energy budgets and
/// the two circuit costs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    energy_budgets: Vec<f64>,
    on_cost: f64,
    tx_cost: f64,
}

impl SystemConfig {
    /// Builds a config, validating `budgets_i ≥ 0`, `on_cost > 0`, `tx_cost ≥ 0`
    /// and at least one user.
    pub fn new(energy_budgets: Vec<f64>, on_cost: f64, tx_cost: f64) -> Result<Self> {
        if energy_budgets.is_empty() {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        for (i, &e) in energy_budgets.iter().enumerate() {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "energy_budgets[{i}] = {e} must be finite and non-negative"
                )));
            }
        }
        if !on_cost.is_finite() || on_cost <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "c1 = {on_cost} must be finite and strictly positive"
            )));
        }
        if !tx_cost.is_finite() || tx_cost < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "c2 = {tx_cost} must be finite and non-negative"
            )));
        }
        Ok(Self {
            energy_budgets,
            on_cost,
            tx_cost,
        })
    }

    pub fn num_users(&self) -> usize {
        self.energy_budgets.len()
    }

    pub fn energy_budgets(&self) -> &[f64] {
        &self.energy_budgets
    }

    pub fn budget(&self, user: usize) -> f64 {
        self.energy_budgets[user]
    }

    /// ON-state cost per frame (`c1`).
    pub fn on_cost(&self) -> f64 {
        self.on_cost
    }

    /// Full-frame transmission cost (`c2`).
    pub fn tx_cost(&self) -> f64 {
        self.tx_cost
    }

    /// Cost of a frame spent fully transmitting, `c1 + c2`.
    pub fn full_frame_cost(&self) -> f64 {
        self.on_cost + self.tx_cost
    }

    /// Returns a copy with one budget replaced. Used by parameter sweeps.
    pub fn with_budget(&self, user: usize, budget: f64) -> Result<Self> {
        let mut budgets = self.energy_budgets.clone();
        if user >= budgets.len() {
            return Err(Error::InvalidConfig(format!("no user {user}")));
        }
        budgets[user] = budget;
        Self::new(budgets, self.on_cost, self.tx_cost)
    }

    /// Returns a copy with the transmission cost replaced. Used by sweeps.
    pub fn with_tx_cost(&self, tx_cost: f64) -> Result<Self> {
        Self::new(self.energy_budgets.clone(), self.on_cost, tx_cost)
    }

    /// User indices sorted by decreasing budget, stable on index for ties.
    pub fn order_by_budget(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_users()).collect();
        // Budgets are validated finite, so the comparison is total.
        order.sort_by(|&a, &b| {
            self.energy_budgets[b]
                .partial_cmp(&self.energy_budgets[a])
                .unwrap()
        });
        order
    }

    /// Per-user ON-probability caps `min{budget_i / (c1 + c2), 1}` — the largest
    /// feasible ON probability when transmitting in every slot of an ON frame.
    pub fn energy_caps(&self) -> EnergyCaps {
        let full = self.full_frame_cost();
        EnergyCaps {
            caps: self
                .energy_budgets
                .iter()
                .map(|&e| (e / full).min(1.0))
                .collect(),
        }
    }
}

/// Per-user ON-probability caps induced by the energy budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCaps {
    caps: Vec<f64>,
}

impl EnergyCaps {
    pub fn values(&self) -> &[f64] {
        &self.caps
    }

    pub fn get(&self, user: usize) -> f64 {
        self.caps[user]
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }
}

/// Which access discipline a profile uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Fixed per-slot access probability inside ON frames.
    Original,
    /// Probe the first slot, then back off after a collision.
    Modified,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Modified => "modified",
        }
    }
}

/// A complete strategy: per-user ON probabilities plus per-user access
/// probabilities (per-slot transmit probability for [`Variant::Original`],
/// post-collision backoff probability for [`Variant::Modified`]).
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    variant: Variant,
    access_probs: Vec<f64>,
    on_probs: Vec<f64>,
}

impl StrategyProfile {
    /// Original-variant profile: `access[i]` is the per-slot transmit probability.
    pub fn original(access_probs: Vec<f64>, on_probs: Vec<f64>) -> Result<Self> {
        Self::new(Variant::Original, access_probs, on_probs)
    }

    /// Modified-variant profile: `access[i]` is the post-collision backoff probability.
    pub fn modified(backoff_probs: Vec<f64>, on_probs: Vec<f64>) -> Result<Self> {
        Self::new(Variant::Modified, backoff_probs, on_probs)
    }

    pub fn new(variant: Variant, access_probs: Vec<f64>, on_probs: Vec<f64>) -> Result<Self> {
        if access_probs.len() != on_probs.len() {
            return Err(Error::InvalidProfile(format!(
                "access vector has length {}, ON vector has length {}",
                access_probs.len(),
                on_probs.len()
            )));
        }
        if access_probs.is_empty() {
            return Err(Error::InvalidProfile("profile must not be empty".into()));
        }
        for (name, v) in [("access", &access_probs), ("on", &on_probs)] {
            for (i, &x) in v.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidProfile(format!(
                        "{name}[{i}] = {x} is outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self {
            variant,
            access_probs,
            on_probs,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.on_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.on_probs.is_empty()
    }

    /// Per-slot transmit probabilities (original) or backoff probabilities (modified).
    pub fn access_probs(&self) -> &[f64] {
        &self.access_probs
    }

    /// Per-frame ON probabilities.
    pub fn on_probs(&self) -> &[f64] {
        &self.on_probs
    }

    /// Replaces one user's pair. Values must already be in [0, 1].
    pub(crate) fn set_user(&mut self, user: usize, access: f64, on: f64) {
        debug_assert!((0.0..=1.0).contains(&access) && (0.0..=1.0).contains(&on));
        self.access_probs[user] = access;
        self.on_probs[user] = on;
    }

    fn check_dims(&self, config: &SystemConfig) -> Result<()> {
        if self.len() != config.num_users() {
            return Err(Error::DimensionMismatch {
                profile_len: self.len(),
                config_len: config.num_users(),
            });
        }
        Ok(())
    }
}

/// Mean per-user throughput and energy of a profile, plus the system total.
#[derive(Debug, Clone, PartialEq)]
pub struct PerUserMetrics {
    pub throughput: Vec<f64>,
    pub energy: Vec<f64>,
    pub total_throughput: f64,
}

/// Outcome of a feasibility check: the verdict plus per-user budget slack
/// `budget_i − E_i` (negative where the budget is exceeded).
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub slack: Vec<f64>,
}

/// `out[i] = Π_{j≠i} factors[j]`, computed with prefix/suffix products so that
/// zero factors need no division.
pub(crate) fn leave_one_out_products(factors: &[f64]) -> Vec<f64> {
    let n = factors.len();
    let mut out = vec![1.0; n];
    let mut acc = 1.0;
    for i in 0..n {
        out[i] = acc;
        acc *= factors[i];
    }
    acc = 1.0;
    for i in (0..n).rev() {
        out[i] *= acc;
        acc *= factors[i];
    }
    out
}

/// Mean per-user throughput (successes per slot) of a profile.
pub fn mean_throughput(profile: &StrategyProfile, config: &SystemConfig) -> Result<Vec<f64>> {
    profile.check_dims(config)?;
    Ok(match profile.variant {
        Variant::Original => throughput_original(&profile.access_probs, &profile.on_probs),
        Variant::Modified => throughput_modified(&profile.access_probs, &profile.on_probs),
    })
}

/// Mean per-user energy per frame of a profile.
pub fn mean_energy(profile: &StrategyProfile, config: &SystemConfig) -> Result<Vec<f64>> {
    profile.check_dims(config)?;
    let (c1, c2) = (config.on_cost, config.tx_cost);
    Ok(match profile.variant {
        Variant::Original => energy_original(&profile.access_probs, &profile.on_probs, c1, c2),
        Variant::Modified => energy_modified(&profile.access_probs, &profile.on_probs, c1, c2),
    })
}

/// Throughput, energy and the total in one call.
pub fn evaluate(profile: &StrategyProfile, config: &SystemConfig) -> Result<PerUserMetrics> {
    let throughput = mean_throughput(profile, config)?;
    let energy = mean_energy(profile, config)?;
    let total_throughput = throughput.iter().sum();
    Ok(PerUserMetrics {
        throughput,
        energy,
        total_throughput,
    })
}

fn throughput_original(p: &[f64], q: &[f64]) -> Vec<f64> {
    let joint: Vec<f64> = p.iter().zip(q).map(|(&p, &q)| p * q).collect();
    let idle: Vec<f64> = joint.iter().map(|&a| 1.0 - a).collect();
    let others_idle = leave_one_out_products(&idle);
    joint
        .iter()
        .zip(&others_idle)
        .map(|(&a, &rest)| a * rest)
        .collect()
}

fn throughput_modified(backoff: &[f64], q: &[f64]) -> Vec<f64> {
    let off: Vec<f64> = q.iter().map(|&q| 1.0 - q).collect();
    let others_off = leave_one_out_products(&off);
    let quiet: Vec<f64> = backoff.iter().zip(q).map(|(&b, &q)| 1.0 - b * q).collect();
    let others_quiet = leave_one_out_products(&quiet);
    (0..q.len())
        .map(|i| q[i] * ((1.0 - backoff[i]) * others_off[i] + backoff[i] * others_quiet[i]))
        .collect()
}

fn energy_original(p: &[f64], q: &[f64], c1: f64, c2: f64) -> Vec<f64> {
    p.iter().zip(q).map(|(&p, &q)| q * (c1 + c2 * p)).collect()
}

fn energy_modified(backoff: &[f64], q: &[f64], c1: f64, c2: f64) -> Vec<f64> {
    let off: Vec<f64> = q.iter().map(|&q| 1.0 - q).collect();
    let others_off = leave_one_out_products(&off);
    (0..q.len())
        .map(|i| q[i] * (c1 + c2 * (backoff[i] + (1.0 - backoff[i]) * others_off[i])))
        .collect()
}

/// Checks the per-user energy constraints `E_i ≤ budget_i + tol` with the
/// variant-appropriate energy formula and reports the per-user slack.
pub fn is_feasible(
    profile: &StrategyProfile,
    config: &SystemConfig,
    tol: f64,
) -> Result<Feasibility> {
    let energy = mean_energy(profile, config)?;
    let slack: Vec<f64> = config
        .energy_budgets
        .iter()
        .zip(&energy)
        .map(|(&budget, &e)| budget - e)
        .collect();
    let feasible = slack.iter().all(|&s| s >= -tol);
    Ok(Feasibility { feasible, slack })
}

/// Collapses an original-variant profile to its throughput-equivalent
/// full-access form: every access probability becomes 1 and the ON probability
/// absorbs the product `p_i q_i`.
///
/// Throughput is unchanged (it depends on the products only) and per-user
/// energy can only drop; the total saving is exactly `c1 · Σ q_i (1 − p_i)`.
pub fn to_full_access(profile: &StrategyProfile) -> Result<StrategyProfile> {
    if profile.variant != Variant::Original {
        return Err(Error::InvalidProfile(
            "full-access canonicalization applies to the original variant only".into(),
        ));
    }
    let joint: Vec<f64> = profile
        .access_probs
        .iter()
        .zip(&profile.on_probs)
        .map(|(&p, &q)| p * q)
        .collect();
    StrategyProfile::original(vec![1.0; joint.len()], joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(budgets: &[f64]) -> SystemConfig {
        SystemConfig::new(budgets.to_vec(), 50.0, 70.0).unwrap()
    }

    #[test]
    fn config_rejects_bad_parameters() {
        assert!(SystemConfig::new(vec![], 50.0, 70.0).is_err());
        assert!(SystemConfig::new(vec![10.0], 0.0, 70.0).is_err());
        assert!(SystemConfig::new(vec![10.0], -1.0, 70.0).is_err());
        assert!(SystemConfig::new(vec![10.0], 50.0, -0.5).is_err());
        assert!(SystemConfig::new(vec![-1.0], 50.0, 70.0).is_err());
        assert!(SystemConfig::new(vec![f64::NAN], 50.0, 70.0).is_err());
        assert!(SystemConfig::new(vec![10.0], 50.0, 0.0).is_ok());
    }

    #[test]
    fn profile_rejects_out_of_range() {
        assert!(StrategyProfile::original(vec![1.2], vec![0.5]).is_err());
        assert!(StrategyProfile::original(vec![0.5], vec![-0.1]).is_err());
        assert!(StrategyProfile::original(vec![0.5, 0.5], vec![0.5]).is_err());
        assert!(StrategyProfile::original(vec![], vec![]).is_err());
    }

    #[test]
    fn throughput_original_examples() {
        let cfg = config(&[100.0, 100.0]);
        let all_off = StrategyProfile::original(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(mean_throughput(&all_off, &cfg).unwrap(), vec![0.0, 0.0]);

        let half = StrategyProfile::original(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let t = mean_throughput(&half, &cfg).unwrap();
        assert_abs_diff_eq!(t[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1], 0.25, epsilon = 1e-15);

        let solo_cfg = config(&[200.0]);
        let solo = StrategyProfile::original(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(mean_throughput(&solo, &solo_cfg).unwrap(), vec![1.0]);
    }

    #[test]
    fn energy_original_examples() {
        let cfg = config(&[100.0]);
        let p = StrategyProfile::original(vec![1.0], vec![0.25]).unwrap();
        assert_abs_diff_eq!(mean_energy(&p, &cfg).unwrap()[0], 30.0, epsilon = 1e-12);

        let off = StrategyProfile::original(vec![0.7], vec![0.0]).unwrap();
        assert_eq!(mean_energy(&off, &cfg).unwrap()[0], 0.0);

        let idle = StrategyProfile::original(vec![0.0], vec![1.0]).unwrap();
        assert_abs_diff_eq!(mean_energy(&idle, &cfg).unwrap()[0], 50.0, epsilon = 1e-12);
    }

    #[test]
    fn throughput_modified_examples() {
        let cfg = config(&[100.0, 100.0]);
        let p = StrategyProfile::modified(vec![1.0, 0.0], vec![0.25, 0.243902]).unwrap();
        let t = mean_throughput(&p, &cfg).unwrap();
        assert_abs_diff_eq!(t[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(t[1], 0.243902 * 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(t[1], 0.182927, epsilon = 1e-6);

        let off = StrategyProfile::modified(vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
        assert_eq!(mean_throughput(&off, &cfg).unwrap(), vec![0.0, 0.0]);

        // With zero backoff the expression collapses to q_i Π(1−q_j).
        let shy = StrategyProfile::modified(vec![0.0, 0.0], vec![0.3, 0.3]).unwrap();
        let t = mean_throughput(&shy, &cfg).unwrap();
        assert_abs_diff_eq!(t[0], 0.21, epsilon = 1e-12);
        assert_abs_diff_eq!(t[1], 0.21, epsilon = 1e-12);
    }

    #[test]
    fn energy_modified_examples() {
        let cfg = config(&[100.0, 100.0]);
        let p = StrategyProfile::modified(vec![1.0, 0.0], vec![0.25, 0.243902]).unwrap();
        let e = mean_energy(&p, &cfg).unwrap();
        assert_abs_diff_eq!(e[1], 0.243902 * (50.0 + 70.0 * 0.75), epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 25.0, epsilon = 1e-4);

        // Full backoff reduces to the original full-access cost q (c1 + c2).
        let cfg1 = config(&[100.0]);
        let aggressive = StrategyProfile::modified(vec![1.0], vec![0.25]).unwrap();
        assert_abs_diff_eq!(
            mean_energy(&aggressive, &cfg1).unwrap()[0],
            30.0,
            epsilon = 1e-12
        );

        let off = StrategyProfile::modified(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(mean_energy(&off, &cfg).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn feasibility_examples() {
        let cfg = config(&[30.0]);
        let over = StrategyProfile::original(vec![1.0], vec![0.5]).unwrap();
        let f = is_feasible(&over, &cfg, DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(!f.feasible);
        assert_abs_diff_eq!(f.slack[0], -30.0, epsilon = 1e-12);

        let zero = StrategyProfile::original(vec![0.0], vec![0.0]).unwrap();
        assert!(is_feasible(&zero, &cfg, 0.0).unwrap().feasible);

        // Budgets are tight at the caps by construction.
        let cfg5 = config(&[30.0, 25.0, 15.0, 10.0, 5.0]);
        let caps = cfg5.energy_caps();
        let tight =
            StrategyProfile::original(vec![1.0; 5], caps.values().to_vec()).unwrap();
        let f = is_feasible(&tight, &cfg5, DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(f.feasible);
        for &s in &f.slack {
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn energy_caps_examples() {
        let cfg = config(&[30.0, 25.0, 15.0, 10.0, 5.0]);
        let caps = cfg.energy_caps();
        let expected = [0.25, 25.0 / 120.0, 0.125, 10.0 / 120.0, 5.0 / 120.0];
        for (got, want) in caps.values().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }

        assert_eq!(config(&[0.0]).energy_caps().get(0), 0.0);
        assert_eq!(config(&[500.0]).energy_caps().get(0), 1.0);
    }

    #[test]
    fn full_access_projection() {
        let p = StrategyProfile::original(vec![0.5, 0.5], vec![0.8, 0.8]).unwrap();
        let canon = to_full_access(&p).unwrap();
        assert_eq!(canon.access_probs(), &[1.0, 1.0]);
        assert_abs_diff_eq!(canon.on_probs()[0], 0.4, epsilon = 1e-15);

        let fixed = StrategyProfile::original(vec![1.0, 1.0], vec![0.3, 0.7]).unwrap();
        assert_eq!(to_full_access(&fixed).unwrap(), fixed);

        // Energy drop matches c1 Σ q_i (1 − p_i).
        let cfg = config(&[100.0]);
        let before = StrategyProfile::original(vec![0.5], vec![0.8]).unwrap();
        let after = to_full_access(&before).unwrap();
        let drop = mean_energy(&before, &cfg).unwrap()[0] - mean_energy(&after, &cfg).unwrap()[0];
        assert_abs_diff_eq!(drop, 20.0, epsilon = 1e-12);

        let modified = StrategyProfile::modified(vec![0.5], vec![0.5]).unwrap();
        assert!(to_full_access(&modified).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = config(&[30.0, 25.0]);
        let p = StrategyProfile::original(vec![1.0], vec![0.5]).unwrap();
        assert_eq!(
            mean_throughput(&p, &cfg),
            Err(Error::DimensionMismatch {
                profile_len: 1,
                config_len: 2
            })
        );
        assert!(mean_energy(&p, &cfg).is_err());
        assert!(is_feasible(&p, &cfg, 0.0).is_err());
    }

    #[test]
    fn ordering_is_stable_on_ties() {
        let cfg = config(&[10.0, 30.0, 10.0, 30.0]);
        assert_eq!(cfg.order_by_budget(), vec![1, 3, 0, 2]);
    }

    #[test]
    fn leave_one_out_handles_zeros() {
        let loo = leave_one_out_products(&[0.5, 0.0, 2.0]);
        assert_eq!(loo, vec![0.0, 1.0, 0.0]);
        assert_eq!(leave_one_out_products(&[3.0]), vec![1.0]);
    }
}

//! Randomized invariants of the model, the schedulers and the game solvers.
//!
//! The heavyweight scheduler-vs-oracle and simulator-vs-closed-form sweeps
//! live in the `acceptance` target; these checks cover the structural
//! invariants on randomized inputs.

use aloha_energy::game;
use aloha_energy::model::{self, StrategyProfile, SystemConfig};
use aloha_energy::optimize::{self, PartitionAssignment, SolverOptions};
use aloha_energy::sim::{self, SimParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_config(max_users: usize) -> impl Strategy<Value = SystemConfig> {
    (
        prop::collection::vec(0.0f64..240.0, 1..=max_users),
        10.0f64..100.0,
        0.0f64..150.0,
    )
        .prop_map(|(budgets, c1, c2)| SystemConfig::new(budgets, c1, c2).unwrap())
}

fn arb_profile_for(
    config: &SystemConfig,
    variant: model::Variant,
) -> impl Strategy<Value = StrategyProfile> {
    let n = config.num_users();
    (
        prop::collection::vec(0.0f64..=1.0, n),
        prop::collection::vec(0.0f64..=1.0, n),
    )
        .prop_map(move |(access, on)| StrategyProfile::new(variant, access, on).unwrap())
}

fn arb_instance(variant: model::Variant) -> impl Strategy<Value = (SystemConfig, StrategyProfile)> {
    arb_config(6).prop_flat_map(move |config| {
        let profiles = arb_profile_for(&config, variant);
        (Just(config), profiles)
    })
}

proptest! {
    /// The channel carries at most one success per slot, each user is bounded
    /// by its own activity, and energy stays within a full frame's cost.
    #[test]
    fn throughput_and_energy_bounds((config, profile) in prop_oneof![
        arb_instance(model::Variant::Original),
        arb_instance(model::Variant::Modified),
    ]) {
        let metrics = model::evaluate(&profile, &config).unwrap();
        prop_assert!(metrics.total_throughput <= 1.0 + 1e-12);
        for i in 0..profile.len() {
            let own_activity = match profile.variant() {
                model::Variant::Original => profile.access_probs()[i] * profile.on_probs()[i],
                model::Variant::Modified => profile.on_probs()[i],
            };
            prop_assert!(metrics.throughput[i] <= own_activity + 1e-12);
            prop_assert!(metrics.throughput[i] >= 0.0);
            prop_assert!(metrics.energy[i] >= 0.0);
            prop_assert!(metrics.energy[i] <= config.full_frame_cost() + 1e-9);
        }
    }

    /// Full backoff reproduces the original variant at full access; zero
    /// backoff collapses to lone-frame throughput with a bounded energy bill.
    #[test]
    fn modified_endpoints_match_closed_forms((config, profile) in arb_instance(model::Variant::Modified)) {
        let n = config.num_users();
        let q = profile.on_probs().to_vec();

        let all_in = StrategyProfile::modified(vec![1.0; n], q.clone()).unwrap();
        let original = StrategyProfile::original(vec![1.0; n], q.clone()).unwrap();
        let t_modified = model::mean_throughput(&all_in, &config).unwrap();
        let t_original = model::mean_throughput(&original, &config).unwrap();
        for (a, b) in t_modified.iter().zip(&t_original) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let e_modified = model::mean_energy(&all_in, &config).unwrap();
        let e_original = model::mean_energy(&original, &config).unwrap();
        for (a, b) in e_modified.iter().zip(&e_original) {
            prop_assert!((a - b).abs() <= 1e-9);
        }

        let shy = StrategyProfile::modified(vec![0.0; n], q.clone()).unwrap();
        let t_shy = model::mean_throughput(&shy, &config).unwrap();
        let e_shy = model::mean_energy(&shy, &config).unwrap();
        let off: Vec<f64> = q.iter().map(|&q| 1.0 - q).collect();
        for i in 0..n {
            let others_off: f64 = (0..n).filter(|&j| j != i).map(|j| off[j]).product();
            prop_assert!((t_shy[i] - q[i] * others_off).abs() <= 1e-12);
            prop_assert!(e_shy[i] <= q[i] * config.full_frame_cost() + 1e-9);
        }
    }

    /// Fair allocation is exact (`q_i = min{w_i, cap_i}`) and always feasible.
    #[test]
    fn fair_allocation_is_exact_and_feasible(config in arb_config(6)) {
        prop_assume!(config.energy_budgets().iter().sum::<f64>() > 0.0);
        let profile = optimize::fair_allocation(&config, None).unwrap();
        let weights = optimize::FairWeights::proportional_to_budgets(&config).unwrap();
        let caps = config.energy_caps();
        for i in 0..config.num_users() {
            prop_assert_eq!(profile.on_probs()[i], weights.values()[i].min(caps.get(i)));
        }
        let feasibility = model::is_feasible(&profile, &config, 1e-9).unwrap();
        prop_assert!(feasibility.feasible);
    }

    /// Activation structure: every user exactly at 0 or its cap, the active
    /// set a prefix of the decreasing-budget order, and the contention-load
    /// consistency conditions.
    #[test]
    fn activation_structure(config in arb_config(8)) {
        let result = optimize::optimal_activation(&config);
        let caps = config.energy_caps();
        for i in 0..config.num_users() {
            let q = result.profile.on_probs()[i];
            prop_assert!(q == 0.0 || q == caps.get(i));
        }
        // Prefix of the decreasing-budget order.
        let order = config.order_by_budget();
        prop_assert_eq!(&order[..result.active_set.len()], &result.active_set[..]);

        let load_of = |user: usize| {
            let cap = caps.get(user);
            if cap >= 1.0 { f64::INFINITY } else { cap / (1.0 - cap) }
        };
        for &k in &result.active_set {
            let others: f64 = result
                .active_set
                .iter()
                .filter(|&&j| j != k)
                .map(|&j| load_of(j))
                .sum();
            prop_assert!(others < 1.0);
        }
        let left_out = (0..config.num_users())
            .any(|i| caps.get(i) > 0.0 && !result.active_set.contains(&i));
        if left_out {
            let total: f64 = result.active_set.iter().map(|&j| load_of(j)).sum();
            prop_assert!(total >= 1.0);
        }
    }

    /// The conservative fixed point satisfies its defining equation.
    #[test]
    fn conservative_fixed_point_residuals(config in arb_config(5)) {
        let n = config.num_users();
        prop_assume!(n >= 2);
        let aggressive = vec![0];
        let conservative: Vec<usize> = (1..n).collect();
        let partition = PartitionAssignment::new(aggressive, conservative.clone(), vec![], n).unwrap();
        let tol = 1e-10;
        let q = optimize::conservative_fixed_point(&partition, &config, tol, 10_000).unwrap();
        prop_assert_eq!(q[0], config.energy_caps().get(0));
        for &k in &conservative {
            let others_off: f64 = (0..n).filter(|&j| j != k).map(|j| 1.0 - q[j]).product();
            let target = (config.budget(k)
                / (config.on_cost() + config.tx_cost() * others_off))
                .min(1.0);
            if q[k] < 1.0 {
                prop_assert!((q[k] - target).abs() < tol);
            } else {
                prop_assert_eq!(q[k], 1.0);
            }
        }
    }
}

/// Full-access canonicalization over 10^4 random profiles: throughput is
/// preserved, no user's energy grows, and the saving is exactly
/// `c1 Σ q_i (1 − p_i)`.
#[test]
fn full_access_projection_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e3a);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=6);
        let c1 = rng.gen_range(10.0..100.0);
        let c2 = rng.gen_range(0.0..150.0);
        let budgets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..240.0)).collect();
        let config = SystemConfig::new(budgets, c1, c2).unwrap();
        let p: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let profile = StrategyProfile::original(p.clone(), q.clone()).unwrap();
        let canon = model::to_full_access(&profile).unwrap();

        let t_before = model::mean_throughput(&profile, &config).unwrap();
        let t_after = model::mean_throughput(&canon, &config).unwrap();
        for (a, b) in t_before.iter().zip(&t_after) {
            assert!((a - b).abs() <= 1e-12);
        }

        let e_before = model::mean_energy(&profile, &config).unwrap();
        let e_after = model::mean_energy(&canon, &config).unwrap();
        let mut drop = 0.0;
        for i in 0..n {
            assert!(e_after[i] <= e_before[i] + 1e-12);
            drop += e_before[i] - e_after[i];
        }
        let expected: f64 = (0..n).map(|i| c1 * q[i] * (1.0 - p[i])).sum();
        assert!((drop - expected).abs() <= 1e-9);
    }
}

/// The partition search never falls below the activation schedule.
#[test]
fn partition_beats_activation_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa10);
    let opts = SolverOptions::default();
    for _ in 0..25 {
        let n = rng.gen_range(2..=4);
        let budgets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..240.0)).collect();
        let config = SystemConfig::new(budgets, 50.0, 70.0).unwrap();
        let partition = optimize::optimal_partition(&config, &opts).unwrap();
        let activation = optimize::optimal_activation(&config);
        assert!(
            partition.total_throughput >= activation.total_throughput - 1e-9,
            "partition {} < activation {}",
            partition.total_throughput,
            activation.total_throughput
        );
    }
}

/// The best response is a true argmax: no backoff level on a 0.01 grid, with
/// its budget-tight ON probability, improves the payoff by more than 1e-9.
///
/// Endpoint optimality rests on the budget constraint binding for every
/// backoff choice; once the ON probability clips at 1 the payoff has a kink
/// and an interior backoff can win, so users whose budget can saturate the
/// tight ON probability are skipped.
#[test]
fn best_response_is_argmax_on_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbe57);
    let mut checked = 0usize;
    for _ in 0..90 {
        let n = rng.gen_range(2..=5);
        let budgets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..240.0)).collect();
        let config = SystemConfig::new(budgets, 50.0, 70.0).unwrap();
        let backoff: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
            .collect();
        let caps = config.energy_caps();
        let q: Vec<f64> = (0..n).map(|i| rng.gen::<f64>() * caps.get(i)).collect();
        let profile = StrategyProfile::modified(backoff, q).unwrap();

        let payoff_of = |user: usize, b: f64, q: f64| {
            let mut access = profile.access_probs().to_vec();
            let mut on = profile.on_probs().to_vec();
            access[user] = b;
            on[user] = q;
            let candidate = StrategyProfile::modified(access, on).unwrap();
            model::mean_throughput(&candidate, &config).unwrap()[user]
        };

        for user in 0..n {
            let others_off: f64 = (0..n)
                .filter(|&j| j != user)
                .map(|j| 1.0 - profile.on_probs()[j])
                .product();
            // Smallest tight-ON denominator over b in [0, 1] is at b = 0.
            if config.budget(user) >= config.on_cost() + config.tx_cost() * others_off - 1e-9 {
                continue;
            }
            checked += 1;
            let (br_backoff, br_q) = game::best_response(user, &profile, &config).unwrap();
            let br_payoff = payoff_of(user, br_backoff, br_q);
            for step in 0..=100 {
                let b = step as f64 / 100.0;
                let denom = config.on_cost()
                    + config.tx_cost() * (b + (1.0 - b) * others_off);
                let q_b = (config.budget(user) / denom).min(1.0);
                let payoff = payoff_of(user, b, q_b);
                assert!(
                    payoff <= br_payoff + 1e-9,
                    "user {user}: backoff {b} pays {payoff} > best response {br_payoff}"
                );
            }
        }
    }
    assert!(checked >= 50, "only {checked} constrained users exercised");
}

/// Price of anarchy of the original game is never below 1 and collapses to 1
/// exactly when the activation schedule enables everyone.
#[test]
fn original_poa_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x90a);
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let budgets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..240.0)).collect();
        let config = SystemConfig::new(budgets, 50.0, 70.0).unwrap();
        let poa = game::price_of_anarchy_original(&config);
        assert!(poa >= 1.0 - 1e-12);
        let activation = optimize::optimal_activation(&config);
        let everyone_with_budget = (0..n)
            .filter(|&i| config.energy_caps().get(i) > 0.0)
            .count();
        if activation.active_set.len() == everyone_with_budget {
            assert!((poa - 1.0).abs() <= 1e-12 || poa == 1.0);
        }
    }
}

/// Shared body of the simulator-consistency checks: the closed-form means must
/// lie within `3·stderr` plus the probe-slot bias allowance of the simulated
/// means, and the mean number of ON users must match `Σ q_i`.
fn assert_sim_matches_model(variant: model::Variant, seed: u64) {
    let config = SystemConfig::new(vec![30.0, 25.0, 15.0, 10.0, 5.0], 50.0, 70.0).unwrap();
    let caps = config.energy_caps();
    let n = config.num_users();
    let params = SimParams {
        frames: 100_000,
        slots_per_frame: 100,
        seed,
    };
    let slot_bias = 2.0 / params.slots_per_frame as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..50 {
        let profile = match variant {
            model::Variant::Original => {
                let mut p = vec![0.0; n];
                let mut q = vec![0.0; n];
                for i in 0..n {
                    p[i] = rng.gen::<f64>();
                    let q_max = (config.budget(i)
                        / (config.on_cost() + config.tx_cost() * p[i]))
                        .min(1.0);
                    q[i] = rng.gen::<f64>() * q_max;
                }
                StrategyProfile::original(p, q).unwrap()
            }
            model::Variant::Modified => {
                let backoff: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                let q: Vec<f64> = (0..n).map(|i| rng.gen::<f64>() * caps.get(i)).collect();
                StrategyProfile::modified(backoff, q).unwrap()
            }
        };
        assert!(model::is_feasible(&profile, &config, 1e-9).unwrap().feasible);
        let estimate = sim::simulate(
            &profile,
            &config,
            &SimParams {
                seed: seed.wrapping_add(case),
                ..params
            },
        )
        .unwrap();
        let throughput = model::mean_throughput(&profile, &config).unwrap();
        let energy = model::mean_energy(&profile, &config).unwrap();
        for i in 0..n {
            let t_err = (estimate.mean_throughput[i] - throughput[i]).abs();
            assert!(
                t_err <= 3.0 * estimate.stderr_throughput[i] + slot_bias,
                "case {case} user {i}: throughput err {t_err}"
            );
            // The probe slot's energy scales with the transmission cost.
            let e_err = (estimate.mean_energy[i] - energy[i]).abs();
            assert!(
                e_err <= 3.0 * estimate.stderr_energy[i] + slot_bias * config.tx_cost(),
                "case {case} user {i}: energy err {e_err}"
            );
        }
        let expected_active: f64 = profile.on_probs().iter().sum();
        assert!(
            (estimate.mean_active_users - expected_active).abs()
                <= 3.0 * estimate.stderr_active_users,
            "case {case}: mean active {} vs {expected_active}",
            estimate.mean_active_users
        );
    }
}

#[test]
fn simulator_consistent_with_model_original() {
    assert_sim_matches_model(model::Variant::Original, 0x0516);
}

#[test]
fn simulator_consistent_with_model_modified() {
    assert_sim_matches_model(model::Variant::Modified, 0x0517);
}

/// Enumerated equilibria verify user by user, price of stability never exceeds
/// price of anarchy, and converged dynamics land on an enumerated equilibrium.
#[test]
fn equilibrium_set_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e7);
    let opts = SolverOptions::default();
    for _ in 0..30 {
        let n = rng.gen_range(2..=4);
        let budgets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..240.0)).collect();
        let config = SystemConfig::new(budgets, 50.0, 70.0).unwrap();
        let report = game::equilibrium_report(&config, &opts).unwrap();
        assert!(report.pos <= report.poa);
        for eq in &report.equilibria {
            assert!(game::verifies_as_nep(&eq.profile, &config, opts.tol).unwrap());
        }

        let caps = config.energy_caps();
        let start = StrategyProfile::modified(vec![1.0; n], caps.values().to_vec()).unwrap();
        let outcome =
            game::best_response_dynamics(&config, &start, &game::DynamicsOptions::default())
                .unwrap();
        if outcome.kind == game::DynamicsKind::Converged {
            let matched = report.equilibria.iter().any(|eq| {
                eq.profile
                    .on_probs()
                    .iter()
                    .zip(outcome.final_profile.on_probs())
                    .all(|(&a, &b)| (a - b).abs() < 1e-6)
                    && eq
                        .profile
                        .access_probs()
                        .iter()
                        .zip(outcome.final_profile.access_probs())
                        .all(|(&a, &b)| (a - b).abs() < 1e-6)
            });
            assert!(matched, "converged profile missing from the enumeration");
        }
    }
}

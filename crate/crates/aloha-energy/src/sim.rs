//! Frame/slot Monte Carlo simulator.
//!
//! Each frame draws the ON states, then plays the slots of the frame under the
//! profile's access discipline. Per-frame throughput is `successes / slots`;
//! per-frame energy for an ON user is `c1 + c2 · transmissions / slots`, so a
//! user transmitting through a whole frame pays exactly `c1 + c2`. Estimates
//! are means over frames with their standard errors.
//!
//! One master seed derives an independent random stream per frame index, so
//! the results depend only on the inputs, never on scheduling or frame order.
//!
//! The backoff variant probes the first slot of every ON frame. The probe
//! counts towards both throughput and energy, while the closed-form means
//! ignore it, so finite-slot estimates carry an `O(1/slots)` bias on top of
//! the statistical error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{StrategyProfile, SystemConfig, Variant};

/// Simulation horizon and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimParams {
    /// Number of simulated frames.
    pub frames: u64,
    /// Slots per frame.
    pub slots_per_frame: u32,
    /// Master seed; frame streams are derived from it.
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            frames: 100_000,
            slots_per_frame: 100,
            seed: 42,
        }
    }
}

/// Per-user estimates produced by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    /// Mean successes per slot.
    pub mean_throughput: Vec<f64>,
    /// Mean energy per frame.
    pub mean_energy: Vec<f64>,
    pub stderr_throughput: Vec<f64>,
    pub stderr_energy: Vec<f64>,
    /// Frames each user spent ON.
    pub frames_on: Vec<u64>,
    /// Mean number of ON users per frame.
    pub mean_active_users: f64,
    pub stderr_active_users: f64,
}

struct Accumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
        }
    }

    fn add(&mut self, user: usize, value: f64) {
        self.sum[user] += value;
        self.sum_sq[user] += value * value;
    }

    fn finish(&self, frames: u64) -> (Vec<f64>, Vec<f64>) {
        let means: Vec<f64> = self.sum.iter().map(|&s| s / frames as f64).collect();
        let stderrs = self
            .sum_sq
            .iter()
            .zip(&means)
            .map(|(&sq, &mean)| stderr_of_mean(sq, mean, frames))
            .collect();
        (means, stderrs)
    }
}

fn stderr_of_mean(sum_sq: f64, mean: f64, frames: u64) -> f64 {
    if frames < 2 {
        return 0.0;
    }
    let f = frames as f64;
    let variance = ((sum_sq - f * mean * mean) / (f - 1.0)).max(0.0);
    (variance / f).sqrt()
}

/// Runs the simulator for either variant. Identical inputs (seed included)
/// produce bit-identical estimates.
pub fn simulate(
    profile: &StrategyProfile,
    config: &SystemConfig,
    params: &SimParams,
) -> Result<SimEstimate> {
    if profile.len() != config.num_users() {
        return Err(Error::DimensionMismatch {
            profile_len: profile.len(),
            config_len: config.num_users(),
        });
    }
    if params.frames == 0 || params.slots_per_frame == 0 {
        return Err(Error::InvalidConfig(
            "frames and slots_per_frame must be at least 1".into(),
        ));
    }

    let n = config.num_users();
    let slots = params.slots_per_frame;
    let (c1, c2) = (config.on_cost(), config.tx_cost());
    let access = profile.access_probs();
    let on_probs = profile.on_probs();

    let mut throughput = Accumulator::new(n);
    let mut energy = Accumulator::new(n);
    let mut frames_on = vec![0u64; n];
    let mut active_sum = 0.0f64;
    let mut active_sum_sq = 0.0f64;

    let base = ChaCha8Rng::seed_from_u64(params.seed);
    let mut on = vec![false; n];
    let mut on_users: Vec<usize> = Vec::with_capacity(n);
    let mut successes = vec![0u32; n];
    let mut transmissions = vec![0u32; n];

    for frame in 0..params.frames {
        let mut rng = base.clone();
        rng.set_stream(frame);

        on_users.clear();
        for i in 0..n {
            on[i] = rng.gen_bool(on_probs[i]);
            if on[i] {
                on_users.push(i);
                frames_on[i] += 1;
            }
        }
        let active = on_users.len();
        active_sum += active as f64;
        active_sum_sq += (active * active) as f64;
        if active == 0 {
            continue;
        }

        for s in successes.iter_mut() {
            *s = 0;
        }
        for t in transmissions.iter_mut() {
            *t = 0;
        }

        match profile.variant() {
            Variant::Original => {
                play_original_frame(
                    &mut rng,
                    &on_users,
                    access,
                    slots,
                    &mut successes,
                    &mut transmissions,
                );
            }
            Variant::Modified => {
                play_modified_frame(
                    &mut rng,
                    &on_users,
                    access,
                    slots,
                    &mut successes,
                    &mut transmissions,
                );
            }
        }

        for &i in &on_users {
            throughput.add(i, successes[i] as f64 / slots as f64);
            energy.add(i, c1 + c2 * transmissions[i] as f64 / slots as f64);
        }
    }

    let (mean_throughput, stderr_throughput) = throughput.finish(params.frames);
    let (mean_energy, stderr_energy) = energy.finish(params.frames);
    let mean_active_users = active_sum / params.frames as f64;
    let stderr_active_users = stderr_of_mean(active_sum_sq, mean_active_users, params.frames);
    Ok(SimEstimate {
        mean_throughput,
        mean_energy,
        stderr_throughput,
        stderr_energy,
        frames_on,
        mean_active_users,
        stderr_active_users,
    })
}

/// Every ON user transmits in each slot independently with its access probability.
fn play_original_frame(
    rng: &mut ChaCha8Rng,
    on_users: &[usize],
    access: &[f64],
    slots: u32,
    successes: &mut [u32],
    transmissions: &mut [u32],
) {
    let mut transmitters: Vec<usize> = Vec::with_capacity(on_users.len());
    for _ in 0..slots {
        transmitters.clear();
        for &i in on_users {
            let sends = access[i] >= 1.0 || rng.gen_bool(access[i]);
            if sends {
                transmitters.push(i);
                transmissions[i] += 1;
            }
        }
        if let [winner] = transmitters[..] {
            successes[winner] += 1;
        }
    }
    debug_assert!(
        on_users.iter().map(|&i| successes[i]).sum::<u32>() <= slots,
        "more successes than slots in one frame"
    );
}

/// Backoff discipline: everybody ON probes slot 1; a lone user keeps the whole
/// frame, a collision sends everyone to its backoff probability for the rest.
fn play_modified_frame(
    rng: &mut ChaCha8Rng,
    on_users: &[usize],
    backoff: &[f64],
    slots: u32,
    successes: &mut [u32],
    transmissions: &mut [u32],
) {
    if let [lone] = on_users[..] {
        successes[lone] = slots;
        transmissions[lone] = slots;
        return;
    }
    // Probe slot: all ON users collide.
    for &i in on_users {
        transmissions[i] += 1;
    }
    let mut transmitters: Vec<usize> = Vec::with_capacity(on_users.len());
    for _ in 1..slots {
        transmitters.clear();
        for &i in on_users {
            let sends = backoff[i] >= 1.0 || (backoff[i] > 0.0 && rng.gen_bool(backoff[i]));
            if sends {
                transmitters.push(i);
                transmissions[i] += 1;
            }
        }
        if let [winner] = transmitters[..] {
            successes[winner] += 1;
        }
    }
    debug_assert!(
        on_users.iter().map(|&i| successes[i]).sum::<u32>() < slots,
        "a collided probe slot cannot be a success"
    );
}

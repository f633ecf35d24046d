//! Energy-constrained slotted ALOHA with sleep modes.
//!
//! Saturated users share a slotted channel; to stretch a limited energy budget
//! each user may sleep entire frames, waking with a per-frame ON probability
//! and transmitting inside ON frames with a per-slot access probability. This
//! crate provides:
//!
//! * [`model`] — the domain types and exact closed-form per-user throughput
//!   and energy for both access disciplines, feasibility checks, and the
//!   throughput-preserving full-access canonical form.
//! * [`optimize`] — the greedy activation scheduler (throughput-optimal), the
//!   proportional-fair closed form, the aggressive/conservative/passive
//!   partition search for the backoff discipline, and a brute-force oracle.
//! * [`game`] — equilibria of the induced non-cooperative games: the unique
//!   equilibrium of the original game, best responses and round-robin dynamics
//!   of the backoff game, exhaustive equilibrium enumeration, and price of
//!   anarchy / price of stability reports.
//! * [`sim`] — a deterministic frame/slot Monte Carlo simulator that validates
//!   the closed forms empirically.
//! * [`presets`] — informational radio power-mode constants.
//!
//! The `aloha-lab` binary in the same workspace exposes all of this as a
//! command-line experiment runner; the `book/` directory holds a guide whose
//! code snippets double as this crate's doc-tests.
//!
//! ```
//! use aloha_energy::model::{self, StrategyProfile, SystemConfig};
//!
//! let config = SystemConfig::new(vec![30.0, 25.0], 50.0, 70.0)?;
//! let caps = config.energy_caps();
//! let profile = StrategyProfile::original(vec![1.0, 1.0], caps.values().to_vec())?;
//! let metrics = model::evaluate(&profile, &config)?;
//! assert!(metrics.total_throughput > 0.35);
//! # Ok::<(), aloha_energy::Error>(())
//! ```

pub mod error;
pub mod game;
pub mod model;
pub mod optimize;
pub mod presets;
pub mod sim;

pub use error::{Error, Result};
pub use model::{PerUserMetrics, StrategyProfile, SystemConfig, Variant};

// The guide's code snippets compile and run as doc-tests so the book cannot
// drift from the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Model, "../../../book/src/model.md");
    chapter!(Schedulers, "../../../book/src/schedulers.md");
    chapter!(Games, "../../../book/src/games.md");
    chapter!(Simulation, "../../../book/src/simulation.md");
    chapter!(Lab, "../../../book/src/lab.md");
}

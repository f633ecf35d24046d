//! Informational radio presets.
//!
//! Measured characteristics of the CC2420 transceiver's power modes. These are
//! reference data for picking realistic cost parameters; nothing in the model
//! consumes them.

/// One radio power mode: how long and how much energy a transition into the
/// active state costs, and the current drawn while in the mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMode {
    pub name: &'static str,
    pub switching_time_ms: f64,
    pub switching_energy_uj: f64,
    pub current_consumption_ua: f64,
}

/// CC2420 power modes, deepest sleep last.
pub const CC2420_POWER_MODES: [PowerMode; 4] = [
    PowerMode {
        name: "tx",
        switching_time_ms: 0.0,
        switching_energy_uj: 0.0,
        current_consumption_ua: 10_000.0,
    },
    PowerMode {
        name: "idle",
        switching_time_ms: 0.1,
        switching_energy_uj: 1.035,
        current_consumption_ua: 426.0,
    },
    PowerMode {
        name: "power_down",
        switching_time_ms: 1.2,
        switching_energy_uj: 42.3,
        current_consumption_ua: 40.0,
    },
    PowerMode {
        name: "deep_sleep",
        switching_time_ms: 2.4,
        switching_energy_uj: 85.7,
        current_consumption_ua: 0.02,
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deeper_modes_draw_less_but_switch_slower() {
        for pair in CC2420_POWER_MODES.windows(2) {
            assert!(pair[0].current_consumption_ua > pair[1].current_consumption_ua);
            assert!(pair[0].switching_time_ms < pair[1].switching_time_ms);
            assert!(pair[0].switching_energy_uj < pair[1].switching_energy_uj);
        }
    }
}

use serde::{Deserialize, Serialize};

use super::AcousticsError;

/// Residual burst time treated as exhausted.
const BURST_EPS: f64 = 1e-9;

/// On/off amplitude envelope applied to the focus so it can be felt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    /// Hz
    pub frequency: f64,
    /// On fraction of each period.
    pub duty: f64,
    /// Seconds of output left.
    pub burst_remaining: f64,
}

impl Default for ModulationState {
    fn default() -> Self {
        Self {
            frequency: 200.0,
            duty: 0.5,
            burst_remaining: 0.0,
        }
    }
}

impl ModulationState {
    pub fn new(frequency: f64, duty: f64) -> Result<Self, AcousticsError> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(AcousticsError::InvalidModulation("frequency must be > 0"));
        }
        if !(duty > 0.0 && duty < 1.0) {
            return Err(AcousticsError::InvalidModulation("duty must lie in (0, 1)"));
        }
        Ok(Self {
            frequency,
            duty,
            burst_remaining: 0.0,
        })
    }

    pub fn with_burst(mut self, seconds: f64) -> Self {
        self.burst_remaining = seconds.max(0.0);
        self
    }

    pub fn active(&self) -> bool {
        self.burst_remaining > BURST_EPS
    }

    pub fn advance(&mut self, dt: f64) {
        self.burst_remaining = (self.burst_remaining - dt).max(0.0);
        if self.burst_remaining <= BURST_EPS {
            self.burst_remaining = 0.0;
        }
    }
}

/// Square wave: 1 for the first `duty` of each period, 0 otherwise, and 0
/// once the burst is exhausted. `t` is time since the burst started.
pub fn am_envelope(state: &ModulationState, t: f64) -> u8 {
    if !state.active() {
        return 0;
    }
    let cycles = t.max(0.0) * state.frequency;
    let mut phase = cycles - cycles.floor();
    // sample times that land on a period boundary up to rounding
    if 1.0 - phase < 1e-9 {
        phase = 0.0;
    }
    u8::from(phase < state.duty - 1e-12)
}

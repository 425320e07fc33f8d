//! The agent's body: Energy and Socialness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::ActionOutcome;

/// Values below this after a decrement are treated as exactly zero, so
/// accumulated rounding in `0.7 - 0.03k + 0.4j` cannot keep a starved
/// agent alive on a residue like 1e-17.
const ZERO_SNAP: f64 = 1e-9;

pub const SET_POINT_MIN: f64 = 0.05;
pub const SET_POINT_MAX: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhysiologyError {
    #[error("agent is dead")]
    DeadAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalVariable {
    pub value: f64,
    pub set_point: f64,
    pub decay: f64,
}

impl InternalVariable {
    pub fn new(value: f64, set_point: f64, decay: f64) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            set_point: set_point.clamp(SET_POINT_MIN, SET_POINT_MAX),
            decay,
        }
    }

    fn decay_once(&mut self) {
        let v = self.value - self.decay;
        self.value = if v < ZERO_SNAP { 0.0 } else { v };
    }

    fn replenish(&mut self, gain: f64) {
        self.value = (self.value + gain).min(1.0);
    }

    /// Deficit signal: strictly below the set point.
    pub fn in_deficit(&self) -> bool {
        self.value < self.set_point
    }

    /// `100 · value / set_point`.
    pub fn comfort_pct(&self) -> f64 {
        100.0 * self.value / self.set_point
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysiologyState {
    pub energy: InternalVariable,
    pub socialness: InternalVariable,
    pub alive: bool,
    /// Increment applied by a successful consummatory action.
    pub consumption_gain: f64,
}

impl PhysiologyState {
    pub fn new(
        energy: InternalVariable,
        socialness: InternalVariable,
        consumption_gain: f64,
    ) -> Self {
        Self {
            energy,
            socialness,
            alive: energy.value > 0.0,
            consumption_gain,
        }
    }

    /// Both variables lose their decay; Energy reaching zero is lethal.
    pub fn decay_step(&mut self) -> Result<(), PhysiologyError> {
        if !self.alive {
            return Err(PhysiologyError::DeadAgent);
        }
        self.energy.decay_once();
        self.socialness.decay_once();
        if self.energy.value == 0.0 {
            self.alive = false;
        }
        Ok(())
    }

    pub fn apply_consumption(&mut self, outcome: &ActionOutcome) -> Result<(), PhysiologyError> {
        if !self.alive {
            return Err(PhysiologyError::DeadAgent);
        }
        if outcome.consumed_food {
            self.energy.replenish(self.consumption_gain);
        }
        if outcome.consumed_friend {
            self.socialness.replenish(self.consumption_gain);
        }
        Ok(())
    }

    /// `(tummy rumble, loneliness)`.
    pub fn interoceptive_signals(&self) -> (bool, bool) {
        (self.energy.in_deficit(), self.socialness.in_deficit())
    }
}

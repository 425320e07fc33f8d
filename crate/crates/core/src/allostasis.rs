//! Cortisol secretion and its two effectors: the Energy set point and the
//! transition learning rate.
//!
//! Secretion integrates two signals each step: the change in surprisal since
//! the previous step and the indecision of the action posterior,
//! `1 − (max q_u − min q_u)`. The level is kept in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::inference::Categorical;
use crate::physiology::{SET_POINT_MAX, SET_POINT_MIN};

/// Lower bound on `ΔCT` inside the set-point update, keeping the
/// denominator away from zero.
pub const MIN_LEVEL_DELTA: f64 = -0.999;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CortisolState {
    pub level: f64,
    pub prev_level: f64,
    /// `None` until the first secretion; the first surprisal delta is then 0.
    pub prev_surprisal: Option<f64>,
}

impl CortisolState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delta(&self) -> f64 {
        self.level - self.prev_level
    }

    /// `CT ← clamp01(CT + (S_t − S_{t−1}) + (1 − spread(q_u)))`.
    pub fn secrete(&mut self, surprisal: f64, q_u: &Categorical) {
        let prev_s = self.prev_surprisal.unwrap_or(surprisal);
        let indecision = 1.0 - q_u.spread();
        let next = self.level + (surprisal - prev_s) + indecision;
        self.prev_level = self.level;
        self.level = next.clamp(0.0, 1.0);
        self.prev_surprisal = Some(surprisal);
    }
}

/// `d / (1 + CT_t − CT_{t−1})`, clamped to the set-point range.
pub fn adjust_set_point(d_prev: f64, c: &CortisolState) -> f64 {
    let delta = c.delta().max(MIN_LEVEL_DELTA);
    (d_prev / (1.0 + delta)).clamp(SET_POINT_MIN, SET_POINT_MAX)
}

/// `λ · (1 − CT)`.
pub fn modulated_learning_rate(lambda_base: f64, c: &CortisolState) -> f64 {
    lambda_base * (1.0 - c.level)
}

//! The external world: two resources that appear at random each step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::Action;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub food_present: bool,
    pub friend_present: bool,
    /// Set by explore; forces both resources on the next generation.
    pub explore_pending: bool,
    pub resource_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub action: Action,
    pub consumed_food: bool,
    pub consumed_friend: bool,
}

impl ActionOutcome {
    pub fn succeeded(&self) -> bool {
        self.consumed_food || self.consumed_friend
    }
}

impl WorldState {
    pub fn new(resource_probability: f64) -> Self {
        Self {
            food_present: false,
            friend_present: false,
            explore_pending: false,
            resource_probability,
        }
    }

    /// Fresh resources for this step. Both uniforms are always drawn, so the
    /// stream position never depends on what the agent did.
    pub fn step_generate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let food = rng.gen::<f64>() < self.resource_probability;
        let friend = rng.gen::<f64>() < self.resource_probability;
        if self.explore_pending {
            self.food_present = true;
            self.friend_present = true;
            self.explore_pending = false;
        } else {
            self.food_present = food;
            self.friend_present = friend;
        }
    }

    pub fn execute_action(&mut self, action: Action) -> ActionOutcome {
        let mut outcome = ActionOutcome {
            action,
            consumed_food: false,
            consumed_friend: false,
        };
        match action {
            Action::Eat if self.food_present => {
                outcome.consumed_food = true;
                self.food_present = false;
            }
            Action::Play if self.friend_present => {
                outcome.consumed_friend = true;
                self.friend_present = false;
            }
            Action::Explore => self.explore_pending = true,
            _ => {}
        }
        outcome
    }
}

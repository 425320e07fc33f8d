//! Per-step orchestration of world, body, hormone, and generative model.
//!
//! Stage order within a step:
//!
//! 1. the world generates resources
//! 2. the agent observes (interoception from the body, exteroception from the world)
//! 3. state inference, expected free energy, action posterior
//! 4. cortisol secretion (always computed and logged)
//! 5. Energy set-point adjustment (gated by `allostatic_setpoint`)
//! 6. action selection
//! 7. action execution and consumption
//! 8. decay and death check
//! 9. transition learning at the effective rate (gated by `learning`)

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::allostasis::{adjust_set_point, modulated_learning_rate, CortisolState};
use crate::config::{ConfigError, ExperimentConfig, ModelVariant};
use crate::environment::WorldState;
use crate::inference::{surprisal, Categorical, InferenceError};
use crate::model::{action_posterior, select_action, Action, GenerativeModel, ObservationBundle};
use crate::physiology::{InternalVariable, PhysiologyError, PhysiologyState};

/// ChaCha stream ids for the two substreams derived from a run seed.
const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Physiology(#[from] PhysiologyError),
    #[error("inference failed at step {t}: {source}")]
    Inference {
        t: usize,
        #[source]
        source: InferenceError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One row of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub energy: f64,
    pub socialness: f64,
    pub d_energy: f64,
    pub d_socialness: f64,
    pub cortisol: f64,
    pub lr_effective: f64,
    pub surprisal: f64,
    /// `surprisal(t) − surprisal(t−1)`, zero at `t = 0`.
    pub surprisal_delta: f64,
    pub q_s: Categorical,
    pub q_u: Categorical,
    pub action: Action,
    pub action_succeeded: bool,
    pub obs: ObservationBundle,
    pub alive: bool,
}

/// Everything that persists between steps of one run.
#[derive(Debug, Clone)]
pub struct Episode {
    pub model: GenerativeModel,
    pub body: PhysiologyState,
    pub cortisol: CortisolState,
    pub world: WorldState,
    variant: ModelVariant,
    lambda: f64,
    forced_action: Option<Action>,
    env_rng: ChaCha8Rng,
    agent_rng: ChaCha8Rng,
    prev: Option<(Categorical, Action)>,
    prev_surprisal: Option<f64>,
    t: usize,
}

impl Episode {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let variant = config.variant.variant();
        let body = PhysiologyState::new(
            InternalVariable::new(
                config.initial_energy,
                config.initial_set_point,
                config.gamma,
            ),
            InternalVariable::new(
                config.initial_socialness,
                config.initial_set_point,
                config.gamma,
            ),
            config.consumption_gain,
        );
        let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
        env_rng.set_stream(ENV_STREAM);
        let mut agent_rng = ChaCha8Rng::seed_from_u64(seed);
        agent_rng.set_stream(AGENT_STREAM);
        Ok(Self {
            model: config.build_model()?,
            body,
            cortisol: CortisolState::new(),
            world: WorldState::new(config.resource_probability),
            variant,
            lambda: config.lambda,
            forced_action: config.forced_action,
            env_rng,
            agent_rng,
            prev: None,
            prev_surprisal: None,
            t: 0,
        })
    }

    pub fn alive(&self) -> bool {
        self.body.alive
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn run_step(&mut self) -> Result<StepRecord, AgentError> {
        if !self.body.alive {
            return Err(PhysiologyError::DeadAgent.into());
        }
        let t = self.t;

        // 1-2
        self.world.step_generate(&mut self.env_rng);
        let (tummy_rumble, lonely) = self.body.interoceptive_signals();
        let obs = ObservationBundle {
            tummy_rumble,
            lonely,
            food: self.world.food_present,
            friend: self.world.friend_present,
        };
        debug!(
            "t={t} [observe] {obs:?} energy={:.4} d={:.4}",
            self.body.energy.value, self.body.energy.set_point
        );

        // 3
        let prior_pred = match &self.prev {
            Some((q_prev, a_prev)) => self.model.predictive_state(q_prev, *a_prev),
            None => self.model.initial_state.clone(),
        };
        let p_obs = self.model.marginal_obs_likelihood(&obs, &prior_pred);
        let s = surprisal(p_obs).map_err(|source| AgentError::Inference { t, source })?;
        let q_s = self
            .model
            .infer_state(&obs, &prior_pred)
            .map_err(|source| AgentError::Inference { t, source })?;
        let efe = self.model.efe_all(&q_s);
        let q_u = action_posterior(&efe);
        debug!(
            "t={t} [infer] prior={:?} q_s={:?} surprisal={s:.4} G={:?} q_u={:?}",
            prior_pred.probs(),
            q_s.probs(),
            efe.map(|e| e.g),
            q_u.probs()
        );

        // 4
        self.cortisol.secrete(s, &q_u);
        debug!(
            "t={t} [cortisol] level={:.4} delta={:.4}",
            self.cortisol.level,
            self.cortisol.delta()
        );

        // 5
        if self.variant.allostatic_setpoint {
            self.body.energy.set_point =
                adjust_set_point(self.body.energy.set_point, &self.cortisol);
            debug!(
                "t={t} [set-point] d_energy={:.4}",
                self.body.energy.set_point
            );
        }

        // 6
        let action = match self.forced_action {
            Some(a) => a,
            None => select_action(&q_u, &mut self.agent_rng),
        };

        // 7
        let outcome = self.world.execute_action(action);
        self.body.apply_consumption(&outcome)?;
        debug!("t={t} [act] {action} succeeded={}", outcome.succeeded());

        // 8
        self.body.decay_step()?;
        debug!(
            "t={t} [decay] energy={:.4} social={:.4} alive={}",
            self.body.energy.value, self.body.socialness.value, self.body.alive
        );

        // 9
        let lr_effective = if self.variant.learning {
            if self.variant.cortisol_modulates_learning {
                modulated_learning_rate(self.lambda, &self.cortisol)
            } else {
                self.lambda
            }
        } else {
            0.0
        };
        if self.variant.learning {
            if let Some((q_prev, a_prev)) = &self.prev {
                self.model
                    .update_transitions(q_prev, &q_s, *a_prev, lr_effective);
                debug!("t={t} [learn] B[{a_prev}] lr={lr_effective:.5}");
            }
        }

        let record = StepRecord {
            t,
            energy: self.body.energy.value,
            socialness: self.body.socialness.value,
            d_energy: self.body.energy.set_point,
            d_socialness: self.body.socialness.set_point,
            cortisol: self.cortisol.level,
            lr_effective,
            surprisal: s,
            surprisal_delta: self.prev_surprisal.map_or(0.0, |p| s - p),
            q_s: q_s.clone(),
            q_u,
            action,
            action_succeeded: outcome.succeeded(),
            obs,
            alive: self.body.alive,
        };
        self.prev = Some((q_s, action));
        self.prev_surprisal = Some(s);
        self.t += 1;
        Ok(record)
    }
}

/// Runs until `config.steps` or death, handing each record to `sink` as it
/// is produced.
pub fn run_episode_with<F, E>(
    config: &ExperimentConfig,
    seed: u64,
    mut sink: F,
) -> Result<Vec<StepRecord>, E>
where
    F: FnMut(&StepRecord) -> Result<(), E>,
    E: From<AgentError>,
{
    let mut episode = Episode::new(config, seed).map_err(AgentError::from)?;
    let mut trace = Vec::with_capacity(config.steps);
    while episode.alive() && trace.len() < config.steps {
        let record = episode.run_step()?;
        sink(&record)?;
        trace.push(record);
    }
    Ok(trace)
}

pub fn run_episode(config: &ExperimentConfig, seed: u64) -> Result<Vec<StepRecord>, AgentError> {
    run_episode_with(config, seed, |_| Ok::<(), AgentError>(()))
}

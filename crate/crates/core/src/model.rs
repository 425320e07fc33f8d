//! The agent's POMDP generative model.
//!
//! One hidden factor (motivational state) with three values, four binary
//! observation modalities, and three actions. Likelihood, transition, and
//! preference arrays follow the usual discrete active-inference layout:
//! matrices are stored column-major, one column per conditioning state, so
//! every column is a distribution over the row variable.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{
    self, bayes_posterior, entropy, floor_prob, kl_divergence, softmax, Categorical,
    InferenceError, LogWeights, NORMALIZATION_TOL,
};

pub const NUM_STATES: usize = 3;
pub const NUM_ACTIONS: usize = 3;
pub const NUM_MODALITIES: usize = 4;
/// Every modality is binary.
pub const NUM_OUTCOMES: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{what}: column {column} is not a distribution ({source})")]
    BadColumn {
        what: String,
        column: usize,
        source: InferenceError,
    },
    #[error("{what}: expected {expected} columns of length {rows}, got {got}")]
    BadShape {
        what: String,
        expected: usize,
        rows: usize,
        got: String,
    },
    #[error("{what}: concentration {value} at ({row}, {col}) must be positive")]
    NonPositiveConcentration {
        what: String,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("preference vector for {0} must have two finite entries")]
    BadPreference(String),
    #[error("{0}")]
    BadParameter(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Eat,
    Play,
    Explore,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Eat, Action::Play, Action::Explore];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Eat => "eat",
            Action::Play => "play",
            Action::Explore => "explore",
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Action {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "eat" => Ok(Action::Eat),
            "play" => Ok(Action::Play),
            "explore" => Ok(Action::Explore),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

/// Hidden motivational states, in array order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motivation {
    Hungry,
    Playful,
    Satisfied,
}

impl Motivation {
    pub const ALL: [Motivation; NUM_STATES] = [
        Motivation::Hungry,
        Motivation::Playful,
        Motivation::Satisfied,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Motivation::Hungry => "hungry",
            Motivation::Playful => "playful",
            Motivation::Satisfied => "satisfied",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Tummy,
    Lonely,
    Food,
    Friend,
}

impl Modality {
    pub const ALL: [Modality; NUM_MODALITIES] = [
        Modality::Tummy,
        Modality::Lonely,
        Modality::Food,
        Modality::Friend,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Tummy => "tummy",
            Modality::Lonely => "lonely",
            Modality::Food => "food",
            Modality::Friend => "friend",
        }
    }
}

/// One observation per modality. Outcome index 1 is the "signal present"
/// value: tummy rumble, loneliness, food present, friend present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObservationBundle {
    pub tummy_rumble: bool,
    pub lonely: bool,
    pub food: bool,
    pub friend: bool,
}

impl ObservationBundle {
    pub fn outcome(&self, m: Modality) -> usize {
        let bit = match m {
            Modality::Tummy => self.tummy_rumble,
            Modality::Lonely => self.lonely,
            Modality::Food => self.food,
            Modality::Friend => self.friend,
        };
        bit as usize
    }

    /// All 16 joint outcomes, indexed by the 4-bit pattern (tummy is bit 0).
    pub fn all() -> impl Iterator<Item = ObservationBundle> {
        (0u8..16).map(|bits| ObservationBundle {
            tummy_rumble: bits & 1 != 0,
            lonely: bits & 2 != 0,
            food: bits & 4 != 0,
            friend: bits & 8 != 0,
        })
    }
}

/// Column-stochastic matrix, `rows x cols`, stored as a list of columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StochasticMatrix {
    columns: Vec<Categorical>,
}

impl StochasticMatrix {
    pub fn from_columns(what: &str, columns: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let rows = columns.first().map_or(0, Vec::len);
        if rows == 0 || columns.iter().any(|c| c.len() != rows) {
            return Err(ModelError::BadShape {
                what: what.to_string(),
                expected: columns.len(),
                rows,
                got: format!("{:?}", columns.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        let columns = columns
            .into_iter()
            .enumerate()
            .map(|(column, c)| {
                Categorical::new(c).map_err(|source| ModelError::BadColumn {
                    what: what.to_string(),
                    column,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { columns })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            columns: (0..n).map(|j| Categorical::delta(n, j)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &Categorical {
        &self.columns[j]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    /// `M · q`: pushes a distribution over columns through the matrix.
    pub fn apply(&self, q: &Categorical) -> Categorical {
        assert_eq!(
            q.len(),
            self.cols(),
            "distribution/matrix dimension mismatch"
        );
        let mut out = vec![0.0; self.rows()];
        for (col, &w) in self.columns.iter().zip(q.probs()) {
            for (o, &p) in out.iter_mut().zip(col.probs()) {
                *o += w * p;
            }
        }
        // Result of a convex combination of distributions; renormalize only to
        // wash out rounding.
        inference::normalize(&out).expect("convex combination of columns has unit mass")
    }

    fn check_shape(&self, what: &str, rows: usize, cols: usize) -> Result<(), ModelError> {
        if self.rows() != rows || self.cols() != cols {
            return Err(ModelError::BadShape {
                what: what.to_string(),
                expected: cols,
                rows,
                got: format!("{}x{}", self.rows(), self.cols()),
            });
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for StochasticMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let cols = Vec::<Vec<f64>>::deserialize(d)?;
        StochasticMatrix::from_columns("matrix", cols).map_err(serde::de::Error::custom)
    }
}

/// Likelihood `p(o_m | s)` for each modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub tummy: StochasticMatrix,
    pub lonely: StochasticMatrix,
    pub food: StochasticMatrix,
    pub friend: StochasticMatrix,
}

impl ObservationModel {
    pub fn modality(&self, m: Modality) -> &StochasticMatrix {
        match m {
            Modality::Tummy => &self.tummy,
            Modality::Lonely => &self.lonely,
            Modality::Food => &self.food,
            Modality::Friend => &self.friend,
        }
    }

    /// `L(s) = Π_m A_m[o_m, s]`; modalities are conditionally independent
    /// given the state.
    pub fn joint_likelihood(&self, obs: &ObservationBundle) -> [f64; NUM_STATES] {
        let mut l = [1.0; NUM_STATES];
        for m in Modality::ALL {
            let a = self.modality(m);
            let o = obs.outcome(m);
            for (s, ls) in l.iter_mut().enumerate() {
                *ls *= a.get(o, s);
            }
        }
        l
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for m in Modality::ALL {
            self.modality(m)
                .check_shape(&format!("A[{}]", m.name()), NUM_OUTCOMES, NUM_STATES)?;
        }
        Ok(())
    }
}

/// Action-conditioned transitions `p(s_t | s_{t-1}, u_{t-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub eat: StochasticMatrix,
    pub play: StochasticMatrix,
    pub explore: StochasticMatrix,
}

impl TransitionModel {
    pub fn matrix(&self, action: Action) -> &StochasticMatrix {
        match action {
            Action::Eat => &self.eat,
            Action::Play => &self.play,
            Action::Explore => &self.explore,
        }
    }

    fn matrix_mut(&mut self, action: Action) -> &mut StochasticMatrix {
        match action {
            Action::Eat => &mut self.eat,
            Action::Play => &mut self.play,
            Action::Explore => &mut self.explore,
        }
    }

    pub fn predictive_state(&self, q_prev: &Categorical, action: Action) -> Categorical {
        self.matrix(action).apply(q_prev)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for a in Action::ALL {
            self.matrix(a)
                .check_shape(&format!("B[{}]", a.name()), NUM_STATES, NUM_STATES)?;
        }
        Ok(())
    }
}

/// Concentrations never drop below this, so structural zeros in B still
/// give strictly positive counts.
pub const CONCENTRATION_FLOOR: f64 = 1e-16;

/// Dirichlet pseudo-counts over each transition matrix, same layout as B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletStore {
    /// `counts[action][to][from]`
    counts: [[[f64; NUM_STATES]; NUM_STATES]; NUM_ACTIONS],
}

impl DirichletStore {
    /// `b_u = B_u · c0`.
    pub fn from_transitions(b: &TransitionModel, c0: f64) -> Result<Self, ModelError> {
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(ModelError::BadParameter(format!(
                "dirichlet_c0 must be positive, got {c0}"
            )));
        }
        let mut counts = [[[0.0; NUM_STATES]; NUM_STATES]; NUM_ACTIONS];
        for a in Action::ALL {
            let m = b.matrix(a);
            for (to, row) in counts[a.index()].iter_mut().enumerate() {
                for (from, c) in row.iter_mut().enumerate() {
                    *c = (m.get(to, from) * c0).max(CONCENTRATION_FLOOR);
                }
            }
        }
        let store = Self { counts };
        store.validate()?;
        Ok(store)
    }

    pub fn get(&self, action: Action, to: usize, from: usize) -> f64 {
        self.counts[action.index()][to][from]
    }

    /// `b_u[i, j] += lr · q_curr(i) · q_prev(j)`.
    pub fn accumulate(
        &mut self,
        action: Action,
        q_prev: &Categorical,
        q_curr: &Categorical,
        lr: f64,
    ) {
        let b = &mut self.counts[action.index()];
        for (i, row) in b.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c += lr * q_curr[i] * q_prev[j];
            }
        }
    }

    /// Column-normalized transition matrix for one action.
    pub fn expected_matrix(&self, action: Action) -> StochasticMatrix {
        let b = &self.counts[action.index()];
        let columns = (0..NUM_STATES)
            .map(|from| {
                let col: Vec<f64> = (0..NUM_STATES).map(|to| b[to][from]).collect();
                inference::normalize(&col).expect("concentrations are positive")
            })
            .collect();
        StochasticMatrix { columns }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for a in Action::ALL {
            for (row, r) in self.counts[a.index()].iter().enumerate() {
                for (col, &value) in r.iter().enumerate() {
                    if !(value.is_finite() && value > 0.0) {
                        return Err(ModelError::NonPositiveConcentration {
                            what: format!("b[{}]", a.name()),
                            row,
                            col,
                            value,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Log-preferences over outcomes, one vector per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub tummy: Vec<f64>,
    pub lonely: Vec<f64>,
    pub food: Vec<f64>,
    pub friend: Vec<f64>,
}

impl PreferenceModel {
    pub fn log_prefs(&self, m: Modality) -> &[f64] {
        match m {
            Modality::Tummy => &self.tummy,
            Modality::Lonely => &self.lonely,
            Modality::Food => &self.food,
            Modality::Friend => &self.friend,
        }
    }

    /// `softmax(C_m)`, the preferred outcome distribution.
    pub fn distribution(&self, m: Modality) -> Categorical {
        let w = LogWeights::new(self.log_prefs(m).to_vec()).expect("validated preferences");
        softmax(&w)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for m in Modality::ALL {
            let c = self.log_prefs(m);
            if c.len() != NUM_OUTCOMES || c.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::BadPreference(m.name().to_string()));
            }
        }
        Ok(())
    }
}

/// Posterior over motivational states and the prior it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub q_s: Categorical,
    pub prior_pred: Categorical,
}

/// Expected free energy of one single-step policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfeBreakdown {
    pub risk: f64,
    pub ambiguity: f64,
    pub g: f64,
}

impl EfeBreakdown {
    pub fn new(risk: f64, ambiguity: f64) -> Self {
        Self {
            risk,
            ambiguity,
            g: risk + ambiguity,
        }
    }
}

/// Serializable A/B/C/D arrays. This is what a config file carries when it
/// pins the initial model explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArrays {
    pub likelihood: ObservationModel,
    pub transitions: TransitionModel,
    pub preferences: PreferenceModel,
    pub initial_state: Categorical,
}

/// Cue probabilities of the initial likelihood. Every pair not listed here
/// is flat (0.5 / 0.5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodParams {
    /// P(rumble | hungry)
    pub tummy_hungry: f64,
    /// P(no rumble | satisfied)
    pub tummy_satisfied: f64,
    /// P(lonely | playful)
    pub lonely_playful: f64,
    /// P(not lonely | satisfied)
    pub lonely_satisfied: f64,
    /// P(food | hungry)
    pub food_hungry: f64,
    /// P(friend | playful)
    pub friend_playful: f64,
}

impl Default for LikelihoodParams {
    fn default() -> Self {
        Self {
            tummy_hungry: 0.51,
            tummy_satisfied: 0.99,
            lonely_playful: 0.59,
            lonely_satisfied: 0.5,
            food_hungry: 0.62,
            friend_playful: 0.58,
        }
    }
}

impl LikelihoodParams {
    pub fn symmetric(p: f64) -> Self {
        Self {
            tummy_hungry: p,
            tummy_satisfied: p,
            lonely_playful: p,
            lonely_satisfied: p,
            food_hungry: p,
            friend_playful: p,
        }
    }
}

/// Mass each column of the initial transitions puts on its target state;
/// the rest is split evenly over the other two states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionParams {
    /// eat: hungry → satisfied
    pub eat_hungry: f64,
    /// eat: playful → playful
    pub eat_playful: f64,
    /// eat: satisfied → satisfied
    pub eat_satisfied: f64,
    /// play: hungry → hungry
    pub play_hungry: f64,
    /// play: playful → satisfied
    pub play_playful: f64,
    /// play: satisfied → satisfied
    pub play_satisfied: f64,
    /// Every column of the explore transition matrix.
    pub explore_column: [f64; NUM_STATES],
}

impl Default for TransitionParams {
    fn default() -> Self {
        Self {
            eat_hungry: 0.38,
            eat_playful: 0.85,
            eat_satisfied: 0.93,
            play_hungry: 0.5,
            play_playful: 0.37,
            play_satisfied: 0.79,
            explore_column: [0.36, 0.36, 0.28],
        }
    }
}

impl TransitionParams {
    pub fn symmetric(b: f64) -> Self {
        Self {
            eat_hungry: b,
            eat_playful: b,
            eat_satisfied: b,
            play_hungry: b,
            play_playful: b,
            play_satisfied: b,
            explore_column: [0.34, 0.33, 0.33],
        }
    }
}

/// Knobs from which the initial arrays are built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub likelihood: LikelihoodParams,
    pub transitions: TransitionParams,
    /// `C_tummy = [preference_tummy, 0]`
    pub preference_tummy: f64,
    /// `C_lonely = [preference_lonely, 0]`
    pub preference_lonely: f64,
    pub dirichlet_c0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            likelihood: LikelihoodParams::default(),
            transitions: TransitionParams::default(),
            preference_tummy: 6.4,
            preference_lonely: 1.0,
            dirichlet_c0: 2.0,
        }
    }
}

fn unit_knob(name: &str, v: f64) -> Result<f64, ModelError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ModelError::BadParameter(format!(
            "{name} must be in [0, 1], got {v}"
        )))
    }
}

impl ModelParams {
    /// Uncalibrated model: one cue strength for every informative pair, one
    /// bias for every action-consistent transition.
    pub fn reference() -> Self {
        Self {
            likelihood: LikelihoodParams::symmetric(0.8),
            transitions: TransitionParams::symmetric(0.6),
            preference_tummy: 3.0,
            preference_lonely: 2.0,
            dirichlet_c0: 1.0,
        }
    }

    pub fn build_arrays(&self) -> Result<ModelArrays, ModelError> {
        let l = &self.likelihood;
        let flat = vec![0.5, 0.5];
        // Rows: [absent, present].
        let on = |name: &str, p: f64| unit_knob(name, p).map(|p| vec![1.0 - p, p]);
        let off = |name: &str, p: f64| unit_knob(name, p).map(|p| vec![p, 1.0 - p]);
        // Columns: hungry, playful, satisfied.
        let likelihood = ObservationModel {
            tummy: StochasticMatrix::from_columns(
                "A[tummy]",
                vec![
                    on("tummy_hungry", l.tummy_hungry)?,
                    flat.clone(),
                    off("tummy_satisfied", l.tummy_satisfied)?,
                ],
            )?,
            lonely: StochasticMatrix::from_columns(
                "A[lonely]",
                vec![
                    flat.clone(),
                    on("lonely_playful", l.lonely_playful)?,
                    off("lonely_satisfied", l.lonely_satisfied)?,
                ],
            )?,
            food: StochasticMatrix::from_columns(
                "A[food]",
                vec![
                    on("food_hungry", l.food_hungry)?,
                    flat.clone(),
                    flat.clone(),
                ],
            )?,
            friend: StochasticMatrix::from_columns(
                "A[friend]",
                vec![flat.clone(), on("friend_playful", l.friend_playful)?, flat],
            )?,
        };

        let t = &self.transitions;
        let toward = |name: &str, target: usize, b: f64| {
            unit_knob(name, b).map(|b| {
                let mut c = vec![(1.0 - b) / 2.0; NUM_STATES];
                c[target] = b;
                c
            })
        };
        let (h, pl, sa) = (0, 1, 2);
        let transitions = TransitionModel {
            eat: StochasticMatrix::from_columns(
                "B[eat]",
                vec![
                    toward("eat_hungry", sa, t.eat_hungry)?,
                    toward("eat_playful", pl, t.eat_playful)?,
                    toward("eat_satisfied", sa, t.eat_satisfied)?,
                ],
            )?,
            play: StochasticMatrix::from_columns(
                "B[play]",
                vec![
                    toward("play_hungry", h, t.play_hungry)?,
                    toward("play_playful", sa, t.play_playful)?,
                    toward("play_satisfied", sa, t.play_satisfied)?,
                ],
            )?,
            explore: StochasticMatrix::from_columns(
                "B[explore]",
                vec![t.explore_column.to_vec(); NUM_STATES],
            )?,
        };
        let preferences = PreferenceModel {
            tummy: vec![self.preference_tummy, 0.0],
            lonely: vec![self.preference_lonely, 0.0],
            food: vec![0.0, 0.0],
            friend: vec![0.0, 0.0],
        };
        preferences.validate()?;
        Ok(ModelArrays {
            likelihood,
            transitions,
            preferences,
            initial_state: Categorical::uniform(NUM_STATES),
        })
    }
}

/// A, B, C, D plus the Dirichlet counts that B is learned through.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    pub likelihood: ObservationModel,
    pub transitions: TransitionModel,
    pub preferences: PreferenceModel,
    pub initial_state: Categorical,
    pub dirichlet: DirichletStore,
    preferred: [Categorical; NUM_MODALITIES],
}

impl GenerativeModel {
    pub fn new(arrays: ModelArrays, dirichlet_c0: f64) -> Result<Self, ModelError> {
        arrays.likelihood.validate()?;
        arrays.transitions.validate()?;
        arrays.preferences.validate()?;
        if arrays.initial_state.len() != NUM_STATES {
            return Err(ModelError::BadShape {
                what: "D".into(),
                expected: 1,
                rows: NUM_STATES,
                got: arrays.initial_state.len().to_string(),
            });
        }
        let dirichlet = DirichletStore::from_transitions(&arrays.transitions, dirichlet_c0)?;
        let preferred = Modality::ALL.map(|m| arrays.preferences.distribution(m));
        Ok(Self {
            likelihood: arrays.likelihood,
            transitions: arrays.transitions,
            preferences: arrays.preferences,
            initial_state: arrays.initial_state,
            dirichlet,
            preferred,
        })
    }

    pub fn from_params(params: &ModelParams) -> Result<Self, ModelError> {
        Self::new(params.build_arrays()?, params.dirichlet_c0)
    }

    pub fn arrays(&self) -> ModelArrays {
        ModelArrays {
            likelihood: self.likelihood.clone(),
            transitions: self.transitions.clone(),
            preferences: self.preferences.clone(),
            initial_state: self.initial_state.clone(),
        }
    }

    pub fn predictive_state(&self, q_prev: &Categorical, action: Action) -> Categorical {
        self.transitions.predictive_state(q_prev, action)
    }

    pub fn joint_likelihood(&self, obs: &ObservationBundle) -> [f64; NUM_STATES] {
        self.likelihood.joint_likelihood(obs)
    }

    /// Exact Bayes over the single hidden factor.
    pub fn infer_state(
        &self,
        obs: &ObservationBundle,
        prior_pred: &Categorical,
    ) -> Result<Categorical, InferenceError> {
        bayes_posterior(prior_pred, &self.joint_likelihood(obs))
    }

    /// `p(o) = Σ_s L(s) · prior(s)`, floored so its log stays finite.
    pub fn marginal_obs_likelihood(
        &self,
        obs: &ObservationBundle,
        prior_pred: &Categorical,
    ) -> f64 {
        let l = self.joint_likelihood(obs);
        let p: f64 = l.iter().zip(prior_pred.probs()).map(|(l, p)| l * p).sum();
        floor_prob(p)
    }

    /// Variational free energy of `q` given the prior and the observation,
    /// `KL(q || prior) − E_q[ln L]`. Equals surprisal at the exact posterior.
    pub fn variational_free_energy(
        &self,
        q: &Categorical,
        prior_pred: &Categorical,
        obs: &ObservationBundle,
    ) -> f64 {
        let l = self.joint_likelihood(obs);
        q.probs()
            .iter()
            .zip(prior_pred.probs())
            .zip(l)
            .filter(|((&qs, _), _)| qs > 0.0)
            .map(|((&qs, &ps), ls)| qs * (qs.ln() - floor_prob(ps).ln() - floor_prob(ls).ln()))
            .sum()
    }

    /// One-step expected free energy of `action` from belief `q_s`:
    /// risk `Σ_m KL(A_m q' || softmax(C_m))` plus ambiguity
    /// `Σ_m Σ_s q'(s) H(A_m[:, s])`, with `q' = B_action q_s`.
    pub fn expected_free_energy(&self, q_s: &Categorical, action: Action) -> EfeBreakdown {
        let q_next = self.predictive_state(q_s, action);
        let mut risk = 0.0;
        let mut ambiguity = 0.0;
        for m in Modality::ALL {
            let a = self.likelihood.modality(m);
            let q_o = a.apply(&q_next);
            risk += kl_divergence(&q_o, &self.preferred[m.index()])
                .expect("softmax preferences have full support");
            ambiguity += q_next
                .probs()
                .iter()
                .enumerate()
                .map(|(s, &w)| w * entropy(a.column(s)))
                .sum::<f64>();
        }
        EfeBreakdown::new(risk, ambiguity)
    }

    pub fn efe_all(&self, q_s: &Categorical) -> [EfeBreakdown; NUM_ACTIONS] {
        Action::ALL.map(|a| self.expected_free_energy(q_s, a))
    }

    /// Dirichlet update on the taken action, then re-derive its B matrix.
    /// A zero rate leaves both store and B untouched.
    pub fn update_transitions(
        &mut self,
        q_prev: &Categorical,
        q_curr: &Categorical,
        action: Action,
        lr: f64,
    ) {
        assert!(
            lr >= 0.0 && lr.is_finite(),
            "learning rate must be finite and >= 0"
        );
        if lr == 0.0 {
            return;
        }
        self.dirichlet.accumulate(action, q_prev, q_curr, lr);
        *self.transitions.matrix_mut(action) = self.dirichlet.expected_matrix(action);
    }
}

/// `softmax(−G)` over the three actions.
pub fn action_posterior(efe: &[EfeBreakdown]) -> Categorical {
    let w = LogWeights::new(efe.iter().map(|e| -e.g).collect()).expect("finite free energies");
    softmax(&w)
}

/// Relative tolerance under which two action probabilities count as tied.
const TIE_TOL: f64 = 1e-12;

/// Argmax of `q_u`; exact ties are broken uniformly with `rng`.
pub fn select_action<R: Rng + ?Sized>(q_u: &Categorical, rng: &mut R) -> Action {
    let best = q_u.max();
    let tied: Vec<usize> = q_u
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| best - p <= TIE_TOL * best.max(f64::MIN_POSITIVE))
        .map(|(i, _)| i)
        .collect();
    let pick = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    };
    Action::from_index(pick).expect("action posterior has three entries")
}

/// Checks every column of `m` is a distribution to [`NORMALIZATION_TOL`].
pub fn is_column_stochastic(m: &StochasticMatrix) -> bool {
    (0..m.cols()).all(|j| {
        let c = m.column(j).probs();
        c.iter().all(|&x| x >= 0.0) && (c.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOL
    })
}

//! Reference implementations used as test oracles. They share no code with
//! the library beyond its data types.

#![allow(dead_code)]

use allostasis::inference::Categorical;
use allostasis::model::{
    Action, GenerativeModel, ModelArrays, ObservationBundle, ObservationModel, PreferenceModel,
    StochasticMatrix, TransitionModel, NUM_STATES,
};
use astro_float::{BigFloat, Consts, RoundingMode};
use rand::Rng;

pub fn random_categorical<R: Rng>(rng: &mut R, n: usize) -> Categorical {
    // Occasional exact zeros exercise the 0 · ln 0 convention.
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.05) {
                0.0
            } else {
                rng.gen_range(1e-3..1.0)
            }
        })
        .collect();
    let raw = if raw.iter().all(|&x| x == 0.0) {
        vec![1.0; n]
    } else {
        raw
    };
    let s: f64 = raw.iter().sum();
    Categorical::new(raw.into_iter().map(|x| x / s).collect()).unwrap()
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> StochasticMatrix {
    StochasticMatrix::from_columns(
        "random",
        (0..cols)
            .map(|_| random_categorical(rng, rows).into_inner())
            .collect(),
    )
    .unwrap()
}

pub fn random_arrays<R: Rng>(rng: &mut R) -> ModelArrays {
    let mut prefs = || vec![rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)];
    let preferences = PreferenceModel {
        tummy: prefs(),
        lonely: prefs(),
        food: prefs(),
        friend: prefs(),
    };
    ModelArrays {
        likelihood: ObservationModel {
            tummy: random_matrix(rng, 2, NUM_STATES),
            lonely: random_matrix(rng, 2, NUM_STATES),
            food: random_matrix(rng, 2, NUM_STATES),
            friend: random_matrix(rng, 2, NUM_STATES),
        },
        transitions: TransitionModel {
            eat: random_matrix(rng, NUM_STATES, NUM_STATES),
            play: random_matrix(rng, NUM_STATES, NUM_STATES),
            explore: random_matrix(rng, NUM_STATES, NUM_STATES),
        },
        preferences,
        initial_state: Categorical::uniform(NUM_STATES),
    }
}

pub fn random_model<R: Rng>(rng: &mut R) -> GenerativeModel {
    let c0 = rng.gen_range(0.1..5.0);
    GenerativeModel::new(random_arrays(rng), c0).unwrap()
}

/// `M · q` by explicit loops over matrix entries.
pub fn matvec(m: &StochasticMatrix, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.rows()];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            *o += m.get(i, j) * qj;
        }
    }
    out
}

fn likelihood_matrices(model: &GenerativeModel) -> [&StochasticMatrix; 4] {
    let a = &model.likelihood;
    [&a.tummy, &a.lonely, &a.food, &a.friend]
}

fn preference_vectors(model: &GenerativeModel) -> [&[f64]; 4] {
    let c = &model.preferences;
    [&c.tummy, &c.lonely, &c.food, &c.friend]
}

fn plain_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Outcome index per modality for joint outcome `k` in `0..16`.
fn outcomes(k: usize) -> [usize; 4] {
    [k & 1, (k >> 1) & 1, (k >> 2) & 1, (k >> 3) & 1]
}

/// Risk and ambiguity of one action computed on the full joint over all 16
/// observation combinations: risk from the modality marginals of the
/// predicted joint, ambiguity as the expected entropy of the joint
/// conditional `p(o | s)`.
pub fn efe_by_enumeration(
    model: &GenerativeModel,
    q_s: &Categorical,
    action: Action,
) -> (f64, f64) {
    let q_next = matvec(model.transitions.matrix(action), q_s.probs());
    let a = likelihood_matrices(model);

    let p_o_given_s = |k: usize, s: usize| -> f64 {
        let o = outcomes(k);
        (0..4).map(|m| a[m].get(o[m], s)).product()
    };

    let mut joint = [0.0; 16];
    for (k, j) in joint.iter_mut().enumerate() {
        *j = (0..NUM_STATES).map(|s| q_next[s] * p_o_given_s(k, s)).sum();
    }

    let prefs = preference_vectors(model);
    let mut risk = 0.0;
    for m in 0..4 {
        let mut marginal = [0.0; 2];
        for (k, &p) in joint.iter().enumerate() {
            marginal[outcomes(k)[m]] += p;
        }
        let c = plain_softmax(prefs[m]);
        for o in 0..2 {
            if marginal[o] > 0.0 {
                risk += marginal[o] * (marginal[o].ln() - c[o].ln());
            }
        }
    }

    let mut ambiguity = 0.0;
    for s in 0..NUM_STATES {
        let mut h = 0.0;
        for k in 0..16 {
            let p = p_o_given_s(k, s);
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
        ambiguity += q_next[s] * h;
    }
    (risk, ambiguity)
}

/// Posterior and evidence by brute force over the 3 states.
pub fn bayes_by_enumeration(
    model: &GenerativeModel,
    obs: &ObservationBundle,
    prior: &Categorical,
) -> (Vec<f64>, f64) {
    let a = likelihood_matrices(model);
    let o = [
        obs.tummy_rumble as usize,
        obs.lonely as usize,
        obs.food as usize,
        obs.friend as usize,
    ];
    let joint: Vec<f64> = (0..NUM_STATES)
        .map(|s| prior[s] * (0..4).map(|m| a[m].get(o[m], s)).product::<f64>())
        .collect();
    let z: f64 = joint.iter().sum();
    (joint.iter().map(|j| j / z).collect(), z)
}

/// Dirichlet counts after one learning step, entry by entry.
pub fn dirichlet_by_loops(
    before: &GenerativeModel,
    q_prev: &Categorical,
    q_curr: &Categorical,
    action: Action,
    lr: f64,
) -> [[[f64; 3]; 3]; 3] {
    let mut out = [[[0.0; 3]; 3]; 3];
    for a in Action::ALL {
        for i in 0..3 {
            for j in 0..3 {
                let mut v = before.dirichlet.get(a, i, j);
                if a == action {
                    v += lr * q_curr[i] * q_prev[j];
                }
                out[a.index()][i][j] = v;
            }
        }
    }
    out
}

/// 256-bit reference arithmetic.
pub struct Precise {
    cc: Consts,
}

const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

impl Precise {
    pub fn new() -> Self {
        Self {
            cc: Consts::new().expect("constants cache"),
        }
    }

    fn big(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, PREC)
    }

    fn decimal(&mut self, x: &BigFloat) -> f64 {
        x.format(astro_float::Radix::Dec, RM, &mut self.cc)
            .expect("formattable")
            .parse()
            .expect("decimal float")
    }

    fn sum(&self, xs: &[BigFloat]) -> BigFloat {
        xs.iter().fold(self.big(0.0), |acc, x| acc.add(x, PREC, RM))
    }

    pub fn softmax(&mut self, w: &[f64]) -> Vec<f64> {
        let e: Vec<BigFloat> = w
            .iter()
            .map(|&x| self.big(x).exp(PREC, RM, &mut self.cc))
            .collect();
        let z = self.sum(&e);
        e.iter()
            .map(|x| x.div(&z, PREC, RM))
            .collect::<Vec<_>>()
            .iter()
            .map(|x| self.decimal(x))
            .collect()
    }

    pub fn kl(&mut self, p: &[f64], q: &[f64]) -> f64 {
        let terms: Vec<BigFloat> = p
            .iter()
            .zip(q)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &qi)| {
                let r = self.big(pi).div(&self.big(qi), PREC, RM);
                self.big(pi).mul(&r.ln(PREC, RM, &mut self.cc), PREC, RM)
            })
            .collect();
        let s = self.sum(&terms);
        self.decimal(&s)
    }

    pub fn entropy(&mut self, p: &[f64]) -> f64 {
        let terms: Vec<BigFloat> = p
            .iter()
            .filter(|&&pi| pi > 0.0)
            .map(|&pi| {
                self.big(pi)
                    .mul(&self.big(pi).ln(PREC, RM, &mut self.cc), PREC, RM)
            })
            .collect();
        let s = self.sum(&terms).neg();
        self.decimal(&s)
    }

    pub fn ln(&mut self, x: f64) -> f64 {
        let l = self.big(x).ln(PREC, RM, &mut self.cc);
        self.decimal(&l)
    }
}

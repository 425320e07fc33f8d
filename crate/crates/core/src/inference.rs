//! Numerical primitives over categorical distributions.
//!
//! Everything here is a pure function of its arguments. Probabilities that
//! feed a logarithm are floored at [`PROB_FLOOR`] by the callers that need it;
//! the primitives themselves report domain violations as errors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest probability allowed to enter a logarithm.
pub const PROB_FLOOR: f64 = 1e-16;

/// Absolute tolerance on the sum of a categorical distribution.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("empty probability vector")]
    Empty,
    #[error("vector has zero total mass")]
    ZeroMass,
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("entries sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("evidence is zero for every state with prior support")]
    ZeroEvidence,
    #[error("p({index}) > 0 but q({index}) = 0")]
    AbsoluteContinuity { index: usize },
    #[error("probability {0} outside (0, 1]")]
    DomainError(f64),
}

pub type Result<T> = std::result::Result<T, InferenceError>;

/// A normalized probability vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Categorical(Vec<f64>);

impl Categorical {
    /// Validates `probs` as-is: no renormalization happens here.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(InferenceError::NotNormalized { sum });
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one outcome");
        Self(vec![1.0 / n as f64; n])
    }

    /// Point mass on `index`.
    pub fn delta(n: usize, index: usize) -> Self {
        assert!(index < n);
        let mut p = vec![0.0; n];
        p[index] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max - min`, the spread used as a decisiveness measure.
    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Categorical {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for Categorical {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Categorical::new(v).map_err(serde::de::Error::custom)
    }
}

/// Unnormalized log-domain scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights(Vec<f64>);

impl LogWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(InferenceError::Empty);
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(InferenceError::NonFinite { index });
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

fn check_entries(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(InferenceError::Empty);
    }
    for (index, &value) in v.iter().enumerate() {
        if !value.is_finite() {
            return Err(InferenceError::NonFinite { index });
        }
        if value < 0.0 {
            return Err(InferenceError::NegativeEntry { index, value });
        }
    }
    Ok(())
}

pub fn normalize(v: &[f64]) -> Result<Categorical> {
    check_entries(v)?;
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(InferenceError::ZeroMass);
    }
    Ok(Categorical(v.iter().map(|x| x / sum).collect()))
}

/// Max-subtracted softmax.
pub fn softmax(w: &LogWeights) -> Categorical {
    let max = w.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = w.0.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Categorical(exps.into_iter().map(|e| e / sum).collect())
}

pub fn bayes_posterior(prior: &Categorical, likelihood: &[f64]) -> Result<Categorical> {
    if prior.len() != likelihood.len() {
        return Err(InferenceError::DimensionMismatch {
            left: prior.len(),
            right: likelihood.len(),
        });
    }
    check_entries(likelihood)?;
    let joint: Vec<f64> = prior.0.iter().zip(likelihood).map(|(p, l)| p * l).collect();
    let evidence: f64 = joint.iter().sum();
    if evidence <= 0.0 {
        return Err(InferenceError::ZeroEvidence);
    }
    Ok(Categorical(
        joint.into_iter().map(|j| j / evidence).collect(),
    ))
}

/// `KL(p || q)` in nats.
pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    if p.len() != q.len() {
        return Err(InferenceError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut kl = 0.0;
    for (index, (&pi, &qi)) in p.0.iter().zip(&q.0).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(InferenceError::AbsoluteContinuity { index });
        }
        kl += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative residue when p ~= q.
    Ok(kl.max(0.0))
}

pub fn entropy(p: &Categorical) -> f64 {
    -p.0.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

pub fn surprisal(p_obs: f64) -> Result<f64> {
    if !(p_obs > 0.0 && p_obs <= 1.0) {
        return Err(InferenceError::DomainError(p_obs));
    }
    Ok(-p_obs.ln())
}

/// Clamps a probability into `[PROB_FLOOR, 1]`.
pub fn floor_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0)
}

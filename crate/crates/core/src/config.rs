//! Experiment configuration, loaded from a TOML key-value file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, GenerativeModel, ModelArrays, ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which allostatic and learning mechanisms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelVariant {
    pub allostatic_setpoint: bool,
    pub learning: bool,
    pub cortisol_modulates_learning: bool,
}

impl ModelVariant {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cortisol_modulates_learning && !self.learning {
            return Err(ConfigError::Invalid(
                "cortisol_modulates_learning requires learning".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    A,
    B,
    C,
    D,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::A, Preset::B, Preset::C, Preset::D];

    pub fn variant(self) -> ModelVariant {
        let (allostatic_setpoint, learning, cortisol_modulates_learning) = match self {
            Preset::A => (false, false, false),
            Preset::B => (false, true, false),
            Preset::C => (true, false, false),
            Preset::D => (true, true, true),
        };
        ModelVariant {
            allostatic_setpoint,
            learning,
            cortisol_modulates_learning,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::A => "A",
            Preset::B => "B",
            Preset::C => "C",
            Preset::D => "D",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Preset::A),
            "B" => Ok(Preset::B),
            "C" => Ok(Preset::C),
            "D" => Ok(Preset::D),
            other => Err(format!("unknown preset `{other}` (expected A, B, C or D)")),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A named preset or explicit mechanism flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VariantSpec {
    Preset(Preset),
    Custom(ModelVariant),
}

impl VariantSpec {
    pub fn variant(&self) -> ModelVariant {
        match *self {
            VariantSpec::Preset(p) => p.variant(),
            VariantSpec::Custom(v) => v,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            VariantSpec::Preset(p) => p.name().to_string(),
            VariantSpec::Custom(v) => format!(
                "custom(setpoint={},learning={},modulated={})",
                v.allostatic_setpoint, v.learning, v.cortisol_modulates_learning
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: VariantSpec,
    pub steps: usize,
    /// Number of valid (filter-passing) runs to collect.
    pub runs: usize,
    pub base_seed: u64,
    pub resource_probability: f64,
    /// Per-step decay of both internal variables.
    pub gamma: f64,
    /// Base learning rate for the transition Dirichlet counts.
    pub lambda: f64,
    pub initial_energy: f64,
    pub initial_socialness: f64,
    pub initial_set_point: f64,
    pub consumption_gain: f64,
    /// Run filter: each resource must appear `filter_min_count` times within
    /// the first `filter_window` steps.
    pub filter_window: usize,
    pub filter_min_count: usize,
    /// Attempts allowed per requested run before giving up.
    pub max_attempts_factor: usize,
    pub output_dir: Option<PathBuf>,
    /// Debug only: bypass action selection.
    pub forced_action: Option<Action>,
    pub model: ModelParams,
    /// Explicit initial A/B/C/D; when present it replaces the arrays built
    /// from `model` (the `dirichlet_c0` knob still applies).
    pub arrays: Option<ModelArrays>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: VariantSpec::Preset(Preset::D),
            steps: 300,
            runs: 10,
            base_seed: 0,
            resource_probability: 0.2,
            gamma: 0.03,
            lambda: 0.05,
            initial_energy: 0.7,
            initial_socialness: 0.7,
            initial_set_point: 0.7,
            consumption_gain: 0.4,
            filter_window: 50,
            filter_min_count: 2,
            max_attempts_factor: 10,
            output_dir: None,
            forced_action: None,
            model: ModelParams::default(),
            arrays: None,
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(ConfigError::Invalid(format!(
            "{name} must be in [0, 1], got {v}"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            variant: VariantSpec::Preset(preset),
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.variant.variant().validate()?;
        if self.steps == 0 {
            return Err(ConfigError::Invalid("steps must be >= 1".into()));
        }
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be >= 1".into()));
        }
        if self.max_attempts_factor == 0 {
            return Err(ConfigError::Invalid(
                "max_attempts_factor must be >= 1".into(),
            ));
        }
        check_unit("resource_probability", self.resource_probability)?;
        check_unit("gamma", self.gamma)?;
        check_unit("initial_energy", self.initial_energy)?;
        check_unit("initial_socialness", self.initial_socialness)?;
        check_unit("initial_set_point", self.initial_set_point)?;
        check_unit("consumption_gain", self.consumption_gain)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.initial_energy <= 0.0 {
            return Err(ConfigError::Invalid("initial_energy must be > 0".into()));
        }
        self.build_model()?;
        Ok(())
    }

    /// Fresh initial generative model for one run.
    pub fn build_model(&self) -> Result<GenerativeModel, ConfigError> {
        let arrays = match &self.arrays {
            Some(a) => a.clone(),
            None => self.model.build_arrays()?,
        };
        Ok(GenerativeModel::new(arrays, self.model.dirichlet_c0)?)
    }

    /// Same config with the knob-built arrays written out explicitly.
    pub fn with_explicit_arrays(&self) -> Result<Self, ConfigError> {
        let mut cfg = self.clone();
        if cfg.arrays.is_none() {
            cfg.arrays = Some(self.model.build_arrays()?);
        }
        Ok(cfg)
    }
}

//! Active-inference agent with a two-variable artificial physiology and a
//! cortisol signal that regulates it allostatically.
//!
//! The crate is organised bottom-up:
//!
//! - [`inference`]: categorical probability primitives
//! - [`model`]: the POMDP generative model (A, B, C, D, Dirichlet counts)
//! - [`physiology`]: Energy and Socialness
//! - [`allostasis`]: cortisol secretion, set-point and learning-rate effects
//! - [`environment`]: stochastic food/friend generation and action execution
//! - [`agent`]: the per-step loop and episodes
//! - [`harness`]: run filtering, metrics, experiments, and file outputs

pub mod agent;
pub mod allostasis;
pub mod config;
pub mod environment;
pub mod harness;
pub mod inference;
pub mod model;
pub mod physiology;

pub use agent::{run_episode, Episode, StepRecord};
pub use config::{ExperimentConfig, ModelVariant, Preset, VariantSpec};
pub use inference::Categorical;
pub use model::{Action, GenerativeModel};

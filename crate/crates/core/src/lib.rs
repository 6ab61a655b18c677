//! Spawn-dynamics modelling and crowd-simulation orchestration.
//!
//! The pipeline has three learned pieces and a simulation harness around them:
//!
//! 1. **Where** ([`spatial`]): trajectory endpoints are clustered into Gaussian
//!    spawn and goal areas; a co-occurrence table between them yields a
//!    spawn-conditional Gaussian mixture over goal positions.
//! 2. **When** ([`tpp`]): each spawn area gets its own temporal point process —
//!    a GRU encoder with a Weibull inter-event head trained by negative
//!    log-likelihood over sliding windows — plus a homogeneous Poisson
//!    baseline.
//! 3. **How** ([`policy`]): agents move under a scripted goal-seeking policy or
//!    an MLP cloned from expert displacements.
//!
//! [`sim`] drives a discrete-time simulation from sampled spawn events,
//! [`metrics`] computes the evaluation statistics and the hyperparameter
//! ablation grid, [`synth`] builds planted-truth benchmark scenes, and
//! [`nn`] is the small reverse-mode engine everything trains with.

pub mod config;
pub mod data;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod sim;
pub mod spatial;
pub mod synth;
pub mod tpp;
pub mod vec2;

pub use vec2::Vec2;

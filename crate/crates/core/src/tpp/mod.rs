//! Per-spawn temporal point processes.
//!
//! Each usable spawn area gets an independent model of its spawn-time
//! sequence. The neural variant encodes past inter-event times with a GRU
//! and emits Weibull (shape, scale) parameters for the next gap through a
//! softplus MLP head; it is trained by negative log-likelihood over
//! overlapping sliding windows, where each window contributes one log-pdf
//! term per event and a single survival term for the event-free tail. The
//! baseline is a homogeneous Poisson process with the closed-form rate
//! estimate.

mod model;
mod poisson;
mod sequence;
mod train;
pub mod weibull;

pub use model::{NtppCheckpoint, NtppModel, HEAD_DIM, HIDDEN_DIM, MIN_DT};
pub use poisson::{fit_poisson, poisson_window_nll, sample_poisson, PoissonModel};
pub use sequence::{extract_spawn_sequences, make_windows, SpawnSequence, TrainingWindow};
pub use train::{train_ntpp, TrainConfig, TrainOutcome, MAX_EPOCHS};

use crate::config::derive_seed;
use crate::data::OccupancyMap;
use crate::nn::NnError;
use crate::spatial::{sample_spawn_goal, SpatialError, SpatialModel};
use crate::vec2::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TppError {
    #[error("invalid overlap: o={overlap} must satisfy 0 <= o < w={window}")]
    InvalidOverlap { window: f64, overlap: f64 },
    #[error("window w={window} exceeds horizon {horizon}")]
    WindowExceedsHorizon { window: f64, horizon: f64 },
    #[error("no training data: every window is empty")]
    NoTrainingData,
    #[error("non-finite loss (bad inter-event time or diverged parameters)")]
    NonFiniteLoss,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// One orchestrated agent: when it appears, where, and where it is headed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnEvent {
    pub time: f64,
    pub spawn_id: usize,
    pub goal_id: usize,
    pub spawn_pos: Vec2,
    pub goal_pos: Vec2,
}

/// Joint spatio-temporal sampling: spawn times from the neural model's
/// autoregressive rollout, an independent (spawn, goal) position pair per
/// event. Output is sorted by time.
pub fn sample_ntpp_gmm(
    ntpp: &NtppModel,
    spatial: &SpatialModel,
    map: Option<&OccupancyMap>,
    length: f64,
    n_rollouts: usize,
    seed: u64,
) -> Result<Vec<SpawnEvent>, TppError> {
    let rollout = ntpp.sample_rollout(length, n_rollouts, derive_seed(seed, "rollout"))?;
    events_for_times(&rollout, spatial, map, derive_seed(seed, "positions"))
}

/// Same pairing for the Poisson baseline.
pub fn sample_poisson_gmm(
    poisson: &PoissonModel,
    spatial: &SpatialModel,
    map: Option<&OccupancyMap>,
    length: f64,
    seed: u64,
) -> Result<Vec<SpawnEvent>, TppError> {
    let rollout = sample_poisson(poisson, length, derive_seed(seed, "rollout"));
    events_for_times(&rollout, spatial, map, derive_seed(seed, "positions"))
}

fn events_for_times(
    rollout: &SpawnSequence,
    spatial: &SpatialModel,
    map: Option<&OccupancyMap>,
    position_seed: u64,
) -> Result<Vec<SpawnEvent>, TppError> {
    let mut rng = ChaCha8Rng::seed_from_u64(position_seed);
    let mut events = Vec::with_capacity(rollout.times.len());
    for &t in &rollout.times {
        let (spawn_pos, goal_pos, goal_id) =
            sample_spawn_goal(spatial, rollout.spawn_id, &mut rng, map)?;
        events.push(SpawnEvent {
            time: t,
            spawn_id: rollout.spawn_id,
            goal_id,
            spawn_pos,
            goal_pos,
        });
    }
    Ok(events)
}

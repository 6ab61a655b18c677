//! Per-agent control: a scripted goal-seeker and a behavior-cloned MLP.
//!
//! Both produce a per-frame 2D displacement whose magnitude never exceeds
//! `v_max` (single-integrator dynamics: the orchestrator adds the action to
//! the position). Observations carry the world-frame goal offset, the current
//! velocity, and optional raycast distances; the cloned network sees them
//! through a fixed featurization (unit direction to goal, log-compressed
//! distance, velocity, normalized rays) so its tanh layers stay in range on
//! scenes tens of meters across.

use crate::data::TrajectoryDataset;
use crate::nn::{Activation, Mlp, MlpNodes, NnError, ParamStore, Tape, ADAM_BETAS, ADAM_EPS};
use crate::vec2::Vec2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no demonstrations to train on")]
    NoDemonstrations,
    #[error("invalid policy config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// What an agent sees each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Goal position minus agent position, world frame (meters).
    pub goal_offset: Vec2,
    /// Displacement taken on the previous frame (meters/frame).
    pub velocity: Vec2,
    /// Optional obstacle distances, one per evenly spaced ray; empty when
    /// raycasting is disabled.
    pub raycasts: Vec<f64>,
}

impl Observation {
    pub fn new(goal_offset: Vec2, velocity: Vec2) -> Self {
        Observation {
            goal_offset,
            velocity,
            raycasts: Vec::new(),
        }
    }
}

/// Raycast observation range (meters); distances are normalized by this.
pub const RAY_MAX_RANGE: f64 = 5.0;
/// Obstacles closer than this push the scripted policy away.
const REPULSE_RADIUS: f64 = 0.5;
const REPULSE_GAIN: f64 = 0.5;

/// Unit step toward the goal scaled to at most `v_max`, never overshooting,
/// with a small repulsive nudge away from near raycast hits.
pub fn scripted_step(obs: &Observation, v_max: f64) -> Vec2 {
    let dist = obs.goal_offset.norm();
    let mut action = if dist > 0.0 {
        obs.goal_offset * (dist.min(v_max) / dist)
    } else {
        Vec2::ZERO
    };
    let rays = obs.raycasts.len();
    for (i, &d) in obs.raycasts.iter().enumerate() {
        if d < REPULSE_RADIUS {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / rays as f64;
            let dir = Vec2::new(angle.cos(), angle.sin());
            action += dir * (-(REPULSE_RADIUS - d) * REPULSE_GAIN);
        }
    }
    action.clamp_norm(v_max)
}

/// MLP policy cloned from expert displacements.
#[derive(Debug, Clone)]
pub struct ClonedPolicy {
    pub mlp: Mlp,
    pub params: ParamStore,
    pub v_max: f64,
    pub ray_count: usize,
}

pub const POLICY_HIDDEN: usize = 32;

impl ClonedPolicy {
    fn new_untrained(ray_count: usize, v_max: f64, seed: u64) -> Self {
        let input_dim = 5 + ray_count;
        let mlp = Mlp::new(
            vec![input_dim, POLICY_HIDDEN, POLICY_HIDDEN, 2],
            vec![Activation::Tanh, Activation::Tanh, Activation::Identity],
        );
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mlp.init_params(&mut params, "policy", &mut rng);
        ClonedPolicy {
            mlp,
            params,
            v_max,
            ray_count,
        }
    }

    /// Network input: unit direction to goal, log-compressed distance,
    /// velocity, normalized rays.
    pub fn featurize(&self, obs: &Observation) -> Vec<f64> {
        let dist = obs.goal_offset.norm();
        let dir = obs.goal_offset.normalized();
        let mut input = Vec::with_capacity(5 + self.ray_count);
        input.extend_from_slice(&[
            dir.x,
            dir.y,
            (1.0 + dist).ln(),
            obs.velocity.x,
            obs.velocity.y,
        ]);
        for i in 0..self.ray_count {
            let d = obs.raycasts.get(i).copied().unwrap_or(RAY_MAX_RANGE);
            input.push(d / RAY_MAX_RANGE);
        }
        input
    }

    pub fn action(&self, obs: &Observation) -> Result<Vec2, PolicyError> {
        let out = self.mlp.forward(&self.params, "policy", &self.featurize(obs))?;
        Ok(Vec2::new(out[0], out[1]).clamp_norm(self.v_max))
    }

    pub fn to_checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint {
            ray_count: self.ray_count,
            v_max: self.v_max,
            params: self.params.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ckpt: &PolicyCheckpoint) -> Result<Self, PolicyError> {
        let mut policy = ClonedPolicy::new_untrained(ckpt.ray_count, ckpt.v_max, 0);
        policy.params = ParamStore::from_checkpoint(&ckpt.params)?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub ray_count: usize,
    pub v_max: f64,
    pub params: crate::nn::Checkpoint,
}

/// Either control flavor behind one call.
#[derive(Debug, Clone)]
pub enum Policy {
    Scripted { v_max: f64 },
    Cloned(ClonedPolicy),
}

impl Policy {
    pub fn v_max(&self) -> f64 {
        match self {
            Policy::Scripted { v_max } => *v_max,
            Policy::Cloned(c) => c.v_max,
        }
    }
}

/// One per-frame action. Both kinds respect the `v_max` magnitude cap.
pub fn policy_step(policy: &Policy, obs: &Observation) -> Result<Vec2, PolicyError> {
    match policy {
        Policy::Scripted { v_max } => Ok(scripted_step(obs, *v_max)),
        Policy::Cloned(cloned) => cloned.action(obs),
    }
}

/// Expert (observation, action) pairs: for every consecutive position pair
/// the action is the positional delta and the observation takes the
/// trajectory's final position as goal.
pub fn build_demonstrations(dataset: &TrajectoryDataset) -> Vec<(Observation, Vec2)> {
    let mut demos = Vec::new();
    for tr in &dataset.trajectories {
        let goal = tr.last_pos();
        for j in 0..tr.positions.len() - 1 {
            let pos = tr.positions[j];
            let velocity = if j == 0 {
                Vec2::ZERO
            } else {
                pos - tr.positions[j - 1]
            };
            let action = tr.positions[j + 1] - pos;
            demos.push((Observation::new(goal - pos, velocity), action));
        }
    }
    demos
}

#[derive(Debug, Clone, Copy)]
pub struct BcConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub v_max: f64,
    pub ray_count: usize,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            epochs: 1000,
            lr: 1e-4,
            seed: 0,
            v_max: 1.5,
            ray_count: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BcOutcome {
    pub policy: ClonedPolicy,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub best_val_loss: f64,
}

const BATCH_SIZE: usize = 64;

/// Behavior cloning: squared-displacement regression with Adam, seeded 90/10
/// train/validation split, minibatches of 64, best-validation checkpoint.
pub fn train_bc(demos: &[(Observation, Vec2)], cfg: &BcConfig) -> Result<BcOutcome, PolicyError> {
    if demos.is_empty() {
        return Err(PolicyError::NoDemonstrations);
    }
    if cfg.epochs == 0 {
        return Err(PolicyError::InvalidConfig("epochs must be >= 1".into()));
    }
    let mut policy = ClonedPolicy::new_untrained(cfg.ray_count, cfg.v_max, cfg.seed);
    let features: Vec<Vec<f64>> = demos.iter().map(|(o, _)| policy.featurize(o)).collect();
    let targets: Vec<Vec2> = demos.iter().map(|(_, a)| *a).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..demos.len()).collect();
    indices.shuffle(&mut rng);
    let val_len = (demos.len() / 10).max(1).min(demos.len() - 1).max(1);
    let (val_idx, train_idx) = if demos.len() == 1 {
        (indices.clone(), indices.clone())
    } else {
        let (v, t) = indices.split_at(val_len);
        (v.to_vec(), t.to_vec())
    };

    let val_mse = |p: &ClonedPolicy| -> Result<f64, PolicyError> {
        let mut total = 0.0;
        for &i in &val_idx {
            let out = p.mlp.forward(&p.params, "policy", &features[i])?;
            let dx = out[0] - targets[i].x;
            let dy = out[1] - targets[i].y;
            total += dx * dx + dy * dy;
        }
        Ok(total / val_idx.len() as f64)
    };

    let mut order = train_idx.clone();
    let mut train_losses = Vec::with_capacity(cfg.epochs);
    let mut val_losses = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::INFINITY;
    let mut best_params = policy.params.snapshot_values();

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for batch in order.chunks(BATCH_SIZE) {
            let mut tape = Tape::new();
            let nodes = MlpNodes::bind(&mut tape, &policy.params, "policy", &policy.mlp);
            let mut loss = tape.scalar(0.0);
            for &i in batch {
                let input = tape.constant(features[i].clone());
                let pred = policy.mlp.forward_tape(&mut tape, &nodes, input);
                let target = tape.constant(vec![targets[i].x, targets[i].y]);
                let err = tape.sub(pred, target);
                let sq = tape.mul(err, err);
                let s = tape.sum(sq);
                loss = tape.add(loss, s);
            }
            let scaled = tape.affine(loss, 1.0 / batch.len() as f64, 0.0);
            epoch_total += tape.backward(scaled, &mut policy.params)? * batch.len() as f64;
            policy.params.adam_update(cfg.lr, ADAM_BETAS, ADAM_EPS);
        }
        train_losses.push(epoch_total / train_idx.len() as f64);
        let v = val_mse(&policy)?;
        val_losses.push(v);
        if v < best_val {
            best_val = v;
            best_params = policy.params.snapshot_values();
        }
    }
    policy.params.restore_values(&best_params);
    Ok(BcOutcome {
        policy,
        train_losses,
        val_losses,
        best_val_loss: best_val,
    })
}

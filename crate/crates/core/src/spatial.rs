//! Spawn and goal areas, their co-occurrence distribution, and the
//! spawn-conditional Gaussian mixture used to draw (spawn, goal) pairs.
//!
//! Trajectory endpoints are clustered with DBSCAN (Euclidean metric); each
//! cluster becomes an axis-aligned Gaussian area. For spawn area `s`, goal
//! area `e`, the mixture weight is the relative co-occurrence frequency
//! `freq(s,e) / sum_e' freq(s,e')`, so a goal never observed from `s` has
//! zero probability. Areas are sorted by (mu_x, mu_y) so ids are stable
//! across runs.

use crate::data::{OccupancyMap, TrajectoryDataset};
use crate::vec2::Vec2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound on per-axis standard deviation; keeps degenerate single-point
/// clusters sampleable.
pub const SIGMA_FLOOR: f64 = 0.05;

/// How many times an occupied sample is re-drawn before giving up.
pub const OCCUPIED_RESAMPLE_LIMIT: usize = 16;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("no clusters found: all {0} points are noise")]
    NoClustersFound(usize),
    #[error("invalid clustering parameters: {0}")]
    InvalidParams(String),
    #[error("spawn {0} is unusable (empty goal support)")]
    UnusableSpawn(usize),
    #[error("could not draw a free-space sample for spawn {spawn_id} within {limit} attempts")]
    OccupiedSampleExhausted { spawn_id: usize, limit: usize },
    #[error("label vector length {labels} does not match {points} points")]
    LabelMismatch { labels: usize, points: usize },
}

/// A Gaussian spawn or goal area estimated from one endpoint cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaModel {
    pub area_id: usize,
    pub mu: Vec2,
    pub sigma: Vec2,
    pub member_count: usize,
}

pub const NOISE: i32 = -1;

/// Density-based clustering of 2D points (Euclidean metric, brute-force
/// neighborhoods). Returns the per-cluster Gaussian areas plus a label per
/// point (`NOISE` = -1 for outliers). Labels are deterministic in point
/// order; areas are re-indexed by ascending (mu_x, mu_y).
pub fn cluster_areas(
    points: &[Vec2],
    eps: f64,
    min_samples: usize,
) -> Result<(Vec<AreaModel>, Vec<i32>), SpatialError> {
    if eps <= 0.0 {
        return Err(SpatialError::InvalidParams(format!("eps must be > 0, got {eps}")));
    }
    if min_samples == 0 {
        return Err(SpatialError::InvalidParams("min_samples must be >= 1".into()));
    }
    if points.is_empty() {
        return Err(SpatialError::InvalidParams("need at least one point".into()));
    }

    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let p = points[i];
        (0..points.len())
            .filter(|&j| {
                let d = points[j] - p;
                d.x * d.x + d.y * d.y <= eps2
            })
            .collect()
    };

    const UNVISITED: i32 = -2;
    let mut labels = vec![UNVISITED; points.len()];
    let mut cluster = 0i32;
    for i in 0..points.len() {
        if labels[i] != UNVISITED {
            continue;
        }
        let nbrs = neighbors(i);
        if nbrs.len() < min_samples {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        let mut queue: Vec<usize> = nbrs;
        let mut qi = 0;
        while qi < queue.len() {
            let j = queue[qi];
            qi += 1;
            if labels[j] == NOISE {
                labels[j] = cluster; // border point
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let jn = neighbors(j);
            if jn.len() >= min_samples {
                queue.extend(jn);
            }
        }
        cluster += 1;
    }

    if cluster == 0 {
        return Err(SpatialError::NoClustersFound(points.len()));
    }

    // Per-cluster mean / per-axis std, clamped to the sigma floor.
    let mut areas = Vec::with_capacity(cluster as usize);
    for c in 0..cluster {
        let members: Vec<Vec2> = points
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| *p)
            .collect();
        let n = members.len() as f64;
        let mut mu = Vec2::ZERO;
        for p in &members {
            mu += *p;
        }
        mu = mu * (1.0 / n);
        let mut var = Vec2::ZERO;
        for p in &members {
            let d = *p - mu;
            var.x += d.x * d.x;
            var.y += d.y * d.y;
        }
        let sigma = Vec2::new(
            (var.x / n).sqrt().max(SIGMA_FLOOR),
            (var.y / n).sqrt().max(SIGMA_FLOOR),
        );
        areas.push((c, mu, sigma, members.len()));
    }

    // Stable ids: sort by (mu_x, mu_y), remap labels.
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (areas[a].1, areas[b].1);
        pa.x.total_cmp(&pb.x).then(pa.y.total_cmp(&pb.y))
    });
    let mut remap = vec![0usize; areas.len()];
    for (new_id, &old) in order.iter().enumerate() {
        remap[areas[old].0 as usize] = new_id;
    }
    let mut sorted_areas: Vec<AreaModel> = order
        .iter()
        .enumerate()
        .map(|(new_id, &old)| AreaModel {
            area_id: new_id,
            mu: areas[old].1,
            sigma: areas[old].2,
            member_count: areas[old].3,
        })
        .collect();
    sorted_areas.sort_by_key(|a| a.area_id);
    let labels = labels
        .into_iter()
        .map(|l| if l == NOISE { NOISE } else { remap[l as usize] as i32 })
        .collect();
    Ok((sorted_areas, labels))
}

/// The complete spatial model: areas, co-occurrence counts, and per-spawn
/// mixture weights over goal areas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialModel {
    pub spawn_areas: Vec<AreaModel>,
    pub goal_areas: Vec<AreaModel>,
    /// freq(s, e): trajectories starting in spawn s and ending in goal e.
    pub cooccurrence: Vec<Vec<u64>>,
    /// Per-spawn mixture weights over goal areas; all-zero row for spawns
    /// with empty support.
    pub mixtures: Vec<Vec<f64>>,
    /// False for spawns whose every trajectory ended in noise; such spawns
    /// are retained but cannot be sampled.
    pub usable: Vec<bool>,
}

impl SpatialModel {
    pub fn usable_spawns(&self) -> Vec<usize> {
        (0..self.spawn_areas.len()).filter(|&s| self.usable[s]).collect()
    }

    /// Goal areas reachable from `spawn_id` (nonzero co-occurrence).
    pub fn support(&self, spawn_id: usize) -> Vec<usize> {
        self.cooccurrence[spawn_id]
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(e, _)| e)
            .collect()
    }
}

/// Builds co-occurrence counts and mixture weights from endpoint labels.
/// Trajectories with a noise label on either endpoint are excluded from the
/// counts. A spawn whose entire row is zero is kept but flagged unusable.
pub fn build_cooccurrence(
    dataset: &TrajectoryDataset,
    spawn_areas: Vec<AreaModel>,
    spawn_labels: &[i32],
    goal_areas: Vec<AreaModel>,
    goal_labels: &[i32],
) -> Result<SpatialModel, SpatialError> {
    let n = dataset.trajectories.len();
    if spawn_labels.len() != n {
        return Err(SpatialError::LabelMismatch {
            labels: spawn_labels.len(),
            points: n,
        });
    }
    if goal_labels.len() != n {
        return Err(SpatialError::LabelMismatch {
            labels: goal_labels.len(),
            points: n,
        });
    }
    let mut freq = vec![vec![0u64; goal_areas.len()]; spawn_areas.len()];
    for i in 0..n {
        let (s, e) = (spawn_labels[i], goal_labels[i]);
        if s == NOISE || e == NOISE {
            continue;
        }
        freq[s as usize][e as usize] += 1;
    }
    let mut mixtures = Vec::with_capacity(spawn_areas.len());
    let mut usable = Vec::with_capacity(spawn_areas.len());
    for row in &freq {
        let total: u64 = row.iter().sum();
        if total == 0 {
            mixtures.push(vec![0.0; row.len()]);
            usable.push(false);
        } else {
            mixtures.push(row.iter().map(|&c| c as f64 / total as f64).collect());
            usable.push(true);
        }
    }
    Ok(SpatialModel {
        spawn_areas,
        goal_areas,
        cooccurrence: freq,
        mixtures,
        usable,
    })
}

fn sample_area(area: &AreaModel, rng: &mut impl Rng) -> Vec2 {
    let nx = Normal::new(area.mu.x, area.sigma.x).expect("sigma floor keeps sigma positive");
    let ny = Normal::new(area.mu.y, area.sigma.y).expect("sigma floor keeps sigma positive");
    Vec2::new(nx.sample(rng), ny.sample(rng))
}

fn choose_goal(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_nonzero = k;
            if u < acc {
                return k;
            }
        }
    }
    // Rounding left u just above the accumulated mass; the last supported
    // component takes it.
    last_nonzero
}

/// Draws a (spawn position, goal position, goal id) triple for one spawn
/// area. The goal component is picked from the spawn's mixture, so the goal
/// id always lies in the spawn's support set. With an occupancy map, both
/// points are re-drawn together up to [`OCCUPIED_RESAMPLE_LIMIT`] times until
/// free.
pub fn sample_spawn_goal(
    model: &SpatialModel,
    spawn_id: usize,
    rng: &mut impl Rng,
    map: Option<&OccupancyMap>,
) -> Result<(Vec2, Vec2, usize), SpatialError> {
    if spawn_id >= model.spawn_areas.len() || !model.usable[spawn_id] {
        return Err(SpatialError::UnusableSpawn(spawn_id));
    }
    let weights = &model.mixtures[spawn_id];
    for _ in 0..OCCUPIED_RESAMPLE_LIMIT {
        let goal_id = choose_goal(weights, rng);
        let x_s = sample_area(&model.spawn_areas[spawn_id], rng);
        let x_e = sample_area(&model.goal_areas[goal_id], rng);
        let blocked = map
            .map(|m| m.is_occupied(x_s) || m.is_occupied(x_e))
            .unwrap_or(false);
        if !blocked {
            return Ok((x_s, x_e, goal_id));
        }
    }
    Err(SpatialError::OccupiedSampleExhausted {
        spawn_id,
        limit: OCCUPIED_RESAMPLE_LIMIT,
    })
}

//! Synthetic benchmark scenes with planted ground truth.
//!
//! These generators exist so the pipeline can be validated against known
//! parameters: a planted spawn process (homogeneous Poisson, bursty Weibull
//! renewal, or alternating-rate), planted route weights, and straight-line
//! constant-speed agents. The sidecar records everything that was planted.
//!
//! Planted sequences are drawn through `rand_distr`, not through the model
//! samplers in [`crate::tpp`], so recovery tests compare two independent
//! routes to the same distribution.

use crate::data::{build_dataset, DataError, Trajectory, TrajectoryDataset};
use crate::tpp::SpawnSequence;
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Weibull};
use serde::{Deserialize, Serialize};

/// The spawn process planted in a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantedProcess {
    /// Homogeneous Poisson with `rate` events per frame.
    Poisson { rate: f64 },
    /// Renewal process with iid Weibull(shape, scale) gaps; shape < 1 is
    /// bursty.
    WeibullRenewal { shape: f64, scale: f64 },
    /// Piecewise-constant rate flipping between `low` and `high` every
    /// `block` frames (thinning sampler).
    AlternatingRate { low: f64, high: f64, block: f64 },
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub process: PlantedProcess,
    pub horizon: f64,
    /// Agent speed in meters per frame along the straight line.
    #[serde(default = "default_speed")]
    pub speed: f64,
    pub spawn_center: (f64, f64),
    #[serde(default = "default_spread")]
    pub spawn_spread: f64,
    pub routes: Vec<RouteSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn default_speed() -> f64 {
    1.0
}
fn default_spread() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub goal_center: (f64, f64),
    #[serde(default = "default_spread")]
    pub goal_spread: f64,
    pub weight: f64,
}

/// Ground truth written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarTruth {
    pub spec: SynthSpec,
    pub event_count: usize,
    pub agent_count: usize,
}

/// Draws one spawn-time sequence from a planted process (continuous times).
pub fn generate_sequence(process: &PlantedProcess, horizon: f64, seed: u64) -> SpawnSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::new();
    match *process {
        PlantedProcess::Poisson { rate } => {
            if rate > 0.0 {
                let exp = Exp::new(rate).expect("positive rate");
                let mut t = 0.0;
                loop {
                    t += exp.sample(&mut rng);
                    if t >= horizon {
                        break;
                    }
                    times.push(t);
                }
            }
        }
        PlantedProcess::WeibullRenewal { shape, scale } => {
            let weibull = Weibull::new(scale, shape).expect("positive shape and scale");
            let mut t = 0.0;
            loop {
                t += weibull.sample(&mut rng);
                if t >= horizon {
                    break;
                }
                times.push(t);
            }
        }
        PlantedProcess::AlternatingRate { low, high, block } => {
            // thinning against the dominating constant rate
            let max_rate = low.max(high);
            if max_rate > 0.0 {
                let exp = Exp::new(max_rate).expect("positive rate");
                let mut t = 0.0;
                loop {
                    t += exp.sample(&mut rng);
                    if t >= horizon {
                        break;
                    }
                    let phase = ((t / block).floor() as u64) % 2;
                    let rate = if phase == 0 { low } else { high };
                    let u: f64 = rng.random();
                    if u < rate / max_rate {
                        times.push(t);
                    }
                }
            }
        }
    }
    SpawnSequence::new(0, times, horizon)
}

/// Builds a full trajectory dataset: one agent per planted spawn event,
/// walking a straight line from a Gaussian spawn position to a Gaussian goal
/// position on a planted-weight route.
pub fn generate_scene(spec: &SynthSpec) -> Result<(TrajectoryDataset, SidecarTruth), DataError> {
    assert!(!spec.routes.is_empty(), "a scene needs at least one route");
    assert!(spec.speed > 0.0, "agent speed must be positive");
    let seq = generate_sequence(&spec.process, spec.horizon, spec.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    let total_weight: f64 = spec.routes.iter().map(|r| r.weight).sum();

    let spawn_center = Vec2::new(spec.spawn_center.0, spec.spawn_center.1);
    let mut trajectories = Vec::with_capacity(seq.len());
    for (idx, &t) in seq.times.iter().enumerate() {
        let u: f64 = rng.random::<f64>() * total_weight;
        let mut acc = 0.0;
        let mut route = &spec.routes[0];
        for r in &spec.routes {
            acc += r.weight;
            if u < acc {
                route = r;
                break;
            }
        }
        let spawn = gaussian_point(spawn_center, spec.spawn_spread, &mut rng);
        let goal = gaussian_point(
            Vec2::new(route.goal_center.0, route.goal_center.1),
            route.goal_spread,
            &mut rng,
        );
        trajectories.push(straight_line_trajectory(
            idx as u64,
            t.floor() as u64,
            spawn,
            goal,
            spec.speed,
        ));
    }
    let event_count = seq.len();
    let dataset = build_dataset(trajectories)?;
    let truth = SidecarTruth {
        spec: spec.clone(),
        event_count,
        agent_count: dataset.agent_count,
    };
    Ok((dataset, truth))
}

fn gaussian_point(center: Vec2, spread: f64, rng: &mut ChaCha8Rng) -> Vec2 {
    let n = Normal::new(0.0, spread.max(1e-9)).expect("finite spread");
    Vec2::new(center.x + n.sample(rng), center.y + n.sample(rng))
}

/// Constant-speed straight line, one position per frame, landing exactly on
/// the goal at the final frame.
fn straight_line_trajectory(
    agent_id: u64,
    start_frame: u64,
    spawn: Vec2,
    goal: Vec2,
    speed: f64,
) -> Trajectory {
    let dist = spawn.dist(goal);
    let steps = ((dist / speed).ceil() as usize).max(1);
    let dir = (goal - spawn).normalized();
    let mut positions = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let travelled = (k as f64 * speed).min(dist);
        positions.push(spawn + dir * travelled);
    }
    Trajectory {
        agent_id,
        start_frame,
        positions,
    }
}

/// A canonical two-route scene: one spawn blob, two goal blobs 20 m apart,
/// planted routing weights.
pub fn two_route_spec(weights: (f64, f64), rate: f64, horizon: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        process: PlantedProcess::Poisson { rate },
        horizon,
        speed: 1.0,
        spawn_center: (0.0, 0.0),
        spawn_spread: 0.3,
        routes: vec![
            RouteSpec {
                goal_center: (20.0, 0.0),
                goal_spread: 0.3,
                weight: weights.0,
            },
            RouteSpec {
                goal_center: (0.0, 20.0),
                goal_spread: 0.3,
                weight: weights.1,
            },
        ],
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_event_count_matches_rate() {
        let seq = generate_sequence(&PlantedProcess::Poisson { rate: 0.05 }, 20_000.0, 3);
        let n = seq.len() as f64;
        // ~1000 expected; allow 3 sigma
        assert!((n - 1000.0).abs() < 3.0 * 1000.0f64.sqrt(), "count {n}");
        assert!(seq.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn alternating_rate_blocks_differ() {
        let seq = generate_sequence(
            &PlantedProcess::AlternatingRate {
                low: 0.01,
                high: 0.2,
                block: 1000.0,
            },
            20_000.0,
            5,
        );
        let mut low_count = 0usize;
        let mut high_count = 0usize;
        for &t in &seq.times {
            if ((t / 1000.0).floor() as u64).is_multiple_of(2) {
                low_count += 1;
            } else {
                high_count += 1;
            }
        }
        assert!(
            high_count > 5 * low_count,
            "high blocks should dominate: {high_count} vs {low_count}"
        );
    }

    #[test]
    fn scene_generation_is_deterministic() {
        let spec = two_route_spec((0.6, 0.4), 0.02, 3_000.0, 42);
        let (a, ta) = generate_scene(&spec).unwrap();
        let (b, tb) = generate_scene(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.spec, spec, "sidecar must carry the planted spec");
    }

    #[test]
    fn agents_walk_straight_at_constant_speed() {
        let spec = two_route_spec((1.0, 0.0), 0.01, 2_000.0, 9);
        let (ds, _) = generate_scene(&spec).unwrap();
        for tr in &ds.trajectories {
            assert!(tr.positions.len() >= 2);
            for pair in tr.positions.windows(2) {
                let step = pair[0].dist(pair[1]);
                assert!(step <= spec.speed + 1e-9);
            }
            // final position is the goal: all steps but the last are full speed
            for pair in tr.positions[..tr.positions.len() - 1].windows(2) {
                let step = pair[0].dist(pair[1]);
                assert!((step - spec.speed).abs() < 1e-9);
            }
        }
    }
}

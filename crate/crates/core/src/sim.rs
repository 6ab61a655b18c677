//! Discrete-time simulation engine: global clock, scheduled spawn events,
//! policy-driven motion, goal removal, and full event logging.
//!
//! Agents activate at their spawn position on the first frame whose clock
//! reaches their spawn time, take one policy step per frame in ascending
//! agent-id order, leave when within `goal_radius` of their goal, and are
//! force-retired as timed-out after `max_lifetime` frames (timeouts are data,
//! not errors). At every frame the log satisfies
//! `spawned == active + exited + timed_out`.

use crate::config::{derive_seed, derive_seed_indexed};
use crate::data::{OccupancyMap, TrajectoryDataset};
use crate::policy::{policy_step, Observation, Policy, PolicyError, RAY_MAX_RANGE};
use crate::spatial::SpatialModel;
use crate::tpp::{
    sample_ntpp_gmm, sample_poisson_gmm, NtppModel, PoissonModel, SpawnEvent, TppError,
};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Tpp(#[from] TppError),
    #[error("conservation violated at frame {frame}: spawned {spawned} != active {active} + exited {exited} + timed_out {timed_out}")]
    ConservationViolated {
        frame: u64,
        spawned: usize,
        active: usize,
        exited: usize,
        timed_out: usize,
    },
    #[error("log incomplete: {0}")]
    IncompleteLog(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentState {
    Pending,
    Active,
    Exited,
    TimedOut,
}

impl AgentState {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentState::Pending => "pending",
            AgentState::Active => "active",
            AgentState::Exited => "exited",
            AgentState::TimedOut => "timed_out",
        }
    }
}

/// One agent drawn from the joint spawn model, before simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledAgent {
    pub agent_id: u64,
    pub spawn_id: usize,
    pub goal_id: usize,
    pub spawn_time: f64,
    pub spawn_pos: Vec2,
    pub goal_pos: Vec2,
}

/// Temporal model family driving the schedule.
pub enum TemporalSampler<'a> {
    Ntpp(&'a [NtppModel]),
    Poisson(&'a [PoissonModel]),
}

/// Samples every spawn's events and merges them into one time-sorted queue
/// with agent ids assigned in time order. Temporal and positional draws use
/// seeds derived per spawn from the master seed; the policy stream is
/// separate, so re-seeding the policy never moves a spawn time.
pub fn schedule(
    spatial: &SpatialModel,
    sampler: &TemporalSampler,
    map: Option<&OccupancyMap>,
    length: f64,
    n_rollouts: usize,
    master_seed: u64,
) -> Result<Vec<ScheduledAgent>, SimError> {
    let mut events: Vec<SpawnEvent> = Vec::new();
    match sampler {
        TemporalSampler::Ntpp(models) => {
            for model in models.iter() {
                let seed = derive_seed_indexed(master_seed, "spawn-events", model.spawn_id as u64);
                events.extend(sample_ntpp_gmm(
                    model, spatial, map, length, n_rollouts, seed,
                )?);
            }
        }
        TemporalSampler::Poisson(models) => {
            for model in models.iter() {
                let seed = derive_seed_indexed(master_seed, "spawn-events", model.spawn_id as u64);
                events.extend(sample_poisson_gmm(model, spatial, map, length, seed)?);
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.spawn_id.cmp(&b.spawn_id)));
    Ok(events
        .into_iter()
        .enumerate()
        .map(|(i, e)| ScheduledAgent {
            agent_id: i as u64,
            spawn_id: e.spawn_id,
            goal_id: e.goal_id,
            spawn_time: e.time,
            spawn_pos: e.spawn_pos,
            goal_pos: e.goal_pos,
        })
        .collect())
}

/// Lifecycle record for one agent, including its full path while active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: u64,
    pub spawn_id: usize,
    pub goal_id: usize,
    pub spawn_time: f64,
    pub spawn_pos: Vec2,
    pub goal_pos: Vec2,
    pub state: AgentState,
    pub activation_frame: Option<u64>,
    pub exit_time: Option<f64>,
    pub path: Vec<Vec2>,
}

/// Per-frame population counters (cumulative spawned/exited/timed_out).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCount {
    pub frame: u64,
    pub spawned: usize,
    pub active: usize,
    pub exited: usize,
    pub timed_out: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Frames during which spawning happens; the run drains actives past it.
    pub length: f64,
    pub goal_radius: f64,
    pub max_lifetime: u64,
    pub ray_count: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            length: 10_000.0,
            goal_radius: 0.5,
            max_lifetime: 5000,
            ray_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub frame: u64,
    pub agent_id: u64,
    pub pos: Vec2,
    pub state: AgentState,
}

/// Everything a run produced: per-agent records, per-frame counts, per-frame
/// position rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub config: SimConfig,
    pub records: Vec<AgentRecord>,
    pub frames: Vec<FrameCount>,
    pub rows: Vec<LogRow>,
}

/// Mutable simulation state driven by [`SimulationState::step`].
pub struct SimulationState<'a> {
    pub clock: i64,
    config: SimConfig,
    pending: Vec<ScheduledAgent>,
    next_pending: usize,
    active: Vec<usize>,
    records: Vec<AgentRecord>,
    positions: Vec<Vec2>,
    velocities: Vec<Vec2>,
    exited_total: usize,
    timed_out_total: usize,
    frames: Vec<FrameCount>,
    rows: Vec<LogRow>,
    policy: &'a Policy,
    map: Option<&'a OccupancyMap>,
}

impl<'a> SimulationState<'a> {
    pub fn new(
        schedule: Vec<ScheduledAgent>,
        config: SimConfig,
        policy: &'a Policy,
        map: Option<&'a OccupancyMap>,
    ) -> Self {
        let records = schedule
            .iter()
            .map(|s| AgentRecord {
                agent_id: s.agent_id,
                spawn_id: s.spawn_id,
                goal_id: s.goal_id,
                spawn_time: s.spawn_time,
                spawn_pos: s.spawn_pos,
                goal_pos: s.goal_pos,
                state: AgentState::Pending,
                activation_frame: None,
                exit_time: None,
                path: Vec::new(),
            })
            .collect();
        let n = schedule.len();
        SimulationState {
            clock: -1,
            config,
            pending: schedule,
            next_pending: 0,
            active: Vec::new(),
            records,
            positions: vec![Vec2::ZERO; n],
            velocities: vec![Vec2::ZERO; n],
            exited_total: 0,
            timed_out_total: 0,
            frames: Vec::new(),
            rows: Vec::new(),
            policy,
            map,
        }
    }

    pub fn has_pending(&self) -> bool {
        self.next_pending < self.pending.len()
    }

    pub fn has_active(&self) -> bool {
        !self.active.is_empty()
    }

    fn observe(&self, idx: usize) -> Observation {
        let pos = self.positions[idx];
        let mut obs = Observation::new(self.records[idx].goal_pos - pos, self.velocities[idx]);
        if self.config.ray_count > 0 {
            obs.raycasts = (0..self.config.ray_count)
                .map(|r| {
                    let angle =
                        2.0 * std::f64::consts::PI * r as f64 / self.config.ray_count as f64;
                    match self.map {
                        Some(m) => m.raycast(pos, angle, RAY_MAX_RANGE),
                        None => RAY_MAX_RANGE,
                    }
                })
                .collect();
        }
        obs
    }

    /// Advances the clock one frame: activates due agents, moves every active
    /// agent once (ascending agent id), retires arrivals and timeouts, logs.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.clock += 1;
        let clock = self.clock;
        let frame = clock as u64;

        while self.next_pending < self.pending.len()
            && self.pending[self.next_pending].spawn_time <= clock as f64
        {
            let idx = self.next_pending;
            self.next_pending += 1;
            let rec = &mut self.records[idx];
            rec.state = AgentState::Active;
            rec.activation_frame = Some(frame);
            rec.path.push(rec.spawn_pos);
            self.positions[idx] = rec.spawn_pos;
            self.velocities[idx] = Vec2::ZERO;
            self.active.push(idx);
        }

        let mut still_active = Vec::with_capacity(self.active.len());
        for &idx in &self.active.clone() {
            let obs = self.observe(idx);
            let action = policy_step(self.policy, &obs)?;
            let new_pos = self.positions[idx] + action;
            self.velocities[idx] = action;
            self.positions[idx] = new_pos;
            let rec = &mut self.records[idx];
            rec.path.push(new_pos);

            let age = frame - rec.activation_frame.unwrap();
            if new_pos.dist(rec.goal_pos) <= self.config.goal_radius {
                rec.state = AgentState::Exited;
                rec.exit_time = Some(clock as f64);
                self.exited_total += 1;
                self.rows.push(LogRow {
                    frame,
                    agent_id: rec.agent_id,
                    pos: new_pos,
                    state: AgentState::Exited,
                });
            } else if age >= self.config.max_lifetime {
                rec.state = AgentState::TimedOut;
                rec.exit_time = Some(clock as f64);
                self.timed_out_total += 1;
                self.rows.push(LogRow {
                    frame,
                    agent_id: rec.agent_id,
                    pos: new_pos,
                    state: AgentState::TimedOut,
                });
            } else {
                still_active.push(idx);
                self.rows.push(LogRow {
                    frame,
                    agent_id: rec.agent_id,
                    pos: new_pos,
                    state: AgentState::Active,
                });
            }
        }
        self.active = still_active;

        self.frames.push(FrameCount {
            frame,
            spawned: self.next_pending,
            active: self.active.len(),
            exited: self.exited_total,
            timed_out: self.timed_out_total,
        });
        Ok(())
    }

    pub fn finish(self) -> SimulationLog {
        SimulationLog {
            config: self.config,
            records: self.records,
            frames: self.frames,
            rows: self.rows,
        }
    }
}

/// Runs a schedule to completion: the clock covers `length` frames and then
/// drains remaining agents (bounded by `max_lifetime`).
pub fn run(
    schedule: Vec<ScheduledAgent>,
    config: SimConfig,
    policy: &Policy,
    map: Option<&OccupancyMap>,
) -> Result<SimulationLog, SimError> {
    let hard_cap = config.length as i64 + config.max_lifetime as i64 + 2;
    let mut state = SimulationState::new(schedule, config, policy, map);
    while state.clock + 1 < config.length as i64 || state.has_active() || state.has_pending() {
        if state.clock >= hard_cap {
            break;
        }
        state.step()?;
    }
    Ok(state.finish())
}

/// Seed tag reserved for stochastic policies; unused by the built-in
/// deterministic ones but derived here so spawn streams stay isolated.
pub fn policy_stream_seed(master_seed: u64) -> u64 {
    derive_seed(master_seed, "policy")
}

impl SimulationLog {
    /// Verifies the conservation law, activation exactness, and log
    /// completeness over the whole run.
    pub fn check_conservation(&self) -> Result<(), SimError> {
        for fc in &self.frames {
            if fc.spawned != fc.active + fc.exited + fc.timed_out {
                return Err(SimError::ConservationViolated {
                    frame: fc.frame,
                    spawned: fc.spawned,
                    active: fc.active,
                    exited: fc.exited,
                    timed_out: fc.timed_out,
                });
            }
        }
        for rec in &self.records {
            match rec.state {
                AgentState::Exited | AgentState::TimedOut => {}
                other => {
                    return Err(SimError::IncompleteLog(format!(
                        "agent {} finished in state {:?}",
                        rec.agent_id, other
                    )));
                }
            }
            let activation = rec.activation_frame.ok_or_else(|| {
                SimError::IncompleteLog(format!("agent {} never activated", rec.agent_id))
            })?;
            if (activation as f64) < rec.spawn_time {
                return Err(SimError::IncompleteLog(format!(
                    "agent {} active at frame {} before spawn time {}",
                    rec.agent_id, activation, rec.spawn_time
                )));
            }
            let exit = rec.exit_time.ok_or_else(|| {
                SimError::IncompleteLog(format!("agent {} has no exit time", rec.agent_id))
            })?;
            if exit < rec.spawn_time {
                return Err(SimError::IncompleteLog(format!(
                    "agent {} exits at {} before spawning at {}",
                    rec.agent_id, exit, rec.spawn_time
                )));
            }
        }
        // no agent row precedes its spawn time
        for row in &self.rows {
            let rec = &self.records[row.agent_id as usize];
            if (row.frame as f64) < rec.spawn_time {
                return Err(SimError::IncompleteLog(format!(
                    "agent {} logged at frame {} before spawn time {}",
                    row.agent_id, row.frame, rec.spawn_time
                )));
            }
        }
        Ok(())
    }

    /// Frame-table export: `frame,agent_id,x,y,state`, time-major.
    pub fn to_frame_table(&self) -> String {
        let mut out = String::from("frame,agent_id,x,y,state\n");
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                row.frame,
                row.agent_id,
                row.pos.x,
                row.pos.y,
                row.state.as_str()
            )
            .unwrap();
        }
        out
    }

    /// Wraps a recorded dataset as if it had been simulated: agents follow
    /// their recorded positions, spawn at their first frame, and exit at
    /// their last. Lets dataset statistics and simulation statistics flow
    /// through one code path.
    pub fn replay_dataset(dataset: &TrajectoryDataset) -> SimulationLog {
        let mut records = Vec::with_capacity(dataset.trajectories.len());
        let mut rows = Vec::new();
        for tr in &dataset.trajectories {
            let exit_frame = tr.end_frame();
            for (k, p) in tr.positions.iter().enumerate() {
                let frame = tr.start_frame + k as u64;
                let state = if frame == exit_frame {
                    AgentState::Exited
                } else {
                    AgentState::Active
                };
                rows.push(LogRow {
                    frame,
                    agent_id: tr.agent_id,
                    pos: *p,
                    state,
                });
            }
            records.push(AgentRecord {
                agent_id: tr.agent_id,
                spawn_id: 0,
                goal_id: 0,
                spawn_time: tr.start_frame as f64,
                spawn_pos: tr.first_pos(),
                goal_pos: tr.last_pos(),
                state: AgentState::Exited,
                activation_frame: Some(tr.start_frame),
                exit_time: Some(exit_frame as f64),
                path: tr.positions.clone(),
            });
        }
        rows.sort_by_key(|r| (r.frame, r.agent_id));
        let n_frames = dataset.frame_count as usize;
        let mut spawn_at = vec![0usize; n_frames];
        let mut exit_at = vec![0usize; n_frames];
        for tr in &dataset.trajectories {
            spawn_at[tr.start_frame as usize] += 1;
            exit_at[tr.end_frame() as usize] += 1;
        }
        let mut frames = Vec::with_capacity(n_frames);
        let (mut spawned, mut exited) = (0usize, 0usize);
        for frame in 0..n_frames {
            spawned += spawn_at[frame];
            exited += exit_at[frame];
            frames.push(FrameCount {
                frame: frame as u64,
                spawned,
                active: spawned - exited,
                exited,
                timed_out: 0,
            });
        }
        SimulationLog {
            config: SimConfig {
                length: dataset.frame_count as f64,
                ..SimConfig::default()
            },
            records,
            frames,
            rows,
        }
    }
}

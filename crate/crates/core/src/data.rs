//! Trajectory dataset loading, validation, and the occupancy grid.
//!
//! The canonical trajectory format is a comma-separated frame table with
//! header `frame,agent_id,x,y`: frame and agent_id are non-negative integers,
//! x and y are decimal meters. Rows are grouped by agent and sorted by frame;
//! gaps inside one agent's track are filled by linear interpolation rather
//! than split, so no spurious spawn/exit events are fabricated. Time is
//! measured in frames throughout; there is no frame-rate conversion anywhere.

use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("non-monotonic frames: agent {agent_id} has frame {frame} twice")]
    NonMonotonicFrames { agent_id: u64, frame: u64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
    #[error("grid dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dataset invariant violated: {0}")]
    InvariantViolated(String),
}

/// One agent's track: a position for every consecutive frame starting at
/// `start_frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent_id: u64,
    pub start_frame: u64,
    pub positions: Vec<Vec2>,
}

impl Trajectory {
    pub fn end_frame(&self) -> u64 {
        self.start_frame + self.positions.len() as u64 - 1
    }

    pub fn first_pos(&self) -> Vec2 {
        self.positions[0]
    }

    pub fn last_pos(&self) -> Vec2 {
        *self.positions.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub trajectories: Vec<Trajectory>,
    pub frame_count: u64,
    pub agent_count: usize,
    pub bounds: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    FrameTable,
}

/// Row-major affine map applied to every position:
/// `(x, y) -> (a x + b y + tx, c x + d y + ty)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine(pub [f64; 6]);

impl Affine {
    pub fn identity() -> Self {
        Affine([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        let [a, b, c, d, tx, ty] = self.0;
        Vec2::new(a * p.x + b * p.y + tx, c * p.x + d * p.y + ty)
    }
}

pub fn load_trajectories(
    path: &Path,
    format: TrajectoryFormat,
) -> Result<TrajectoryDataset, DataError> {
    let TrajectoryFormat::FrameTable = format;
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_frame_table(&text)
}

pub fn parse_frame_table(text: &str) -> Result<TrajectoryDataset, DataError> {
    let mut rows: BTreeMap<u64, BTreeMap<u64, Vec2>> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "frame,agent_id,x,y" => {}
        Some((_, header)) => {
            return Err(DataError::MalformedRow {
                line: 1,
                reason: format!("expected header 'frame,agent_id,x,y', got '{header}'"),
            })
        }
        None => return Err(DataError::EmptyDataset),
    }
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(DataError::MalformedRow {
                line: line_no,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let frame: u64 = fields[0].trim().parse().map_err(|_| DataError::MalformedRow {
            line: line_no,
            reason: format!("frame '{}' is not a non-negative integer", fields[0]),
        })?;
        let agent_id: u64 = fields[1].trim().parse().map_err(|_| DataError::MalformedRow {
            line: line_no,
            reason: format!("agent_id '{}' is not a non-negative integer", fields[1]),
        })?;
        let x: f64 = fields[2].trim().parse().map_err(|_| DataError::MalformedRow {
            line: line_no,
            reason: format!("x '{}' is not numeric", fields[2]),
        })?;
        let y: f64 = fields[3].trim().parse().map_err(|_| DataError::MalformedRow {
            line: line_no,
            reason: format!("y '{}' is not numeric", fields[3]),
        })?;
        if !x.is_finite() || !y.is_finite() {
            return Err(DataError::MalformedRow {
                line: line_no,
                reason: "position is not finite".to_string(),
            });
        }
        let agent = rows.entry(agent_id).or_default();
        if agent.insert(frame, Vec2::new(x, y)).is_some() {
            return Err(DataError::NonMonotonicFrames { agent_id, frame });
        }
    }
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }

    let mut trajectories = Vec::with_capacity(rows.len());
    for (agent_id, frames) in rows {
        trajectories.push(interpolate_track(agent_id, &frames));
    }
    build_dataset(trajectories)
}

/// Fills frame gaps linearly; endpoints are preserved exactly.
fn interpolate_track(agent_id: u64, frames: &BTreeMap<u64, Vec2>) -> Trajectory {
    let start_frame = *frames.keys().next().unwrap();
    let end_frame = *frames.keys().next_back().unwrap();
    let mut positions = Vec::with_capacity((end_frame - start_frame + 1) as usize);
    let mut iter = frames.iter();
    let (mut prev_f, mut prev_p) = {
        let (f, p) = iter.next().unwrap();
        (*f, *p)
    };
    positions.push(prev_p);
    for (&f, &p) in iter {
        let gap = f - prev_f;
        for k in 1..gap {
            let t = k as f64 / gap as f64;
            positions.push(Vec2::new(
                prev_p.x + (p.x - prev_p.x) * t,
                prev_p.y + (p.y - prev_p.y) * t,
            ));
        }
        positions.push(p);
        prev_f = f;
        prev_p = p;
    }
    Trajectory {
        agent_id,
        start_frame,
        positions,
    }
}

pub fn build_dataset(trajectories: Vec<Trajectory>) -> Result<TrajectoryDataset, DataError> {
    if trajectories.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut max_frame = 0u64;
    for tr in &trajectories {
        if tr.positions.len() < 2 {
            return Err(DataError::InvariantViolated(format!(
                "agent {} has fewer than 2 positions",
                tr.agent_id
            )));
        }
        for p in &tr.positions {
            if !p.is_finite() {
                return Err(DataError::InvariantViolated(format!(
                    "agent {} has a non-finite position",
                    tr.agent_id
                )));
            }
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        max_frame = max_frame.max(tr.end_frame());
    }
    let agent_count = trajectories.len();
    Ok(TrajectoryDataset {
        trajectories,
        frame_count: max_frame + 1,
        agent_count,
        bounds: Rect { min, max },
    })
}

impl TrajectoryDataset {
    pub fn apply_affine(&mut self, affine: &Affine) {
        for tr in &mut self.trajectories {
            for p in &mut tr.positions {
                *p = affine.apply(*p);
            }
        }
        let rebuilt = build_dataset(std::mem::take(&mut self.trajectories))
            .expect("affine transform preserves dataset validity");
        *self = rebuilt;
    }

    /// Writes the canonical frame table: rows grouped by agent, ascending
    /// frames, shortest round-trip float formatting (bit-exact reload).
    pub fn to_frame_table(&self) -> String {
        let mut out = String::from("frame,agent_id,x,y\n");
        for tr in &self.trajectories {
            for (k, p) in tr.positions.iter().enumerate() {
                let frame = tr.start_frame + k as u64;
                writeln!(out, "{frame},{},{},{}", tr.agent_id, p.x, p.y).unwrap();
            }
        }
        out
    }

    pub fn write_frame_table(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_frame_table()).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// First/last positions of every trajectory, in dataset order.
pub fn split_endpoints(dataset: &TrajectoryDataset) -> (Vec<Vec2>, Vec<Vec2>) {
    let starts = dataset.trajectories.iter().map(|t| t.first_pos()).collect();
    let ends = dataset.trajectories.iter().map(|t| t.last_pos()).collect();
    (starts, ends)
}

/// Boolean obstacle grid. Cell (row, col) covers the world square
/// `[origin + col*res, origin + (col+1)*res) x [origin + row*res, ...)`;
/// line 0 of the file is row 0 (lowest y). Points outside the grid count as
/// free space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMap {
    pub resolution: f64,
    pub origin: Vec2,
    pub width: usize,
    pub height: usize,
    grid: Vec<bool>,
}

impl OccupancyMap {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        grid: Vec<bool>,
    ) -> Result<Self, DataError> {
        if resolution <= 0.0 {
            return Err(DataError::MalformedGrid(format!(
                "resolution must be > 0, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(DataError::MalformedGrid("grid must be nonempty".into()));
        }
        if grid.len() != width * height {
            return Err(DataError::DimensionMismatch(format!(
                "grid has {} cells, header says {}x{}",
                grid.len(),
                width,
                height
            )));
        }
        Ok(OccupancyMap {
            resolution,
            origin,
            width,
            height,
            grid,
        })
    }

    pub fn is_occupied(&self, p: Vec2) -> bool {
        let col = ((p.x - self.origin.x) / self.resolution).floor();
        let row = ((p.y - self.origin.y) / self.resolution).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return false;
        }
        self.grid[row as usize * self.width + col as usize]
    }

    pub fn obstacle_count(&self) -> usize {
        self.grid.iter().filter(|&&c| c).count()
    }

    /// World extent (width, height) in meters.
    pub fn world_extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    /// Distance to the first occupied cell along `angle`, capped at
    /// `max_range`. Marches in half-cell steps.
    pub fn raycast(&self, from: Vec2, angle: f64, max_range: f64) -> f64 {
        let step = self.resolution * 0.5;
        let dir = Vec2::new(angle.cos(), angle.sin());
        let mut d = 0.0;
        while d < max_range {
            d += step;
            if self.is_occupied(from + dir * d) {
                return d.min(max_range);
            }
        }
        max_range
    }
}

pub fn load_occupancy(path: &Path) -> Result<OccupancyMap, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_occupancy(&text)
}

pub fn parse_occupancy(text: &str) -> Result<OccupancyMap, DataError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DataError::MalformedGrid("missing header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(DataError::MalformedGrid(format!(
            "header must be 'width height resolution origin_x origin_y', got '{header}'"
        )));
    }
    let width: usize = fields[0]
        .parse()
        .map_err(|_| DataError::MalformedGrid(format!("bad width '{}'", fields[0])))?;
    let height: usize = fields[1]
        .parse()
        .map_err(|_| DataError::MalformedGrid(format!("bad height '{}'", fields[1])))?;
    let resolution: f64 = fields[2]
        .parse()
        .map_err(|_| DataError::MalformedGrid(format!("bad resolution '{}'", fields[2])))?;
    let ox: f64 = fields[3]
        .parse()
        .map_err(|_| DataError::MalformedGrid(format!("bad origin_x '{}'", fields[3])))?;
    let oy: f64 = fields[4]
        .parse()
        .map_err(|_| DataError::MalformedGrid(format!("bad origin_y '{}'", fields[4])))?;

    let mut grid = Vec::with_capacity(width * height);
    let mut row_count = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if line.chars().count() != width {
            return Err(DataError::DimensionMismatch(format!(
                "row {} has {} cells, expected {}",
                row_count,
                line.chars().count(),
                width
            )));
        }
        for ch in line.chars() {
            match ch {
                '#' => grid.push(true),
                '.' => grid.push(false),
                other => {
                    return Err(DataError::MalformedGrid(format!(
                        "unexpected cell character '{other}'"
                    )))
                }
            }
        }
        row_count += 1;
    }
    if row_count != height {
        return Err(DataError::DimensionMismatch(format!(
            "{row_count} rows, header says {height}"
        )));
    }
    OccupancyMap::new(width, height, resolution, Vec2::new(ox, oy), grid)
}

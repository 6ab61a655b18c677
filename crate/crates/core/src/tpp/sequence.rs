//! Spawn-time sequences and sliding training windows.

use super::TppError;
use crate::data::TrajectoryDataset;
use crate::spatial::{SpatialModel, NOISE};
use serde::{Deserialize, Serialize};

/// Strictly increasing spawn times (frames) for one spawn area over an
/// observation horizon. Simultaneous raw spawns are separated by pushing the
/// later one 0.5 frames forward (a zero gap has no likelihood under the
/// inter-event density), after which the list is strictly sorted again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnSequence {
    pub spawn_id: usize,
    pub times: Vec<f64>,
    pub horizon: f64,
}

impl SpawnSequence {
    pub fn new(spawn_id: usize, mut times: Vec<f64>, horizon: f64) -> Self {
        times.sort_by(|a, b| a.total_cmp(b));
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                times[i] = times[i - 1] + 0.5;
            }
        }
        let horizon = match times.last() {
            Some(&last) => horizon.max(last),
            None => horizon,
        };
        debug_assert!(times.first().is_none_or(|&t| t >= 0.0));
        SpawnSequence {
            spawn_id,
            times,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Gaps between consecutive events (no leading gap from zero).
    pub fn inter_event_times(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Events strictly inside (start, start + len], shifted to window-relative
    /// time.
    fn relative_events(&self, start: f64, len: f64) -> Vec<f64> {
        let lo = self.times.partition_point(|&t| t <= start);
        let hi = self.times.partition_point(|&t| t <= start + len);
        self.times[lo..hi].iter().map(|&t| t - start).collect()
    }
}

/// One training window: `len` frames starting at `start`, with the events
/// that fall in it expressed relative to the window start. Empty windows are
/// legal and contribute a survival-only likelihood term.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub start: f64,
    pub len: f64,
    pub events: Vec<f64>,
}

impl TrainingWindow {
    /// Inter-event gaps (the first measured from the window start) and the
    /// event-free tail gap closing the window.
    pub fn deltas(&self) -> (Vec<f64>, f64) {
        let mut deltas = Vec::with_capacity(self.events.len());
        let mut prev = 0.0;
        for &e in &self.events {
            deltas.push(e - prev);
            prev = e;
        }
        (deltas, self.len - prev)
    }
}

/// Overlapping sliding windows: starts at 0, w-o, 2(w-o), ... while
/// start + w <= horizon. An event landing exactly on a window's start is
/// excluded from that window (its gap there would be zero).
pub fn make_windows(
    seq: &SpawnSequence,
    window: f64,
    overlap: f64,
) -> Result<Vec<TrainingWindow>, TppError> {
    if !(overlap >= 0.0 && overlap < window) {
        return Err(TppError::InvalidOverlap { window, overlap });
    }
    if window > seq.horizon {
        return Err(TppError::WindowExceedsHorizon {
            window,
            horizon: seq.horizon,
        });
    }
    let stride = window - overlap;
    let count = ((seq.horizon - window) / stride + 1e-9).floor() as usize + 1;
    let mut windows = Vec::with_capacity(count);
    for i in 0..count {
        let start = i as f64 * stride;
        windows.push(TrainingWindow {
            start,
            len: window,
            events: seq.relative_events(start, window),
        });
    }
    Ok(windows)
}

/// One spawn-time sequence per usable spawn area: the start frames of every
/// trajectory whose start endpoint was labeled with that spawn. Sequences may
/// be empty; they are returned regardless so callers can flag quiet spawns.
pub fn extract_spawn_sequences(
    dataset: &TrajectoryDataset,
    spatial: &SpatialModel,
    spawn_labels: &[i32],
) -> Vec<SpawnSequence> {
    let horizon = dataset.frame_count as f64;
    spatial
        .usable_spawns()
        .into_iter()
        .map(|s| {
            let times: Vec<f64> = dataset
                .trajectories
                .iter()
                .zip(spawn_labels)
                .filter(|(_, &l)| l != NOISE && l as usize == s)
                .map(|(tr, _)| tr.start_frame as f64)
                .collect();
            SpawnSequence::new(s, times, horizon)
        })
        .collect()
}

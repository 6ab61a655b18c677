//! NLL training loop for the neural temporal point process.

use super::model::NtppModel;
use super::sequence::{make_windows, SpawnSequence};
use super::TppError;
use crate::nn::{Tape, ADAM_BETAS, ADAM_EPS};

pub const MAX_EPOCHS: usize = 500;
/// Early stopping: quit after this many epochs without improving the best
/// mean window NLL by more than `IMPROVEMENT_EPS`.
pub const PATIENCE: usize = 50;
pub const IMPROVEMENT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub window: f64,
    pub overlap: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 500.0,
            overlap: 50.0,
            epochs: MAX_EPOCHS,
            lr: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NtppModel,
    /// Mean window NLL after each epoch.
    pub epoch_losses: Vec<f64>,
    pub best_loss: f64,
    pub best_epoch: usize,
}

/// Trains one model per spawn sequence: one Adam step per window, windows in
/// a fixed order, full determinism from the seed. Returns the parameters of
/// the best epoch by mean window NLL.
pub fn train_ntpp(seq: &SpawnSequence, cfg: &TrainConfig) -> Result<TrainOutcome, TppError> {
    if cfg.epochs == 0 || cfg.epochs > MAX_EPOCHS {
        return Err(TppError::InvalidConfig(format!(
            "epochs must be in 1..={MAX_EPOCHS}, got {}",
            cfg.epochs
        )));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(TppError::InvalidConfig(format!("bad learning rate {}", cfg.lr)));
    }
    let windows = make_windows(seq, cfg.window, cfg.overlap)?;
    let mut total_gaps = 0.0;
    let mut gap_count = 0usize;
    for w in &windows {
        let (deltas, _) = w.deltas();
        total_gaps += deltas.iter().sum::<f64>();
        gap_count += deltas.len();
    }
    if gap_count == 0 {
        return Err(TppError::NoTrainingData);
    }
    let dt_scale = (total_gaps / gap_count as f64).max(1e-6);

    let mut model = NtppModel::new(seq.spawn_id, cfg.window, dt_scale, cfg.seed);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = model.params.snapshot_values();
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for w in &windows {
            let mut tape = Tape::new();
            let loss = model.nll_window_tape(&mut tape, w)?;
            total += tape.backward(loss, &mut model.params)?;
            model.params.adam_update(cfg.lr, ADAM_BETAS, ADAM_EPS);
        }
        let mean = total / windows.len() as f64;
        epoch_losses.push(mean);
        if best_loss - mean > IMPROVEMENT_EPS {
            best_loss = mean;
            best_epoch = epoch;
            best_params = model.params.snapshot_values();
            stale = 0;
        } else {
            stale += 1;
            if stale >= PATIENCE {
                break;
            }
        }
    }
    model.params.restore_values(&best_params);
    Ok(TrainOutcome {
        model,
        epoch_losses,
        best_loss,
        best_epoch,
    })
}

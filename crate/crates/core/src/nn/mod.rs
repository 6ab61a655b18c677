//! Minimal neural building blocks: a reverse-mode tape, a parameter store with
//! an Adam-style optimizer, a GRU cell, and a small MLP.
//!
//! Everything is plain `f64` on the CPU. Models here are tiny (32-unit GRUs
//! and MLPs), so the tape records vector-valued nodes and rebuilds the graph
//! for every training window; no graph is retained across windows. Inference
//! paths (`GruCell::step`, `Mlp::forward`) never touch the tape and are
//! read-only over a frozen [`ParamStore`].

mod gru;
mod mlp;
mod store;
mod tape;

pub use gru::{GruCell, GruNodes};
pub use mlp::{Activation, Mlp, MlpNodes};
pub use store::{Checkpoint, ParamStore, ADAM_BETAS, ADAM_EPS};
pub use tape::{NodeId, Tape};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite loss encountered")]
    NonFiniteLoss,
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus; strictly positive for all finite inputs
/// (floored at the smallest positive normal to survive exp underflow).
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp().max(f64::MIN_POSITIVE)
    } else {
        x.exp().ln_1p()
    }
}

/// y = W x for a row-major `rows x cols` matrix.
pub(crate) fn matvec(w: &[f64], x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    let mut y = vec![0.0; rows];
    for i in 0..rows {
        let row = &w[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        y[i] = acc;
    }
    y
}

//! The neural temporal point process for one spawn area.
//!
//! Architecture: a GRU with 32 hidden units consumes one feature vector per
//! observed gap, and an MLP head with 32 hidden units maps the hidden state
//! to softplus-positive Weibull (shape, scale) parameters for the next gap.
//! The scale output is multiplied by `dt_scale` (the mean training gap) so a
//! freshly initialized head already predicts gaps at the data's time scale.
//! The initial hidden state is a learned parameter during training; sampling
//! instead starts from a standard-normal hidden state for rollout diversity.

use super::sequence::{SpawnSequence, TrainingWindow};
use super::{weibull, TppError};
use crate::nn::{
    Activation, GruCell, GruNodes, Mlp, MlpNodes, NodeId, ParamStore, Tape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const HIDDEN_DIM: usize = 32;
pub const HEAD_DIM: usize = 32;
/// Floor on sampled gaps; keeps rollout clocks strictly increasing.
pub const MIN_DT: f64 = 1e-9;

const FEAT_DIM: usize = 2;

#[derive(Debug, Clone)]
pub struct NtppModel {
    pub spawn_id: usize,
    pub window: f64,
    pub dt_scale: f64,
    pub params: ParamStore,
    gru: GruCell,
    head: Mlp,
}

impl NtppModel {
    pub fn new(spawn_id: usize, window: f64, dt_scale: f64, seed: u64) -> Self {
        let gru = GruCell::new(FEAT_DIM, HIDDEN_DIM);
        let head = Mlp::new(
            vec![HIDDEN_DIM, HEAD_DIM, 2],
            vec![Activation::Tanh, Activation::Softplus],
        );
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gru.init_params(&mut params, "gru", &mut rng);
        head.init_params(&mut params, "head", &mut rng);
        params.insert("h0", &[HIDDEN_DIM], vec![0.0; HIDDEN_DIM]);
        NtppModel {
            spawn_id,
            window,
            dt_scale,
            params,
            gru,
            head,
        }
    }

    /// Test/baseline helper: all weights zero, head biases chosen so the
    /// model emits the given constant (shape, scale) for every history.
    pub fn with_constant_head(spawn_id: usize, shape: f64, scale: f64, window: f64) -> Self {
        let mut model = NtppModel::new(spawn_id, window, 1.0, 0);
        for name in model.params.names().map(String::from).collect::<Vec<_>>() {
            model.params.value_mut(&name).fill(0.0);
        }
        // softplus^-1(y) = ln(e^y - 1)
        let inv = |y: f64| (y.exp() - 1.0).ln();
        let b1 = model.params.value_mut("head.b1");
        b1[0] = inv(shape);
        b1[1] = inv(scale);
        model
    }

    /// Per-gap encoder input: log-compressed gap plus gap relative to the
    /// window length.
    pub fn featurize(&self, dt: f64) -> [f64; 2] {
        [(1.0 + dt).ln(), dt / self.window]
    }

    /// Weibull (shape, scale) for the next gap given a hidden state.
    pub fn head_params(&self, h: &[f64]) -> Result<(f64, f64), TppError> {
        let out = self.head.forward(&self.params, "head", h)?;
        Ok((out[0], out[1] * self.dt_scale))
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.params.value("h0").to_vec()
    }

    pub fn gru_step(&self, dt: f64, h: &[f64]) -> Result<Vec<f64>, TppError> {
        Ok(self.gru.step(&self.params, "gru", &self.featurize(dt), h)?)
    }

    /// Window negative log-likelihood on plain vectors (no tape): one log-pdf
    /// term per event plus one survival term for the tail. An empty window is
    /// pure survival over its full length under the initial-state parameters.
    pub fn nll_window(&self, window: &TrainingWindow) -> Result<f64, TppError> {
        let (deltas, tail) = window.deltas();
        if deltas.iter().any(|&d| d <= 0.0) {
            return Err(TppError::NonFiniteLoss);
        }
        let mut h = self.initial_state();
        let mut loss = 0.0;
        for &dt in &deltas {
            let (k, l) = self.head_params(&h)?;
            loss -= weibull::log_pdf(dt, k, l);
            h = self.gru_step(dt, &h)?;
        }
        let (k, l) = self.head_params(&h)?;
        loss -= weibull::log_survival(tail, k, l);
        if !loss.is_finite() {
            return Err(TppError::NonFiniteLoss);
        }
        Ok(loss)
    }

    /// Same loss recorded on a tape for the backward pass.
    pub fn nll_window_tape(
        &self,
        tape: &mut Tape,
        window: &TrainingWindow,
    ) -> Result<NodeId, TppError> {
        let (deltas, tail) = window.deltas();
        if deltas.iter().any(|&d| d <= 0.0) {
            return Err(TppError::NonFiniteLoss);
        }
        let gru_nodes = GruNodes::bind(tape, &self.params, "gru");
        let head_nodes = MlpNodes::bind(tape, &self.params, "head", &self.head);
        let mut h = tape.param(&self.params, "h0");
        let mut loss = tape.scalar(0.0);
        for &dt in &deltas {
            let (k, l) = self.head_tape(tape, &head_nodes, h);
            let term = log_pdf_tape(tape, dt, k, l);
            loss = tape.sub(loss, term);
            let x = tape.constant(self.featurize(dt).to_vec());
            h = self.gru.step_tape(tape, &gru_nodes, x, h);
        }
        if tail > 0.0 {
            let (k, l) = self.head_tape(tape, &head_nodes, h);
            let term = log_survival_tape(tape, tail, k, l);
            loss = tape.sub(loss, term);
        }
        Ok(loss)
    }

    fn head_tape(&self, tape: &mut Tape, nodes: &MlpNodes, h: NodeId) -> (NodeId, NodeId) {
        let out = self.head.forward_tape(tape, nodes, h);
        let k = tape.index(out, 0);
        let l_raw = tape.index(out, 1);
        let l = tape.affine(l_raw, self.dt_scale, 0.0);
        (k, l)
    }

    /// Autoregressive rollout. The hidden state starts from a seeded standard
    /// normal; each sampled gap is fed back through the encoder. With
    /// `n_rollouts > 1` the horizon is split into that many independent
    /// segments whose times are re-based onto a common axis.
    pub fn sample_rollout(
        &self,
        length: f64,
        n_rollouts: usize,
        seed: u64,
    ) -> Result<SpawnSequence, TppError> {
        if length <= 0.0 || n_rollouts == 0 {
            return Err(TppError::InvalidConfig(format!(
                "rollout needs length > 0 and n_rollouts >= 1, got {length}, {n_rollouts}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segment = length / n_rollouts as f64;
        let mut times = Vec::new();
        for r in 0..n_rollouts {
            let base = r as f64 * segment;
            let mut h: Vec<f64> = (0..HIDDEN_DIM).map(|_| rng.sample(StandardNormal)).collect();
            let mut t = 0.0;
            loop {
                let (k, l) = self.head_params(&h)?;
                let u: f64 = rng.random();
                // 1 - u lies in (0, 1]; it plays the survival probability
                let dt = weibull::quantile_from_survival(1.0 - u, k, l).max(MIN_DT);
                t += dt;
                if t >= segment {
                    break;
                }
                times.push(base + t);
                h = self.gru_step(dt, &h)?;
            }
        }
        Ok(SpawnSequence::new(self.spawn_id, times, length))
    }

    pub fn to_checkpoint(&self) -> NtppCheckpoint {
        NtppCheckpoint {
            spawn_id: self.spawn_id,
            hidden_dim: HIDDEN_DIM,
            head_dim: HEAD_DIM,
            window: self.window,
            dt_scale: self.dt_scale,
            params: self.params.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ckpt: &NtppCheckpoint) -> Result<Self, TppError> {
        if ckpt.hidden_dim != HIDDEN_DIM || ckpt.head_dim != HEAD_DIM {
            return Err(TppError::InvalidConfig(format!(
                "checkpoint dims {}x{} do not match the built-in {}x{}",
                ckpt.hidden_dim, ckpt.head_dim, HIDDEN_DIM, HEAD_DIM
            )));
        }
        let mut model = NtppModel::new(ckpt.spawn_id, ckpt.window, ckpt.dt_scale, 0);
        model.params = ParamStore::from_checkpoint(&ckpt.params)?;
        Ok(model)
    }
}

/// Serialized model: checkpointed parameters plus featurization constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NtppCheckpoint {
    pub spawn_id: usize,
    pub hidden_dim: usize,
    pub head_dim: usize,
    pub window: f64,
    pub dt_scale: f64,
    pub params: crate::nn::Checkpoint,
}

fn log_pdf_tape(tape: &mut Tape, t: f64, k: NodeId, l: NodeId) -> NodeId {
    let ln_t = t.ln();
    let ln_k = tape.ln(k);
    let ln_l = tape.ln(l);
    // ln t - ln l
    let ratio = tape.affine(ln_l, -1.0, ln_t);
    // (k - 1)(ln t - ln l)
    let km1 = tape.affine(k, 1.0, -1.0);
    let power_term = tape.mul(km1, ratio);
    // (t/l)^k = exp(k (ln t - ln l))
    let k_ratio = tape.mul(k, ratio);
    let hazard = tape.exp(k_ratio);
    let a = tape.sub(ln_k, ln_l);
    let b = tape.add(a, power_term);
    tape.sub(b, hazard)
}

fn log_survival_tape(tape: &mut Tape, t: f64, k: NodeId, l: NodeId) -> NodeId {
    let ln_t = t.ln();
    let ln_l = tape.ln(l);
    let ratio = tape.affine(ln_l, -1.0, ln_t);
    let k_ratio = tape.mul(k, ratio);
    let hazard = tape.exp(k_ratio);
    tape.affine(hazard, -1.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_exponential_single_event_loss() {
        // shape 1, scale 1, one gap of 1, no tail: loss = -ln f(1) = 1.
        let model = NtppModel::with_constant_head(0, 1.0, 1.0, 1.0);
        let w = TrainingWindow {
            start: 0.0,
            len: 1.0,
            events: vec![1.0],
        };
        let loss = model.nll_window(&w).unwrap();
        assert!((loss - 1.0).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn forced_exponential_empty_window_loss_is_length() {
        let model = NtppModel::with_constant_head(0, 1.0, 1.0, 6.0);
        let w = TrainingWindow {
            start: 0.0,
            len: 6.0,
            events: vec![],
        };
        let loss = model.nll_window(&w).unwrap();
        assert!((loss - 6.0).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn tape_loss_matches_plain_loss() {
        let model = NtppModel::new(3, 100.0, 4.0, 17);
        let w = TrainingWindow {
            start: 0.0,
            len: 100.0,
            events: vec![4.0, 9.5, 12.25, 40.0, 77.0],
        };
        let plain = model.nll_window(&w).unwrap();
        let mut tape = Tape::new();
        let node = model.nll_window_tape(&mut tape, &w).unwrap();
        let taped = tape.scalar_value(node);
        assert!((plain - taped).abs() < 1e-10, "{plain} vs {taped}");
    }

    /// Full scalar re-derivation of the window NLL, independent of both the
    /// Mlp/GruCell forward code and the tape.
    #[allow(clippy::needless_range_loop)]
    fn oracle_nll(model: &NtppModel, w: &TrainingWindow) -> f64 {
        let p = &model.params;
        let n = HIDDEN_DIM;
        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let softplus = |x: f64| {
            if x > 30.0 {
                x
            } else {
                (1.0 + x.exp()).ln()
            }
        };
        let head = |h: &[f64]| -> (f64, f64) {
            let mut hid = vec![0.0; HEAD_DIM];
            for i in 0..HEAD_DIM {
                let mut acc = p.value("head.b0")[i];
                for j in 0..n {
                    acc += p.value("head.w0")[i * n + j] * h[j];
                }
                hid[i] = acc.tanh();
            }
            let mut out = [0.0; 2];
            for i in 0..2 {
                let mut acc = p.value("head.b1")[i];
                for j in 0..HEAD_DIM {
                    acc += p.value("head.w1")[i * HEAD_DIM + j] * hid[j];
                }
                out[i] = softplus(acc);
            }
            (out[0], out[1] * model.dt_scale)
        };
        let gru = |x: &[f64], h: &[f64]| -> Vec<f64> {
            let pre = |wn: &str, un: &str, bn: &str, xin: &[f64], hin: &[f64], k: usize| {
                let mut acc = p.value(bn)[k];
                for j in 0..2 {
                    acc += p.value(wn)[k * 2 + j] * xin[j];
                }
                for j in 0..n {
                    acc += p.value(un)[k * n + j] * hin[j];
                }
                acc
            };
            let mut z = vec![0.0; n];
            let mut r = vec![0.0; n];
            for k in 0..n {
                z[k] = sigmoid(pre("gru.w_z", "gru.u_z", "gru.b_z", x, h, k));
                r[k] = sigmoid(pre("gru.w_r", "gru.u_r", "gru.b_r", x, h, k));
            }
            let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
            (0..n)
                .map(|k| {
                    let c = pre("gru.w_c", "gru.u_c", "gru.b_c", x, &rh, k).tanh();
                    (1.0 - z[k]) * h[k] + z[k] * c
                })
                .collect()
        };

        let mut h = p.value("h0").to_vec();
        let mut prev = 0.0;
        let mut loss = 0.0;
        for &e in &w.events {
            let dt: f64 = e - prev;
            let (k, l) = head(&h);
            let log_ratio = dt.ln() - l.ln();
            let logpdf = k.ln() - l.ln() + (k - 1.0) * log_ratio - (k * log_ratio).exp();
            loss -= logpdf;
            h = gru(&[(1.0 + dt).ln(), dt / model.window], &h);
            prev = e;
        }
        let tail: f64 = w.len - prev;
        if tail > 0.0 {
            let (k, l) = head(&h);
            loss += (k * (tail.ln() - l.ln())).exp();
        }
        loss
    }

    #[test]
    fn loss_matches_independent_scalar_oracle() {
        let model = NtppModel::new(1, 60.0, 7.5, 2024);
        let w = TrainingWindow {
            start: 0.0,
            len: 60.0,
            events: vec![2.0, 3.5, 17.0, 18.0, 55.5],
        };
        let got = model.nll_window(&w).unwrap();
        let want = oracle_nll(&model, &w);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn rollout_times_are_strictly_increasing_and_bounded() {
        let model = NtppModel::with_constant_head(0, 0.8, 3.0, 100.0);
        for n_rollouts in [1usize, 4] {
            let seq = model.sample_rollout(400.0, n_rollouts, 99).unwrap();
            assert!(seq.times.windows(2).all(|w| w[0] < w[1]));
            assert!(seq.times.iter().all(|&t| t > 0.0 && t < 400.0));
            assert!(!seq.times.is_empty());
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_bits() {
        let model = NtppModel::new(5, 500.0, 12.5, 31);
        let json = serde_json::to_string(&model.to_checkpoint()).unwrap();
        let back: NtppCheckpoint = serde_json::from_str(&json).unwrap();
        let restored = NtppModel::from_checkpoint(&back).unwrap();
        assert_eq!(restored.spawn_id, 5);
        assert_eq!(restored.window, 500.0);
        for name in model.params.names() {
            for (a, b) in model
                .params
                .value(name)
                .iter()
                .zip(restored.params.value(name))
            {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

//! Named parameter arrays with gradient slots and an Adam optimizer.

use super::NnError;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Param {
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Ordered collection of named parameters. Gradient buffers always match the
/// value shapes; the update-step counter drives Adam bias correction.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: &[usize], value: Vec<f64>) {
        let n: usize = shape.iter().product();
        assert_eq!(n, value.len(), "shape/value length mismatch for '{name}'");
        self.params.insert(
            name.to_string(),
            Param {
                shape: shape.to_vec(),
                grad: vec![0.0; n],
                m: vec![0.0; n],
                v: vec![0.0; n],
                value,
            },
        );
    }

    /// Inserts a parameter drawn from uniform(-a, a) with a = 1/sqrt(fan_in).
    pub fn insert_uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        rng: &mut impl Rng,
    ) {
        let a = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let value: Vec<f64> = (0..n).map(|_| rng.random_range(-a..a)).collect();
        self.insert(name, shape, value);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn value(&self, name: &str) -> &[f64] {
        &self.params[name].value
    }

    pub fn value_mut(&mut self, name: &str) -> &mut [f64] {
        &mut self.params.get_mut(name).unwrap().value
    }

    pub fn grad(&self, name: &str) -> &[f64] {
        &self.params[name].grad
    }

    pub fn shape(&self, name: &str) -> &[usize] {
        &self.params[name].shape
    }

    pub fn accumulate_grad(&mut self, name: &str, g: &[f64]) -> Result<(), NnError> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))?;
        if p.grad.len() != g.len() {
            return Err(NnError::DimensionMismatch(format!(
                "gradient for '{name}': got {}, expected {}",
                g.len(),
                p.grad.len()
            )));
        }
        for (slot, gi) in p.grad.iter_mut().zip(g) {
            *slot += gi;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// One Adam update from accumulated gradients; clears gradients and bumps
    /// the step counter. Panics if a parameter leaves the finite range, since
    /// finiteness after every update is a store invariant.
    pub fn adam_update(&mut self, lr: f64, betas: (f64, f64), eps: f64) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = betas;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (name, p) in self.params.iter_mut() {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.m[i] = b1 * p.m[i] + (1.0 - b1) * g;
                p.v[i] = b2 * p.v[i] + (1.0 - b2) * g * g;
                let m_hat = p.m[i] / c1;
                let v_hat = p.v[i] / c2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                assert!(
                    p.value[i].is_finite(),
                    "non-finite parameter '{name}'[{i}] after update"
                );
            }
            p.grad.fill(0.0);
        }
    }

    /// Copies parameter values (not optimizer state) out of the store.
    pub fn snapshot_values(&self) -> BTreeMap<String, Vec<f64>> {
        self.params
            .iter()
            .map(|(k, p)| (k.clone(), p.value.clone()))
            .collect()
    }

    pub fn restore_values(&mut self, snapshot: &BTreeMap<String, Vec<f64>>) {
        for (k, v) in snapshot {
            let p = self.params.get_mut(k).expect("snapshot key must exist");
            p.value.copy_from_slice(v);
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            step: self.step,
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        CheckpointArray {
                            shape: p.shape.clone(),
                            data: p.value.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, NnError> {
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(NnError::MalformedCheckpoint(format!(
                "unknown format '{}'",
                ckpt.format
            )));
        }
        let mut store = ParamStore::new();
        store.step = ckpt.step;
        for (name, arr) in &ckpt.params {
            let n: usize = arr.shape.iter().product();
            if n != arr.data.len() {
                return Err(NnError::MalformedCheckpoint(format!(
                    "'{name}': shape {:?} does not match {} values",
                    arr.shape,
                    arr.data.len()
                )));
            }
            if arr.data.iter().any(|v| !v.is_finite()) {
                return Err(NnError::MalformedCheckpoint(format!(
                    "'{name}' contains non-finite values"
                )));
            }
            store.insert(name, &arr.shape, arr.data.clone());
        }
        Ok(store)
    }
}

const CHECKPOINT_FORMAT: &str = "spawnsim-params-v1";

/// Serialized parameter checkpoint: named arrays with shape and row-major
/// values. JSON round-trips reproduce every f64 bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub step: u64,
    pub params: BTreeMap<String, CheckpointArray>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

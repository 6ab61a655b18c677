//! Fully-connected layers with per-layer activations.

use super::store::ParamStore;
use super::tape::{NodeId, Tape};
use super::{matvec, softplus, NnError};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Softplus,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Softplus => softplus(v),
            Activation::Identity => v,
        }
    }
}

/// Layer sizes `[in, h1, ..., out]` with one activation per weight layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Mlp {
    pub fn new(layers: Vec<usize>, activations: Vec<Activation>) -> Self {
        assert!(layers.len() >= 2, "an MLP needs at least input and output");
        assert_eq!(
            activations.len(),
            layers.len() - 1,
            "one activation per weight layer"
        );
        Mlp {
            layers,
            activations,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layers.last().unwrap()
    }

    pub fn init_params(&self, store: &mut ParamStore, prefix: &str, rng: &mut impl Rng) {
        for l in 0..self.layers.len() - 1 {
            let (fan_in, fan_out) = (self.layers[l], self.layers[l + 1]);
            store.insert_uniform(&format!("{prefix}.w{l}"), &[fan_out, fan_in], fan_in, rng);
            store.insert_uniform(&format!("{prefix}.b{l}"), &[fan_out], fan_in, rng);
        }
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        prefix: &str,
        input: &[f64],
    ) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch(format!(
                "mlp forward: got input[{}], expected [{}]",
                input.len(),
                self.input_dim()
            )));
        }
        let mut x = input.to_vec();
        for l in 0..self.layers.len() - 1 {
            let (rows, cols) = (self.layers[l + 1], self.layers[l]);
            let w = store.value(&format!("{prefix}.w{l}"));
            let b = store.value(&format!("{prefix}.b{l}"));
            let mut y = matvec(w, &x, rows, cols);
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi = self.activations[l].apply(*yi + bi);
            }
            x = y;
        }
        Ok(x)
    }

    pub fn forward_tape(&self, tape: &mut Tape, nodes: &MlpNodes, input: NodeId) -> NodeId {
        let mut x = input;
        for l in 0..self.layers.len() - 1 {
            let (rows, cols) = (self.layers[l + 1], self.layers[l]);
            let wx = tape.matvec(nodes.weights[l], x, rows, cols);
            let pre = tape.add(wx, nodes.biases[l]);
            x = match self.activations[l] {
                Activation::Tanh => tape.tanh(pre),
                Activation::Softplus => tape.softplus(pre),
                Activation::Identity => pre,
            };
        }
        x
    }
}

pub struct MlpNodes {
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
}

impl MlpNodes {
    pub fn bind(tape: &mut Tape, store: &ParamStore, prefix: &str, mlp: &Mlp) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..mlp.layers.len() - 1 {
            weights.push(tape.param(store, &format!("{prefix}.w{l}")));
            biases.push(tape.param(store, &format!("{prefix}.b{l}")));
        }
        MlpNodes { weights, biases }
    }
}

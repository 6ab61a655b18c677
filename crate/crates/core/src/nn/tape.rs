//! Reverse-mode differentiation over vector-valued nodes.
//!
//! A [`Tape`] is built fresh for each training window: leaves are either
//! constants or copies of [`ParamStore`] entries, interior nodes record the
//! operation and its operands, and [`Tape::backward`] walks the node list in
//! reverse, accumulating parameter gradients back into the store.

use super::store::ParamStore;
use super::{sigmoid, softplus, NnError};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(String),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// a * x + b elementwise; only the slope matters going backward.
    Affine(NodeId, f64),
    MatVec {
        w: NodeId,
        x: NodeId,
        rows: usize,
        cols: usize,
    },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Index(NodeId, usize),
    Sum(NodeId),
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.len(), 1);
        self.nodes[id].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, v: Vec<f64>) -> NodeId {
        self.push(v, Op::Constant)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.constant(vec![v])
    }

    /// Leaf bound to a store parameter; gradients flow back on `backward`.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> NodeId {
        let value = store.value(name).to_vec();
        self.push(value, Op::Param(name.to_string()))
    }

    fn binary_values(&self, a: NodeId, b: NodeId) -> (&[f64], &[f64]) {
        debug_assert_eq!(
            self.nodes[a].value.len(),
            self.nodes[b].value.len(),
            "elementwise op on mismatched lengths"
        );
        (&self.nodes[a].value, &self.nodes[b].value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = self.binary_values(a, b);
        let v = va.iter().zip(vb).map(|(x, y)| x + y).collect();
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = self.binary_values(a, b);
        let v = va.iter().zip(vb).map(|(x, y)| x - y).collect();
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = self.binary_values(a, b);
        let v = va.iter().zip(vb).map(|(x, y)| x * y).collect();
        self.push(v, Op::Mul(a, b))
    }

    pub fn affine(&mut self, x: NodeId, a: f64, b: f64) -> NodeId {
        let v = self.nodes[x].value.iter().map(|t| a * t + b).collect();
        self.push(v, Op::Affine(x, a))
    }

    pub fn one_minus(&mut self, x: NodeId) -> NodeId {
        self.affine(x, -1.0, 1.0)
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId, rows: usize, cols: usize) -> NodeId {
        debug_assert_eq!(self.nodes[w].value.len(), rows * cols);
        debug_assert_eq!(self.nodes[x].value.len(), cols);
        let v = super::matvec(&self.nodes[w].value, &self.nodes[x].value, rows, cols);
        self.push(v, Op::MatVec { w, x, rows, cols })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().map(|&t| sigmoid(t)).collect();
        self.push(v, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().map(|t| t.tanh()).collect();
        self.push(v, Op::Tanh(x))
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().map(|&t| softplus(t)).collect();
        self.push(v, Op::Softplus(x))
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().map(|t| t.exp()).collect();
        self.push(v, Op::Exp(x))
    }

    /// Natural log; non-positive inputs produce non-finite values that
    /// `backward` rejects as [`NnError::NonFiniteLoss`].
    pub fn ln(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().map(|t| t.ln()).collect();
        self.push(v, Op::Ln(x))
    }

    pub fn index(&mut self, x: NodeId, i: usize) -> NodeId {
        let v = vec![self.nodes[x].value[i]];
        self.push(v, Op::Index(x, i))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = vec![self.nodes[x].value.iter().sum()];
        self.push(v, Op::Sum(x))
    }

    /// Reverse pass from a scalar loss node. Gradients of every bound
    /// parameter are accumulated into the store. Returns the loss value.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<f64, NnError> {
        let loss_val = self.scalar_value(loss);
        if !loss_val.is_finite() {
            return Err(NnError::NonFiniteLoss);
        }
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[loss][0] = 1.0;

        for id in (0..=loss).rev() {
            let node = &self.nodes[id];
            if grads[id].iter().all(|&g| g == 0.0) {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(name) => {
                    store.accumulate_grad(name, &grads[id])?;
                }
                Op::Add(a, b) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        grads[*a][i] += g[i];
                        grads[*b][i] += g[i];
                    }
                }
                Op::Sub(a, b) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        grads[*a][i] += g[i];
                        grads[*b][i] -= g[i];
                    }
                }
                Op::Mul(a, b) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        let va = self.nodes[*a].value[i];
                        let vb = self.nodes[*b].value[i];
                        grads[*a][i] += g[i] * vb;
                        grads[*b][i] += g[i] * va;
                    }
                }
                Op::Affine(x, a) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        grads[*x][i] += a * g[i];
                    }
                }
                Op::MatVec { w, x, rows, cols } => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..*rows {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for j in 0..*cols {
                            grads[*w][i * cols + j] += gi * self.nodes[*x].value[j];
                            grads[*x][j] += gi * self.nodes[*w].value[i * cols + j];
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        let s = node.value[i];
                        grads[*x][i] += g[i] * s * (1.0 - s);
                    }
                }
                Op::Tanh(x) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        let t = node.value[i];
                        grads[*x][i] += g[i] * (1.0 - t * t);
                    }
                }
                Op::Softplus(x) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        grads[*x][i] += g[i] * sigmoid(self.nodes[*x].value[i]);
                    }
                }
                Op::Exp(x) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        grads[*x][i] += g[i] * node.value[i];
                    }
                }
                Op::Ln(x) => {
                    let g = std::mem::take(&mut grads[id]);
                    for i in 0..g.len() {
                        grads[*x][i] += g[i] / self.nodes[*x].value[i];
                    }
                }
                Op::Index(x, i) => {
                    let g = grads[id][0];
                    grads[*x][*i] += g;
                }
                Op::Sum(x) => {
                    let g = grads[id][0];
                    for slot in grads[*x].iter_mut() {
                        *slot += g;
                    }
                }
            }
        }
        Ok(loss_val)
    }
}

//! Gated recurrent unit cell.
//!
//! Update convention (fixed for this crate):
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! h~ = tanh(W_c x + U_c (r .* h) + b_c)
//! h' = (1 - z) .* h + z .* h~
//! ```

use super::store::ParamStore;
use super::tape::{NodeId, Tape};
use super::{matvec, sigmoid, NnError};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Parameter names under a prefix, e.g. `gru.w_z`, `gru.u_z`, `gru.b_z`.
const GATES: [&str; 3] = ["z", "r", "c"];

impl GruCell {
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        GruCell {
            input_dim,
            hidden_dim,
        }
    }

    pub fn init_params(&self, store: &mut ParamStore, prefix: &str, rng: &mut impl Rng) {
        let (i, h) = (self.input_dim, self.hidden_dim);
        for gate in GATES {
            store.insert_uniform(&format!("{prefix}.w_{gate}"), &[h, i], i, rng);
            store.insert_uniform(&format!("{prefix}.u_{gate}"), &[h, h], h, rng);
            store.insert_uniform(&format!("{prefix}.b_{gate}"), &[h], h, rng);
        }
    }

    /// One recurrent update on plain vectors (no gradient recording).
    pub fn step(
        &self,
        store: &ParamStore,
        prefix: &str,
        x: &[f64],
        h: &[f64],
    ) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim || h.len() != self.hidden_dim {
            return Err(NnError::DimensionMismatch(format!(
                "gru_step: got x[{}], h[{}], expected x[{}], h[{}]",
                x.len(),
                h.len(),
                self.input_dim,
                self.hidden_dim
            )));
        }
        let (i, n) = (self.input_dim, self.hidden_dim);
        let gate = |g: &str, xin: &[f64], hin: &[f64]| -> Vec<f64> {
            let wx = matvec(store.value(&format!("{prefix}.w_{g}")), xin, n, i);
            let uh = matvec(store.value(&format!("{prefix}.u_{g}")), hin, n, n);
            let b = store.value(&format!("{prefix}.b_{g}"));
            (0..n).map(|k| wx[k] + uh[k] + b[k]).collect()
        };
        let z: Vec<f64> = gate("z", x, h).iter().map(|&v| sigmoid(v)).collect();
        let r: Vec<f64> = gate("r", x, h).iter().map(|&v| sigmoid(v)).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(ri, hi)| ri * hi).collect();
        let cand: Vec<f64> = gate("c", x, &rh).iter().map(|v| v.tanh()).collect();
        Ok((0..n)
            .map(|k| (1.0 - z[k]) * h[k] + z[k] * cand[k])
            .collect())
    }

    /// Same update recorded on a tape. `params` are node ids bound earlier
    /// via [`GruNodes::bind`].
    pub fn step_tape(&self, tape: &mut Tape, params: &GruNodes, x: NodeId, h: NodeId) -> NodeId {
        let (i, n) = (self.input_dim, self.hidden_dim);
        let pre = |tape: &mut Tape, w: NodeId, u: NodeId, b: NodeId, xin: NodeId, hin: NodeId| {
            let wx = tape.matvec(w, xin, n, i);
            let uh = tape.matvec(u, hin, n, n);
            let s = tape.add(wx, uh);
            tape.add(s, b)
        };
        let z_pre = pre(tape, params.w_z, params.u_z, params.b_z, x, h);
        let z = tape.sigmoid(z_pre);
        let r_pre = pre(tape, params.w_r, params.u_r, params.b_r, x, h);
        let r = tape.sigmoid(r_pre);
        let rh = tape.mul(r, h);
        let c_wx = tape.matvec(params.w_c, x, n, i);
        let c_uh = tape.matvec(params.u_c, rh, n, n);
        let c_sum = tape.add(c_wx, c_uh);
        let c_pre = tape.add(c_sum, params.b_c);
        let cand = tape.tanh(c_pre);
        let keep = tape.one_minus(z);
        let kept = tape.mul(keep, h);
        let new = tape.mul(z, cand);
        tape.add(kept, new)
    }
}

/// Tape node ids for one cell's parameters.
pub struct GruNodes {
    pub w_z: NodeId,
    pub u_z: NodeId,
    pub b_z: NodeId,
    pub w_r: NodeId,
    pub u_r: NodeId,
    pub b_r: NodeId,
    pub w_c: NodeId,
    pub u_c: NodeId,
    pub b_c: NodeId,
}

impl GruNodes {
    pub fn bind(tape: &mut Tape, store: &ParamStore, prefix: &str) -> Self {
        let mut get = |g: &str, kind: &str| tape.param(store, &format!("{prefix}.{kind}_{g}"));
        GruNodes {
            w_z: get("z", "w"),
            u_z: get("z", "u"),
            b_z: get("z", "b"),
            w_r: get("r", "w"),
            u_r: get("r", "u"),
            b_r: get("r", "b"),
            w_c: get("c", "w"),
            u_c: get("c", "u"),
            b_c: get("c", "b"),
        }
    }
}

//! Dense feed-forward networks.
//!
//! Hidden layers apply the configured activation; the output layer is linear.
//! Weights are stored row-major per layer (`out x in`), flattened in
//! `[W0, b0, W1, b1, ...]` order — the same convention the Adam optimizer and
//! the batched trainer use.

use crate::error::{Error, Result};
use crate::rng::{uniform, SeedRng};

use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    fn on_tape(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub activation: Activation,
    /// `weights[l][o * widths[l] + i]` connects input `i` to output `o`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Zero-initialized network. `widths` lists every layer width including
    /// input and output.
    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid(format!("bad layer widths {widths:?}")));
        }
        let weights = widths
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = widths[1..].iter().map(|&w| vec![0.0; w]).collect();
        Ok(Mlp {
            widths: widths.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    /// Xavier/Glorot uniform initialization, deterministic in the stream.
    pub fn xavier(widths: &[usize], activation: Activation, rng: &mut SeedRng) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        for (l, w) in net.net_shape() {
            let limit = (6.0 / (w.0 + w.1) as f64).sqrt();
            for value in net.weights[l].iter_mut() {
                *value = uniform(rng, -limit, limit);
            }
        }
        Ok(net)
    }

    fn net_shape(&self) -> Vec<(usize, (usize, usize))> {
        self.widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| (l, (w[0], w[1])))
            .collect()
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Flatten parameters in `[W0, b0, W1, b1, ...]` order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.n_layers() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Inverse of [`Mlp::flatten`].
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::InputDimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for l in 0..self.n_layers() {
            let nw = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Straightforward tape-free evaluation (also the oracle the taped
    /// forward is checked against).
    pub fn forward_plain(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        if inputs.len() != self.widths[0] {
            return Err(Error::InputDimension {
                expected: self.widths[0],
                got: inputs.len(),
            });
        }
        let last = self.n_layers() - 1;
        let mut act = inputs.to_vec();
        for l in 0..=last {
            let n_in = self.widths[l];
            let n_out = self.widths[l + 1];
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut z = self.biases[l][o];
                for (w, a) in row.iter().zip(&act) {
                    z += w * a;
                }
                next[o] = if l == last { z } else { self.activation.apply(z) };
            }
            act = next;
        }
        Ok(act)
    }

    /// Push every parameter as a tape leaf (flatten order) so adjoints line
    /// up with the flat gradient vector.
    pub fn bind_params(&self, tape: &mut Tape) -> TapeParams {
        let mut flat = Vec::with_capacity(self.param_count());
        let mut layout = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let w_start = flat.len();
            for &w in &self.weights[l] {
                flat.push(tape.leaf(w));
            }
            let b_start = flat.len();
            for &b in &self.biases[l] {
                flat.push(tape.leaf(b));
            }
            layout.push((w_start, b_start));
        }
        TapeParams {
            flat,
            layout,
            widths: self.widths.clone(),
        }
    }

    /// Record a forward pass on the tape. All intermediate nodes are recorded;
    /// the result is deterministic for fixed weights and inputs.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        params: &TapeParams,
        inputs: &[Var],
    ) -> Result<Vec<Var>> {
        self.check_input(inputs.len())?;
        let last = self.n_layers() - 1;
        let mut act = inputs.to_vec();
        for l in 0..=last {
            let n_in = self.widths[l];
            let n_out = self.widths[l + 1];
            let mut next = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let mut z = params.b(l, o);
                for (i, &a) in act.iter().enumerate().take(n_in) {
                    let wa = tape.mul(params.w(l, o, i), a);
                    z = tape.add(z, wa);
                }
                next.push(if l == last {
                    z
                } else {
                    self.activation.on_tape(tape, z)
                });
            }
            act = next;
        }
        Ok(act)
    }

    /// Record a forward pass together with the tangent d(output)/d(input
    /// `seed`). Tangent intermediates are ordinary tape nodes, so a later
    /// reverse pass differentiates through the returned derivative.
    pub fn forward_with_tangent(
        &self,
        tape: &mut Tape,
        params: &TapeParams,
        inputs: &[Var],
        seed: usize,
    ) -> Result<(Vec<Var>, Vec<Var>)> {
        self.check_input(inputs.len())?;
        if seed >= inputs.len() {
            return Err(Error::contract(format!(
                "tangent seed {seed} out of range for {} inputs",
                inputs.len()
            )));
        }
        let last = self.n_layers() - 1;
        let mut act = inputs.to_vec();
        // d(input_i)/d(input_seed) is the Kronecker delta, so the first
        // layer's pre-activation tangent is just the seed column's weight
        // leaf itself — no node needs recording for it.
        let mut first = true;
        let mut tan_act: Vec<Var> = Vec::new();
        for l in 0..=last {
            let n_in = self.widths[l];
            let n_out = self.widths[l + 1];
            let mut next = Vec::with_capacity(n_out);
            let mut next_tan = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let mut z = params.b(l, o);
                for (i, &a) in act.iter().enumerate().take(n_in) {
                    let wa = tape.mul(params.w(l, o, i), a);
                    z = tape.add(z, wa);
                }
                // zdot = sum_i w_oi * adot_i
                let zdot = if first {
                    params.w(l, o, seed)
                } else {
                    let mut acc: Option<Var> = None;
                    for (i, &ad) in tan_act.iter().enumerate().take(n_in) {
                        let term = tape.mul(params.w(l, o, i), ad);
                        acc = Some(match acc {
                            None => term,
                            Some(s) => tape.add(s, term),
                        });
                    }
                    acc.expect("hidden layers are non-empty")
                };
                if l == last {
                    next.push(z);
                    next_tan.push(zdot);
                } else {
                    let a = self.activation.on_tape(tape, z);
                    // adot = phi'(z) * zdot, with phi' expressed through a so
                    // the reverse pass sees the dependence on the weights.
                    let dphi = match self.activation {
                        Activation::Sigmoid => {
                            let om = tape.sub_from_const(1.0, a);
                            tape.mul(a, om)
                        }
                        Activation::Tanh => {
                            let sq = tape.square(a);
                            tape.sub_from_const(1.0, sq)
                        }
                    };
                    next.push(a);
                    next_tan.push(tape.mul(dphi, zdot));
                }
            }
            act = next;
            tan_act = next_tan;
            first = false;
        }
        Ok((act, tan_act))
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.widths[0] {
            return Err(Error::InputDimension {
                expected: self.widths[0],
                got,
            });
        }
        Ok(())
    }
}

/// Parameter leaves of one bound network, flatten-ordered.
pub struct TapeParams {
    pub flat: Vec<Var>,
    layout: Vec<(usize, usize)>,
    widths: Vec<usize>,
}

impl TapeParams {
    fn w(&self, l: usize, o: usize, i: usize) -> Var {
        let (w_start, _) = self.layout[l];
        self.flat[w_start + o * self.widths[l] + i]
    }

    fn b(&self, l: usize, o: usize) -> Var {
        let (_, b_start) = self.layout[l];
        self.flat[b_start + o]
    }
}

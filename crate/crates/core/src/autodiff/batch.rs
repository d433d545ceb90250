//! Batched layer-level training path.
//!
//! The scalar tape is exact but visits one node per scalar operation; for the
//! deeper networks trained on thousands of collocation points that is orders
//! of magnitude too slow. This module evaluates whole batches through dense
//! layers with matrix products and hand-derived reverse rules, including a
//! fused tangent pass: the forward can carry d(output)/d(input) alongside the
//! values, and the backward differentiates losses that involve both.
//!
//! Parameter layout matches [`super::Mlp::flatten`]: `[W0, b0, W1, b1, ...]`,
//! weights row-major `out x in`. Gradient parity with the tape is asserted in
//! the tests below.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};

use super::mlp::Activation;

#[derive(Debug, Clone)]
pub struct BatchNet {
    pub widths: Vec<usize>,
    pub activation: Activation,
}

/// Per-layer activations (and tangent pre-activations) kept for backward.
pub struct ForwardCache {
    /// `a[0]` is the input batch, `a[l+1]` the output of layer `l`.
    a: Vec<Array2<f64>>,
    /// Tangent pre-activations per layer; empty when no tangent was pushed.
    zdot: Vec<Array2<f64>>,
    /// Input tangent batch when present.
    xdot: Option<Array2<f64>>,
}

impl ForwardCache {
    /// Network output (last layer is linear).
    pub fn output(&self) -> &Array2<f64> {
        self.a.last().expect("cache is never empty")
    }

    /// Tangent of the output wrt the seeded input direction.
    pub fn output_tangent(&self) -> Option<&Array2<f64>> {
        self.zdot.last()
    }
}

impl BatchNet {
    pub fn new(widths: &[usize], activation: Activation) -> Self {
        assert!(widths.len() >= 2 && widths.iter().all(|&w| w > 0));
        BatchNet {
            widths: widths.to_vec(),
            activation,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer_offset(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += self.widths[k] * self.widths[k + 1] + self.widths[k + 1];
        }
        (off, off + self.widths[l] * self.widths[l + 1])
    }

    fn layer_views<'a>(&self, params: &'a [f64], l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let (w_off, b_off) = self.layer_offset(l);
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let w = ArrayView2::from_shape((n_out, n_in), &params[w_off..b_off]).unwrap();
        let b = ArrayView1::from_shape(n_out, &params[b_off..b_off + n_out]).unwrap();
        (w, b)
    }

    fn layer_grads<'a>(
        &self,
        grads: &'a mut [f64],
        l: usize,
    ) -> (ArrayViewMut2<'a, f64>, &'a mut [f64]) {
        let (w_off, _) = self.layer_offset(l);
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let (w_slice, rest) = grads[w_off..].split_at_mut(n_out * n_in);
        let w = ArrayViewMut2::from_shape((n_out, n_in), w_slice).unwrap();
        (w, &mut rest[..n_out])
    }

    fn phi(&self, z: &mut Array2<f64>) {
        match self.activation {
            Activation::Sigmoid => z.mapv_inplace(|x| 1.0 / (1.0 + (-x).exp())),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// First derivative expressed through the activation value.
    fn dphi(&self, a: &Array2<f64>) -> Array2<f64> {
        match self.activation {
            Activation::Sigmoid => a.mapv(|s| s * (1.0 - s)),
            Activation::Tanh => a.mapv(|t| 1.0 - t * t),
        }
    }

    /// Second derivative expressed through the activation value.
    fn ddphi(&self, a: &Array2<f64>) -> Array2<f64> {
        match self.activation {
            Activation::Sigmoid => a.mapv(|s| s * (1.0 - s) * (1.0 - 2.0 * s)),
            Activation::Tanh => a.mapv(|t| -2.0 * t * (1.0 - t * t)),
        }
    }

    /// Batched forward pass. Rows are samples.
    pub fn forward(&self, params: &[f64], x: &Array2<f64>) -> ForwardCache {
        self.run_forward(params, x, None)
    }

    /// Batched forward pass carrying the tangent `xdot` (same shape as `x`).
    /// For d/dt of a 1-input network, pass a column of ones.
    pub fn forward_with_tangent(
        &self,
        params: &[f64],
        x: &Array2<f64>,
        xdot: &Array2<f64>,
    ) -> ForwardCache {
        self.run_forward(params, x, Some(xdot))
    }

    fn run_forward(&self, params: &[f64], x: &Array2<f64>, xdot: Option<&Array2<f64>>) -> ForwardCache {
        assert_eq!(x.ncols(), self.widths[0], "input width mismatch");
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let last = self.n_layers() - 1;
        let mut a = Vec::with_capacity(self.n_layers() + 1);
        let mut zdot_cache = Vec::new();
        a.push(x.clone());
        let mut adot = xdot.cloned();
        for l in 0..=last {
            let (w, b) = self.layer_views(params, l);
            let mut z = a[l].dot(&w.t());
            z += &b;
            if let Some(ad) = &adot {
                let zdot = ad.dot(&w.t());
                zdot_cache.push(zdot);
            }
            if l == last {
                a.push(z);
            } else {
                self.phi(&mut z);
                a.push(z);
            }
            if adot.is_some() {
                let zdot = zdot_cache.last().unwrap();
                adot = Some(if l == last {
                    zdot.clone()
                } else {
                    &self.dphi(&a[l + 1]) * zdot
                });
            }
        }
        ForwardCache {
            a,
            zdot: zdot_cache,
            xdot: xdot.cloned(),
        }
    }

    /// Tangent of layer-`l` activations (`l = 0` is the input batch).
    fn adot(&self, cache: &ForwardCache, l: usize) -> Array2<f64> {
        if l == 0 {
            cache.xdot.clone().expect("tangent pass required")
        } else {
            // Hidden activation tangent: phi'(z) * zdot.
            &self.dphi(&cache.a[l]) * &cache.zdot[l - 1]
        }
    }

    /// Reverse pass. `g_out` is dLoss/d(output); `g_out_tangent`, when given,
    /// is dLoss/d(output tangent). Parameter gradients are accumulated into
    /// `grads`; the return value is (dLoss/dx, dLoss/dxdot).
    pub fn backward(
        &self,
        params: &[f64],
        cache: &ForwardCache,
        g_out: Array2<f64>,
        g_out_tangent: Option<Array2<f64>>,
        grads: &mut [f64],
    ) -> (Array2<f64>, Option<Array2<f64>>) {
        assert_eq!(grads.len(), self.param_count(), "gradient buffer mismatch");
        if g_out_tangent.is_some() {
            assert!(!cache.zdot.is_empty(), "tangent adjoint without tangent pass");
        }
        let last = self.n_layers() - 1;
        let mut ga = g_out;
        let mut gadot = g_out_tangent;
        for l in (0..=last).rev() {
            let (gz, gzdot) = if l == last {
                (ga, gadot)
            } else {
                let act = &cache.a[l + 1];
                let dphi = self.dphi(act);
                let mut gz = &ga * &dphi;
                let gzdot = if let Some(gad) = &gadot {
                    // zdot feeds the output through phi'(z): its z-adjoint
                    // needs phi'' and the stored tangent pre-activation.
                    gz = gz + &(gad * &self.ddphi(act)) * &cache.zdot[l];
                    Some(gad * &dphi)
                } else {
                    None
                };
                (gz, gzdot)
            };
            {
                let (mut gw, gb) = self.layer_grads(grads, l);
                gw += &gz.t().dot(&cache.a[l]);
                if let Some(gzd) = &gzdot {
                    gw += &gzd.t().dot(&self.adot(cache, l));
                }
                let col = gz.sum_axis(Axis(0));
                for (dst, src) in gb.iter_mut().zip(col.iter()) {
                    *dst += src;
                }
            }
            let (w, _) = self.layer_views(params, l);
            ga = gz.dot(&w);
            gadot = gzdot.map(|g| g.dot(&w));
        }
        (ga, gadot)
    }
}

/// Column-major helper for building single-column batches.
pub fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
}

/// A batch column of ones — the tangent seed for d/dt of 1-input networks.
pub fn ones_column(n: usize) -> Array2<f64> {
    Array2::ones((n, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Mlp, Tape};
    use crate::rng;
    use ndarray::Array2;

    fn tape_reference_grads(
        net: &Mlp,
        xs: &[Vec<f64>],
        with_tangent: bool,
        c_val: f64,
        c_tan: f64,
    ) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        // loss = sum over samples and outputs of (c_val*y + c_tan*ydot)^2
        let mut tape = Tape::new();
        let params = net.bind_params(&mut tape);
        let mut terms = Vec::new();
        let mut input_vars = Vec::new();
        for x in xs {
            let iv: Vec<_> = x.iter().map(|&v| tape.leaf(v)).collect();
            input_vars.push(iv.clone());
            if with_tangent {
                let (y, ydot) = net.forward_with_tangent(&mut tape, &params, &iv, 0).unwrap();
                for (yo, yd) in y.iter().zip(&ydot) {
                    let a = tape.mul_const(*yo, c_val);
                    let b = tape.mul_const(*yd, c_tan);
                    let s = tape.add(a, b);
                    terms.push(tape.square(s));
                }
            } else {
                let y = net.forward_on_tape(&mut tape, &params, &iv).unwrap();
                for yo in y {
                    let s = tape.mul_const(yo, c_val);
                    terms.push(tape.square(s));
                }
            }
        }
        let loss = tape.sum(&terms);
        let adj = tape.backward(loss);
        let pg: Vec<f64> = params.flat.iter().map(|&v| adj.wrt(v)).collect();
        let xg: Vec<Vec<f64>> = input_vars
            .iter()
            .map(|iv| iv.iter().map(|&v| adj.wrt(v)).collect())
            .collect();
        (tape.value(loss), pg, xg)
    }

    fn batch_grads(
        net: &Mlp,
        xs: &[Vec<f64>],
        with_tangent: bool,
        c_val: f64,
        c_tan: f64,
    ) -> (f64, Vec<f64>, Array2<f64>) {
        let bn = BatchNet::new(&net.widths, net.activation);
        let flat = net.flatten();
        let n = xs.len();
        let d = xs[0].len();
        let x = Array2::from_shape_vec((n, d), xs.concat()).unwrap();
        let cache = if with_tangent {
            let mut xdot = Array2::zeros((n, d));
            xdot.column_mut(0).fill(1.0);
            bn.forward_with_tangent(&flat, &x, &xdot)
        } else {
            bn.forward(&flat, &x)
        };
        let y = cache.output().clone();
        let (loss, gy, gydot) = if with_tangent {
            let ydot = cache.output_tangent().unwrap();
            let s = y.mapv(|v| v * c_val) + ydot.mapv(|v| v * c_tan);
            let loss = s.mapv(|v| v * v).sum();
            (
                loss,
                s.mapv(|v| 2.0 * v * c_val),
                Some(s.mapv(|v| 2.0 * v * c_tan)),
            )
        } else {
            let s = y.mapv(|v| v * c_val);
            (s.mapv(|v| v * v).sum(), s.mapv(|v| 2.0 * v * c_val), None)
        };
        let mut grads = vec![0.0; bn.param_count()];
        let (gx, _) = bn.backward(&flat, &cache, gy, gydot, &mut grads);
        (loss, grads, gx)
    }

    #[test]
    fn forward_matches_plain_evaluation() {
        let mut r = rng::from_seed(21);
        let net = Mlp::xavier(&[2, 5, 4, 3], Activation::Tanh, &mut r).unwrap();
        let bn = BatchNet::new(&net.widths, net.activation);
        let flat = net.flatten();
        let xs = [vec![0.2, -0.7], vec![1.5, 0.0], vec![-0.3, 0.9]];
        let x = Array2::from_shape_vec((3, 2), xs.concat()).unwrap();
        let cache = bn.forward(&flat, &x);
        for (i, row) in xs.iter().enumerate() {
            let want = net.forward_plain(row).unwrap();
            for (j, w) in want.iter().enumerate() {
                assert!((cache.output()[[i, j]] - w).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradients_match_tape_without_tangent() {
        for act in [Activation::Sigmoid, Activation::Tanh] {
            let mut r = rng::from_seed(33);
            let net = Mlp::xavier(&[2, 6, 5, 2], act, &mut r).unwrap();
            let xs = vec![vec![0.4, -0.2], vec![-1.1, 0.6], vec![0.0, 0.9]];
            let (l_ref, g_ref, gx_ref) = tape_reference_grads(&net, &xs, false, 1.3, 0.0);
            let (l, g, gx) = batch_grads(&net, &xs, false, 1.3, 0.0);
            assert!((l - l_ref).abs() / l_ref.abs() < 1e-12);
            for (a, b) in g.iter().zip(&g_ref) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            for (i, row) in gx_ref.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    assert!((gx[[i, j]] - v).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn gradients_match_tape_with_tangent() {
        for act in [Activation::Sigmoid, Activation::Tanh] {
            let mut r = rng::from_seed(55);
            let net = Mlp::xavier(&[1, 7, 6, 2], act, &mut r).unwrap();
            let xs = vec![vec![0.15], vec![-0.8], vec![0.5], vec![1.2]];
            let (l_ref, g_ref, _) = tape_reference_grads(&net, &xs, true, 0.7, 2.0);
            let (l, g, _) = batch_grads(&net, &xs, true, 0.7, 2.0);
            assert!((l - l_ref).abs() / l_ref.abs() < 1e-12);
            for (a, b) in g.iter().zip(&g_ref) {
                let scale = b.abs().max(1e-8);
                assert!((a - b).abs() / scale < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let mut r = rng::from_seed(77);
        let net = Mlp::xavier(&[1, 10, 10, 1], Activation::Tanh, &mut r).unwrap();
        let bn = BatchNet::new(&net.widths, net.activation);
        let flat = net.flatten();
        let x = column(&[0.3, 0.9, -0.4]);
        let xdot = ones_column(3);
        let cache = bn.forward_with_tangent(&flat, &x, &xdot);
        let h = 1e-6;
        for i in 0..3 {
            let xi = x[[i, 0]];
            let up = net.forward_plain(&[xi + h]).unwrap()[0];
            let dn = net.forward_plain(&[xi - h]).unwrap()[0];
            let fd = (up - dn) / (2.0 * h);
            let got = cache.output_tangent().unwrap()[[i, 0]];
            assert!((got - fd).abs() / fd.abs().max(1e-12) < 1e-7);
        }
    }
}

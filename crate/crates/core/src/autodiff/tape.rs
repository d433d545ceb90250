//! Scalar reverse-mode tape.
//!
//! Each recorded node stores its operand indices together with the local
//! partial derivatives evaluated during the forward pass, so the backward
//! sweep is a single op-agnostic loop: two fused multiply-adds per node,
//! visiting every node exactly once (O(N)).

use crate::error::{Error, Result};

/// Handle to a scalar value on a [`Tape`]. Cheap to copy; only valid for the
/// tape that produced it (and until that tape is cleared).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

const NONE: u32 = u32::MAX;

/// Operand indices plus local partials. Leaves use `a == b == NONE`,
/// unary nodes use `b == NONE`.
#[derive(Clone, Copy)]
struct Node {
    a: u32,
    b: u32,
    da: f64,
    db: f64,
}

/// Append-only computation record. Operand indices always point backwards
/// (topological by construction).
#[derive(Default)]
pub struct Tape {
    val: Vec<f64>,
    node: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            val: Vec::with_capacity(n),
            node: Vec::with_capacity(n),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node.is_empty()
    }

    /// Drop all nodes, keeping allocations for reuse across epochs.
    pub fn clear(&mut self) {
        self.val.clear();
        self.node.clear();
    }

    pub fn value(&self, v: Var) -> f64 {
        self.val[v.index()]
    }

    fn push(&mut self, value: f64, node: Node) -> Var {
        debug_assert!(self.node.len() < NONE as usize);
        let idx = self.node.len() as u32;
        self.val.push(value);
        self.node.push(node);
        Var(idx)
    }

    /// Record an input, parameter, or constant.
    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(
            value,
            Node {
                a: NONE,
                b: NONE,
                da: 0.0,
                db: 0.0,
            },
        )
    }

    fn unary(&mut self, value: f64, a: Var, da: f64) -> Var {
        self.push(
            value,
            Node {
                a: a.0,
                b: NONE,
                da,
                db: 0.0,
            },
        )
    }

    fn binary(&mut self, value: f64, a: Var, da: f64, b: Var, db: f64) -> Var {
        self.push(
            value,
            Node {
                a: a.0,
                b: b.0,
                da,
                db,
            },
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.binary(v, a, 1.0, b, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.binary(v, a, 1.0, b, -1.0)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.binary(va * vb, a, vb, b, va)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.binary(va / vb, a, 1.0 / vb, b, -va / (vb * vb))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.unary(v, a, -1.0)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.unary(v, a, 1.0)
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.unary(v, a, c)
    }

    /// `c - a`.
    pub fn sub_from_const(&mut self, c: f64, a: Var) -> Var {
        let v = c - self.value(a);
        self.unary(v, a, -1.0)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let va = self.value(a);
        self.unary(va * va, a, 2.0 * va)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.unary(v, a, v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let va = self.value(a);
        self.unary(va.ln(), a, 1.0 / va)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let s = 1.0 / (1.0 + (-self.value(a)).exp());
        self.unary(s, a, s * (1.0 - s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.unary(t, a, 1.0 - t * t)
    }

    /// `max(a, c)` — positivity guard. The derivative is 1 on the live branch
    /// and 0 when clamped.
    pub fn max_const(&mut self, a: Var, c: f64) -> Var {
        let va = self.value(a);
        if va > c {
            self.unary(va, a, 1.0)
        } else {
            self.unary(c, a, 0.0)
        }
    }

    /// Sequential sum of `vars` (empty input yields a fresh zero leaf).
    pub fn sum(&mut self, vars: &[Var]) -> Var {
        match vars.split_first() {
            None => self.leaf(0.0),
            Some((&first, rest)) => {
                let mut acc = first;
                for &v in rest {
                    acc = self.add(acc, v);
                }
                acc
            }
        }
    }

    /// Mean of squares — the MSE building block.
    pub fn mean_sq(&mut self, vars: &[Var]) -> Var {
        if vars.is_empty() {
            return self.leaf(0.0);
        }
        let squares: Vec<Var> = vars.iter().map(|&v| self.square(v)).collect();
        let total = self.sum(&squares);
        self.mul_const(total, 1.0 / vars.len() as f64)
    }

    /// Reverse sweep seeding `d output / d output = 1`; adjoints for every
    /// node at or before `output` are written into `adj`.
    pub fn backward_into(&self, output: Var, adj: &mut Vec<f64>) {
        let n = output.index() + 1;
        adj.clear();
        adj.resize(n, 0.0);
        adj[n - 1] = 1.0;
        for i in (0..n).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = &self.node[i];
            if node.a != NONE {
                adj[node.a as usize] += node.da * g;
                if node.b != NONE {
                    adj[node.b as usize] += node.db * g;
                }
            }
        }
    }

    /// Reverse sweep returning an adjoint table.
    pub fn backward(&self, output: Var) -> Adjoints {
        let mut adj = Vec::new();
        self.backward_into(output, &mut adj);
        Adjoints(adj)
    }

    /// Gradient of the scalar `output` with respect to each requested node.
    pub fn gradient(&self, output: Var, wrt: &[Var]) -> Result<Vec<f64>> {
        if output.index() >= self.node.len() {
            return Err(Error::contract("output node is not on this tape"));
        }
        let adj = self.backward(output);
        Ok(wrt.iter().map(|&v| adj.wrt(v)).collect())
    }
}

/// Adjoints produced by a backward pass.
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    /// d output / d v; zero for nodes recorded after the output.
    pub fn wrt(&self, v: Var) -> f64 {
        self.0.get(v.index()).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        // f(x) = x^2, x = 3 -> df/dx = 6
        let mut tape = Tape::new();
        let x = tape.leaf(3.0);
        let y = tape.mul(x, x);
        assert_eq!(tape.value(y), 9.0);
        let g = tape.gradient(y, &[x]).unwrap();
        assert_eq!(g[0], 6.0);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        // sigma'(0) = sigma(0) * (1 - sigma(0)) = 0.25
        let mut tape = Tape::new();
        let x = tape.leaf(0.0);
        let y = tape.sigmoid(x);
        assert_eq!(tape.value(y), 0.5);
        let g = tape.gradient(y, &[x]).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn composite_matches_finite_difference() {
        let f = |x: f64, y: f64| (x * y + (-x).exp()).ln() * (y - 0.5) / (x + 2.0);
        let build = |tape: &mut Tape, xv: f64, yv: f64| {
            let x = tape.leaf(xv);
            let y = tape.leaf(yv);
            let xy = tape.mul(x, y);
            let nx = tape.neg(x);
            let ex = tape.exp(nx);
            let s = tape.add(xy, ex);
            let l = tape.ln(s);
            let ym = tape.add_const(y, -0.5);
            let num = tape.mul(l, ym);
            let den = tape.add_const(x, 2.0);
            (x, y, tape.div(num, den))
        };
        let (xv, yv) = (1.3, 0.7);
        let mut tape = Tape::new();
        let (x, y, out) = build(&mut tape, xv, yv);
        assert!((tape.value(out) - f(xv, yv)).abs() < 1e-14);
        let g = tape.gradient(out, &[x, y]).unwrap();
        let h = 1e-6;
        let fd_x = (f(xv + h, yv) - f(xv - h, yv)) / (2.0 * h);
        let fd_y = (f(xv, yv + h) - f(xv, yv - h)) / (2.0 * h);
        assert!((g[0] - fd_x).abs() / fd_x.abs() < 1e-8);
        assert!((g[1] - fd_y).abs() / fd_y.abs() < 1e-8);
    }

    #[test]
    fn fan_out_accumulates() {
        // f = x*x + x -> df/dx = 2x + 1
        let mut tape = Tape::new();
        let x = tape.leaf(2.0);
        let sq = tape.mul(x, x);
        let y = tape.add(sq, x);
        let g = tape.gradient(y, &[x]).unwrap();
        assert_eq!(g[0], 5.0);
    }

    #[test]
    fn guard_blocks_gradient_when_clamped() {
        let mut tape = Tape::new();
        let x = tape.leaf(-3.0);
        let y = tape.max_const(x, 1e-12);
        assert_eq!(tape.value(y), 1e-12);
        let g = tape.gradient(y, &[x]).unwrap();
        assert_eq!(g[0], 0.0);

        let z = tape.leaf(0.5);
        let w = tape.max_const(z, 1e-12);
        let g = tape.gradient(w, &[z]).unwrap();
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn clear_reuses_storage() {
        let mut tape = Tape::new();
        let x = tape.leaf(1.0);
        tape.mul(x, x);
        tape.clear();
        assert!(tape.is_empty());
        let y = tape.leaf(4.0);
        let z = tape.square(y);
        assert_eq!(tape.value(z), 16.0);
    }

    #[test]
    fn gradient_rejects_foreign_output() {
        let mut tape = Tape::new();
        let x = tape.leaf(1.0);
        assert!(tape.gradient(Var(99), &[x]).is_err());
    }
}

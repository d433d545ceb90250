//! Expression trees over the variables {DP, k1, t}.
//!
//! Complexity is the plain node count (constants, variables, and operators
//! each count 1). Division is guarded: a near-zero denominator evaluates to a
//! sentinel that fitness treats as a penalty rather than crashing the search.
//! Negative constants are constant nodes; there is no unary minus.

use crate::rng::{self, SeedRng};

/// Denominator magnitude below which division trips the guard.
pub const DIV_GUARD: f64 = 1e-12;

/// Sentinel produced by guarded evaluation; sticky through parent ops.
pub const PENALTY_SENTINEL: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Dp,
    K1,
    T,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Dp, Variable::K1, Variable::T];

    pub fn index(self) -> usize {
        match self {
            Variable::Dp => 0,
            Variable::K1 => 1,
            Variable::T => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Dp => "dp",
            Variable::K1 => "k1",
            Variable::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Variable),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::Bin(op, Box::new(left), Box::new(right))
    }

    /// Total node count.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Bin(_, l, r) => 1 + l.complexity() + r.complexity(),
        }
    }

    /// Recursive evaluation; deterministic, total on finite inputs for
    /// {+, -, *}. A guarded division (or a sentinel operand) yields the
    /// sentinel.
    pub fn eval(&self, row: &[f64; 3]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => row[v.index()],
            Expr::Bin(op, l, r) => {
                let a = l.eval(row);
                let b = r.eval(row);
                if a == PENALTY_SENTINEL || b == PENALTY_SENTINEL {
                    return PENALTY_SENTINEL;
                }
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.abs() < DIV_GUARD {
                            PENALTY_SENTINEL
                        } else {
                            a / b
                        }
                    }
                }
            }
        }
    }

    /// Preorder node access (0 is the root).
    pub fn subtree(&self, index: usize) -> Option<&Expr> {
        fn walk<'a>(e: &'a Expr, index: usize, counter: &mut usize) -> Option<&'a Expr> {
            if *counter == index {
                return Some(e);
            }
            *counter += 1;
            if let Expr::Bin(_, l, r) = e {
                walk(l, index, counter).or_else(|| walk(r, index, counter))
            } else {
                None
            }
        }
        walk(self, index, &mut 0)
    }

    /// Replace the preorder node `index` with `replacement`. Returns false if
    /// the index is out of range.
    pub fn replace_subtree(&mut self, index: usize, replacement: Expr) -> bool {
        fn walk(e: &mut Expr, index: usize, counter: &mut usize, replacement: &mut Option<Expr>) -> bool {
            if *counter == index {
                *e = replacement.take().expect("single replacement");
                return true;
            }
            *counter += 1;
            if let Expr::Bin(_, l, r) = e {
                walk(l, index, counter, replacement) || walk(r, index, counter, replacement)
            } else {
                false
            }
        }
        walk(self, index, &mut 0, &mut Some(replacement))
    }

    /// Visit every constant in place.
    pub fn for_each_const_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        match self {
            Expr::Const(c) => f(c),
            Expr::Var(_) => {}
            Expr::Bin(_, l, r) => {
                l.for_each_const_mut(f);
                r.for_each_const_mut(f);
            }
        }
    }

    pub fn count_consts(&self) -> usize {
        let mut n = 0;
        let mut clone = self.clone();
        clone.for_each_const_mut(&mut |_| n += 1);
        n
    }

    /// Random tree by the grow method: until `depth` reaches zero, each
    /// position becomes an operator with probability `p_branch`.
    pub fn random(rng: &mut SeedRng, ops: &[BinOp], depth: usize, p_branch: f64) -> Expr {
        if depth > 0 && rng::uniform01(rng) < p_branch {
            let op = ops[rng::below(rng, ops.len())];
            let l = Expr::random(rng, ops, depth - 1, p_branch);
            let r = Expr::random(rng, ops, depth - 1, p_branch);
            Expr::bin(op, l, r)
        } else if rng::uniform01(rng) < 0.35 {
            Expr::Const(rng::uniform(rng, -2.0, 2.0))
        } else {
            Expr::Var(Variable::ALL[rng::below(rng, 3)])
        }
    }

    /// Flatten a pure product into (coefficient, variable powers); `None` for
    /// anything containing +, -, or /.
    pub fn as_monomial(&self) -> Option<Monomial> {
        let mut m = Monomial {
            coeff: 1.0,
            powers: [0; 3],
        };
        fn walk(e: &Expr, m: &mut Monomial) -> bool {
            match e {
                Expr::Const(c) => {
                    m.coeff *= c;
                    true
                }
                Expr::Var(v) => {
                    m.powers[v.index()] += 1;
                    true
                }
                Expr::Bin(BinOp::Mul, l, r) => walk(l, m) && walk(r, m),
                _ => false,
            }
        }
        walk(self, &mut m).then_some(m)
    }

    /// Canonical display: monomials print as coefficient times a
    /// right-nested product with variables ordered by ascending power;
    /// everything else prints as a parenthesized infix tree.
    pub fn canonical_string(&self) -> String {
        if let Some(m) = self.as_monomial() {
            return m.to_string();
        }
        self.infix()
    }

    fn infix(&self) -> String {
        match self {
            Expr::Const(c) => format!("{c}"),
            Expr::Var(v) => v.name().to_string(),
            Expr::Bin(op, l, r) => format!("({} {} {})", l.infix(), op.symbol(), r.infix()),
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.canonical_string())
    }
}

/// A flattened product c * dp^a * k1^b * t^c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    /// Exponents indexed as [dp, k1, t].
    pub powers: [u32; 3],
}

impl Monomial {
    /// True when the variable part is exactly k1 * dp^2.
    pub fn is_k1_dp_squared(&self) -> bool {
        self.powers == [2, 1, 0]
    }
}

impl std::fmt::Display for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Variables in ascending-power order (name order on ties), each
        // repeated to its exponent, nested to the right:
        // `c * (k1 * (dp * dp))`.
        let mut vars: Vec<Variable> = Variable::ALL
            .into_iter()
            .filter(|v| self.powers[v.index()] > 0)
            .collect();
        vars.sort_by_key(|v| (self.powers[v.index()], v.index()));
        let names: Vec<&str> = vars
            .iter()
            .flat_map(|v| std::iter::repeat(v.name()).take(self.powers[v.index()] as usize))
            .collect();
        match names.last() {
            None => write!(f, "{}", self.coeff),
            Some(last) => {
                let product = names[..names.len() - 1]
                    .iter()
                    .rev()
                    .fold(last.to_string(), |acc, name| format!("({name} * {acc})"));
                if self.coeff == 1.0 {
                    write!(f, "{product}")
                } else {
                    write!(f, "{} * {product}", self.coeff)
                }
            }
        }
    }
}

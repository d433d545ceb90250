//! Multi-population genetic-programming symbolic regression.
//!
//! Islands evolve expression trees independently with periodic ring
//! migration; variation is subtree crossover, point mutation, and constant
//! jitter, with coordinate-descent refinement of elite constants. The result
//! is a Pareto front over (complexity, loss) with the model-selection score
//! `-d log(MSE) / d complexity` between consecutive entries.

mod evolve;
mod expr;

pub use evolve::evolve;
pub use expr::{BinOp, Expr, Monomial, Variable, DIV_GUARD, PENALTY_SENTINEL};

use std::path::Path;

use crate::error::{Error, Result};
use crate::pinn::emsley::HSample;

/// Loss values are floored here before taking logs for scores.
pub const LOSS_FLOOR: f64 = 1e-30;

/// Rows of (dp, k1, t) with a target column.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub rows: Vec<[f64; 3]>,
    pub target: Vec<f64>,
}

impl RegressionData {
    pub fn new(rows: Vec<[f64; 3]>, target: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || rows.len() != target.len() {
            return Err(Error::contract("rows and target must be non-empty and equal length"));
        }
        Ok(RegressionData { rows, target })
    }

    /// Build a dataset from dual-network output rows, dividing the target by
    /// `normalization` so the searched coefficients are O(1).
    pub fn from_h_samples(samples: &[HSample], normalization: f64) -> Result<Self> {
        if normalization <= 0.0 {
            return Err(Error::invalid("normalization must be positive"));
        }
        Self::new(
            samples
                .iter()
                .map(|s| [s.dp_scaled, s.k1_scaled, s.t_scaled])
                .collect(),
            samples.iter().map(|s| s.h_pred / normalization).collect(),
        )
    }

    /// Read a `dp_scaled,k1_scaled,t_scaled,h_pred` CSV (the dual-network
    /// emission format), applying the same normalization.
    pub fn from_csv(path: impl AsRef<Path>, normalization: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let want = ["dp_scaled", "k1_scaled", "t_scaled", "h_pred"];
        let got: Vec<&str> = headers.iter().collect();
        if got != want {
            return Err(Error::Parse {
                line: 1,
                detail: format!("expected header `{}`, got `{}`", want.join(","), got.join(",")),
            });
        }
        let mut samples = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                detail: e.to_string(),
            })?;
            let field = |j: usize| -> Result<f64> {
                record
                    .get(j)
                    .ok_or_else(|| Error::Parse {
                        line,
                        detail: format!("missing column {}", want[j]),
                    })?
                    .parse()
                    .map_err(|e| Error::Parse {
                        line,
                        detail: format!("bad {}: {e}", want[j]),
                    })
            };
            samples.push(HSample {
                dp_scaled: field(0)?,
                k1_scaled: field(1)?,
                t_scaled: field(2)?,
                h_pred: field(3)?,
            });
        }
        Self::from_h_samples(&samples, normalization)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Mean squared error of `expr` against the target; rows where evaluation
/// trips a guard (or overflows) count at the penalty value.
pub fn fitness(expr: &Expr, data: &RegressionData) -> f64 {
    let mut acc = 0.0;
    for (row, &target) in data.rows.iter().zip(&data.target) {
        let value = expr.eval(row);
        let err = if value == PENALTY_SENTINEL || !value.is_finite() {
            PENALTY_SENTINEL
        } else {
            ((value - target) * (value - target)).min(PENALTY_SENTINEL)
        };
        acc += err;
    }
    acc / data.len() as f64
}

/// One entry of the (complexity, loss) Pareto front.
#[derive(Debug, Clone)]
pub struct ParetoEntry {
    pub expr: Expr,
    pub complexity: usize,
    pub loss: f64,
    pub score: f64,
}

/// Sort by complexity, drop duplicate complexities (keeping the lower loss)
/// and entries that do not strictly improve on every lower complexity, then
/// fill in scores: score_i = -(ln L_i - ln L_{i-1}) / (C_i - C_{i-1}), with
/// the first entry scoring 0.
pub fn score_front(entries: Vec<ParetoEntry>) -> Vec<ParetoEntry> {
    let mut sorted = entries;
    sorted.sort_by(|a, b| {
        a.complexity
            .cmp(&b.complexity)
            .then(a.loss.total_cmp(&b.loss))
    });
    let mut front: Vec<ParetoEntry> = Vec::with_capacity(sorted.len());
    for entry in sorted {
        match front.last() {
            Some(last) if entry.complexity == last.complexity => continue,
            Some(last) if entry.loss >= last.loss => continue,
            _ => front.push(entry),
        }
    }
    for i in 0..front.len() {
        front[i].score = if i == 0 {
            0.0
        } else {
            let l_prev = front[i - 1].loss.max(LOSS_FLOOR);
            let l_cur = front[i].loss.max(LOSS_FLOOR);
            let dc = (front[i].complexity - front[i - 1].complexity) as f64;
            -(l_cur.ln() - l_prev.ln()) / dc
        };
    }
    front
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Among entries with loss at most twice the best, take the highest
    /// score (ties go to the lower complexity).
    HighestScoreNearBestLoss,
    LowestLoss,
}

/// Pick the working expression from a scored front.
pub fn select_best(front: &[ParetoEntry], strategy: SelectionStrategy) -> Option<&ParetoEntry> {
    if front.is_empty() {
        return None;
    }
    match strategy {
        SelectionStrategy::LowestLoss => front.iter().min_by(|a, b| a.loss.total_cmp(&b.loss)),
        SelectionStrategy::HighestScoreNearBestLoss => {
            let best = front
                .iter()
                .map(|e| e.loss)
                .fold(f64::INFINITY, f64::min);
            front
                .iter()
                .filter(|e| e.loss <= 2.0 * best)
                .max_by(|a, b| {
                    a.score
                        .total_cmp(&b.score)
                        .then(b.complexity.cmp(&a.complexity))
                })
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SymregConfig {
    pub binary_ops: Vec<BinOp>,
    pub n_populations: usize,
    pub population_size: usize,
    pub n_generations: usize,
    pub max_complexity: usize,
    pub constant_optimization: bool,
    /// Complexity penalty added to the loss during selection only.
    pub parsimony: f64,
    pub migration_interval: usize,
    pub migration_fraction: f64,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub const_jitter_prob: f64,
    pub seed: u64,
}

impl SymregConfig {
    fn base(seed: u64) -> Self {
        SymregConfig {
            binary_ops: vec![BinOp::Mul],
            n_populations: 8,
            population_size: 100,
            n_generations: 200,
            max_complexity: 20,
            constant_optimization: true,
            parsimony: 1e-5,
            migration_interval: 10,
            migration_fraction: 0.05,
            tournament_size: 5,
            crossover_prob: 0.7,
            mutation_prob: 0.25,
            const_jitter_prob: 0.25,
            seed,
        }
    }

    /// Multiplication-only operator set.
    pub fn mul_only(seed: u64) -> Self {
        Self::base(seed)
    }

    /// Multiplication, addition, and subtraction.
    pub fn mul_add_sub(seed: u64) -> Self {
        SymregConfig {
            binary_ops: vec![BinOp::Mul, BinOp::Add, BinOp::Sub],
            ..Self::base(seed)
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.binary_ops.is_empty() {
            return Err(Error::invalid("need at least one operator"));
        }
        if self.max_complexity < 3 {
            return Err(Error::invalid("max_complexity must be at least 3"));
        }
        if self.n_populations == 0 || self.population_size < 4 || self.n_generations == 0 {
            return Err(Error::invalid("population settings out of range"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(complexity: usize, loss: f64) -> ParetoEntry {
        ParetoEntry {
            expr: Expr::Const(0.0),
            complexity,
            loss,
            score: 0.0,
        }
    }

    #[test]
    fn fitness_zero_on_generator() {
        let expr = Expr::bin(
            BinOp::Mul,
            Expr::Const(2.0),
            Expr::Var(Variable::Dp),
        );
        let rows: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 0.0, 0.0]).collect();
        let target: Vec<f64> = rows.iter().map(|r| expr.eval(r)).collect();
        let data = RegressionData::new(rows, target).unwrap();
        assert_eq!(fitness(&expr, &data), 0.0);
    }

    #[test]
    fn constant_fitness_is_variance_at_the_mean() {
        // Targets {0, 2}: the constant 1 attains MSE 1.
        let data = RegressionData::new(vec![[0.0; 3], [0.0; 3]], vec![0.0, 2.0]).unwrap();
        assert_eq!(fitness(&Expr::Const(1.0), &data), 1.0);
        assert!(fitness(&Expr::Const(0.9), &data) > 1.0);
        assert!(fitness(&Expr::Const(1.1), &data) > 1.0);
    }

    #[test]
    fn guarded_rows_are_penalized() {
        let div = Expr::bin(BinOp::Div, Expr::Const(1.0), Expr::Var(Variable::T));
        let data =
            RegressionData::new(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]], vec![0.5, 0.5]).unwrap();
        let mse = fitness(&div, &data);
        assert!(mse >= PENALTY_SENTINEL / 2.0);
        assert!(mse.is_finite());
    }

    #[test]
    fn score_formula_reference_cases() {
        // Loss halves while complexity grows by 1: score = ln 2.
        let front = score_front(vec![entry(3, 1.0), entry(4, 0.5)]);
        assert!((front[1].score - std::f64::consts::LN_2).abs() < 1e-15);

        // Front {(1, 1), (3, 1e-4)}: second score = -ln(1e-4)/2.
        let front = score_front(vec![entry(1, 1.0), entry(3, 1e-4)]);
        assert!((front[1].score - (-(1e-4f64).ln() / 2.0)).abs() < 1e-12);
        assert_eq!(front[0].score, 0.0);
    }

    #[test]
    fn score_zero_when_loss_unchanged() {
        // Non-improving entries are pruned; a strictly-equal loss cannot sit
        // on the front, so emulate "unchanged" with an epsilon improvement.
        let front = score_front(vec![entry(2, 1.0), entry(7, 1.0)]);
        assert_eq!(front.len(), 1);
        let front = score_front(vec![entry(2, 1.0), entry(7, 1.0 - 1e-16)]);
        if front.len() == 2 {
            assert!(front[1].score.abs() < 1e-15);
        }
    }

    #[test]
    fn duplicate_complexities_keep_lower_loss() {
        let front = score_front(vec![entry(3, 0.8), entry(3, 0.5), entry(5, 0.1)]);
        assert_eq!(front.len(), 2);
        assert_eq!(front[0].loss, 0.5);
    }

    #[test]
    fn front_is_strictly_improving() {
        let front = score_front(vec![
            entry(1, 1.0),
            entry(3, 0.4),
            entry(5, 0.4),
            entry(7, 0.2),
        ]);
        let losses: Vec<f64> = front.iter().map(|e| e.loss).collect();
        assert_eq!(losses, vec![1.0, 0.4, 0.2]);
        assert!(front.windows(2).all(|w| w[0].complexity < w[1].complexity));
    }

    #[test]
    fn score_matches_hand_computation_on_random_fronts() {
        let mut stream = crate::rng::from_seed(77);
        for _ in 0..50 {
            let mut entries = Vec::new();
            let mut loss = 10.0;
            let mut c = 1;
            for _ in 0..6 {
                loss *= crate::rng::uniform(&mut stream, 0.05, 0.9);
                c += 1 + crate::rng::below(&mut stream, 3);
                entries.push(entry(c, loss));
            }
            let front = score_front(entries.clone());
            for i in 1..front.len() {
                let expected = -(front[i].loss.max(LOSS_FLOOR).ln()
                    - front[i - 1].loss.max(LOSS_FLOOR).ln())
                    / (front[i].complexity - front[i - 1].complexity) as f64;
                assert!((front[i].score - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn selection_reference_cases() {
        // Single entry: both strategies take it.
        let single = score_front(vec![entry(3, 0.5)]);
        assert_eq!(
            select_best(&single, SelectionStrategy::HighestScoreNearBestLoss)
                .unwrap()
                .complexity,
            3
        );
        assert_eq!(
            select_best(&single, SelectionStrategy::LowestLoss)
                .unwrap()
                .complexity,
            3
        );

        // All three entries are eligible (loss <= 2 * 0.55); the C=5 entry
        // carries the top score.
        let mut front = vec![entry(3, 1.0), entry(5, 0.6), entry(9, 0.55)];
        front[0].score = 0.1;
        front[1].score = 0.26;
        front[2].score = 0.02;
        let pick = select_best(&front, SelectionStrategy::HighestScoreNearBestLoss).unwrap();
        assert_eq!(pick.complexity, 5);
        let pick = select_best(&front, SelectionStrategy::LowestLoss).unwrap();
        assert_eq!(pick.complexity, 9);
    }
}

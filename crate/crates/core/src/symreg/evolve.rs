//! Island-model genetic programming over expression trees.
//!
//! Each island owns an RNG substream derived from (seed, island index), so
//! results are independent of scheduling; islands between migration points
//! evolve in parallel, and the ring exchange happens at a generation barrier.
//! A per-island archive tracks the best loss seen at every complexity; the
//! merged archive becomes the returned Pareto front.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::rng::{self, SeedRng};

use super::expr::{BinOp, Expr, Variable};
use super::{fitness, score_front, ParetoEntry, RegressionData, SymregConfig};

#[derive(Clone)]
struct Individual {
    expr: Expr,
    loss: f64,
}

struct Island {
    pop: Vec<Individual>,
    rng: SeedRng,
    /// complexity -> (best loss, expression).
    archive: BTreeMap<usize, (f64, Expr)>,
}

impl Island {
    fn spawn(index: u64, cfg: &SymregConfig, data: &RegressionData) -> Self {
        let mut rng = rng::substream(cfg.seed, index);
        let mut pop = Vec::with_capacity(cfg.population_size);
        for _ in 0..cfg.population_size {
            let depth = 1 + rng::below(&mut rng, 3);
            let expr = Expr::random(&mut rng, &cfg.binary_ops, depth, 0.6);
            let loss = fitness(&expr, data);
            pop.push(Individual { expr, loss });
        }
        let mut island = Island {
            pop,
            rng,
            archive: BTreeMap::new(),
        };
        island.absorb_into_archive(cfg);
        island
    }

    fn absorb_into_archive(&mut self, cfg: &SymregConfig) {
        for ind in &self.pop {
            if ind.expr.complexity() > cfg.max_complexity {
                continue;
            }
            let c = ind.expr.complexity();
            match self.archive.get(&c) {
                Some((best, _)) if *best <= ind.loss => {}
                _ => {
                    self.archive.insert(c, (ind.loss, ind.expr.clone()));
                }
            }
        }
    }

    fn adjusted(&self, ind: &Individual, cfg: &SymregConfig) -> f64 {
        ind.loss + cfg.parsimony * ind.expr.complexity() as f64
    }

    fn tournament(&mut self, cfg: &SymregConfig) -> Expr {
        let mut best: Option<usize> = None;
        for _ in 0..cfg.tournament_size {
            let i = rng::below(&mut self.rng, self.pop.len());
            best = match best {
                None => Some(i),
                Some(b) => {
                    if self.adjusted(&self.pop[i], cfg) < self.adjusted(&self.pop[b], cfg) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        self.pop[best.expect("tournament_size > 0")].expr.clone()
    }

    fn step(&mut self, cfg: &SymregConfig, data: &RegressionData) {
        let parsimony = cfg.parsimony;
        let key = |ind: &Individual| ind.loss + parsimony * ind.expr.complexity() as f64;
        self.pop.sort_by(|a, b| key(a).total_cmp(&key(b)));

        // Elite constants get a local polish before reproduction.
        if cfg.constant_optimization {
            for i in 0..2.min(self.pop.len()) {
                let mut expr = self.pop[i].expr.clone();
                let loss = refine_constants(&mut expr, data, 50);
                if loss < self.pop[i].loss {
                    self.pop[i] = Individual { expr, loss };
                }
            }
        }
        self.absorb_into_archive(cfg);

        let mut next = Vec::with_capacity(cfg.population_size);
        next.push(self.pop[0].clone());
        if self.pop.len() > 1 {
            next.push(self.pop[1].clone());
        }
        while next.len() < cfg.population_size {
            let parent_a = self.tournament(cfg);
            let mut child = if rng::uniform01(&mut self.rng) < cfg.crossover_prob {
                let parent_b = self.tournament(cfg);
                crossover(&parent_a, &parent_b, &mut self.rng)
            } else {
                parent_a.clone()
            };
            if rng::uniform01(&mut self.rng) < cfg.mutation_prob {
                point_mutate(&mut child, &cfg.binary_ops, &mut self.rng);
            }
            if rng::uniform01(&mut self.rng) < cfg.const_jitter_prob {
                jitter_constants(&mut child, &mut self.rng);
            }
            if child.complexity() > cfg.max_complexity {
                child = parent_a;
            }
            let loss = fitness(&child, data);
            next.push(Individual { expr: child, loss });
        }
        self.pop = next;
        self.absorb_into_archive(cfg);
    }
}

/// Subtree crossover: a random node of `a` is replaced by a random subtree
/// of `b`.
fn crossover(a: &Expr, b: &Expr, rng: &mut SeedRng) -> Expr {
    let mut child = a.clone();
    let target = rng::below(rng, a.complexity());
    let donor_idx = rng::below(rng, b.complexity());
    let donor = b.subtree(donor_idx).expect("index in range").clone();
    child.replace_subtree(target, donor);
    child
}

/// Point mutation: retype one node in place (operator swap, fresh constant,
/// or different variable).
fn point_mutate(expr: &mut Expr, ops: &[BinOp], rng: &mut SeedRng) {
    let idx = rng::below(rng, expr.complexity());
    let fresh_const = rng::uniform(rng, -2.0, 2.0);
    let var_pick = Variable::ALL[rng::below(rng, 3)];
    let op_pick = ops[rng::below(rng, ops.len())];
    if let Some(node) = node_at_mut(expr, idx) {
        match node {
            Expr::Const(c) => *c = fresh_const,
            Expr::Var(v) => *v = var_pick,
            Expr::Bin(op, _, _) => *op = op_pick,
        }
    }
}

fn node_at_mut(expr: &mut Expr, index: usize) -> Option<&mut Expr> {
    fn walk<'a>(e: &'a mut Expr, index: usize, counter: &mut usize) -> Option<&'a mut Expr> {
        if *counter == index {
            return Some(e);
        }
        *counter += 1;
        if let Expr::Bin(_, l, r) = e {
            if let Some(hit) = walk(l, index, counter) {
                return Some(hit);
            }
            walk(r, index, counter)
        } else {
            None
        }
    }
    walk(expr, index, &mut 0)
}

/// Multiplicative-plus-additive jitter on every constant.
fn jitter_constants(expr: &mut Expr, rng: &mut SeedRng) {
    expr.for_each_const_mut(&mut |c| {
        let eps = rng::standard_normal(rng);
        *c += 0.1 * eps * (1.0 + c.abs());
    });
}

/// Coordinate-descent refinement of the constants: sweep each constant with
/// a shrinking relative step, keeping improvements. Deterministic.
pub fn refine_constants(expr: &mut Expr, data: &RegressionData, max_passes: usize) -> f64 {
    let n_consts = expr.count_consts();
    let mut best = fitness(expr, data);
    if n_consts == 0 {
        return best;
    }
    let mut step = 0.5;
    for _ in 0..max_passes {
        let mut improved = false;
        for ci in 0..n_consts {
            loop {
                let mut moved = false;
                for dir in [1.0, -1.0] {
                    let mut trial = expr.clone();
                    let mut k = 0;
                    trial.for_each_const_mut(&mut |c| {
                        if k == ci {
                            *c += dir * step * (c.abs().max(0.1));
                        }
                        k += 1;
                    });
                    let loss = fitness(&trial, data);
                    if loss < best {
                        best = loss;
                        *expr = trial;
                        moved = true;
                        improved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-9 {
                break;
            }
        }
    }
    best
}

/// Run the island search and return the scored Pareto front. Always yields
/// at least the best constant; deterministic for a fixed (data, cfg, seed).
pub fn evolve(data: &RegressionData, cfg: &SymregConfig) -> Result<Vec<ParetoEntry>> {
    cfg.validate()?;

    let mut islands: Vec<Island> = (0..cfg.n_populations)
        .map(|i| Island::spawn(i as u64, cfg, data))
        .collect();

    // Seed the archive with the best constant so the front is never empty.
    let mean = data.target.iter().sum::<f64>() / data.len() as f64;
    let mut mean_expr = Expr::Const(mean);
    let mean_loss = if cfg.constant_optimization {
        refine_constants(&mut mean_expr, data, 20)
    } else {
        fitness(&mean_expr, data)
    };

    let mut generation = 0;
    while generation < cfg.n_generations {
        let block = cfg
            .migration_interval
            .min(cfg.n_generations - generation)
            .max(1);
        islands.par_iter_mut().for_each(|island| {
            for _ in 0..block {
                island.step(cfg, data);
            }
        });
        generation += block;

        if generation < cfg.n_generations {
            migrate(&mut islands, cfg);
        }
    }

    // Merge archives in island order; strict minimum per complexity.
    let mut merged: BTreeMap<usize, (f64, Expr)> = BTreeMap::new();
    merged.insert(1, (mean_loss, mean_expr));
    for island in &islands {
        for (&c, (loss, expr)) in &island.archive {
            match merged.get(&c) {
                Some((best, _)) if *best <= *loss => {}
                _ => {
                    merged.insert(c, (*loss, expr.clone()));
                }
            }
        }
    }

    // Final polish of every candidate before the front is cut.
    let mut entries: Vec<ParetoEntry> = merged
        .into_iter()
        .map(|(c, (loss, mut expr))| {
            let final_loss = if cfg.constant_optimization {
                refine_constants(&mut expr, data, 50)
            } else {
                loss
            };
            ParetoEntry {
                complexity: c,
                loss: final_loss,
                expr,
                score: 0.0,
            }
        })
        .collect();
    // Refinement can only lower losses within a complexity class; re-prune
    // and score.
    entries = score_front(entries);
    Ok(entries)
}

/// Ring migration: each island's top `migration_fraction` replaces the worst
/// individuals of its right neighbor.
fn migrate(islands: &mut [Island], cfg: &SymregConfig) {
    let n = islands.len();
    if n < 2 {
        return;
    }
    let n_mig = ((cfg.population_size as f64 * cfg.migration_fraction).ceil() as usize).max(1);
    // Collect migrants first so the exchange is simultaneous.
    let migrants: Vec<Vec<Individual>> = islands
        .iter_mut()
        .map(|island| {
            island
                .pop
                .sort_by(|a, b| a.loss.total_cmp(&b.loss));
            island.pop[..n_mig.min(island.pop.len())].to_vec()
        })
        .collect();
    for (i, pack) in migrants.into_iter().enumerate() {
        let dst = (i + 1) % n;
        let island = &mut islands[dst];
        let len = island.pop.len();
        for (j, migrant) in pack.into_iter().enumerate() {
            if j < len {
                island.pop[len - 1 - j] = migrant;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symreg::{select_best, SelectionStrategy};

    fn small_cfg(seed: u64, ops: &[BinOp]) -> SymregConfig {
        SymregConfig {
            binary_ops: ops.to_vec(),
            n_populations: 4,
            population_size: 40,
            n_generations: 30,
            ..SymregConfig::mul_only(seed)
        }
    }

    fn grid_rows() -> Vec<[f64; 3]> {
        let mut rows = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                rows.push([0.5 + 0.4 * i as f64, 0.3 + 0.5 * j as f64, 0.1 * (i + j) as f64]);
            }
        }
        rows
    }

    #[test]
    fn recovers_the_identity() {
        let rows = grid_rows();
        let target: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let data = RegressionData::new(rows, target).unwrap();
        let cfg = small_cfg(1, &[BinOp::Mul, BinOp::Add, BinOp::Sub]);
        let front = evolve(&data, &cfg).unwrap();
        let hit = front
            .iter()
            .find(|e| e.complexity == 1 && e.loss < 1e-20)
            .expect("identity should be found at complexity 1");
        assert_eq!(hit.expr, Expr::Var(Variable::Dp));
    }

    #[test]
    fn recovers_a_monomial_with_mul_only() {
        let rows = grid_rows();
        let target: Vec<f64> = rows.iter().map(|r| -0.44 * r[1] * r[0] * r[0]).collect();
        let data = RegressionData::new(rows, target).unwrap();
        let cfg = small_cfg(2, &[BinOp::Mul]);
        let front = evolve(&data, &cfg).unwrap();
        let best = select_best(&front, SelectionStrategy::LowestLoss).unwrap();
        let m = best.expr.as_monomial().expect("mul-only front is a monomial");
        assert!(m.is_k1_dp_squared(), "got {}", best.expr);
        assert!((m.coeff / -0.44 - 1.0).abs() < 0.02, "coeff {}", m.coeff);
    }

    #[test]
    fn deterministic_per_seed() {
        let rows = grid_rows();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * r[1]).collect();
        let data = RegressionData::new(rows, target).unwrap();
        let cfg = small_cfg(7, &[BinOp::Mul, BinOp::Add, BinOp::Sub]);
        let a = evolve(&data, &cfg).unwrap();
        let b = evolve(&data, &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.complexity, y.complexity);
            assert_eq!(x.loss, y.loss);
            assert_eq!(x.expr.canonical_string(), y.expr.canonical_string());
        }
    }

    #[test]
    fn constant_target_yields_the_constant() {
        // Degenerate data still returns at least the best constant.
        let rows = grid_rows();
        let target = vec![3.25; rows.len()];
        let data = RegressionData::new(rows, target).unwrap();
        let cfg = small_cfg(3, &[BinOp::Mul]);
        let front = evolve(&data, &cfg).unwrap();
        assert!(!front.is_empty());
        assert!(front[0].loss < 1e-12);
    }

    #[test]
    fn refine_constants_converges_on_quadratic() {
        let rows = grid_rows();
        let target: Vec<f64> = rows.iter().map(|r| 1.37 * r[0]).collect();
        let data = RegressionData::new(rows, target).unwrap();
        let mut expr = Expr::bin(BinOp::Mul, Expr::Const(0.2), Expr::Var(Variable::Dp));
        let loss = refine_constants(&mut expr, &data, 50);
        assert!(loss < 1e-14, "loss {loss}");
        let m = expr.as_monomial().unwrap();
        assert!((m.coeff - 1.37).abs() < 1e-6);
    }

    #[test]
    fn front_is_strictly_improving_after_evolve() {
        let rows = grid_rows();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * r[0] + 0.3).collect();
        let data = RegressionData::new(rows, target).unwrap();
        let cfg = small_cfg(11, &[BinOp::Mul, BinOp::Add, BinOp::Sub]);
        let front = evolve(&data, &cfg).unwrap();
        assert!(front
            .windows(2)
            .all(|w| w[0].complexity < w[1].complexity && w[1].loss < w[0].loss));
        assert!(front.iter().all(|e| e.complexity <= cfg.max_complexity));
    }
}

//! Optimal time-average utility over stationary randomized policies.
//!
//! A stationary policy draws the round's set from a fixed distribution `q`
//! over size-`k` subsets. The best such policy solves
//!
//! ```text
//! max  Σ_S q_S f(S)
//! s.t. Σ_{S ∋ u} q_S >= r_u   for every u
//!      Σ_S q_S = 1,  q >= 0
//! ```
//!
//! Sets smaller than `k` are never needed: padding a set only raises `f` and
//! only adds coverage.

mod brute;
pub mod simplex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::{UtilityOracle, WorkerPool};

pub use brute::{brute_force_uopt, brute_force_uopt_up_to};
pub use simplex::{Constraint, LinearProgram, LpStatus, Relation, SimplexSolution};

pub const DEFAULT_VARIABLE_CAP: u128 = 100_000;

/// Support entries below this are reported as zero.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Enumerated subsets in lexicographic order, one LP variable each.
    pub subsets: Vec<Vec<usize>>,
    /// `f(S)` per subset.
    pub values: Vec<f64>,
    pub q: Vec<f64>,
    /// NaN when infeasible.
    pub u_opt: f64,
    pub status: LpStatus,
    /// Duals of the `n` coverage rows followed by the normalization row.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportEntry<'a> {
    pub subset: &'a [usize],
    pub value: f64,
    pub q: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn support(&self) -> Vec<SupportEntry<'_>> {
        self.subsets
            .iter()
            .zip(&self.values)
            .zip(&self.q)
            .filter(|(_, q)| **q > SUPPORT_TOL)
            .map(|((s, v), q)| SupportEntry { subset: s, value: *v, q: *q })
            .collect()
    }

    /// Per-element coverage `Σ_{S ∋ u} q_S`.
    pub fn coverage(&self, n: usize) -> Vec<f64> {
        let mut cov = vec![0.0; n];
        for (s, q) in self.subsets.iter().zip(&self.q) {
            for &u in s {
                cov[u] += q;
            }
        }
        cov
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

pub(crate) fn uopt_program(n: usize, fairness: &[f64], subsets: &[Vec<usize>], values: &[f64]) -> LinearProgram {
    let mut constraints: Vec<Constraint> = (0..n)
        .map(|u| Constraint {
            coeffs: subsets.iter().map(|s| if s.contains(&u) { 1.0 } else { 0.0 }).collect(),
            relation: Relation::Ge,
            rhs: fairness[u],
        })
        .collect();
    constraints.push(Constraint { coeffs: vec![1.0; subsets.len()], relation: Relation::Eq, rhs: 1.0 });
    LinearProgram { objective: values.to_vec(), constraints }
}

fn evaluate_all(oracle: &UtilityOracle, subsets: &[Vec<usize>]) -> Result<Vec<f64>> {
    subsets.par_iter().map(|s| oracle.evaluate(s)).collect()
}

pub fn solve_uopt(pool: &WorkerPool, oracle: &UtilityOracle) -> Result<LpSolution> {
    solve_uopt_with_cap(pool, oracle, DEFAULT_VARIABLE_CAP)
}

pub fn solve_uopt_with_cap(pool: &WorkerPool, oracle: &UtilityOracle, cap: u128) -> Result<LpSolution> {
    let (n, k) = (pool.n(), pool.k());
    if oracle.ground_size() != n {
        return Err(Error::Domain(format!("oracle has {} elements, pool has {n}", oracle.ground_size())));
    }
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::Size { what: "number of size-k subsets", actual: count, limit: cap });
    }
    let subsets = k_subsets(n, k);
    let values = evaluate_all(oracle, &subsets)?;
    solve_over(n, pool.fairness(), subsets, values)
}

fn solve_over(n: usize, fairness: &[f64], subsets: Vec<Vec<usize>>, values: Vec<f64>) -> Result<LpSolution> {
    let program = uopt_program(n, fairness, &subsets, &values);
    let sol = simplex::solve(&program)?;
    match sol.status {
        LpStatus::Optimal => {
            let q: Vec<f64> = sol.x.iter().map(|&x| if x.abs() < SUPPORT_TOL { 0.0 } else { x }).collect();
            let u_opt = q.iter().zip(&values).map(|(q, v)| q * v).sum();
            Ok(LpSolution { subsets, values, q, u_opt, status: LpStatus::Optimal, duals: sol.duals, pivots: sol.pivots })
        }
        LpStatus::Infeasible => {
            let m = subsets.len();
            Ok(LpSolution {
                subsets,
                values,
                q: vec![0.0; m],
                u_opt: f64::NAN,
                status: LpStatus::Infeasible,
                duals: vec![0.0; n + 1],
                pivots: sol.pivots,
            })
        }
        LpStatus::Unbounded => Err(Error::Solver("bounded program reported unbounded".into())),
    }
}

/// The same program over every subset of size at most `k`, used to check
/// that the size-exactly-`k` restriction loses nothing.
pub fn solve_uopt_up_to(pool: &WorkerPool, oracle: &UtilityOracle, cap: u128) -> Result<LpSolution> {
    let (n, k) = (pool.n(), pool.k());
    let count: u128 = (0..=k).map(|j| binomial(n, j)).sum();
    if count > cap {
        return Err(Error::Size { what: "number of subsets of size at most k", actual: count, limit: cap });
    }
    let subsets: Vec<Vec<usize>> = (0..=k).flat_map(|j| k_subsets(n, j)).collect();
    let values = evaluate_all(oracle, &subsets)?;
    solve_over(n, pool.fairness(), subsets, values)
}

/// `max_{|S| = k} f(S)` by exhaustive search.
pub fn exhaustive_opt(oracle: &UtilityOracle, k: usize) -> Result<f64> {
    let subsets = k_subsets(oracle.ground_size(), k);
    Ok(evaluate_all(oracle, &subsets)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

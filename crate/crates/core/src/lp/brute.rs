//! Vertex enumeration for tiny instances of the stationary-policy LP.
//!
//! The program is put in equality form with one surplus per coverage row:
//! `A q - s = r`, `1ᵀq = 1`. Every vertex is a basic feasible solution, so
//! the optimum is the best of all nonsingular `(n+1)`-column bases whose
//! solution is nonnegative. Shares nothing with the simplex code.

use crate::error::{Error, Result};
use crate::oracle::{UtilityOracle, WorkerPool};

use super::{binomial, k_subsets};

pub const MAX_BRUTE_N: usize = 6;
pub const MAX_BRUTE_K: usize = 3;
const MAX_BASES: u128 = 5_000_000;

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let d = b.len();
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        let (top, below) = m.split_at_mut(c + 1);
        let pivot = &top[c];
        for (off, row) in below.iter_mut().enumerate() {
            let f = row[c] / pivot[c];
            if f != 0.0 {
                for (a, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *a -= f * p;
                }
                b[c + 1 + off] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; d];
    for c in (0..d).rev() {
        let s: f64 = (c + 1..d).map(|j| m[c][j] * x[j]).sum();
        x[c] = (b[c] - s) / m[c][c];
    }
    Some(x)
}

fn enumerate(n: usize, fairness: &[f64], subsets: &[Vec<usize>], values: &[f64]) -> Result<f64> {
    let v = subsets.len();
    let cols = v + n;
    let rows = n + 1;
    let bases = binomial(cols, rows);
    if bases > MAX_BASES {
        return Err(Error::Size { what: "number of candidate bases", actual: bases, limit: MAX_BASES });
    }
    // Column j of the equality system.
    let column = |j: usize| -> Vec<f64> {
        if j < v {
            let mut c: Vec<f64> = (0..n).map(|u| if subsets[j].contains(&u) { 1.0 } else { 0.0 }).collect();
            c.push(1.0);
            c
        } else {
            let mut c = vec![0.0; rows];
            c[j - v] = -1.0;
            c
        }
    };
    let all: Vec<Vec<f64>> = (0..cols).map(column).collect();
    let mut rhs = fairness.to_vec();
    rhs.push(1.0);

    let mut best: Option<f64> = None;
    for basis in k_subsets(cols, rows) {
        let m: Vec<Vec<f64>> = (0..rows).map(|i| basis.iter().map(|&j| all[j][i]).collect()).collect();
        let Some(x) = solve_dense(m, rhs.clone()) else {
            continue;
        };
        if x.iter().any(|&xi| xi < -1e-10) {
            continue;
        }
        let obj: f64 = basis.iter().zip(&x).filter(|(j, _)| **j < v).map(|(&j, xi)| values[j] * xi).sum();
        if best.is_none_or(|b| obj > b) {
            best = Some(obj);
        }
    }
    best.ok_or(Error::Infeasible { sum_r: fairness.iter().sum(), k: subsets.iter().map(Vec::len).max().unwrap_or(0) })
}

fn check_size(pool: &WorkerPool) -> Result<()> {
    if pool.n() > MAX_BRUTE_N {
        return Err(Error::Size { what: "ground set size", actual: pool.n() as u128, limit: MAX_BRUTE_N as u128 });
    }
    if pool.k() > MAX_BRUTE_K {
        return Err(Error::Size { what: "cardinality", actual: pool.k() as u128, limit: MAX_BRUTE_K as u128 });
    }
    Ok(())
}

/// `U_opt` over size-exactly-`k` subsets by vertex enumeration.
pub fn brute_force_uopt(pool: &WorkerPool, oracle: &UtilityOracle) -> Result<f64> {
    check_size(pool)?;
    let subsets = k_subsets(pool.n(), pool.k());
    let values = subsets.iter().map(|s| oracle.evaluate(s)).collect::<Result<Vec<_>>>()?;
    enumerate(pool.n(), pool.fairness(), &subsets, &values)
}

/// `U_opt` over all subsets of size at most `k` by vertex enumeration.
pub fn brute_force_uopt_up_to(pool: &WorkerPool, oracle: &UtilityOracle) -> Result<f64> {
    check_size(pool)?;
    let subsets: Vec<Vec<usize>> = (0..=pool.k()).flat_map(|j| k_subsets(pool.n(), j)).collect();
    let values = subsets.iter().map(|s| oracle.evaluate(s)).collect::<Result<Vec<_>>>()?;
    enumerate(pool.n(), pool.fairness(), &subsets, &values)
}

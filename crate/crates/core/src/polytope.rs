//! The fairness polytope `P_f = { x : r <= x <= 1, Σ x <= k }` and linear
//! maximization over it.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::multilinear::FractionalPoint;

/// Slack allowed when comparing `Σ r` against `k`, so that requirement
/// vectors built as `β · r_base` with `Σ r = k` on paper are still feasible
/// after rounding.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A requirement vector is feasible iff its total does not exceed `k`.
pub fn is_feasible(r: &[f64], k: usize) -> bool {
    r.iter().sum::<f64>() <= k as f64 + FEASIBILITY_TOL
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairPolytope {
    lower: Vec<f64>,
    k: usize,
}

impl FairPolytope {
    pub fn new(lower: Vec<f64>, k: usize) -> Result<Self> {
        if let Some((u, r)) = lower.iter().enumerate().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Domain(format!("lower bound r[{u}] = {r} is outside [0, 1]")));
        }
        if !is_feasible(&lower, k) {
            return Err(Error::Infeasible { sum_r: lower.iter().sum(), k });
        }
        Ok(Self { lower, k })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.lower).all(|(x, r)| *x >= r - tol && *x <= 1.0 + tol)
            && x.iter().sum::<f64>() <= self.k as f64 + tol
    }

    /// A maximizer of `xᵀw` over the polytope for `w >= 0`.
    ///
    /// Starts at `x = r` and spends the remaining budget `k - Σ r` on
    /// coordinates in decreasing order of `w` (ties by ascending id), filling
    /// each to 1 before moving on. The result is a vertex with `Σ x = k`.
    pub fn maximize_linear(&self, w: &[f64]) -> Result<FractionalPoint> {
        let n = self.dim();
        if w.len() != n {
            return Err(Error::Domain(format!("weight vector has {} entries, expected {n}", w.len())));
        }
        if let Some((u, wu)) = w.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Domain(format!("weight w[{u}] = {wu} must be finite and nonnegative")));
        }
        let mut x = self.lower.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));

        let mut budget = (self.k as f64 - self.lower.iter().sum::<f64>()).max(0.0);
        let mut last_raised = None;
        for &u in &order {
            if budget <= 0.0 {
                break;
            }
            let room = 1.0 - x[u];
            if room <= 0.0 {
                continue;
            }
            let step = room.min(budget);
            x[u] += step;
            budget -= step;
            last_raised = Some(u);
        }

        // Absorb accumulated rounding in the last coordinate that moved.
        let drift = self.k as f64 - x.iter().sum::<f64>();
        if drift.abs() > 1e-12 {
            if let Some(u) = last_raised {
                x[u] = (x[u] + drift).clamp(self.lower[u], 1.0);
            }
        }
        FractionalPoint::new(x)
    }
}

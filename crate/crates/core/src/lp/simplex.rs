//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `max cᵀx` subject to rows `aᵢᵀx (<=|>=|=) bᵢ` and `x >= 0`.
//! Rows are normalized to `bᵢ >= 0`; `<=` rows get a slack, `>=` rows a
//! surplus and an artificial, `=` rows an artificial. Phase one drives the
//! artificials to zero, phase two optimizes the real objective with the
//! artificials barred from entering.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;
pub const DEFAULT_PIVOT_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A maximization problem over nonnegative variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual value per constraint, in the sign convention of the original
    /// rows (`<=` rows nonnegative, `>=` rows nonpositive for a max problem).
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Structural,
    Slack,
    Artificial,
}

/// Tableau rows are `[a_1 … a_N | b]`; `basis[i]` is the basic column of
/// row `i`. Basic columns form an identity up to row permutation.
struct SimplexTableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    kinds: Vec<ColumnKind>,
    /// Column that held the identity for row `i` in the initial tableau;
    /// its current contents are column `i` of `B⁻¹`.
    identity_col: Vec<usize>,
    pivots: usize,
    pivot_limit: usize,
}

impl SimplexTableau {
    fn width(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<()> {
        self.pivots += 1;
        if self.pivots > self.pivot_limit {
            return Err(Error::Solver(format!("pivot limit of {} exceeded", self.pivot_limit)));
        }
        let p = self.rows[row][col];
        for v in &mut self.rows[row] {
            *v /= p;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        Ok(())
    }

    /// Reduced profits `d_j = c_j - c_Bᵀ B⁻¹ a_j`.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(r) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Bland's rule: lowest-index improving column enters, ratio ties go to
    /// the lowest-index basic variable.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<LpStatus> {
        loop {
            let d = self.reduced_costs(cost);
            let Some(col) = (0..self.width()).find(|&j| allowed(j) && d[j] > COST_TOL) else {
                return Ok(LpStatus::Optimal);
            };
            let rhs = self.width();
            let mut leave: Option<(usize, f64)> = None;
            for (i, r) in self.rows.iter().enumerate() {
                if r[col] > PIVOT_TOL {
                    let ratio = r[rhs] / r[col];
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - PIVOT_TOL || (ratio <= best + PIVOT_TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col)?,
                None => return Ok(LpStatus::Unbounded),
            }
        }
    }

    fn value(&self, cost: &[f64]) -> f64 {
        let rhs = self.width();
        self.rows.iter().zip(&self.basis).map(|(r, &b)| cost[b] * r[rhs]).sum()
    }
}

pub fn solve(lp: &LinearProgram) -> Result<SimplexSolution> {
    solve_with_limit(lp, DEFAULT_PIVOT_LIMIT)
}

pub fn solve_with_limit(lp: &LinearProgram, pivot_limit: usize) -> Result<SimplexSolution> {
    let nv = lp.objective.len();
    let m = lp.constraints.len();
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != nv {
            return Err(Error::Domain(format!("constraint {i} has {} coefficients, expected {nv}", c.coeffs.len())));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain(format!("constraint {i} has non-finite data")));
        }
    }

    // Normalize to b >= 0, remembering which rows were negated.
    let mut flipped = vec![false; m];
    let rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.rhs < 0.0 {
                flipped[i] = true;
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|a| -a).collect(), rel, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();

    let mut kinds = vec![ColumnKind::Structural; nv];
    let mut extra: Vec<(usize, f64)> = Vec::new(); // (row, coefficient) per added column
    let mut identity_col = vec![0; m];
    for (i, (_, rel, _)) in rows.iter().enumerate() {
        match rel {
            Relation::Le => {
                identity_col[i] = kinds.len();
                kinds.push(ColumnKind::Slack);
                extra.push((i, 1.0));
            }
            Relation::Ge => {
                kinds.push(ColumnKind::Slack);
                extra.push((i, -1.0));
                identity_col[i] = kinds.len();
                kinds.push(ColumnKind::Artificial);
                extra.push((i, 1.0));
            }
            Relation::Eq => {
                identity_col[i] = kinds.len();
                kinds.push(ColumnKind::Artificial);
                extra.push((i, 1.0));
            }
        }
    }
    let width = kinds.len();
    let mut table = Vec::with_capacity(m);
    for (i, (coeffs, _, rhs)) in rows.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..nv].copy_from_slice(coeffs);
        for (j, &(r, a)) in extra.iter().enumerate() {
            if r == i {
                row[nv + j] = a;
            }
        }
        row[width] = *rhs;
        table.push(row);
    }
    let mut tab = SimplexTableau { rows: table, basis: identity_col.clone(), kinds, identity_col, pivots: 0, pivot_limit };

    // Phase one: maximize -Σ artificials.
    let phase_one: Vec<f64> =
        tab.kinds.iter().map(|k| if *k == ColumnKind::Artificial { -1.0 } else { 0.0 }).collect();
    let has_artificials = tab.kinds.contains(&ColumnKind::Artificial);
    if has_artificials {
        tab.optimize(&phase_one, |_| true)?;
        if tab.value(&phase_one) < -PHASE_ONE_TOL {
            return Ok(SimplexSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; nv],
                objective: f64::NAN,
                duals: vec![0.0; m],
                pivots: tab.pivots,
            });
        }
        // Pivot remaining (zero-level) artificials out where possible; rows
        // where that fails are redundant and keep a zero artificial.
        for i in 0..m {
            if tab.kinds[tab.basis[i]] == ColumnKind::Artificial {
                if let Some(col) =
                    (0..width).find(|&j| tab.kinds[j] != ColumnKind::Artificial && tab.rows[i][j].abs() > 1e-9)
                {
                    tab.pivot(i, col)?;
                }
            }
        }
    }

    let mut cost = vec![0.0; width];
    cost[..nv].copy_from_slice(&lp.objective);
    let kinds = tab.kinds.clone();
    let status = tab.optimize(&cost, |j| kinds[j] != ColumnKind::Artificial)?;

    let mut x = vec![0.0; nv];
    for (r, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < nv {
            x[b] = r[width];
        }
    }
    // y_i = c_Bᵀ B⁻¹ e_i, read off the initial identity columns.
    let duals = (0..m)
        .map(|i| {
            let col = tab.identity_col[i];
            let y: f64 = tab.rows.iter().zip(&tab.basis).map(|(r, &b)| cost[b] * r[col]).sum();
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    let objective = if status == LpStatus::Optimal { x.iter().zip(&lp.objective).map(|(x, c)| x * c).sum() } else { f64::INFINITY };
    Ok(SimplexSolution { status, x, objective, duals, pivots: tab.pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[f64], relation: Relation, rhs: f64) -> Constraint {
        Constraint { coeffs: coeffs.to_vec(), relation, rhs }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 → (2, 6), 36.
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            constraints: vec![
                row(&[1.0, 0.0], Relation::Le, 4.0),
                row(&[0.0, 2.0], Relation::Le, 12.0),
                row(&[3.0, 2.0], Relation::Le, 18.0),
            ],
        };
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
        // Duals (0, 1.5, 1) and strong duality.
        let expected = [0.0, 1.5, 1.0];
        for (d, e) in sol.duals.iter().zip(expected) {
            assert!((d - e).abs() < 1e-9);
        }
    }

    #[test]
    fn two_phase_with_ge_and_eq_rows() {
        // min x + y (as max -x - y) s.t. x + 2y >= 4, x - y = 1 → (2, 1).
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            constraints: vec![row(&[1.0, 2.0], Relation::Ge, 4.0), row(&[1.0, -1.0], Relation::Eq, 1.0)],
        };
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 1.0).abs() < 1e-9);
        assert!(sol.duals[0] <= 1e-12);
        let dual_obj: f64 = sol.duals[0] * 4.0 + sol.duals[1] * 1.0;
        assert!((dual_obj - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // max x s.t. -x >= -3 (x <= 3).
        let lp = LinearProgram { objective: vec![1.0], constraints: vec![row(&[-1.0], Relation::Ge, -3.0)] };
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![row(&[1.0], Relation::Le, 1.0), row(&[1.0], Relation::Ge, 2.0)],
        };
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
        let lp = LinearProgram { objective: vec![1.0, 0.0], constraints: vec![row(&[0.0, 1.0], Relation::Le, 1.0)] };
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_redundant_equalities() {
        // x + y = 1 twice; max x.
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            constraints: vec![row(&[1.0, 1.0], Relation::Eq, 1.0), row(&[2.0, 2.0], Relation::Eq, 2.0)],
        };
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pivot_limit_is_enforced() {
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            constraints: vec![row(&[1.0, 0.0], Relation::Le, 4.0), row(&[3.0, 2.0], Relation::Le, 18.0)],
        };
        assert!(matches!(solve_with_limit(&lp, 0), Err(Error::Solver(_))));
    }
}

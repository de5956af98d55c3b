//! Randomized dependent rounding of a fractional point with integral sum.
//!
//! Repeatedly takes the two lowest-id fractional coordinates `u, v` and
//! moves mass between them along `1_u - 1_v` until one of them becomes
//! integral. The step sizes and probabilities are chosen so that every
//! coordinate keeps its expectation, and the coordinate sum never changes,
//! so the result always has exactly `Σ y` elements.

use rand::Rng;

use crate::error::{Error, Result};
use crate::multilinear::FractionalPoint;

/// Coordinates within this distance of 0 or 1 are treated as integral.
pub const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct RoundingState {
    working: Vec<f64>,
}

impl RoundingState {
    fn snap(&mut self, u: usize) {
        let y = &mut self.working[u];
        if *y < SNAP_TOL {
            *y = 0.0;
        } else if *y > 1.0 - SNAP_TOL {
            *y = 1.0;
        }
    }

    fn is_fractional(&self, u: usize) -> bool {
        let y = self.working[u];
        y > 0.0 && y < 1.0
    }

    fn next_fractional(&self, from: usize) -> Option<usize> {
        (from..self.working.len()).find(|&u| self.is_fractional(u))
    }
}

/// Checks the rounding precondition and returns the target cardinality.
pub fn validate(y: &FractionalPoint) -> Result<usize> {
    if let Some((u, v)) = y.coords().iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Contract(format!("coordinate {u} is {v}, outside [0, 1]")));
    }
    let sum = y.sum();
    let k = sum.round();
    if (sum - k).abs() > SNAP_TOL {
        return Err(Error::Contract(format!("coordinate sum {sum} is not an integer")));
    }
    Ok(k as usize)
}

/// Rounds `y` to a set of exactly `Σ y` elements with `P(u ∈ S) = y_u`.
/// Returns the members in ascending order.
pub fn dep_round<R: Rng + ?Sized>(y: &FractionalPoint, rng: &mut R) -> Result<Vec<usize>> {
    let k = validate(y)?;
    let n = y.len();
    let mut state = RoundingState { working: y.coords().to_vec() };
    for u in 0..n {
        state.snap(u);
    }

    let mut cursor = 0;
    while let Some(u) = state.next_fractional(cursor) {
        let Some(v) = state.next_fractional(u + 1) else {
            // A lone fractional coordinate can only be residue of the
            // integral-sum tolerance; settle it by rounding.
            state.working[u] = state.working[u].round();
            break;
        };
        let (yu, yv) = (state.working[u], state.working[v]);
        let a = (1.0 - yu).min(yv);
        let b = yu.min(1.0 - yv);
        if rng.random::<f64>() * (a + b) < b {
            state.working[u] = yu + a;
            state.working[v] = yv - a;
        } else {
            state.working[u] = yu - b;
            state.working[v] = yv + b;
        }
        // At least one of the pair is now integral up to rounding.
        for w in [u, v] {
            let y = state.working[w];
            if (y - y.round()).abs() < SNAP_TOL {
                state.working[w] = y.round();
            }
        }
        cursor = u;
    }

    let selected: Vec<usize> = (0..n).filter(|&u| state.working[u] == 1.0).collect();
    if selected.len() != k {
        return Err(Error::Contract(format!("rounding produced {} elements, expected {k}", selected.len())));
    }
    Ok(selected)
}

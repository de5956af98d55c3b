//! Trace analysis: selection fractions, fairness, α-fairness, the lower-bound
//! certificates of the continuous-greedy drivers and Hoeffding tail checks.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::multilinear::{Estimate, ExtensionEstimator, FractionalPoint, ResolvedMode};
use crate::oracle::{UtilityOracle, WorkerPool};

/// Finite-horizon slack on `fraction_u >= r_u`.
pub const DEFAULT_REPORT_TOL: f64 = 1e-3;

/// Absolute tolerance of the certificates.
pub const DEFAULT_CERTIFICATE_TOL: f64 = 1e-3;

/// Number of standard errors granted to Monte-Carlo certificates.
pub const CERTIFICATE_Z: f64 = 3.0;

/// Per-round selections and utilities of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    n: usize,
    k: usize,
    selections: Vec<Vec<usize>>,
    utilities: Vec<f64>,
}

impl SelectionTrace {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, k, selections: Vec::new(), utilities: Vec::new() }
    }

    pub fn with_capacity(n: usize, k: usize, rounds: usize) -> Self {
        Self { n, k, selections: Vec::with_capacity(rounds), utilities: Vec::with_capacity(rounds) }
    }

    pub fn push(&mut self, selected: Vec<usize>, utility: f64) -> Result<()> {
        if selected.len() > self.k {
            return Err(Error::Contract(format!("round selects {} elements, budget is {}", selected.len(), self.k)));
        }
        if let Some(&u) = selected.iter().find(|&&u| u >= self.n) {
            return Err(Error::Domain(format!("element {u} is outside the ground set of size {}", self.n)));
        }
        self.selections.push(selected);
        self.utilities.push(utility);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rounds(&self) -> usize {
        self.selections.len()
    }

    pub fn selections(&self) -> &[Vec<usize>] {
        &self.selections
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    /// `N_{u,T}` for the full trace.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.n];
        for s in &self.selections {
            for &u in s {
                counts[u] += 1;
            }
        }
        counts
    }

    pub fn fractions(&self) -> Vec<f64> {
        let t = self.rounds().max(1) as f64;
        self.counts().into_iter().map(|c| c as f64 / t).collect()
    }

    pub fn average_utility(&self) -> f64 {
        if self.utilities.is_empty() {
            return 0.0;
        }
        self.utilities.iter().sum::<f64>() / self.utilities.len() as f64
    }

    /// Average utility of the first `t` rounds, for every `t`.
    pub fn running_average(&self) -> Vec<f64> {
        let mut sum = 0.0;
        self.utilities
            .iter()
            .enumerate()
            .map(|(i, v)| {
                sum += v;
                sum / (i + 1) as f64
            })
            .collect()
    }

    /// `N_{u,t} / t` for every prefix `t`.
    pub fn prefix_fractions(&self, u: usize) -> Vec<f64> {
        let mut count = 0u64;
        self.selections
            .iter()
            .enumerate()
            .map(|(i, s)| {
                count += s.contains(&u) as u64;
                count as f64 / (i + 1) as f64
            })
            .collect()
    }

    /// Standard error of the mean utility over the second half of the trace.
    pub fn tail_standard_error(&self) -> f64 {
        let tail = &self.utilities[self.utilities.len() / 2..];
        let m = tail.len() as f64;
        if m < 2.0 {
            return f64::NAN;
        }
        let mean = tail.iter().sum::<f64>() / m;
        let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFairness {
    pub fraction: f64,
    pub satisfied: bool,
    /// `max_{1 <= t <= T} (r_u t - N_{u,t})`.
    pub max_debt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub elements: Vec<ElementFairness>,
    pub tolerance: f64,
}

impl FairnessReport {
    pub fn unsatisfied(&self) -> Vec<usize> {
        (0..self.elements.len()).filter(|&u| !self.elements[u].satisfied).collect()
    }

    pub fn all_satisfied(&self) -> bool {
        self.elements.iter().all(|e| e.satisfied)
    }
}

pub fn fairness_report(trace: &SelectionTrace, r: &[f64]) -> Result<FairnessReport> {
    fairness_report_with_tolerance(trace, r, DEFAULT_REPORT_TOL)
}

pub fn fairness_report_with_tolerance(trace: &SelectionTrace, r: &[f64], tolerance: f64) -> Result<FairnessReport> {
    check_requirement(trace, r)?;
    if trace.rounds() == 0 {
        return Err(Error::Contract("fairness report needs at least one round".into()));
    }
    let n = trace.n();
    let mut counts = vec![0u64; n];
    let mut max_debt = vec![f64::NEG_INFINITY; n];
    let mut member = vec![false; n];
    for (i, s) in trace.selections().iter().enumerate() {
        let t = (i + 1) as f64;
        for &u in s {
            member[u] = true;
        }
        for u in 0..n {
            counts[u] += member[u] as u64;
            member[u] = false;
            max_debt[u] = max_debt[u].max(r[u] * t - counts[u] as f64);
        }
    }
    let t = trace.rounds() as f64;
    let elements = (0..n)
        .map(|u| {
            let fraction = counts[u] as f64 / t;
            ElementFairness { fraction, satisfied: fraction >= r[u] - tolerance, max_debt: max_debt[u] }
        })
        .collect();
    Ok(FairnessReport { elements, tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFairness {
    pub holds: bool,
    /// First `(element, prefix length)` with `N/T' < r - T'^{-α}`.
    pub first_violation: Option<(usize, usize)>,
}

/// Checks `N_{u,T'} / T' >= r_u - 1 / T'^α` for every element and prefix.
pub fn alpha_fairness_check(trace: &SelectionTrace, r: &[f64], alpha: f64) -> Result<AlphaFairness> {
    check_requirement(trace, r)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let mut counts = vec![0u64; trace.n()];
    for (i, s) in trace.selections().iter().enumerate() {
        for &u in s {
            counts[u] += 1;
        }
        let t = (i + 1) as f64;
        let slack = t.powf(-alpha);
        // Compared as counts to avoid dividing: N >= (r - slack) t.
        if let Some(u) = (0..trace.n()).find(|&u| (counts[u] as f64) < (r[u] - slack) * t - 1e-9) {
            return Ok(AlphaFairness { holds: false, first_violation: Some((u, i + 1)) });
        }
    }
    Ok(AlphaFairness { holds: true, first_violation: None })
}

fn check_requirement(trace: &SelectionTrace, r: &[f64]) -> Result<()> {
    if r.len() != trace.n() {
        return Err(Error::Domain(format!("requirement has {} entries, trace has {} elements", r.len(), trace.n())));
    }
    Ok(())
}

/// `c_r = 1 - max(max_u r_u, Σr / k)`.
pub fn rate_constant(r: &[f64], k: usize) -> f64 {
    let max_r = r.iter().copied().fold(0.0, f64::max);
    let avg = r.iter().sum::<f64>() / k as f64;
    1.0 - max_r.max(avg)
}

/// `(1 - 1/e) U_opt`.
pub fn cg1_bound(u_opt: f64) -> f64 {
    (1.0 - 1.0 / E) * u_opt
}

/// `(1 - e^{-c_r}) U_opt + F(r) e^{-c_r}`.
pub fn cg2_bound(u_opt: f64, f_of_r: f64, c_r: f64) -> f64 {
    let decay = (-c_r).exp();
    (1.0 - decay) * u_opt + f_of_r * decay
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCertificate {
    pub c_r: f64,
    pub u_opt: f64,
    /// `F(y(1))`.
    pub lhs: Estimate,
    pub f_of_r: Estimate,
    pub cg1_bound: f64,
    pub cg2_bound: f64,
    pub cg1_holds: bool,
    pub cg2_holds: bool,
    /// True when `F` was estimated by sampling; the flags then allow
    /// [`CERTIFICATE_Z`] combined standard errors of slack.
    pub statistical: bool,
    pub tolerance: f64,
}

impl BoundCertificate {
    pub fn cg1_ratio(&self) -> f64 {
        self.cg1_bound / self.u_opt
    }

    pub fn cg2_ratio(&self) -> f64 {
        self.cg2_bound / self.u_opt
    }
}

pub fn bound_certificates(
    pool: &WorkerPool,
    oracle: &UtilityOracle,
    y1: &FractionalPoint,
    u_opt: f64,
    estimator: &mut ExtensionEstimator,
) -> Result<BoundCertificate> {
    bound_certificates_with_tolerance(pool, oracle, y1, u_opt, estimator, DEFAULT_CERTIFICATE_TOL)
}

pub fn bound_certificates_with_tolerance(
    pool: &WorkerPool,
    oracle: &UtilityOracle,
    y1: &FractionalPoint,
    u_opt: f64,
    estimator: &mut ExtensionEstimator,
    tolerance: f64,
) -> Result<BoundCertificate> {
    if !u_opt.is_finite() {
        return Err(Error::Domain(format!("U_opt must be finite, got {u_opt}")));
    }
    let c_r = rate_constant(pool.fairness(), pool.k());
    let lhs = estimator.value(oracle, y1)?;
    let f_of_r = estimator.value(oracle, &FractionalPoint::new(pool.fairness().to_vec())?)?;
    let statistical = matches!(estimator.mode(), ResolvedMode::MonteCarlo { .. });
    let b1 = cg1_bound(u_opt);
    let b2 = cg2_bound(u_opt, f_of_r.value, c_r);
    let decay = (-c_r).exp();
    let (noise1, noise2) = if statistical {
        let s2 = (lhs.std_err.powi(2) + (decay * f_of_r.std_err).powi(2)).sqrt();
        (CERTIFICATE_Z * lhs.std_err, CERTIFICATE_Z * s2)
    } else {
        (0.0, 0.0)
    };
    Ok(BoundCertificate {
        c_r,
        u_opt,
        lhs,
        f_of_r,
        cg1_bound: b1,
        cg2_bound: b2,
        cg1_holds: lhs.value >= b1 - tolerance - noise1,
        cg2_holds: lhs.value >= b2 - tolerance - noise2,
        statistical,
        tolerance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    /// `e^{-2 T δ²}`.
    pub bound: f64,
    /// One-sided Hoeffding slack on the empirical frequency over the ensemble.
    pub slack: f64,
    /// Per element, the share of traces with `fraction_u <= r_u - δ`.
    pub empirical: Vec<f64>,
    pub worst: usize,
    pub holds: bool,
}

/// Confidence parameter of the ensemble slack `sqrt(ln(1/a) / 2m)`.
pub const TAIL_CONFIDENCE: f64 = 1e-3;

pub const MIN_ENSEMBLE: usize = 100;

pub fn hoeffding_tail_check(traces: &[SelectionTrace], r: &[f64], delta: f64) -> Result<TailReport> {
    let Some(first) = traces.first() else {
        return Err(Error::Contract("empty trace ensemble".into()));
    };
    let horizon = first.rounds();
    if traces.iter().any(|t| t.rounds() != horizon || t.n() != first.n()) {
        return Err(Error::Contract("ensemble traces differ in horizon or ground set".into()));
    }
    for t in traces {
        check_requirement(t, r)?;
    }
    let fractions: Vec<Vec<f64>> = traces.iter().map(SelectionTrace::fractions).collect();
    hoeffding_tail_from_fractions(&fractions, horizon, r, delta)
}

/// Same check from per-trace final fractions.
pub fn hoeffding_tail_from_fractions(fractions: &[Vec<f64>], horizon: usize, r: &[f64], delta: f64) -> Result<TailReport> {
    let m = fractions.len();
    if m < MIN_ENSEMBLE {
        return Err(Error::Contract(format!("ensemble has {m} traces, need at least {MIN_ENSEMBLE}")));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::Domain(format!("delta must be nonnegative, got {delta}")));
    }
    let bound = (-2.0 * horizon as f64 * delta * delta).exp();
    let slack = ((1.0 / TAIL_CONFIDENCE).ln() / (2.0 * m as f64)).sqrt();
    let empirical: Vec<f64> = (0..r.len())
        .map(|u| fractions.iter().filter(|f| f[u] <= r[u] - delta).count() as f64 / m as f64)
        .collect();
    let worst = (0..r.len()).fold(0, |best, u| if empirical[u] > empirical[best] { u } else { best });
    let holds = empirical.iter().all(|&e| e <= bound + slack);
    Ok(TailReport { bound, slack, empirical, worst, holds })
}

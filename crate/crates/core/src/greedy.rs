//! Discretized fair continuous greedy.
//!
//! Both variants walk `τ` from 0 to 1 in `step_count` equal steps. At every
//! step they compute the marginal weights `w(τ)` at the current point, take
//! the maximizer `x(τ)` of `xᵀw(τ)` over the fairness polytope, and move:
//!
//! * [`Variant::Cg1`] starts at `0` and moves at rate `x(τ)`. Intermediate
//!   points can lie outside the polytope; only the end point is feasible.
//! * [`Variant::Cg2`] starts at `r` and moves at rate `x(τ) - r`, which keeps
//!   every intermediate point inside the polytope.
//!
//! In both cases `y(1)` is the average of the `x(τ)`, so `Σ y(1) = k` and
//! `y(1) >= r`.

use log::warn;

use crate::error::{Error, Result};
use crate::multilinear::{EstimatorConfig, ExtensionEstimator, FractionalPoint, ResolvedMode};
use crate::oracle::{UtilityOracle, WorkerPool};
use crate::polytope::FairPolytope;

/// Clamps larger than this are reported; smaller ones are floating-point
/// residue.
const CAP_WARN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Cg1,
    Cg2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousGreedyConfig {
    /// Number of steps; `None` means `n²`.
    pub step_count: Option<usize>,
    pub estimator: EstimatorConfig,
    pub variant: Variant,
    /// When set, every step also records `xᵀw - (U_opt - F(y))`, which is
    /// nonnegative for exact `F`.
    pub audit_u_opt: Option<f64>,
}

impl ContinuousGreedyConfig {
    pub fn new(variant: Variant) -> Self {
        Self { step_count: None, estimator: EstimatorConfig::default(), variant, audit_u_opt: None }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.step_count = Some(steps);
        self
    }

    pub fn resolved_steps(&self, n: usize) -> usize {
        self.step_count.unwrap_or(n * n).max(1)
    }
}

/// One step of the walk, as written to the step trace.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub tau: f64,
    /// `F(y(τ))`.
    pub value: f64,
    /// `xᵀw` for the chosen direction.
    pub xw: f64,
    /// `dτ · (rate)ᵀw - (F(y(τ + dτ)) - F(y(τ)))`: how far the realized gain
    /// fell short of the first-order prediction. Positive values are
    /// discretization loss.
    pub slack: f64,
    /// `xᵀw - (U_opt - F(y(τ)))` when an audit value was supplied.
    pub lemma_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub y: FractionalPoint,
    /// `F(y(1))` as seen by the estimator.
    pub final_value: f64,
    pub steps: Vec<StepRecord>,
    pub mode: ResolvedMode,
    /// Largest positive per-step slack.
    pub max_slack: f64,
    /// Number of coordinate clamps larger than the warning tolerance.
    pub cap_events: usize,
}

impl GreedyOutcome {
    pub fn min_lemma_gap(&self) -> Option<f64> {
        self.steps.iter().filter_map(|s| s.lemma_gap).reduce(f64::min)
    }
}

pub fn faircg1_fractional(pool: &WorkerPool, oracle: &UtilityOracle, cfg: &ContinuousGreedyConfig) -> Result<GreedyOutcome> {
    run(pool, oracle, cfg, Variant::Cg1)
}

pub fn faircg2_fractional(pool: &WorkerPool, oracle: &UtilityOracle, cfg: &ContinuousGreedyConfig) -> Result<GreedyOutcome> {
    run(pool, oracle, cfg, Variant::Cg2)
}

/// Dispatches on `cfg.variant`.
pub fn fair_continuous_greedy(pool: &WorkerPool, oracle: &UtilityOracle, cfg: &ContinuousGreedyConfig) -> Result<GreedyOutcome> {
    run(pool, oracle, cfg, cfg.variant)
}

fn run(pool: &WorkerPool, oracle: &UtilityOracle, cfg: &ContinuousGreedyConfig, variant: Variant) -> Result<GreedyOutcome> {
    let n = pool.n();
    if oracle.ground_size() != n {
        return Err(Error::Domain(format!("oracle has {} elements, pool has {n}", oracle.ground_size())));
    }
    pool.require_feasible()?;
    let polytope = FairPolytope::new(pool.fairness().to_vec(), pool.k())?;
    let r = pool.fairness();
    let mut estimator = ExtensionEstimator::new(cfg.estimator.clone(), n)?;
    let steps = cfg.resolved_steps(n);
    let dt = 1.0 / steps as f64;

    let mut y = match variant {
        Variant::Cg1 => vec![0.0; n],
        Variant::Cg2 => r.to_vec(),
    };
    let mut records: Vec<StepRecord> = Vec::with_capacity(steps);
    let mut cap_events = 0;
    let mut pending: Option<f64> = None;

    for step in 0..steps {
        let point = FractionalPoint::new(y.clone())?;
        let mw = estimator.marginal_weights(oracle, &point)?;
        let value = mw.base.value;
        if let (Some(predicted), Some(prev)) = (pending.take(), records.last_mut()) {
            prev.slack = predicted - (value - prev.value);
        }

        let x = polytope.maximize_linear(&mw.weights)?;
        let xw: f64 = x.coords().iter().zip(&mw.weights).map(|(x, w)| x * w).sum();
        let rate: Vec<f64> = match variant {
            Variant::Cg1 => x.coords().to_vec(),
            Variant::Cg2 => x.coords().iter().zip(r).map(|(x, r)| x - r).collect(),
        };
        let rate_w: f64 = rate.iter().zip(&mw.weights).map(|(d, w)| d * w).sum();
        pending = Some(dt * rate_w);

        for (yu, du) in y.iter_mut().zip(&rate) {
            *yu += dt * du;
            if *yu > 1.0 || *yu < 0.0 {
                let excess = (*yu - 1.0).max(-*yu);
                if excess > CAP_WARN_TOL {
                    cap_events += 1;
                    warn!("coordinate left [0, 1] by {excess:e} at step {step}; clamping");
                }
                *yu = yu.clamp(0.0, 1.0);
            }
        }

        records.push(StepRecord {
            tau: step as f64 * dt,
            value,
            xw,
            slack: 0.0,
            lemma_gap: cfg.audit_u_opt.map(|u_opt| xw - (u_opt - value)),
        });
    }

    let y1 = FractionalPoint::new(y)?;
    let final_value = estimator.value(oracle, &y1)?.value;
    if let (Some(predicted), Some(prev)) = (pending, records.last_mut()) {
        prev.slack = predicted - (final_value - prev.value);
    }
    let max_slack = records.iter().map(|s| s.slack).fold(0.0, f64::max);
    Ok(GreedyOutcome { y: y1, final_value, steps: records, mode: estimator.mode(), max_slack, cap_events })
}

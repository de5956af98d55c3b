//! The multilinear extension `F(y) = E[f(R(y))]`, where `R(y)` contains each
//! element `u` independently with probability `y_u`, and the marginal weights
//! `w_u = F(y ∨ 1_u) - F(y)` used by continuous greedy.
//!
//! Two evaluation routes are provided. Exact enumeration sums over all `2^n`
//! subsets and is used for small ground sets. The Monte-Carlo route splits the
//! samples into fixed-size chunks, each drawn from its own ChaCha stream, and
//! reduces the chunk sums in chunk order. The result therefore depends only on
//! `(seed, samples, chunk_size)` and not on how many threads ran the chunks.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::UtilityOracle;
use crate::rng::{derive_seed, stream_rng};

pub const DEFAULT_EXACT_THRESHOLD: usize = 15;
pub const DEFAULT_CHUNK_SIZE: usize = 1024;
/// Lower bound on the default Monte-Carlo sample count.
pub const MIN_DEFAULT_SAMPLES: usize = 10_000;
/// Coordinates this close outside [0, 1] are clamped instead of rejected.
const COORD_TOL: f64 = 1e-9;

/// A point of `[0, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalPoint {
    coords: Vec<f64>,
}

impl FractionalPoint {
    pub fn new(mut coords: Vec<f64>) -> Result<Self> {
        for (u, y) in coords.iter_mut().enumerate() {
            if !y.is_finite() || *y < -COORD_TOL || *y > 1.0 + COORD_TOL {
                return Err(Error::Domain(format!("coordinate {u} is {y}, outside [0, 1]")));
            }
            *y = y.clamp(0.0, 1.0);
        }
        Ok(Self { coords })
    }

    pub fn zeros(n: usize) -> Self {
        Self { coords: vec![0.0; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { coords: vec![1.0; n] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.coords.iter().sum()
    }

    /// `y ∨ 1_u`.
    pub fn with_element(&self, u: usize) -> Self {
        let mut coords = self.coords.clone();
        coords[u] = 1.0;
        Self { coords }
    }
}

/// A (possibly noisy) value with its standard error; exact values carry
/// `std_err = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_err: 0.0 }
    }
}

/// Probability of every subset (indexed by bitmask) under independent
/// inclusion with probabilities `y`.
fn subset_probabilities(y: &[f64]) -> Vec<f64> {
    let mut probs = Vec::with_capacity(1 << y.len());
    probs.push(1.0);
    for &p in y {
        let len = probs.len();
        probs.extend_from_within(..len);
        for (lo, hi) in (0..len).zip(len..2 * len) {
            probs[hi] *= p;
            probs[lo] *= 1.0 - p;
        }
    }
    probs
}

fn check_dims(oracle: &UtilityOracle, y: &FractionalPoint) -> Result<usize> {
    let n = oracle.ground_size();
    if y.len() != n {
        return Err(Error::Domain(format!("point has {} coordinates, ground set has {n}", y.len())));
    }
    Ok(n)
}

fn exact_limit_error(n: usize, limit: usize) -> Error {
    Error::Size { what: "ground set for exact extension (use Monte-Carlo)", actual: n as u128, limit: limit as u128 }
}

/// `F(y)` by enumerating all `2^n` subsets; subsets of probability zero are
/// not queried.
pub fn extension_exact(oracle: &UtilityOracle, y: &FractionalPoint) -> Result<f64> {
    let n = check_dims(oracle, y)?;
    if n > DEFAULT_EXACT_THRESHOLD {
        return Err(exact_limit_error(n, DEFAULT_EXACT_THRESHOLD));
    }
    let probs = subset_probabilities(y.coords());
    let mut total = 0.0;
    for (mask, p) in probs.iter().enumerate() {
        if *p != 0.0 {
            total += p * oracle.evaluate_mask(mask as u64)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone)]
struct ChunkSums {
    sum: f64,
    sum_sq: f64,
    gains: Vec<f64>,
}

/// One Monte-Carlo pass. With `marginals`, also accumulates `f(R ∪ {u}) -
/// f(R)` for every `u` on the same draws (zero when `u ∈ R`).
fn monte_carlo_pass(
    oracle: &UtilityOracle,
    y: &[f64],
    samples: usize,
    chunk_size: usize,
    seed: u64,
    marginals: bool,
) -> Result<ChunkSums> {
    let n = y.len();
    let chunks = samples.div_ceil(chunk_size);
    let partial: Vec<Result<ChunkSums>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = chunk_size.min(samples - c * chunk_size);
            let mut acc = ChunkSums { sum: 0.0, sum_sq: 0.0, gains: vec![0.0; if marginals { n } else { 0 }] };
            let mut set = Vec::with_capacity(n);
            let mut extended = Vec::with_capacity(n + 1);
            for _ in 0..count {
                set.clear();
                for (u, &p) in y.iter().enumerate() {
                    // Always draw, so the stream layout does not depend on y.
                    let draw: f64 = rng.random();
                    if draw < p {
                        set.push(u);
                    }
                }
                let base = oracle.evaluate(&set)?;
                acc.sum += base;
                acc.sum_sq += base * base;
                if marginals {
                    for u in 0..n {
                        if set.binary_search(&u).is_ok() {
                            continue;
                        }
                        extended.clear();
                        extended.extend(set.iter().copied().filter(|&v| v < u));
                        extended.push(u);
                        extended.extend(set.iter().copied().filter(|&v| v > u));
                        acc.gains[u] += oracle.evaluate(&extended)? - base;
                    }
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = ChunkSums { sum: 0.0, sum_sq: 0.0, gains: vec![0.0; if marginals { n } else { 0 }] };
    for chunk in partial {
        let chunk = chunk?;
        total.sum += chunk.sum;
        total.sum_sq += chunk.sum_sq;
        for (t, g) in total.gains.iter_mut().zip(&chunk.gains) {
            *t += g;
        }
    }
    Ok(total)
}

fn mean_estimate(sums: &ChunkSums, samples: usize) -> Estimate {
    let m = samples as f64;
    let mean = sums.sum / m;
    let var = if samples > 1 { ((sums.sum_sq - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
    Estimate { value: mean, std_err: (var / m).sqrt() }
}

/// Monte-Carlo estimate of `F(y)` from `samples` independent draws of
/// `R(y)`; deterministic given `seed`.
pub fn extension_mc(oracle: &UtilityOracle, y: &FractionalPoint, samples: usize, seed: u64) -> Result<Estimate> {
    extension_mc_chunked(oracle, y, samples, seed, DEFAULT_CHUNK_SIZE)
}

pub fn extension_mc_chunked(
    oracle: &UtilityOracle,
    y: &FractionalPoint,
    samples: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<Estimate> {
    check_dims(oracle, y)?;
    if samples == 0 || chunk_size == 0 {
        return Err(Error::Domain("sample count and chunk size must be positive".into()));
    }
    let sums = monte_carlo_pass(oracle, y.coords(), samples, chunk_size, seed, false)?;
    Ok(mean_estimate(&sums, samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Exact when `n <= exact_threshold`, Monte-Carlo otherwise.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    /// Monte-Carlo sample count per evaluation; `None` means
    /// `max(n^5, MIN_DEFAULT_SAMPLES)`.
    pub samples: Option<usize>,
    pub exact_threshold: usize,
    pub chunk_size: usize,
    /// Evaluate `F(y)` and every `F(y ∨ 1_u)` on the same draws.
    pub common_random_numbers: bool,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::Auto,
            samples: None,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            chunk_size: DEFAULT_CHUNK_SIZE,
            common_random_numbers: true,
            seed: 0,
        }
    }
}

/// The evaluation route an estimator settled on for a given ground set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedMode {
    Exact,
    MonteCarlo { samples: usize },
}

impl std::fmt::Display for ResolvedMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResolvedMode::Exact => write!(f, "exact"),
            ResolvedMode::MonteCarlo { samples } => write!(f, "monte_carlo({samples})"),
        }
    }
}

impl EstimatorConfig {
    pub fn resolve(&self, n: usize) -> Result<ResolvedMode> {
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk size must be positive".into()));
        }
        let samples = match self.samples {
            Some(0) => return Err(Error::Config("sample count must be positive".into())),
            Some(s) => s,
            None => (n as u64).saturating_pow(5).clamp(MIN_DEFAULT_SAMPLES as u64, usize::MAX as u64) as usize,
        };
        // Exact tables are indexed by u64 masks in memory; never go past 25.
        let hard_limit = self.exact_threshold.min(25);
        match self.mode {
            EstimatorMode::Exact if n > hard_limit => Err(exact_limit_error(n, hard_limit)),
            EstimatorMode::Exact => Ok(ResolvedMode::Exact),
            EstimatorMode::Auto if n <= hard_limit => Ok(ResolvedMode::Exact),
            EstimatorMode::Auto | EstimatorMode::MonteCarlo => Ok(ResolvedMode::MonteCarlo { samples }),
        }
    }
}

/// `F(y)` together with the marginal weights `w_u = F(y ∨ 1_u) - F(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalWeights {
    pub base: Estimate,
    pub weights: Vec<f64>,
}

/// Stateful evaluator of `F`. In exact mode it tabulates `f` over all subsets
/// on first use (`2^n` oracle queries) and reuses the table. In Monte-Carlo
/// mode every call draws from a fresh seed derived from the configured seed
/// and a call counter.
#[derive(Debug, Clone)]
pub struct ExtensionEstimator {
    config: EstimatorConfig,
    mode: ResolvedMode,
    n: usize,
    table: Option<Vec<f64>>,
    calls: u64,
}

impl ExtensionEstimator {
    pub fn new(config: EstimatorConfig, n: usize) -> Result<Self> {
        let mode = config.resolve(n)?;
        Ok(Self { config, mode, n, table: None, calls: 0 })
    }

    pub fn exact(n: usize) -> Result<Self> {
        Self::new(EstimatorConfig { mode: EstimatorMode::Exact, ..EstimatorConfig::default() }, n)
    }

    pub fn mode(&self) -> ResolvedMode {
        self.mode
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    fn next_seed(&mut self) -> u64 {
        let seed = derive_seed(self.config.seed, self.calls);
        self.calls += 1;
        seed
    }

    fn table(&mut self, oracle: &UtilityOracle) -> Result<&[f64]> {
        if self.table.is_none() {
            let table = (0u64..1 << self.n).map(|m| oracle.evaluate_mask(m)).collect::<Result<Vec<_>>>()?;
            self.table = Some(table);
        }
        Ok(self.table.as_deref().unwrap_or_default())
    }

    fn check(&self, oracle: &UtilityOracle, y: &FractionalPoint) -> Result<()> {
        let n = check_dims(oracle, y)?;
        if n != self.n {
            return Err(Error::Domain(format!("estimator built for {} elements, got {n}", self.n)));
        }
        Ok(())
    }

    pub fn value(&mut self, oracle: &UtilityOracle, y: &FractionalPoint) -> Result<Estimate> {
        self.check(oracle, y)?;
        match self.mode {
            ResolvedMode::Exact => {
                let table = self.table(oracle)?;
                Ok(Estimate::exact(dot(table, &subset_probabilities(y.coords()))))
            }
            ResolvedMode::MonteCarlo { samples } => {
                let seed = self.next_seed();
                let sums = monte_carlo_pass(oracle, y.coords(), samples, self.config.chunk_size, seed, false)?;
                Ok(mean_estimate(&sums, samples))
            }
        }
    }

    /// Marginal weights against one shared `F(y)` baseline. Negative
    /// estimates (possible only through sampling noise or rounding) are
    /// clamped to zero.
    pub fn marginal_weights(&mut self, oracle: &UtilityOracle, y: &FractionalPoint) -> Result<MarginalWeights> {
        self.check(oracle, y)?;
        let n = self.n;
        let (base, mut weights) = match self.mode {
            ResolvedMode::Exact => {
                let table = self.table(oracle)?;
                let base = dot(table, &subset_probabilities(y.coords()));
                let weights = (0..n)
                    .map(|u| {
                        if y.coords()[u] >= 1.0 {
                            0.0
                        } else {
                            dot(table, &subset_probabilities(y.with_element(u).coords())) - base
                        }
                    })
                    .collect();
                (Estimate::exact(base), weights)
            }
            ResolvedMode::MonteCarlo { samples } => {
                let seed = self.next_seed();
                let chunk = self.config.chunk_size;
                if self.config.common_random_numbers {
                    let sums = monte_carlo_pass(oracle, y.coords(), samples, chunk, seed, true)?;
                    let m = samples as f64;
                    (mean_estimate(&sums, samples), sums.gains.iter().map(|g| g / m).collect())
                } else {
                    let base = mean_estimate(
                        &monte_carlo_pass(oracle, y.coords(), samples, chunk, derive_seed(seed, 0), false)?,
                        samples,
                    );
                    let mut weights = Vec::with_capacity(n);
                    for u in 0..n {
                        if y.coords()[u] >= 1.0 {
                            weights.push(0.0);
                            continue;
                        }
                        let lifted = y.with_element(u);
                        let sums =
                            monte_carlo_pass(oracle, lifted.coords(), samples, chunk, derive_seed(seed, u as u64 + 1), false)?;
                        weights.push(mean_estimate(&sums, samples).value - base.value);
                    }
                    (base, weights)
                }
            }
        };
        for w in &mut weights {
            *w = w.max(0.0);
        }
        Ok(MarginalWeights { base, weights })
    }
}

/// Free-function form of [`ExtensionEstimator::marginal_weights`].
pub fn marginal_weights(
    oracle: &UtilityOracle,
    y: &FractionalPoint,
    estimator: &mut ExtensionEstimator,
) -> Result<MarginalWeights> {
    estimator.marginal_weights(oracle, y)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

//! Ground set and counted value oracles.
//!
//! Elements are identified by `0..n`. Sets are passed as slices of distinct
//! element ids; every iteration over elements runs in ascending id order.

use std::sync::atomic::{AtomicU64, Ordering};

use log::warn;

use crate::error::{Error, Result};
use crate::polytope;

/// Largest ground set accepted by the exhaustive property checker.
pub const MAX_CHECK_SIZE: usize = 12;

/// The ground set: per-element sample counts and fairness requirements, plus
/// the per-round cardinality budget `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPool {
    sample_counts: Vec<f64>,
    fairness: Vec<f64>,
    k: usize,
}

impl WorkerPool {
    pub fn new(sample_counts: Vec<f64>, fairness: Vec<f64>, k: usize) -> Result<Self> {
        let n = sample_counts.len();
        if n == 0 {
            return Err(Error::Config("ground set must contain at least one element".into()));
        }
        if fairness.len() != n {
            return Err(Error::Config(format!(
                "fairness vector has {} entries, expected {n}",
                fairness.len()
            )));
        }
        if k == 0 || k > n {
            return Err(Error::Config(format!("cardinality k = {k} must lie in [1, {n}]")));
        }
        if let Some((u, l)) = sample_counts
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::Config(format!("sample count of element {u} is {l}, must be positive")));
        }
        if let Some((u, r)) = fairness
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && (0.0..=1.0).contains(*r)))
        {
            return Err(Error::Config(format!("fairness requirement of element {u} is {r}, must lie in [0, 1]")));
        }
        Ok(Self { sample_counts, fairness, k })
    }

    /// Same ground set and budget with a different requirement vector.
    pub fn with_fairness(&self, fairness: Vec<f64>) -> Result<Self> {
        Self::new(self.sample_counts.clone(), fairness, self.k)
    }

    pub fn n(&self) -> usize {
        self.sample_counts.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sample_counts(&self) -> &[f64] {
        &self.sample_counts
    }

    pub fn fairness(&self) -> &[f64] {
        &self.fairness
    }

    pub fn fairness_sum(&self) -> f64 {
        self.fairness.iter().sum()
    }

    /// Recomputed on every call.
    pub fn is_feasible(&self) -> bool {
        polytope::is_feasible(&self.fairness, self.k)
    }

    pub fn require_feasible(&self) -> Result<()> {
        if self.is_feasible() {
            Ok(())
        } else {
            Err(Error::Infeasible { sum_r: self.fairness_sum(), k: self.k })
        }
    }
}

/// The set functions the oracle can evaluate. All of them satisfy
/// `f(∅) = 0`, are monotone, and (except for user-supplied tables) are
/// submodular.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    /// Learning-curve accuracy `(1 - a) - b * (Σ_{u∈S} L_u)^c`, zero on the
    /// empty set and clamped at zero from below.
    Accuracy { a: f64, b: f64, c: f64, sample_counts: Vec<f64> },
    /// Weighted coverage: element `u` covers the items in `covers[u]`, and the
    /// value of a set is the total weight of the items it covers.
    Coverage { covers: Vec<Vec<usize>>, item_weights: Vec<f64> },
    /// `f(S) = Σ_{u∈S} w_u`.
    Modular { weights: Vec<f64> },
    /// Explicit value table indexed by the bitmask of the set. Used for
    /// small hand-built functions in tests and checks.
    Tabulated { n: usize, values: Vec<f64> },
}

impl UtilityKind {
    pub fn ground_size(&self) -> usize {
        match self {
            UtilityKind::Accuracy { sample_counts, .. } => sample_counts.len(),
            UtilityKind::Coverage { covers, .. } => covers.len(),
            UtilityKind::Modular { weights } => weights.len(),
            UtilityKind::Tabulated { n, .. } => *n,
        }
    }
}

/// A value oracle with a query counter. Every call to [`evaluate`] (and
/// every set value computed internally on behalf of a caller) counts as one
/// query.
///
/// [`evaluate`]: UtilityOracle::evaluate
#[derive(Debug)]
pub struct UtilityOracle {
    kind: UtilityKind,
    queries: AtomicU64,
}

impl Clone for UtilityOracle {
    /// The clone starts with a fresh counter.
    fn clone(&self) -> Self {
        Self { kind: self.kind.clone(), queries: AtomicU64::new(0) }
    }
}

impl UtilityOracle {
    pub fn new(kind: UtilityKind) -> Result<Self> {
        validate_kind(&kind)?;
        Ok(Self { kind, queries: AtomicU64::new(0) })
    }

    pub fn accuracy(a: f64, b: f64, c: f64, sample_counts: &[f64]) -> Result<Self> {
        Self::new(UtilityKind::Accuracy { a, b, c, sample_counts: sample_counts.to_vec() })
    }

    pub fn modular(weights: Vec<f64>) -> Result<Self> {
        Self::new(UtilityKind::Modular { weights })
    }

    pub fn coverage(covers: Vec<Vec<usize>>, item_weights: Vec<f64>) -> Result<Self> {
        Self::new(UtilityKind::Coverage { covers, item_weights })
    }

    pub fn tabulated(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(UtilityKind::Tabulated { n, values })
    }

    /// Tabulates `g(|S|)` over all subsets of an `n`-element ground set.
    pub fn from_cardinality(n: usize, g: impl Fn(usize) -> f64) -> Result<Self> {
        if n > 20 {
            return Err(Error::Size { what: "tabulated ground set", actual: n as u128, limit: 20 });
        }
        let values = (0u64..1 << n).map(|m| g(m.count_ones() as usize)).collect();
        Self::tabulated(n, values)
    }

    pub fn kind(&self) -> &UtilityKind {
        &self.kind
    }

    pub fn ground_size(&self) -> usize {
        self.kind.ground_size()
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_queries(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    /// `f(S)`. Duplicate ids are counted once.
    pub fn evaluate(&self, set: &[usize]) -> Result<f64> {
        let n = self.ground_size();
        if let Some(&u) = set.iter().find(|&&u| u >= n) {
            return Err(Error::Domain(format!("element {u} is outside the ground set of size {n}")));
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        if set.windows(2).all(|w| w[0] < w[1]) {
            Ok(self.value_of(set))
        } else {
            let mut sorted = set.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            Ok(self.value_of(&sorted))
        }
    }

    /// `f(S)` for the set whose members are the set bits of `mask`.
    pub fn evaluate_mask(&self, mask: u64) -> Result<f64> {
        let n = self.ground_size();
        if n < 64 && mask >> n != 0 {
            return Err(Error::Domain(format!("mask {mask:#x} has bits outside the ground set of size {n}")));
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        if let UtilityKind::Tabulated { values, .. } = &self.kind {
            return Ok(values[mask as usize]);
        }
        let members: Vec<usize> = (0..n.min(64)).filter(|&u| mask >> u & 1 == 1).collect();
        Ok(self.value_of(&members))
    }

    /// `Δ(u|S) = f(S ∪ {u}) - f(S)`; two queries.
    pub fn marginal_gain(&self, set: &[usize], u: usize) -> Result<f64> {
        if set.contains(&u) {
            return Err(Error::Domain(format!("element {u} is already in the set")));
        }
        let base = self.evaluate(set)?;
        let mut extended = Vec::with_capacity(set.len() + 1);
        extended.extend_from_slice(set);
        extended.push(u);
        Ok(self.evaluate(&extended)? - base)
    }

    /// Uncounted evaluation of a sorted, deduplicated, in-range set.
    fn value_of(&self, set: &[usize]) -> f64 {
        match &self.kind {
            UtilityKind::Accuracy { a, b, c, sample_counts } => {
                if set.is_empty() {
                    return 0.0;
                }
                let total: f64 = set.iter().map(|&u| sample_counts[u]).sum();
                accuracy_value(*a, *b, *c, total).max(0.0)
            }
            UtilityKind::Coverage { covers, item_weights } => {
                let mut seen = vec![false; item_weights.len()];
                let mut value = 0.0;
                for &u in set {
                    for &item in &covers[u] {
                        if !seen[item] {
                            seen[item] = true;
                            value += item_weights[item];
                        }
                    }
                }
                value
            }
            UtilityKind::Modular { weights } => set.iter().map(|&u| weights[u]).sum(),
            UtilityKind::Tabulated { values, .. } => {
                let mask = set.iter().fold(0usize, |m, &u| m | 1 << u);
                values[mask]
            }
        }
    }
}

fn accuracy_value(a: f64, b: f64, c: f64, total: f64) -> f64 {
    (1.0 - a) - b * total.powf(c)
}

fn validate_kind(kind: &UtilityKind) -> Result<()> {
    let nonneg = |what: &str, xs: &[f64]| -> Result<()> {
        match xs.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
            Some((i, x)) => Err(Error::Config(format!("{what}[{i}] = {x} must be a nonnegative number"))),
            None => Ok(()),
        }
    };
    match kind {
        UtilityKind::Accuracy { a, b, c, sample_counts } => {
            if sample_counts.is_empty() {
                return Err(Error::Config("accuracy utility needs at least one element".into()));
            }
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return Err(Error::Config("accuracy parameters must be finite".into()));
            }
            if *b < 0.0 || *c > 0.0 {
                return Err(Error::Config(format!(
                    "accuracy utility needs b >= 0 and c <= 0 to be monotone (got b = {b}, c = {c})"
                )));
            }
            if sample_counts.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(Error::Config("sample counts must be positive".into()));
            }
            // The value grows with the total sample count, so the smallest
            // singleton is the smallest nonempty set.
            let smallest = sample_counts.iter().cloned().fold(f64::INFINITY, f64::min);
            if accuracy_value(*a, *b, *c, smallest) < 0.0 {
                warn!(
                    "accuracy utility is negative for small sets (f = {} at total {smallest}); values are clamped to 0",
                    accuracy_value(*a, *b, *c, smallest)
                );
            }
        }
        UtilityKind::Coverage { covers, item_weights } => {
            if covers.is_empty() {
                return Err(Error::Config("coverage utility needs at least one element".into()));
            }
            nonneg("item_weights", item_weights)?;
            for (u, items) in covers.iter().enumerate() {
                if let Some(i) = items.iter().find(|&&i| i >= item_weights.len()) {
                    return Err(Error::Config(format!("element {u} covers unknown item {i}")));
                }
            }
        }
        UtilityKind::Modular { weights } => {
            if weights.is_empty() {
                return Err(Error::Config("modular utility needs at least one element".into()));
            }
            nonneg("weights", weights)?;
        }
        UtilityKind::Tabulated { n, values } => {
            if *n == 0 || *n > 20 {
                return Err(Error::Config(format!("tabulated utility supports 1..=20 elements, got {n}")));
            }
            if values.len() != 1 << n {
                return Err(Error::Config(format!("tabulated utility needs {} values, got {}", 1u64 << n, values.len())));
            }
            if values[0] != 0.0 {
                return Err(Error::Config("tabulated utility must be zero on the empty set".into()));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("tabulated values must be finite".into()));
            }
        }
    }
    Ok(())
}

/// Outcome of [`check_submodular_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyReport {
    Pass,
    /// `f(A) > f(B)` although `A ⊆ B`.
    NotMonotone { a: Vec<usize>, b: Vec<usize> },
    /// `Δ(u|A) < Δ(u|B)` although `A ⊆ B` and `u ∉ B`.
    NotSubmodular { a: Vec<usize>, b: Vec<usize>, u: usize },
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        matches!(self, PropertyReport::Pass)
    }
}

/// Exhaustively checks monotonicity and submodularity on ground sets of at
/// most [`MAX_CHECK_SIZE`] elements.
///
/// Uses the local forms of both properties, which are equivalent to the
/// global ones: `f(A) <= f(A+u)` for all `A, u`, and
/// `Δ(u|A) >= Δ(u|A+v)` for all `A` and distinct `u, v ∉ A`.
pub fn check_submodular_monotone(oracle: &UtilityOracle) -> Result<PropertyReport> {
    let n = oracle.ground_size();
    if n > MAX_CHECK_SIZE {
        return Err(Error::Size {
            what: "ground set for exhaustive check",
            actual: n as u128,
            limit: MAX_CHECK_SIZE as u128,
        });
    }
    let table = (0u64..1 << n).map(|m| oracle.evaluate_mask(m)).collect::<Result<Vec<_>>>()?;
    let tol = |x: f64, y: f64| 1e-12 * (1.0 + x.abs().max(y.abs()));
    let members = |m: usize| (0..n).filter(|&u| m >> u & 1 == 1).collect::<Vec<_>>();

    for a in 0..table.len() {
        for u in (0..n).filter(|&u| a >> u & 1 == 0) {
            let with_u = a | 1 << u;
            if table[a] > table[with_u] + tol(table[a], table[with_u]) {
                return Ok(PropertyReport::NotMonotone { a: members(a), b: members(with_u) });
            }
            let gain = table[with_u] - table[a];
            for v in (0..n).filter(|&v| v != u && a >> v & 1 == 0) {
                let b = a | 1 << v;
                let gain_b = table[b | 1 << u] - table[b];
                if gain_b > gain + tol(gain, gain_b) {
                    return Ok(PropertyReport::NotSubmodular { a: members(a), b: members(b), u });
                }
            }
        }
    }
    Ok(PropertyReport::Pass)
}

//! Reference instances: the ten-worker federated-learning setup and seeded
//! random small instances for property tests.

use rand::Rng;

use crate::error::Result;
use crate::oracle::{UtilityOracle, WorkerPool};

/// Per-worker sample counts `L_u`.
pub const TABLE_ONE_SAMPLES: [f64; 10] = [200.0, 800.0, 1000.0, 500.0, 100.0, 300.0, 400.0, 900.0, 100.0, 200.0];

/// Base requirement vector; the experiment uses `r = β · r_base`.
pub const TABLE_ONE_R_BASE: [f64; 10] = [0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.5, 1.5];

pub const TABLE_ONE_K: usize = 6;

/// Accuracy-curve parameters `(a, b, c)`: minimum error, learning rate and
/// decay rate.
pub const TABLE_ONE_ACCURACY: (f64, f64, f64) = (0.05, 0.5, -0.2);

/// The β grid of the fairness sweep.
pub const TABLE_ONE_BETAS: [f64; 11] = [0.0, 0.06, 0.12, 0.18, 0.24, 0.30, 0.36, 0.42, 0.48, 0.54, 0.60];

pub fn table_one_fairness(beta: f64) -> Vec<f64> {
    TABLE_ONE_R_BASE.iter().map(|r| beta * r).collect()
}

pub fn table_one_pool(beta: f64) -> Result<WorkerPool> {
    WorkerPool::new(TABLE_ONE_SAMPLES.to_vec(), table_one_fairness(beta), TABLE_ONE_K)
}

pub fn table_one_oracle() -> Result<UtilityOracle> {
    let (a, b, c) = TABLE_ONE_ACCURACY;
    UtilityOracle::accuracy(a, b, c, &TABLE_ONE_SAMPLES)
}

/// A random instance with `n` elements and budget `k`: one of the three
/// submodular kinds (chosen by `variant % 3`) and a feasible random
/// requirement vector whose total is a random fraction of `k`.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, k: usize, variant: usize) -> Result<(WorkerPool, UtilityOracle)> {
    let samples: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..1500.0)).collect();
    let oracle = match variant % 3 {
        0 => UtilityOracle::accuracy(0.05, 0.5, -0.2, &samples)?,
        1 => {
            let items = 2 * n;
            let item_weights = (0..items).map(|_| rng.random_range(0.1..2.0)).collect();
            let covers = (0..n)
                .map(|_| (0..items).filter(|_| rng.random_bool(0.3)).collect())
                .collect();
            UtilityOracle::coverage(covers, item_weights)?
        }
        _ => UtilityOracle::modular((0..n).map(|_| rng.random_range(0.0..1.0)).collect())?,
    };
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let target = rng.random_range(0.0..1.0) * k as f64;
    let scale = if total > 0.0 { (target / total).min(1.0) } else { 0.0 };
    let fairness = raw.iter().map(|r| (r * scale).min(1.0)).collect();
    Ok((WorkerPool::new(samples, fairness, k)?, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_042_requirement() {
        let pool = table_one_pool(0.42).unwrap();
        let expected = [0.21, 0.21, 0.42, 0.42, 0.42, 0.42, 0.42, 0.42, 0.63, 0.63];
        for (r, e) in pool.fairness().iter().zip(expected) {
            assert!((r - e).abs() < 1e-12);
        }
        assert!((pool.fairness_sum() - 4.2).abs() < 1e-12);
        assert!(pool.is_feasible());
    }

    #[test]
    fn whole_sweep_is_feasible() {
        for beta in TABLE_ONE_BETAS {
            assert!(table_one_pool(beta).unwrap().is_feasible(), "beta = {beta}");
        }
        assert!(!table_one_pool(0.61).unwrap().is_feasible());
    }
}

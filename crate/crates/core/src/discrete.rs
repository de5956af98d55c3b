//! Discrete schedulers: the debt-priority fair greedy, the plain greedy
//! baseline, and the slot-assignment policy used to show that every
//! requirement with `Σ r <= k` can be met.

use crate::error::{Error, Result};
use crate::oracle::{UtilityOracle, WorkerPool};

/// Debts within this distance of zero count as zero. Requirements like
/// `0.21 · t` are not exact in binary, and the membership test must not
/// flip on rounding residue.
pub const DEBT_TOL: f64 = 1e-9;

/// Which elements count as owed a selection at the start of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DebtRule {
    /// `r_u t - N_{u,t-1} >= 0`, as in the algorithm statement. With
    /// `r_u = 0` an element that was never picked is owed forever.
    #[default]
    Verbatim,
    /// `r_u t - N_{u,t-1} > 0`. With `r = 0` this reduces to plain greedy.
    Strict,
}

/// Cumulative selection counts `N_{u,t}` after `round` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DebtLedger {
    counts: Vec<u64>,
    round: u64,
}

impl DebtLedger {
    pub fn new(n: usize) -> Self {
        Self { counts: vec![0; n], round: 0 }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Rounds recorded so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// `r_u t - N_{u,t}` for the rounds recorded so far.
    pub fn debts(&self, r: &[f64]) -> Vec<f64> {
        let t = self.round as f64;
        r.iter().zip(&self.counts).map(|(r, n)| r * t - *n as f64).collect()
    }

    pub fn record(&mut self, selected: &[usize]) {
        for &u in selected {
            self.counts[u] += 1;
        }
        self.round += 1;
    }
}

/// Adds `extra` elements to `chosen` by largest marginal gain, ties broken by
/// ascending id. `f(chosen)` is queried once (skipped for the empty set),
/// then each candidate once per addition, which keeps a round within `k·n`
/// queries.
fn greedy_extend(oracle: &UtilityOracle, chosen: &mut Vec<usize>, extra: usize) -> Result<()> {
    let n = oracle.ground_size();
    let mut in_set = vec![false; n];
    for &u in chosen.iter() {
        in_set[u] = true;
    }
    chosen.sort_unstable();
    let mut current = if chosen.is_empty() { 0.0 } else { oracle.evaluate(chosen)? };
    let mut candidate = Vec::with_capacity(chosen.len() + 1);
    for _ in 0..extra {
        let mut best: Option<(usize, f64)> = None;
        for u in (0..n).filter(|&u| !in_set[u]) {
            candidate.clear();
            candidate.extend_from_slice(chosen);
            let pos = candidate.partition_point(|&v| v < u);
            candidate.insert(pos, u);
            let value = oracle.evaluate(&candidate)?;
            if best.is_none_or(|(_, b)| value - current > b - current) {
                best = Some((u, value));
            }
        }
        let Some((u, value)) = best else { break };
        let pos = chosen.partition_point(|&v| v < u);
        chosen.insert(pos, u);
        in_set[u] = true;
        current = value;
    }
    Ok(())
}

/// One round of the debt-priority fair greedy. Updates `ledger` and returns
/// the selected set in ascending order (always `k` elements).
///
/// Elements owed a selection (`A_t`) are served first: if fewer than `k` are
/// owed, all of them are taken and the rest of the budget is filled greedily
/// by marginal gain; otherwise the `k` largest debts win, ties by id.
pub fn fairdg_round(pool: &WorkerPool, oracle: &UtilityOracle, ledger: &mut DebtLedger, rule: DebtRule) -> Result<Vec<usize>> {
    let (n, k) = (pool.n(), pool.k());
    if oracle.ground_size() != n || ledger.counts.len() != n {
        return Err(Error::Domain("pool, oracle and ledger disagree on the ground set size".into()));
    }
    let t = (ledger.round + 1) as f64;
    let debt: Vec<f64> = pool.fairness().iter().zip(&ledger.counts).map(|(r, c)| r * t - *c as f64).collect();
    let owed: Vec<usize> = (0..n)
        .filter(|&u| match rule {
            DebtRule::Verbatim => debt[u] >= -DEBT_TOL,
            DebtRule::Strict => debt[u] > DEBT_TOL,
        })
        .collect();

    let mut selected = if owed.len() < k {
        let mut chosen = owed;
        let missing = k - chosen.len();
        greedy_extend(oracle, &mut chosen, missing)?;
        chosen
    } else {
        let mut ranked = owed;
        // Stable sort keeps ascending ids among equal debts.
        ranked.sort_by(|&a, &b| debt[b].total_cmp(&debt[a]));
        ranked.truncate(k);
        ranked
    };
    selected.sort_unstable();
    ledger.record(&selected);
    Ok(selected)
}

/// Classic greedy: `k` additions by largest marginal gain from the empty set.
pub fn dg_round(pool: &WorkerPool, oracle: &UtilityOracle) -> Result<Vec<usize>> {
    if oracle.ground_size() != pool.n() {
        return Err(Error::Domain("pool and oracle disagree on the ground set size".into()));
    }
    let mut chosen = Vec::with_capacity(pool.k());
    greedy_extend(oracle, &mut chosen, pool.k())?;
    Ok(chosen)
}

/// Slot-assignment policy over a horizon of `horizon` rounds.
///
/// The `kT` slots are laid out column by column (`1⁽¹⁾ … T⁽¹⁾, 1⁽²⁾ …`), and
/// element `u_i` takes consecutive slots up to slot `⌈(Σ_{j<=i} r_j) T⌉`.
/// Round `t` selects the owners of slots `t⁽¹⁾ … t⁽ᵏ⁾`, padded with the
/// lowest-id unselected elements to size `k`.
pub fn round_robin_policy(pool: &WorkerPool, horizon: usize) -> Result<Vec<Vec<usize>>> {
    pool.require_feasible()?;
    Ok(slot_assignment(pool.fairness(), pool.k(), horizon))
}

/// The slot construction without the feasibility check: slots past `kT` are
/// dropped, so for infeasible requirements the last elements come up short.
pub fn slot_assignment(r: &[f64], k: usize, horizon: usize) -> Vec<Vec<usize>> {
    let n = r.len();
    let total_slots = k * horizon;
    let mut rounds: Vec<Vec<usize>> = vec![Vec::with_capacity(k); horizon];
    if horizon == 0 {
        return rounds;
    }
    let mut cumulative = 0.0;
    let mut start = 0usize;
    for (u, ru) in r.iter().enumerate() {
        cumulative += ru;
        let end = ((cumulative * horizon as f64 - DEBT_TOL).ceil().max(0.0) as usize).min(total_slots);
        for slot in start..end.max(start) {
            rounds[slot % horizon].push(u);
        }
        start = start.max(end);
    }
    for round in &mut rounds {
        let mut u = 0;
        while round.len() < k && u < n {
            if !round.contains(&u) {
                round.push(u);
            }
            u += 1;
        }
        round.sort_unstable();
    }
    rounds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_pool(n: usize, k: usize, r: f64) -> WorkerPool {
        WorkerPool::new((1..=n).map(|i| 100.0 * i as f64).collect(), vec![r; n], k).unwrap()
    }

    #[test]
    fn equal_debts_rotate_by_id() {
        let pool = uniform_pool(3, 1, 0.3);
        let oracle = UtilityOracle::accuracy(0.05, 0.5, -0.2, pool.sample_counts()).unwrap();
        let mut ledger = DebtLedger::new(3);
        let picks: Vec<Vec<usize>> =
            (0..3).map(|_| fairdg_round(&pool, &oracle, &mut ledger, DebtRule::Verbatim).unwrap()).collect();
        assert_eq!(picks, vec![vec![0], vec![1], vec![2]]);
        assert!(ledger.debts(pool.fairness()).iter().all(|d| *d < 1.0));
    }

    #[test]
    fn zero_requirement_semantics() {
        let pool = instances::table_one_pool(0.0).unwrap();
        let oracle = instances::table_one_oracle().unwrap();
        let greedy = dg_round(&pool, &oracle).unwrap();

        let mut ledger = DebtLedger::new(10);
        assert_eq!(fairdg_round(&pool, &oracle, &mut ledger, DebtRule::Strict).unwrap(), greedy);

        // Verbatim: every never-picked element has debt exactly zero and is
        // owed, so round one takes the six lowest debts-tied ids.
        let mut ledger = DebtLedger::new(10);
        assert_eq!(fairdg_round(&pool, &oracle, &mut ledger, DebtRule::Verbatim).unwrap(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn dg_examples() {
        let pool = instances::table_one_pool(0.42).unwrap();
        let oracle = instances::table_one_oracle().unwrap();
        assert_eq!(dg_round(&pool, &oracle).unwrap(), vec![1, 2, 3, 5, 6, 7]);

        let weights = vec![0.3, 2.0, 0.1, 5.0, 1.0];
        let modular = UtilityOracle::modular(weights).unwrap();
        let pool = WorkerPool::new(vec![1.0; 5], vec![0.0; 5], 2).unwrap();
        assert_eq!(dg_round(&pool, &modular).unwrap(), vec![1, 3]);

        let pool = WorkerPool::new(vec![1.0; 5], vec![0.0; 5], 5).unwrap();
        assert_eq!(dg_round(&pool, &modular).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn dg_is_within_greedy_bound_of_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for i in 0..30 {
            let n = 4 + i % 7;
            let k = 1 + i % (n - 1);
            let (pool, oracle) = instances::random_instance(&mut rng, n, k, i).unwrap();
            let greedy = oracle.evaluate(&dg_round(&pool, &oracle).unwrap()).unwrap();
            let opt = (0u64..1 << n)
                .filter(|m| m.count_ones() as usize == k)
                .map(|m| oracle.evaluate_mask(m).unwrap())
                .fold(0.0, f64::max);
            assert!(greedy >= (1.0 - (-1.0f64).exp()) * opt - 1e-12);
        }
    }

    #[test]
    fn fairdg_query_budget() {
        let pool = instances::table_one_pool(0.42).unwrap();
        let oracle = instances::table_one_oracle().unwrap();
        let mut ledger = DebtLedger::new(10);
        for _ in 0..2000 {
            let before = oracle.query_count();
            fairdg_round(&pool, &oracle, &mut ledger, DebtRule::Verbatim).unwrap();
            assert!(oracle.query_count() - before <= (pool.k() * pool.n()) as u64);
        }
        for k in 1..=4 {
            let pool = WorkerPool::new(vec![1.0; 4], vec![0.0; 4], k).unwrap();
            let oracle = UtilityOracle::modular(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
            dg_round(&pool, &oracle).unwrap();
            assert!(oracle.query_count() <= (k * 4) as u64);
        }
    }

    #[test]
    fn homogeneous_requirement_debt_stays_below_one() {
        for (n, k, r) in [(10, 6, 0.5), (7, 3, 3.0 / 7.0), (5, 2, 0.25), (4, 1, 0.25), (6, 5, 0.8)] {
            let pool = uniform_pool(n, k, r);
            let oracle = UtilityOracle::accuracy(0.05, 0.5, -0.2, pool.sample_counts()).unwrap();
            let mut ledger = DebtLedger::new(n);
            for _ in 0..5000 {
                let s = fairdg_round(&pool, &oracle, &mut ledger, DebtRule::Verbatim).unwrap();
                assert_eq!(s.len(), k);
                let worst = ledger.debts(pool.fairness()).into_iter().fold(f64::MIN, f64::max);
                assert!(worst < 1.0, "n={n} k={k} r={r}: debt {worst} at round {}", ledger.round());
            }
        }
    }

    #[test]
    fn round_robin_examples() {
        let pool = WorkerPool::new(vec![1.0, 1.0], vec![0.5, 0.5], 1).unwrap();
        let rounds = round_robin_policy(&pool, 4).unwrap();
        assert_eq!(rounds, vec![vec![0], vec![0], vec![1], vec![1]]);

        let pool = WorkerPool::new(vec![1.0; 3], vec![0.0; 3], 2).unwrap();
        assert!(round_robin_policy(&pool, 5).unwrap().iter().all(|r| r == &vec![0, 1]));

        let pool = WorkerPool::new(vec![1.0; 3], vec![0.9; 3], 2).unwrap();
        assert!(matches!(round_robin_policy(&pool, 5), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn round_robin_meets_table_one_requirements() {
        let pool = instances::table_one_pool(0.42).unwrap();
        let horizon = 10_000;
        let rounds = round_robin_policy(&pool, horizon).unwrap();
        let mut counts = [0usize; 10];
        for round in &rounds {
            assert_eq!(round.len(), 6);
            assert!(round.windows(2).all(|w| w[0] < w[1]));
            for &u in round {
                counts[u] += 1;
            }
        }
        for (c, r) in counts.iter().zip(pool.fairness()) {
            assert!(*c as f64 / horizon as f64 >= r - 1.0 / horizon as f64);
        }
    }
}

//! The four commands: seeded policy runs, the LP optimum, the β sweep and
//! the oracle checks.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use fairsub::discrete::{dg_round, fairdg_round, round_robin_policy, DebtLedger};
use fairsub::greedy::{fair_continuous_greedy, GreedyOutcome};
use fairsub::lp::{solve_uopt_with_cap, LpSolution, LpStatus};
use fairsub::metrics::{bound_certificates, fairness_report, BoundCertificate, FairnessReport, SelectionTrace};
use fairsub::multilinear::ExtensionEstimator;
use fairsub::oracle::{check_submodular_monotone, PropertyReport, MAX_CHECK_SIZE};
use fairsub::polytope::is_feasible;
use fairsub::rng::{derive_seed, round_rng};
use fairsub::rounding::dep_round;
use fairsub::{UtilityOracle, WorkerPool};

use crate::config::{Policy, Settings};
use crate::output::{cell, ids_cell, opt_cell, Manifest, Table};

/// One policy executed for the configured horizon.
pub struct PolicyRun {
    pub policy: Policy,
    pub trace: SelectionTrace,
    pub greedy: Option<GreedyOutcome>,
}

/// Runs `policy` on `pool` for `horizon` rounds.
///
/// The continuous-greedy policies compute `y(1)` once and round it
/// independently every round (round `t` uses its own stream of `seed`); DG
/// computes its set once and replays it; FairDG and the slot policy are
/// sequential by nature.
pub fn run_policy(
    settings: &Settings,
    pool: &WorkerPool,
    oracle: &UtilityOracle,
    policy: Policy,
    seed: u64,
    audit_u_opt: Option<f64>,
) -> Result<PolicyRun> {
    let (n, k, horizon) = (pool.n(), pool.k(), settings.horizon);
    if policy.needs_feasible() {
        pool.require_feasible().with_context(|| format!("policy {} needs a feasible requirement", policy.name()))?;
    }
    let mut trace = SelectionTrace::with_capacity(n, k, horizon);
    let mut greedy = None;
    match policy {
        Policy::Faircg1 | Policy::Faircg2 => {
            let variant = policy.variant().unwrap_or(fairsub::greedy::Variant::Cg1);
            let cfg = settings.greedy_config(variant, settings.estimator.seed, audit_u_opt);
            let out = fair_continuous_greedy(pool, oracle, &cfg)?;
            let rounds: Vec<(Vec<usize>, f64)> = (0..horizon as u64)
                .into_par_iter()
                .map(|t| {
                    let set = dep_round(&out.y, &mut round_rng(seed, t))?;
                    let value = oracle.evaluate(&set)?;
                    Ok((set, value))
                })
                .collect::<fairsub::Result<_>>()?;
            for (set, value) in rounds {
                trace.push(set, value)?;
            }
            greedy = Some(out);
        }
        Policy::Fairdg => {
            let mut ledger = DebtLedger::new(n);
            for _ in 0..horizon {
                let set = fairdg_round(pool, oracle, &mut ledger, settings.debt_rule())?;
                let value = oracle.evaluate(&set)?;
                trace.push(set, value)?;
            }
        }
        Policy::Dg => {
            let set = dg_round(pool, oracle)?;
            let value = oracle.evaluate(&set)?;
            for _ in 0..horizon {
                trace.push(set.clone(), value)?;
            }
        }
        Policy::Roundrobin => {
            for set in round_robin_policy(pool, horizon)? {
                let value = oracle.evaluate(&set)?;
                trace.push(set, value)?;
            }
        }
    }
    Ok(PolicyRun { policy, trace, greedy })
}

/// `U_opt` when the subset count is within the cap; `None` (with a warning)
/// otherwise.
fn optional_uopt(settings: &Settings, pool: &WorkerPool, oracle: &UtilityOracle) -> Result<Option<LpSolution>> {
    match solve_uopt_with_cap(pool, oracle, settings.lp_variable_cap) {
        Ok(sol) => Ok(Some(sol)),
        Err(fairsub::Error::Size { .. }) => {
            warn!("skipping U_opt: C({}, {}) exceeds lp_variable_cap", pool.n(), pool.k());
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn certificate(
    settings: &Settings,
    pool: &WorkerPool,
    oracle: &UtilityOracle,
    out: &GreedyOutcome,
    u_opt: f64,
    seed: u64,
) -> Result<BoundCertificate> {
    let mut estimator = ExtensionEstimator::new(settings.estimator_config(seed), pool.n())?;
    Ok(bound_certificates(pool, oracle, &out.y, u_opt, &mut estimator)?)
}

pub struct RunSummary {
    pub average_utility: f64,
    pub u_opt: Option<f64>,
    pub report: FairnessReport,
    pub certificate: Option<BoundCertificate>,
    pub manifest: Manifest,
}

const CERT_SEED_LABEL: u64 = 0x6365_7274;

pub fn cmd_run(settings: &Settings) -> Result<RunSummary> {
    let started = Instant::now();
    let pool = settings.pool()?;
    let oracle = settings.oracle()?;
    let policy = settings.policy;
    if policy.needs_feasible() && !pool.is_feasible() {
        bail!(
            "infeasible fairness requirement for policy {}: sum of r is {} but k is {}",
            policy.name(),
            pool.fairness_sum(),
            pool.k()
        );
    }
    let lp = if pool.is_feasible() { optional_uopt(settings, &pool, &oracle)? } else { None };
    let lp_queries = oracle.query_count();
    let u_opt = lp.as_ref().filter(|s| s.is_optimal()).map(|s| s.u_opt);

    let run = run_policy(settings, &pool, &oracle, policy, settings.master_seed, u_opt)?;
    let report = fairness_report(&run.trace, pool.fairness())?;
    let dir = &settings.out;
    let mut files = vec!["rounds.csv", "fractions.csv", "element_trace.csv"];
    write_rounds(&run.trace, dir)?;
    write_fractions(&run.trace, &report, pool.fairness(), dir)?;
    write_element_trace(&run.trace, settings.trace_element, dir)?;

    let mut cert = None;
    if let Some(out) = &run.greedy {
        write_greedy_steps(out, dir)?;
        files.push("greedy_steps.csv");
        if let Some(u) = u_opt {
            let c = certificate(settings, &pool, &oracle, out, u, derive_seed(settings.master_seed, CERT_SEED_LABEL))?;
            write_certificates(&c, dir)?;
            files.push("certificates.csv");
            cert = Some(c);
        }
    }

    let average = run.trace.average_utility();
    let mut manifest = base_manifest(settings, "run");
    manifest.set("policy", policy.name());
    manifest.set("horizon", settings.horizon);
    manifest.set("rounding_seed", settings.master_seed);
    manifest.set("sum_r", pool.fairness_sum());
    manifest.set("feasible", pool.is_feasible());
    manifest.set("average_utility", average);
    manifest.set("u_opt", opt_cell(u_opt));
    manifest.set("utility_ratio", opt_cell(u_opt.map(|u| average / u)));
    manifest.set("unsatisfied", ids_cell(&report.unsatisfied()));
    if let Some(out) = &run.greedy {
        manifest.set("estimator_mode", out.mode);
        manifest.set("step_count", out.steps.len());
        manifest.set("f_y1", out.final_value);
        manifest.set("max_step_slack", out.max_slack);
        manifest.set("min_lemma_gap", opt_cell(out.min_lemma_gap()));
    }
    if let Some(c) = &cert {
        manifest.set("cg1_certificate", c.cg1_holds);
        manifest.set("cg2_certificate", c.cg2_holds);
    }
    manifest.set("oracle_queries_lp", lp_queries);
    manifest.set("oracle_queries_total", oracle.query_count());
    manifest.set("files", files.join(" "));
    manifest.set("wall_time_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    manifest.write(dir)?;
    info!("{} finished: average utility {average}", policy.name());
    Ok(RunSummary { average_utility: average, u_opt, report, certificate: cert, manifest })
}

pub fn cmd_opt(settings: &Settings) -> Result<LpSolution> {
    let started = Instant::now();
    let pool = settings.pool()?;
    let oracle = settings.oracle()?;
    let sol = solve_uopt_with_cap(&pool, &oracle, settings.lp_variable_cap).map_err(|e| match e {
        fairsub::Error::Size { actual, limit, .. } => anyhow::anyhow!(
            "C({}, {}) = {actual} subsets exceeds lp_variable_cap = {limit}; use a smaller n or k, or raise the cap",
            pool.n(),
            pool.k()
        ),
        e => e.into(),
    })?;
    if sol.status == LpStatus::Infeasible {
        bail!("infeasible fairness requirement: sum of r is {} but k is {}", pool.fairness_sum(), pool.k());
    }
    let mut table = Table::new(&["subset", "f", "q"])?;
    for entry in sol.support() {
        table.row(&[ids_cell(entry.subset), cell(entry.value), cell(entry.q)])?;
    }
    table.write(&settings.out, "lp_support.csv")?;
    let mut manifest = base_manifest(settings, "opt");
    manifest.set("u_opt", sol.u_opt);
    manifest.set("variables", sol.subsets.len());
    manifest.set("support_size", sol.support().len());
    manifest.set("pivots", sol.pivots);
    manifest.set("oracle_queries_total", oracle.query_count());
    manifest.set("files", "lp_support.csv");
    manifest.set("wall_time_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    manifest.write(&settings.out)?;
    Ok(sol)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub algo: Policy,
    pub status: &'static str,
    pub u_opt: Option<f64>,
    pub average_utility: Option<f64>,
    pub empirical_ratio: Option<f64>,
    pub f_y1: Option<f64>,
    pub bound_ratio: Option<f64>,
    pub c_r: Option<f64>,
    pub queries: u64,
}

fn sweep_point(settings: &Settings, index: usize, beta: f64) -> Result<Vec<SweepRow>> {
    let base = settings.r_base.as_deref().context("a β sweep requires `r_base`")?;
    let r: Vec<f64> = base.iter().map(|r| beta * r).collect();
    let blank = |algo, status| SweepRow {
        beta,
        algo,
        status,
        u_opt: None,
        average_utility: None,
        empirical_ratio: None,
        f_y1: None,
        bound_ratio: None,
        c_r: None,
        queries: 0,
    };
    if r.iter().any(|&x| !(0.0..=1.0).contains(&x)) || !is_feasible(&r, settings.k) {
        warn!("beta {beta}: requirement outside [0, 1] or sum of r {} > k = {}; skipped", r.iter().sum::<f64>(), settings.k);
        return Ok(Policy::FAIR.iter().map(|&a| blank(a, "infeasible")).collect());
    }
    let pool = settings.pool_for_beta(beta)?;
    let lp_oracle = settings.oracle()?;
    let lp = solve_uopt_with_cap(&pool, &lp_oracle, settings.lp_variable_cap)?;
    let u_opt = lp.u_opt;
    let c_r = fairsub::metrics::rate_constant(pool.fairness(), pool.k());
    let point_seed = derive_seed(settings.master_seed, index as u64);
    Policy::FAIR
        .iter()
        .enumerate()
        .map(|(j, &algo)| {
            let oracle = settings.oracle()?;
            let seed = derive_seed(point_seed, j as u64);
            let run = run_policy(settings, &pool, &oracle, algo, seed, None)?;
            let avg = run.trace.average_utility();
            let (f_y1, bound_ratio) = match (&run.greedy, algo) {
                (Some(out), Policy::Faircg1) => {
                    let c = certificate(settings, &pool, &oracle, out, u_opt, derive_seed(seed, CERT_SEED_LABEL))?;
                    (Some(c.lhs.value), Some(c.cg1_ratio()))
                }
                (Some(out), _) => {
                    let c = certificate(settings, &pool, &oracle, out, u_opt, derive_seed(seed, CERT_SEED_LABEL))?;
                    (Some(c.lhs.value), Some(c.cg2_ratio()))
                }
                (None, _) => (None, None),
            };
            Ok(SweepRow {
                beta,
                algo,
                status: "ok",
                u_opt: Some(u_opt),
                average_utility: Some(avg),
                empirical_ratio: Some(avg / u_opt),
                f_y1,
                bound_ratio,
                c_r: Some(c_r),
                queries: oracle.query_count(),
            })
        })
        .collect()
}

pub fn cmd_sweep(settings: &Settings) -> Result<Vec<SweepRow>> {
    let started = Instant::now();
    if settings.r_base.is_none() {
        bail!("sweep needs `r_base` in the configuration");
    }
    let points: Vec<Vec<SweepRow>> = settings
        .betas
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| sweep_point(settings, i, beta))
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = points.into_iter().flatten().collect();
    let mut table = Table::new(&[
        "beta",
        "algo",
        "status",
        "u_opt",
        "average_utility",
        "empirical_ratio",
        "f_y1",
        "bound_ratio",
        "c_r",
        "oracle_queries",
    ])?;
    for r in &rows {
        table.row(&[
            cell(r.beta),
            cell(r.algo.name()),
            cell(r.status),
            opt_cell(r.u_opt),
            opt_cell(r.average_utility),
            opt_cell(r.empirical_ratio),
            opt_cell(r.f_y1),
            opt_cell(r.bound_ratio),
            opt_cell(r.c_r),
            cell(r.queries),
        ])?;
    }
    table.write(&settings.out, "sweep.csv")?;
    let mut manifest = base_manifest(settings, "sweep");
    manifest.set("horizon", settings.horizon);
    manifest.set("betas", settings.betas.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "));
    manifest.set("oracle_queries_total", rows.iter().map(|r| r.queries).sum::<u64>());
    manifest.set("files", "sweep.csv");
    manifest.set("wall_time_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    manifest.write(&settings.out)?;
    Ok(rows)
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: &'static str,
    pub detail: String,
}

pub fn cmd_check(settings: &Settings) -> Result<Vec<CheckResult>> {
    let pool = settings.pool()?;
    let oracle = settings.oracle()?;
    let mut results = Vec::new();
    let feasible = pool.is_feasible();
    results.push(CheckResult {
        name: "feasibility",
        status: if feasible { "pass" } else { "fail" },
        detail: format!("sum of r is {} and k is {}", pool.fairness_sum(), pool.k()),
    });
    let property = if pool.n() > MAX_CHECK_SIZE {
        CheckResult { name: "monotone_submodular", status: "skipped", detail: format!("n > {MAX_CHECK_SIZE}") }
    } else {
        match check_submodular_monotone(&oracle)? {
            PropertyReport::Pass => CheckResult { name: "monotone_submodular", status: "pass", detail: String::new() },
            other => CheckResult { name: "monotone_submodular", status: "fail", detail: format!("{other:?}") },
        }
    };
    results.push(property);
    if feasible {
        let horizon = settings.horizon;
        let rounds = round_robin_policy(&pool, horizon)?;
        let mut trace = SelectionTrace::with_capacity(pool.n(), pool.k(), horizon);
        for set in rounds {
            trace.push(set, 0.0)?;
        }
        let short: Vec<usize> = trace
            .fractions()
            .iter()
            .zip(pool.fairness())
            .enumerate()
            .filter(|(_, (f, r))| **f < *r - 1.0 / horizon as f64)
            .map(|(u, _)| u)
            .collect();
        results.push(CheckResult {
            name: "slot_policy_fractions",
            status: if short.is_empty() { "pass" } else { "fail" },
            detail: format!("horizon {horizon}; short elements [{}]", ids_cell(&short)),
        });
    }
    let mut table = Table::new(&["check", "status", "detail"])?;
    for r in &results {
        table.row(&[cell(r.name), cell(r.status), r.detail.clone()])?;
    }
    table.write(&settings.out, "checks.csv")?;
    let mut manifest = base_manifest(settings, "check");
    manifest.set("oracle_queries_total", oracle.query_count());
    manifest.set("files", "checks.csv");
    manifest.write(&settings.out)?;
    Ok(results)
}

fn base_manifest(settings: &Settings, command: &str) -> Manifest {
    let mut m = Manifest::new();
    m.set("command", command);
    m.set("config_sha256", settings.config_hash());
    m.set("master_seed", settings.master_seed);
    m.set("estimator_seed", settings.estimator.seed);
    m.set("profile", format!("{:?}", settings.profile).to_lowercase());
    m.set("n", settings.n());
    m.set("k", settings.k);
    m
}

fn write_rounds(trace: &SelectionTrace, dir: &Path) -> Result<()> {
    let mut table = Table::new(&["round", "selected", "utility", "running_average"])?;
    let running = trace.running_average();
    for (t, ((s, v), avg)) in trace.selections().iter().zip(trace.utilities()).zip(&running).enumerate() {
        table.row(&[cell(t + 1), ids_cell(s), cell(v), cell(avg)])?;
    }
    table.write(dir, "rounds.csv")?;
    Ok(())
}

fn write_fractions(trace: &SelectionTrace, report: &FairnessReport, r: &[f64], dir: &Path) -> Result<()> {
    let mut table = Table::new(&["element", "requirement", "count", "fraction", "satisfied", "max_debt"])?;
    for (u, (e, c)) in report.elements.iter().zip(trace.counts()).enumerate() {
        table.row(&[cell(u), cell(r[u]), cell(c), cell(e.fraction), cell(e.satisfied), cell(e.max_debt)])?;
    }
    table.write(dir, "fractions.csv")?;
    Ok(())
}

fn write_element_trace(trace: &SelectionTrace, u: usize, dir: &Path) -> Result<()> {
    let mut table = Table::new(&["round", "element", "fraction"])?;
    for (t, f) in trace.prefix_fractions(u).iter().enumerate() {
        table.row(&[cell(t + 1), cell(u), cell(f)])?;
    }
    table.write(dir, "element_trace.csv")?;
    Ok(())
}

fn write_greedy_steps(out: &GreedyOutcome, dir: &Path) -> Result<()> {
    let mut table = Table::new(&["step", "tau", "value", "xw", "slack", "lemma_gap"])?;
    for (i, s) in out.steps.iter().enumerate() {
        table.row(&[cell(i), cell(s.tau), cell(s.value), cell(s.xw), cell(s.slack), opt_cell(s.lemma_gap)])?;
    }
    table.write(dir, "greedy_steps.csv")?;
    Ok(())
}

fn write_certificates(c: &BoundCertificate, dir: &Path) -> Result<()> {
    let mut table = Table::new(&[
        "c_r",
        "u_opt",
        "f_y1",
        "f_y1_std_err",
        "f_r",
        "f_r_std_err",
        "cg1_bound",
        "cg2_bound",
        "cg1_holds",
        "cg2_holds",
        "statistical",
    ])?;
    table.row(&[
        cell(c.c_r),
        cell(c.u_opt),
        cell(c.lhs.value),
        cell(c.lhs.std_err),
        cell(c.f_of_r.value),
        cell(c.f_of_r.std_err),
        cell(c.cg1_bound),
        cell(c.cg2_bound),
        cell(c.cg1_holds),
        cell(c.cg2_holds),
        cell(c.statistical),
    ])?;
    table.write(dir, "certificates.csv")?;
    Ok(())
}

//! Run configuration: the TOML schema, profiles and command-line overrides,
//! resolved into [`Settings`].

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fairsub::discrete::DebtRule;
use fairsub::greedy::{ContinuousGreedyConfig, Variant};
use fairsub::lp::DEFAULT_VARIABLE_CAP;
use fairsub::multilinear::{EstimatorConfig, EstimatorMode, DEFAULT_CHUNK_SIZE, DEFAULT_EXACT_THRESHOLD};
use fairsub::rng::derive_seed;
use fairsub::{UtilityOracle, WorkerPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 25 greedy steps, 10⁴ samples per estimate, 10⁴ rounds.
    Fast,
    /// n² greedy steps, max(n⁵, 10⁴) samples, 10⁵ rounds.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Faircg1,
    Faircg2,
    Fairdg,
    Dg,
    Roundrobin,
}

impl Policy {
    pub const FAIR: [Policy; 3] = [Policy::Faircg1, Policy::Faircg2, Policy::Fairdg];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Faircg1 => "faircg1",
            Policy::Faircg2 => "faircg2",
            Policy::Fairdg => "fairdg",
            Policy::Dg => "dg",
            Policy::Roundrobin => "roundrobin",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Policy::Faircg1 => Some(Variant::Cg1),
            Policy::Faircg2 => Some(Variant::Cg2),
            _ => None,
        }
    }

    /// Policies that must be given a feasible requirement.
    pub fn needs_feasible(self) -> bool {
        self != Policy::Dg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityConfig {
    /// `1 - a - b·(ΣL)^c` over the pool's sample counts.
    Accuracy {
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default = "default_b")]
        b: f64,
        #[serde(default = "default_c")]
        c: f64,
    },
    Coverage { covers: Vec<Vec<usize>>, item_weights: Vec<f64> },
    Modular { weights: Vec<f64> },
}

fn default_a() -> f64 {
    0.05
}
fn default_b() -> f64 {
    0.5
}
fn default_c() -> f64 {
    -0.2
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig::Accuracy { a: default_a(), b: default_b(), c: default_c() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorModeConfig {
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub mode: Option<EstimatorModeConfig>,
    pub samples: Option<usize>,
    pub exact_threshold: Option<usize>,
    pub chunk_size: Option<usize>,
    pub common_random_numbers: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DebtRuleConfig {
    Verbatim,
    Strict,
}

/// The file schema. Every field except `k` and `sample_counts` is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub k: usize,
    pub sample_counts: Vec<f64>,
    /// Explicit requirement vector; mutually exclusive with `beta`.
    pub fairness: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub r_base: Option<Vec<f64>>,
    pub policy: Option<Policy>,
    pub horizon: Option<usize>,
    pub master_seed: Option<u64>,
    pub profile: Option<Profile>,
    pub step_count: Option<usize>,
    pub debt_rule: Option<DebtRuleConfig>,
    pub lp_variable_cap: Option<u128>,
    pub trace_element: Option<usize>,
    pub betas: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub utility: UtilityConfig,
    #[serde(default)]
    pub estimator: EstimatorSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
    pub out: Option<PathBuf>,
}

/// The estimator as resolved, in a hashable form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedEstimator {
    pub mode: EstimatorModeConfig,
    pub samples: usize,
    pub exact_threshold: usize,
    pub chunk_size: usize,
    pub common_random_numbers: bool,
    pub seed: u64,
}

/// Every value that affects results. Serialized to form the config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub k: usize,
    pub sample_counts: Vec<f64>,
    pub fairness: Vec<f64>,
    pub beta: Option<f64>,
    pub r_base: Option<Vec<f64>>,
    pub utility: UtilityConfig,
    pub policy: Policy,
    pub horizon: usize,
    pub master_seed: u64,
    pub profile: Profile,
    pub step_count: usize,
    pub estimator: ResolvedEstimator,
    pub debt_rule: DebtRuleConfig,
    pub lp_variable_cap: u128,
    pub trace_element: usize,
    pub betas: Vec<f64>,
    #[serde(skip)]
    pub out: PathBuf,
}

const ESTIMATOR_SEED_LABEL: u64 = 0x6573_7469_6d61_746f;

impl Settings {
    pub fn resolve(cfg: RunConfig, overrides: &Overrides) -> Result<Self> {
        let n = cfg.sample_counts.len();
        if let Some(declared) = cfg.n {
            if declared != n {
                bail!("n = {declared} but sample_counts has {n} entries");
            }
        }
        if cfg.k == 0 {
            bail!("k must be at least 1");
        }
        let fairness = match (&cfg.fairness, cfg.beta) {
            (Some(_), Some(_)) => bail!("give either `fairness` or `beta`, not both"),
            (Some(r), None) => r.clone(),
            (None, Some(beta)) => {
                let base = cfg.r_base.as_ref().context("`beta` requires `r_base`")?;
                base.iter().map(|r| beta * r).collect()
            }
            (None, None) => vec![0.0; n],
        };
        if fairness.len() != n {
            bail!("fairness has {} entries, expected {n}", fairness.len());
        }
        if let Some(base) = &cfg.r_base {
            if base.len() != n {
                bail!("r_base has {} entries, expected {n}", base.len());
            }
        }

        let profile = overrides.profile.or(cfg.profile).unwrap_or(Profile::Fast);
        let master_seed = overrides.seed.or(cfg.master_seed).unwrap_or(0);
        let (profile_steps, profile_samples, profile_horizon) = match profile {
            Profile::Fast => (25, 10_000, 10_000),
            Profile::Paper => (n * n, (n as u64).pow(5).max(10_000) as usize, 100_000),
        };
        let est = &cfg.estimator;
        let estimator = ResolvedEstimator {
            mode: est.mode.unwrap_or(EstimatorModeConfig::Auto),
            samples: est.samples.unwrap_or(profile_samples),
            exact_threshold: est.exact_threshold.unwrap_or(DEFAULT_EXACT_THRESHOLD),
            chunk_size: est.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE),
            common_random_numbers: est.common_random_numbers.unwrap_or(true),
            seed: est.seed.unwrap_or_else(|| derive_seed(master_seed, ESTIMATOR_SEED_LABEL)),
        };
        if estimator.samples == 0 || estimator.chunk_size == 0 {
            bail!("estimator samples and chunk_size must be positive");
        }
        let step_count = cfg.step_count.unwrap_or(profile_steps);
        if step_count == 0 {
            bail!("step_count must be at least 1");
        }
        let horizon = cfg.horizon.unwrap_or(profile_horizon);
        if horizon == 0 {
            bail!("horizon must be at least 1");
        }
        let trace_element = cfg.trace_element.unwrap_or(0);
        if trace_element >= n.max(1) {
            bail!("trace_element {trace_element} is outside the ground set of size {n}");
        }
        let settings = Settings {
            k: cfg.k,
            sample_counts: cfg.sample_counts,
            fairness,
            beta: cfg.beta,
            r_base: cfg.r_base,
            utility: cfg.utility,
            policy: cfg.policy.unwrap_or(Policy::Fairdg),
            horizon,
            master_seed,
            profile,
            step_count,
            estimator,
            debt_rule: cfg.debt_rule.unwrap_or(DebtRuleConfig::Verbatim),
            lp_variable_cap: cfg.lp_variable_cap.unwrap_or(DEFAULT_VARIABLE_CAP),
            trace_element,
            betas: cfg.betas.unwrap_or_else(|| fairsub::instances::TABLE_ONE_BETAS.to_vec()),
            out: overrides.out.clone().or(cfg.out).unwrap_or_else(|| PathBuf::from("out")),
        };
        // Builds fail early on bad pools and oracles.
        settings.pool()?;
        settings.oracle()?;
        Ok(settings)
    }

    pub fn n(&self) -> usize {
        self.sample_counts.len()
    }

    pub fn pool(&self) -> Result<WorkerPool> {
        Ok(WorkerPool::new(self.sample_counts.clone(), self.fairness.clone(), self.k)?)
    }

    /// The pool with `r = β · r_base`.
    pub fn pool_for_beta(&self, beta: f64) -> Result<WorkerPool> {
        let base = self.r_base.as_ref().context("a β sweep requires `r_base`")?;
        Ok(WorkerPool::new(self.sample_counts.clone(), base.iter().map(|r| beta * r).collect(), self.k)?)
    }

    /// A fresh oracle with a zero query counter.
    pub fn oracle(&self) -> Result<UtilityOracle> {
        let n = self.n();
        let oracle = match &self.utility {
            UtilityConfig::Accuracy { a, b, c } => UtilityOracle::accuracy(*a, *b, *c, &self.sample_counts)?,
            UtilityConfig::Coverage { covers, item_weights } => {
                UtilityOracle::coverage(covers.clone(), item_weights.clone())?
            }
            UtilityConfig::Modular { weights } => UtilityOracle::modular(weights.clone())?,
        };
        if oracle.ground_size() != n {
            bail!("utility is defined on {} elements, pool has {n}", oracle.ground_size());
        }
        Ok(oracle)
    }

    pub fn estimator_config(&self, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            mode: match self.estimator.mode {
                EstimatorModeConfig::Auto => EstimatorMode::Auto,
                EstimatorModeConfig::Exact => EstimatorMode::Exact,
                EstimatorModeConfig::MonteCarlo => EstimatorMode::MonteCarlo,
            },
            samples: Some(self.estimator.samples),
            exact_threshold: self.estimator.exact_threshold,
            chunk_size: self.estimator.chunk_size,
            common_random_numbers: self.estimator.common_random_numbers,
            seed,
        }
    }

    pub fn greedy_config(&self, variant: Variant, seed: u64, audit_u_opt: Option<f64>) -> ContinuousGreedyConfig {
        ContinuousGreedyConfig {
            step_count: Some(self.step_count),
            estimator: self.estimator_config(seed),
            variant,
            audit_u_opt,
        }
    }

    pub fn debt_rule(&self) -> DebtRule {
        match self.debt_rule {
            DebtRuleConfig::Verbatim => DebtRule::Verbatim,
            DebtRuleConfig::Strict => DebtRule::Strict,
        }
    }

    /// SHA-256 of the canonical JSON form of every result-affecting field.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

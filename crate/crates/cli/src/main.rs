use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use fairsub_cli::config::{Overrides, Profile, RunConfig, Settings};
use fairsub_cli::harness;

#[derive(Parser)]
#[command(name = "fairsub", version, about = "Fair multi-round submodular scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy for the configured horizon and write traces.
    Run(Common),
    /// Solve the stationary-policy LP and dump the optimal support.
    Opt(Common),
    /// Run every fair policy over the β grid.
    Sweep(Common),
    /// Feasibility, oracle property and slot-policy checks.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Profile defaults for unset fields; overrides `profile`.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Output directory; overrides `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let cfg = RunConfig::load(&self.config)?;
        let overrides = Overrides { seed: self.seed, profile: self.profile, out: self.out.clone() };
        Settings::resolve(cfg, &overrides)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => {
            let s = c.settings()?;
            let summary = harness::cmd_run(&s)?;
            print!("{}", summary.manifest.render());
            Ok(true)
        }
        Command::Opt(c) => {
            let s = c.settings()?;
            let sol = harness::cmd_opt(&s)?;
            println!("u_opt={}", sol.u_opt);
            println!("support_size={}", sol.support().len());
            Ok(true)
        }
        Command::Sweep(c) => {
            let s = c.settings()?;
            for r in harness::cmd_sweep(&s)? {
                println!(
                    "beta={} algo={} status={} empirical_ratio={} bound_ratio={}",
                    r.beta,
                    r.algo.name(),
                    r.status,
                    r.empirical_ratio.map_or("-".into(), |v| format!("{v:.6}")),
                    r.bound_ratio.map_or("-".into(), |v| format!("{v:.6}")),
                );
            }
            Ok(true)
        }
        Command::Check(c) => {
            let s = c.settings()?;
            let results = harness::cmd_check(&s)?;
            for r in &results {
                println!("{}: {} {}", r.name, r.status, r.detail);
            }
            Ok(results.iter().all(|r| r.status != "fail"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

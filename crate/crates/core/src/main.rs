use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use sixdma::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "sixdma", version, about = "Multi-cell rotatable-array network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list; repeat for several seeds.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory (overrides the config's).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enforce every interference cap exactly in all solves.
    #[arg(long)]
    strict: bool,
    /// Use the full budgets instead of the reduced defaults.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scheme.
    Run(Common),
    /// Fixed uniform thresholds with rotation search.
    SweepFixedIpc {
        #[command(flatten)]
        common: Common,
        /// Threshold values in watts.
        #[arg(long = "sigma", value_delimiter = ',', default_values_t = vec![1e-9, 1e-11, 1e-13])]
        sigmas: Vec<f64>,
    },
    /// Proposed vs centralized on the triangular lattices.
    Scalability {
        #[command(flatten)]
        common: Common,
        #[arg(long = "cells", value_delimiter = ',', default_values_t = vec![3, 6, 10, 15])]
        cells: Vec<usize>,
    },
    /// Parse and validate a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Short end-to-end run followed by the trace invariant checks.
    SelfTest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> anyhow::Result<(ExperimentConfig, Option<PathBuf>, PathBuf)> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if !common.seeds.is_empty() {
        config.seeds = common.seeds.clone();
    }
    if common.strict {
        config.overrides.strict = Some(true);
    }
    if common.full_scale {
        config.full_scale = true;
    }
    let base = common.config.parent().map(Path::to_path_buf);
    let out = match (&common.out, &config.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => bail!("no output directory: pass --out or set output_dir"),
    };
    Ok((config, base, out))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let (config, base, out) = load(&common)?;
            let (report, _) = harness::run_experiment(&config, base.as_deref(), Some(&out))?;
            for s in &report.seeds {
                println!(
                    "{} seed {}: weighted sum-rate {:.4} (surrogate {:.4}), {} messages",
                    report.scheme, s.seed, s.final_actual_sum, s.final_surrogate_sum, s.messages
                );
            }
            println!("results in {}", out.display());
            Ok(report.all_checks_passed)
        }
        Command::SweepFixedIpc { common, sigmas } => {
            let (config, base, out) = load(&common)?;
            for r in harness::sweep_fixed_ipc(&config, base.as_deref(), &sigmas, &out)? {
                println!("sigma {:e} seed {}: {:.4}", r.sigma_w, r.seed, r.utility);
            }
            Ok(true)
        }
        Command::Scalability { common, cells } => {
            let (config, base, out) = load(&common)?;
            for r in harness::scalability_run(&config, base.as_deref(), &cells, &out)? {
                println!(
                    "M={} seed {}: proposed {:.4} centralized {:.4}, per-BS {:.3}s, centralized eval {:.3}s",
                    r.cells, r.seed, r.proposed, r.centralized, r.per_bs_iteration_s, r.centralized_eval_s
                );
            }
            Ok(true)
        }
        Command::ValidateConfig { config } => {
            let c = ExperimentConfig::load(&config)?;
            let base = config.parent();
            match c.resolve(base) {
                Ok((scenario, params)) => {
                    println!("ok: {} on {} ({} seeds)", c.scheme, scenario.name, c.seeds.len());
                    println!("{}", serde_json::to_string_pretty(&params)?);
                    Ok(true)
                }
                Err(e) => {
                    eprintln!("invalid config {}:", config.display());
                    for p in e.to_string().trim_start_matches("invalid configuration: ").split("; ") {
                        eprintln!("  - {p}");
                    }
                    Ok(false)
                }
            }
        }
        Command::SelfTest { out } => {
            let dir = match out {
                Some(d) => d,
                None => std::env::temp_dir().join("sixdma-self-test"),
            };
            let checks = sixdma::selftest::quick_suite(&dir).context("self-test run failed")?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
                for d in &c.details {
                    println!("    {d}");
                }
                ok &= c.passed;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

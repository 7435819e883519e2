//! `watchdog`: predict, simulate and sweep the two-hop algebraic watchdog.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;

use watchdog_core::harness::{self, report_json, sweep_with, HarnessError, ReportFormat, RunOptions};
use watchdog_core::theory::{self, TheoryParams};
use watchdog_core::{run_trials_with, selftest, write_report, write_reports, SimConfig};

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "watchdog", version, about = "Algebraic watchdog simulator for wireless network coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form misdetection predictions.
    Predict {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        h: u32,
        #[arg(long)]
        r12: Option<u32>,
        #[arg(long)]
        r21: Option<u32>,
        #[arg(long)]
        r31: u32,
        #[arg(long)]
        r32: u32,
        /// Sources cannot overhear each other (r12 = r21 = n).
        #[arg(long)]
        no_overhear: bool,
    },
    /// Run a Monte Carlo experiment from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        /// Worker threads (overrides WATCHDOG_THREADS).
        #[arg(long)]
        workers: Option<usize>,
        /// Write per-trial outcomes as CSV.
        #[arg(long)]
        trial_log: Option<PathBuf>,
    },
    /// Run one experiment per value of a config field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check field arithmetic, engine equivalence and radius selection.
    Selftest,
}

enum Failure {
    Validation(anyhow::Error),
    Io(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io(_) | HarnessError::Csv(_) => Failure::Io(e.into()),
            HarnessError::Json(ref je) if je.is_io() => Failure::Io(e.into()),
            _ => Failure::Validation(e.into()),
        }
    }
}

fn workers(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("WATCHDOG_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map(Some)
            .with_context(|| format!("WATCHDOG_THREADS={v} is not a thread count"))
            .map_err(Failure::Validation),
        Err(_) => Ok(None),
    }
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Io)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Validation)
}

fn predict(n: u32, h: u32, r12: Option<u32>, r21: Option<u32>, r31: u32, r32: u32, no_overhear: bool) -> Result<(), Failure> {
    let (r12, r21) = if no_overhear {
        (n, n)
    } else {
        match (r12, r21) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Failure::Validation(anyhow::anyhow!(
                    "--r12 and --r21 are required unless --no-overhear is given"
                )))
            }
        }
    };
    let tp = TheoryParams::new(n, h, r12, r21, r31, r32).map_err(|e| Failure::Validation(e.into()))?;
    println!("n={n} h={h} r12={r12} r21={r21} r31={r31} r32={r32}");
    println!("misdetection_v1  {:.6e}", theory::misdetection_v1(&tp));
    println!("misdetection_v2  {:.6e}", theory::misdetection_v2(&tp));
    println!("predicted_beta   {:.6e}", theory::predicted_beta(&tp));
    if no_overhear {
        let b = theory::predicted_beta_no_overhear(n, h, r31, r32).map_err(|e| Failure::Validation(e.into()))?;
        println!("beta_no_overhear {b:.6e}");
    }
    Ok(())
}

fn summarize(rep: &harness::SimReport) {
    let g = rep.gamma;
    println!(
        "gamma {:.6} [{:.6}, {:.6}]  bound/watcher {:.6}",
        g.rate, g.ci_low, g.ci_high, rep.predicted.gamma_bound_per_watcher
    );
    if let Some(b) = rep.beta {
        println!(
            "beta  {:.6} [{:.6}, {:.6}]  predicted {:.6e}",
            b.rate, b.ci_low, b.ci_high, rep.predicted.beta
        );
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Predict {
            n,
            h,
            r12,
            r21,
            r31,
            r32,
            no_overhear,
        } => predict(n, h, r12, r21, r31, r32, no_overhear),
        Command::Simulate {
            config,
            seed,
            trials,
            out,
            format,
            workers: w,
            trial_log,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let opts = RunOptions {
                workers: workers(w)?,
                trial_log,
            };
            info!("running {} trials, seed {}", cfg.trials, cfg.seed);
            let rep = run_trials_with(&cfg, &opts)?;
            match out {
                Some(path) => {
                    write_report(&rep, &path, format)?;
                    summarize(&rep);
                }
                None => println!("{}", report_json(&rep)?),
            }
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
            format,
            workers: w,
        } => {
            let cfg = load_config(&config)?;
            let opts = RunOptions {
                workers: workers(w)?,
                trial_log: None,
            };
            let reps = sweep_with(&cfg, &axis, &values, &opts)?;
            match out {
                Some(path) => write_reports(&reps, &path, format)?,
                None => {
                    let set = harness::ReportSet {
                        schema: harness::REPORT_SCHEMA.into(),
                        reports: reps,
                    };
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&set).map_err(|e| Failure::Io(e.into()))?
                    );
                }
            }
            Ok(())
        }
        Command::Selftest => {
            let mut ok = true;
            for suite in selftest::run_all() {
                let status = if suite.passed() { "PASS" } else { "FAIL" };
                println!("{status} {} ({} checks)", suite.name, suite.checks);
                for f in &suite.failures {
                    println!("    {f}");
                }
                ok &= suite.passed();
            }
            if ok {
                Ok(())
            } else {
                Err(Failure::Validation(anyhow::anyhow!("selftest failed")))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}

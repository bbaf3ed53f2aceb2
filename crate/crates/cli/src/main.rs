use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use eebf::calibration::{self, CalibrationSpec};
use eebf::harness::{self, figures, ExperimentConfig};

#[derive(Parser)]
#[command(name = "eebf", version, about = "Energy-efficient multi-cell beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its results directory.
    Run {
        /// Experiment configuration (TOML).
        #[arg(short, long)]
        config: PathBuf,
        /// Results directory, created if missing.
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(short, long)]
        jobs: Option<usize>,
    },
    /// Build the figure CSV series from one or more results directories.
    Figures {
        /// Output directory for the series.
        #[arg(short, long)]
        out: PathBuf,
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// Compare the deterministic gain matrix with Monte Carlo averages.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        /// Maximum median relative error.
        #[arg(long, default_value_t = calibration::DEFAULT_THRESHOLD)]
        threshold: f64,
    },
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, jobs: Option<usize>) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    log::info!(
        "{} drops x {} realizations x {} powers x {} schemes",
        cfg.n_drops,
        cfg.n_realizations,
        cfg.power_sweep_dbm.len(),
        cfg.schemes.len()
    );
    let output = harness::run_experiment_with_jobs(&cfg, jobs)?;
    let agg = harness::write_results(&out, &cfg, &output)?;
    println!("{:<16} {:>7} {:>14} {:>14} {:>6}", "scheme", "P_dBm", "mean_EE", "std_EE", "n");
    for a in &agg {
        println!(
            "{:<16} {:>7.1} {:>14.6e} {:>14.6e} {:>6}",
            a.scheme.name(),
            a.p_dbm,
            a.mean_ee,
            a.std_ee,
            a.n
        );
    }
    let s = output.stats;
    println!(
        "records {} (failed {}), asymptotic optimizations {}, conventional optimizations {}",
        s.records, s.failures, s.asymptotic_optimizer_calls, s.conventional_optimizer_calls
    );
    println!("results written to {}", out.display());
    Ok(if s.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn validate(seed: u64, draws: usize, threshold: f64) -> Result<ExitCode> {
    let spec = CalibrationSpec {
        draws,
        ..CalibrationSpec::standard(seed)
    };
    println!(
        "calibration: M={} K={} N_t={} draws={} lambda={}",
        spec.cells, spec.users_per_cell, spec.antennas, spec.draws, spec.lambda[0]
    );
    let report = calibration::run_calibration(&spec)?;
    println!("median relative error (all)    {:.4}", report.median_rel_err);
    println!("median relative error (direct) {:.4}", report.median_rel_err_direct);
    println!("median relative error (cross)  {:.4}", report.median_rel_err_cross);
    println!("max relative error             {:.4}", report.max_rel_err);
    if report.passes(threshold) {
        println!("PASS (threshold {threshold})");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL (threshold {threshold})");
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed, jobs } => run(config, out, seed, jobs),
        Command::Figures { out, results } => figures::write_figures(&results, &out)
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            })
            .map_err(Into::into),
        Command::Validate { seed, draws, threshold } => validate(seed, draws, threshold),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

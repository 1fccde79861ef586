//! Subcommand dispatch for the `kcoddp` binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kcoddp_core::geometry::SpaceTimePoint;
use kcoddp_core::oddp::{smallest_n_for_bound, truncation_bound, TruncationBoundInput};
use kcoddp_core::rng::derive_stream;
use kcoddp_core::synthgen::generate_synthetic;
use kcoddp_core::ttmcmc::MoveType;

use crate::archive_io::{read_archive, write_acceptance, write_archive, write_corr_sweep};
use crate::config::RunConfig;
use crate::corr_sweep::{run_corr_sweep, SweepSettings};
use crate::dataset::{load_dataset, write_dataset};
use crate::fitting::{fit_chains, predictive_draws, STREAM_PREDICT};
use crate::loo::{loo_cross_validation, write_loo_report};
use crate::predictive::{posterior_predictive, write_predictive};
use crate::w126::{w126_annual, HourlyOzoneSeries};

#[derive(Parser)]
#[command(
    name = "kcoddp",
    about = "Nonstationary spatio-temporal modeling by kernel convolution of an order-based dependent Dirichlet process",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus the overridable chain knobs shared by fit-like
/// subcommands. Precedence: flag > KCODDP_SEED > file > default.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Flat key=value config file ('#' comments).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_env()?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n_iter {
            cfg.n_iter = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.thin {
            cfg.thin = v;
        }
        if let Some(v) = self.chains {
            cfg.chains = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic nonstationary non-Gaussian dataset.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        n_grid: usize,
        #[arg(long, default_value_t = 5)]
        n_holdout: usize,
        #[arg(long, default_value_t = 50.0)]
        box_side: f64,
        #[arg(long, default_value = "data.csv")]
        out: PathBuf,
    },
    /// Fit the model (one archive per chain plus an acceptance summary).
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Leave-one-out cross-validation with a coverage report.
    Loo {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "loo_report.csv")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Posterior predictive summary at a new space-time point.
    Predict {
        #[arg(long)]
        data: PathBuf,
        /// Sample archive produced by `fit` on the same data.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        s1: f64,
        #[arg(long)]
        s2: f64,
        #[arg(long)]
        t: f64,
        /// Covariate value at the new site (regression mode only).
        #[arg(long)]
        x_cmaq: Option<f64>,
        /// Output CSV (defaults to predictive_<s1>_<s2>_<t>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Unconditional-correlation sweep over separation distance.
    Corr {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 1000)]
        n_configs: usize,
        #[arg(long, default_value_t = 4.0)]
        box_half: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "corr_sweep.csv")]
        out: PathBuf,
    },
    /// Truncation error bound, or the smallest level meeting a tolerance.
    Bound {
        /// Kernel supremum bound.
        #[arg(long = "M")]
        kernel_sup: f64,
        /// Number of observations.
        #[arg(long = "n")]
        n_obs: usize,
        #[arg(long)]
        alpha: f64,
        /// Truncation level to evaluate the bound at.
        #[arg(long = "N")]
        level: Option<usize>,
        /// Report the smallest level whose bound is at or below this.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Annual W126 ozone index from an hourly series.
    W126 {
        #[arg(long)]
        hourly: PathBuf,
        /// Optional CSV of monthly sums.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse and execute; returns the process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders its own help/usage text
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Flag > KCODDP_SEED > default.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    let mut cfg = RunConfig::default();
    cfg.apply_env()?;
    Ok(flag.unwrap_or(cfg.seed))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            seed,
            n_grid,
            n_holdout,
            box_side,
            out,
        } => {
            let seed = resolve_seed(seed)?;
            let data = generate_synthetic(seed, n_grid, n_holdout, box_side, [0.1, 0.01, 0.02])?;
            write_dataset(&out, &data)?;
            println!("wrote {} rows to {}", data.len(), out.display());
            Ok(())
        }
        Command::Fit {
            data,
            out_dir,
            config,
        } => {
            let cfg = config.resolve()?;
            let loaded = load_dataset(&data, cfg.log_regression)?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let archives = fit_chains(&loaded, &loaded.dataset, &cfg)?;
            let n_sites = loaded.dataset.len();
            let regression = loaded.regression_mode();
            let mut stats = Vec::new();
            for (chain, archive) in archives.iter().enumerate() {
                let path = out_dir.join(format!("samples_{chain}.csv"));
                write_archive(&path, archive, n_sites, regression)?;
                stats.push((chain, archive.stats));
                println!(
                    "chain {chain}: {} retained states, acceptance birth {:.3} death {:.3} no-change {:.3}",
                    archive.rows.len(),
                    archive.stats.rate(MoveType::Birth),
                    archive.stats.rate(MoveType::Death),
                    archive.stats.rate(MoveType::NoChange),
                );
            }
            if archives
                .iter()
                .all(|a| a.stats.rate(MoveType::NoChange) < 0.01)
            {
                eprintln!(
                    "warning: the chain is barely moving; tune the move scales (a1..a14) \
                     with pilot runs -- the field scales a12..a14 usually need to be much \
                     smaller than the rest (see README)"
                );
            }
            write_acceptance(&out_dir.join("acceptance.csv"), &stats)?;
            Ok(())
        }
        Command::Loo { data, out, config } => {
            let cfg = config.resolve()?;
            let loaded = load_dataset(&data, cfg.log_regression)?;
            let report = loo_cross_validation(&loaded, &cfg)?;
            write_loo_report(&out, &report)?;
            for (index, message) in &report.failures {
                eprintln!("fold {index} failed: {message}");
            }
            let pooled_nc: (usize, usize) = report
                .fold_stats
                .iter()
                .fold((0, 0), |acc, s| (acc.0 + s.proposed[2], acc.1 + s.accepted[2]));
            if pooled_nc.0 > 0 && (pooled_nc.1 as f64) < 0.01 * pooled_nc.0 as f64 {
                eprintln!(
                    "warning: fold chains are barely moving; tune the move scales (a1..a14) \
                     with pilot runs (see README)"
                );
            }
            println!(
                "coverage={:.4} ({} of {} inside the 95% intervals)",
                report.coverage,
                report.points.iter().filter(|p| p.included).count(),
                loaded.dataset.len(),
            );
            Ok(())
        }
        Command::Predict {
            data,
            samples,
            s1,
            s2,
            t,
            x_cmaq,
            out,
            seed,
        } => {
            let mut cfg = RunConfig::default();
            cfg.apply_env()?;
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let loaded = load_dataset(&data, cfg.log_regression)?;
            let archive = read_archive(&samples)?;
            if archive.rows.is_empty() {
                bail!("sample archive {} is empty", samples.display());
            }
            if archive.n_sites != loaded.dataset.len() {
                bail!(
                    "archive was fitted on {} sites but the dataset has {}",
                    archive.n_sites,
                    loaded.dataset.len()
                );
            }
            let x_raw = SpaceTimePoint::new(s1, s2, t);
            let x0 = loaded.scaling.scale_point(&x_raw);
            let covariate0 = match (loaded.regression_mode(), x_cmaq) {
                (true, Some(v)) => {
                    if !(v > 0.0) {
                        bail!("--x-cmaq must be > 0");
                    }
                    Some(if loaded.log_transformed { v.ln() } else { v })
                }
                (true, None) => bail!("regression mode needs --x-cmaq at the new site"),
                (false, Some(_)) => bail!("--x-cmaq given but the dataset has no covariate"),
                (false, None) => None,
            };
            let mut rng = derive_stream(cfg.seed, STREAM_PREDICT);
            let draws =
                predictive_draws(&archive.rows, &loaded.dataset, &x0, covariate0, &mut rng)?;
            let summary = posterior_predictive(&draws)?;
            let out = out.unwrap_or_else(|| {
                PathBuf::from(format!("predictive_{s1}_{s2}_{t}.csv"))
            });
            write_predictive(&out, &summary)?;
            println!(
                "median={} q025={} q975={} -> {}",
                summary.median,
                summary.q025,
                summary.q975,
                out.display()
            );
            Ok(())
        }
        Command::Corr {
            alpha,
            lambda,
            n_configs,
            box_half,
            seed,
            out,
        } => {
            let settings = SweepSettings {
                alpha,
                lambda,
                box_half,
                n_configs,
                seed: resolve_seed(seed)?,
                ..SweepSettings::default()
            };
            let rows = run_corr_sweep(&settings)?;
            write_corr_sweep(&out, &rows)?;
            for r in &rows {
                println!(
                    "separation={:.4} estimate={:.4} std_error={:.4}",
                    r.separation, r.estimate, r.std_error
                );
            }
            Ok(())
        }
        Command::Bound {
            kernel_sup,
            n_obs,
            alpha,
            level,
            tolerance,
        } => match (level, tolerance) {
            (Some(level_n), None) => {
                let b = truncation_bound(&TruncationBoundInput {
                    kernel_sup_m: kernel_sup,
                    n_obs,
                    alpha,
                    level_n,
                })?;
                println!("{b}");
                Ok(())
            }
            (None, Some(tol)) => {
                let n = smallest_n_for_bound(kernel_sup, n_obs, alpha, tol)?;
                println!("{n}");
                Ok(())
            }
            _ => bail!("give exactly one of --N or --tolerance"),
        },
        Command::W126 { hourly, out } => {
            let series = HourlyOzoneSeries::from_csv(&hourly)?;
            let summary = w126_annual(&series)?;
            println!("annual_index={}", summary.annual_index);
            println!("exceeds={}", summary.exceeds);
            if let Some(path) = out {
                write_monthly(&path, &summary.monthly)?;
            }
            Ok(())
        }
    }
}

fn write_monthly(path: &Path, monthly: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["month", "monthly_sum"])?;
    for (m, v) in monthly.iter().enumerate() {
        writer.write_record([(m + 1).to_string(), v.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

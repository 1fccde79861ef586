//! Leave-one-out cross-validation: fit on each fold, form the posterior
//! predictive at the held-out site, and report 95%-interval coverage.

use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use kcoddp_core::model::Dataset;
use kcoddp_core::rng::derive_stream;
use kcoddp_core::ttmcmc::{run_model_chain, MoveStats};

use crate::config::RunConfig;
use crate::dataset::LoadedDataset;
use crate::fitting::{build_prior_spec, initial_state, predictive_draws, STREAM_LOO_BASE};
use crate::predictive::posterior_predictive;

/// Per-held-out-point verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct LooPoint {
    pub index: usize,
    pub y_true: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
    pub included: bool,
}

/// Cross-validation outcome: per-point verdicts, overall coverage, chain
/// diagnostics, and any per-fold failures (recorded, not fatal).
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub points: Vec<LooPoint>,
    pub coverage: f64,
    pub fold_stats: Vec<MoveStats>,
    /// Smallest and largest atom count visited, per successful fold.
    pub k_bounds: Vec<(usize, usize)>,
    pub failures: Vec<(usize, String)>,
}

fn drop_row(data: &Dataset, index: usize) -> (Dataset, f64, Option<f64>) {
    let keep = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, x)| *x)
            .collect()
    };
    let points = data
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != index)
        .map(|(_, p)| *p)
        .collect();
    let covariate0 = data.covariate.as_ref().map(|c| c[index]);
    let train = Dataset::new(
        points,
        keep(&data.y),
        data.covariate.as_ref().map(|c| keep(c)),
    )
    .expect("fold construction preserves alignment");
    (train, data.y[index], covariate0)
}

fn run_fold(
    full: &LoadedDataset,
    cfg: &RunConfig,
    index: usize,
) -> Result<(LooPoint, MoveStats, (usize, usize))> {
    let (train, y_true, covariate0) = drop_row(&full.dataset, index);
    let spec = build_prior_spec(full, &train, cfg)?;
    let mut rng = derive_stream(cfg.seed, STREAM_LOO_BASE + index as u64);
    let (var, fixed) = initial_state(&spec, &train, cfg, &mut rng)?;
    let archive = run_model_chain(
        &train,
        &spec,
        &cfg.scales,
        cfg.weights,
        &var,
        &fixed,
        cfg.n_iter,
        cfg.burn_in,
        cfg.thin,
        &mut rng,
    )
    .with_context(|| format!("fold {index}"))?;
    let x0 = full.dataset.points[index];
    let draws = predictive_draws(&archive.rows, &train, &x0, covariate0, &mut rng)?;
    let summary = posterior_predictive(&draws)?;
    let included = y_true >= summary.q025 && y_true <= summary.q975;
    let k_lo = archive.k_trace.iter().copied().min().unwrap_or(0);
    let k_hi = archive.k_trace.iter().copied().max().unwrap_or(0);
    Ok((
        LooPoint {
            index,
            y_true,
            median: summary.median,
            q025: summary.q025,
            q975: summary.q975,
            included,
        },
        archive.stats,
        (k_lo, k_hi),
    ))
}

/// Run every fold (in parallel, one derived stream per fold) and assemble
/// the coverage report. Coverage counts included points over the full
/// dataset size, so failed folds count against it.
pub fn loo_cross_validation(full: &LoadedDataset, cfg: &RunConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let n = full.dataset.len();
    if n < 3 {
        anyhow::bail!("leave-one-out needs at least 3 observations");
    }
    let outcomes: Vec<(usize, Result<(LooPoint, MoveStats, (usize, usize))>)> = (0..n)
        .into_par_iter()
        .map(|i| (i, run_fold(full, cfg, i)))
        .collect();

    let mut points = Vec::new();
    let mut fold_stats = Vec::new();
    let mut k_bounds = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok((point, stats, kb)) => {
                points.push(point);
                fold_stats.push(stats);
                k_bounds.push(kb);
            }
            Err(e) => failures.push((i, format!("{e:#}"))),
        }
    }
    let included = points.iter().filter(|p| p.included).count();
    Ok(CoverageReport {
        points,
        coverage: included as f64 / n as f64,
        fold_stats,
        k_bounds,
        failures,
    })
}

/// Emit the per-point report as `loo_report.csv`.
pub fn write_loo_report(path: &Path, report: &CoverageReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["index", "y_true", "median", "q025", "q975", "included"])?;
    for p in &report.points {
        writer.write_record([
            p.index.to_string(),
            p.y_true.to_string(),
            p.median.to_string(),
            p.q025.to_string(),
            p.q975.to_string(),
            p.included.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

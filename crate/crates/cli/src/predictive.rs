//! Posterior predictive summaries: quantiles and a kernel-density grid
//! over the predictive draws.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Number of density grid points.
pub const DENSITY_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSummary {
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
    /// `(x, density)` pairs on a fixed grid spanning the draw range +-10%.
    pub density: Vec<(f64, f64)>,
}

/// Interpolated order-statistic quantile on a sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Summarize predictive draws: median, central 95% interval, and a
/// 256-point Gaussian kernel density with the normal-reference bandwidth.
pub fn posterior_predictive(draws: &[f64]) -> Result<PredictiveSummary> {
    if draws.is_empty() {
        bail!("empty predictive archive");
    }
    let mut sorted = draws.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let median = quantile_sorted(&sorted, 0.5);
    let q025 = quantile_sorted(&sorted, 0.025);
    let q975 = quantile_sorted(&sorted, 0.975);

    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = if draws.len() > 1 {
        (draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let span = (hi - lo).max(1e-9 * (1.0 + hi.abs()));
    let grid_lo = lo - 0.1 * span;
    let grid_hi = hi + 0.1 * span;
    // normal-reference rule, floored so constant archives stay finite
    let bandwidth = (1.06 * sd * n.powf(-0.2)).max(1e-6 * span.max(1e-9));
    let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt() * n);
    let density: Vec<(f64, f64)> = (0..DENSITY_GRID)
        .map(|g| {
            let x = grid_lo + (grid_hi - grid_lo) * g as f64 / (DENSITY_GRID - 1) as f64;
            let d: f64 = draws
                .iter()
                .map(|xi| {
                    let z = (x - xi) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm;
            (x, d)
        })
        .collect();
    Ok(PredictiveSummary {
        median,
        q025,
        q975,
        density,
    })
}

/// Emit a predictive summary: density rows with the quantile summary
/// repeated in constant columns.
pub fn write_predictive(path: &Path, summary: &PredictiveSummary) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["x", "density", "median", "q025", "q975"])?;
    for (x, d) in &summary.density {
        writer.write_record([
            x.to_string(),
            d.to_string(),
            summary.median.to_string(),
            summary.q025.to_string(),
            summary.q975.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use kcoddp_core::rng::derive_stream;
    use rand::Rng;

    #[test]
    fn constant_archive_collapses() {
        let s = posterior_predictive(&[2.5; 40]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q025, 2.5);
        assert_eq!(s.q975, 2.5);
        assert!(s.density.iter().all(|(_, d)| d.is_finite()));
    }

    #[test]
    fn quantiles_monotone() {
        let mut rng = derive_stream(90, 0);
        for _ in 0..50 {
            let draws: Vec<f64> = (0..200).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let s = posterior_predictive(&draws).unwrap();
            assert!(s.q025 <= s.median && s.median <= s.q975);
        }
    }

    /// Independent sort-based oracle with the same interpolation rule.
    fn oracle_quantile(draws: &[f64], p: f64) -> f64 {
        let mut v = draws.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < v.len() {
            v[lo] + frac * (v[lo + 1] - v[lo])
        } else {
            v[lo]
        }
    }

    #[test]
    fn quantiles_match_sort_oracle() {
        let mut rng = derive_stream(91, 0);
        for _ in 0..1000 {
            let n = rng.gen_range(1..50usize);
            let draws: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let s = posterior_predictive(&draws).unwrap();
            for (got, p) in [(s.q025, 0.025), (s.median, 0.5), (s.q975, 0.975)] {
                let expect = oracle_quantile(&draws, p);
                assert!(
                    (got - expect).abs() < 1e-12 * (1.0 + expect.abs()),
                    "{got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = derive_stream(92, 0);
        let draws: Vec<f64> = (0..2000)
            .map(|_| rng.gen_range(-1.0..1.0f64) + rng.gen_range(-1.0..1.0f64))
            .collect();
        let s = posterior_predictive(&draws).unwrap();
        let dx = s.density[1].0 - s.density[0].0;
        let mass: f64 = s.density.iter().map(|(_, d)| d * dx).sum();
        assert!((mass - 1.0).abs() < 0.02, "mass {mass}");
    }

    #[test]
    fn predictive_csv_round_trip() {
        let s = posterior_predictive(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictive_test.csv");
        write_predictive(&path, &s).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), DENSITY_GRID);
        let med: f64 = rows[0][2].parse().unwrap();
        assert_eq!(med, s.median);
        let x0: f64 = rows[0][0].parse().unwrap();
        assert_eq!(x0, s.density[0].0);
    }
}

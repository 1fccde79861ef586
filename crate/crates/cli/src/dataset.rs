//! Dataset CSV ingestion and emission.
//!
//! Input schema: header `s1,s2,t,y[,x_cmaq]`, UTF-8, `.` decimal separator.
//! Loading centers and scales each coordinate column (recording the
//! constants for inverse transforms) and, in regression mode, log-transforms
//! the response and the covariate.

use std::path::Path;

use anyhow::{bail, Context, Result};
use kcoddp_core::geometry::SpaceTimePoint;
use kcoddp_core::model::Dataset;

/// Per-coordinate centering/scaling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub mean: [f64; 3],
    pub sd: [f64; 3],
}

impl Scaling {
    fn fit(points: &[SpaceTimePoint]) -> Scaling {
        let n = points.len() as f64;
        let mut mean = [0.0f64; 3];
        for p in points {
            let c = p.coords();
            for d in 0..3 {
                mean[d] += c[d];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut sd = [0.0f64; 3];
        for p in points {
            let c = p.coords();
            for d in 0..3 {
                sd[d] += (c[d] - mean[d]) * (c[d] - mean[d]);
            }
        }
        for s in &mut sd {
            *s = (*s / (n - 1.0)).sqrt();
            // constant columns stay centered but unscaled
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Scaling { mean, sd }
    }

    pub fn scale_point(&self, p: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint::new(
            (p.s1 - self.mean[0]) / self.sd[0],
            (p.s2 - self.mean[1]) / self.sd[1],
            (p.t - self.mean[2]) / self.sd[2],
        )
    }

    pub fn unscale_point(&self, p: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint::new(
            p.s1 * self.sd[0] + self.mean[0],
            p.s2 * self.sd[1] + self.mean[1],
            p.t * self.sd[2] + self.mean[2],
        )
    }
}

/// A dataset ready for fitting: scaled coordinates, optionally
/// log-transformed response/covariate, plus everything needed to invert.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub scaling: Scaling,
    pub raw_points: Vec<SpaceTimePoint>,
    pub raw_y: Vec<f64>,
    pub raw_covariate: Option<Vec<f64>>,
    /// Whether `y` (and the covariate) in `dataset` are on the log scale.
    pub log_transformed: bool,
}

impl LoadedDataset {
    pub fn regression_mode(&self) -> bool {
        self.dataset.covariate.is_some()
    }

    /// Build from raw rows (what the CSV loader produces).
    pub fn from_raw(
        raw_points: Vec<SpaceTimePoint>,
        raw_y: Vec<f64>,
        raw_covariate: Option<Vec<f64>>,
        log_regression: bool,
    ) -> Result<Self> {
        if raw_points.is_empty() {
            bail!("dataset is empty");
        }
        let scaling = Scaling::fit(&raw_points);
        let points: Vec<SpaceTimePoint> =
            raw_points.iter().map(|p| scaling.scale_point(p)).collect();
        let log_transformed = raw_covariate.is_some() && log_regression;
        let y = if log_transformed {
            for (i, v) in raw_y.iter().enumerate() {
                if !(*v > 0.0) {
                    bail!("row {}: response must be > 0 for the log-scale model", i + 1);
                }
            }
            raw_y.iter().map(|v| v.ln()).collect()
        } else {
            raw_y.clone()
        };
        let covariate = match &raw_covariate {
            Some(c) => {
                for (i, v) in c.iter().enumerate() {
                    if !(*v > 0.0) {
                        bail!("row {}: covariate must be > 0", i + 1);
                    }
                }
                Some(if log_transformed {
                    c.iter().map(|v| v.ln()).collect()
                } else {
                    c.clone()
                })
            }
            None => None,
        };
        let dataset = Dataset::new(points, y, covariate)?;
        Ok(LoadedDataset {
            dataset,
            scaling,
            raw_points,
            raw_y,
            raw_covariate,
            log_transformed,
        })
    }
}

/// Load `s1,s2,t,y[,x_cmaq]` rows; malformed rows report their line number.
pub fn load_dataset(path: &Path, log_regression: bool) -> Result<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 4 || cols[0] != "s1" || cols[1] != "s2" || cols[2] != "t" || cols[3] != "y" {
        bail!(
            "unexpected header {:?}; expected s1,s2,t,y[,x_cmaq]",
            cols
        );
    }
    let has_covariate = cols.len() >= 5 && cols[4] == "x_cmaq";
    if cols.len() > 4 && !has_covariate {
        bail!("unexpected extra column {:?}", cols[4]);
    }

    let mut points = Vec::new();
    let mut y = Vec::new();
    let mut covariate = if has_covariate { Some(Vec::new()) } else { None };
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // header is line 1
        let record = record.with_context(|| format!("row {row}"))?;
        let field = |idx: usize| -> Result<f64> {
            let raw = record
                .get(idx)
                .with_context(|| format!("row {row}: missing column {idx}"))?;
            let v: f64 = raw
                .parse()
                .with_context(|| format!("row {row}: cannot parse `{raw}`"))?;
            if !v.is_finite() {
                bail!("row {row}: non-finite value");
            }
            Ok(v)
        };
        points.push(SpaceTimePoint::new(field(0)?, field(1)?, field(2)?));
        y.push(field(3)?);
        if let Some(c) = covariate.as_mut() {
            c.push(field(4)?);
        }
    }
    LoadedDataset::from_raw(points, y, covariate, log_regression)
}

/// Emit raw rows as `s1,s2,t,y`.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["s1", "s2", "t", "y"])?;
    for (p, y) in data.points.iter().zip(&data.y) {
        writer.write_record([
            p.s1.to_string(),
            p.s2.to_string(),
            p.t.to_string(),
            y.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

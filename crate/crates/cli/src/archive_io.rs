//! CSV persistence for sample archives, acceptance summaries, correlation
//! sweeps, and cross-validation reports.
//!
//! Archive rows carry the variable-length blocks as semicolon-joined lists
//! in quoted fields, followed by the fixed parameters and the log
//! posterior. Numbers are written in shortest round-trip form, so loading
//! a file reproduces the archived values exactly.

use std::path::Path;

use anyhow::{bail, Context, Result};
use kcoddp_core::ttmcmc::{ArchiveRow, MoveStats, MoveType, SampleArchive};

fn join_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_list(field: &str) -> Result<Vec<f64>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|tok| tok.parse::<f64>().with_context(|| format!("list item `{tok}`")))
        .collect()
}

const SCALAR_FIXED: [&str; 7] = ["phi", "a_delta", "b_psi", "alpha", "lambda", "tau", "sigma"];

/// Write one chain's archive. The fixed block is split back into named
/// scalar columns plus the three site-indexed field lists.
pub fn write_archive(
    path: &Path,
    archive: &SampleArchive,
    n_sites: usize,
    regression: bool,
) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> = ["iter", "k", "v", "z", "theta1", "theta2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(SCALAR_FIXED.iter().map(|s| s.to_string()));
    header.extend(["psi1", "psi2", "log_delta"].iter().map(|s| s.to_string()));
    if regression {
        header.push("alpha0".into());
        header.push("alpha1".into());
    }
    header.push("log_post".into());
    writer.write_record(&header)?;

    for row in &archive.rows {
        let f = &row.fixed;
        if f.len() != 7 + 3 * n_sites + if regression { 2 } else { 0 } {
            bail!("fixed block length {} does not match layout", f.len());
        }
        let mut record: Vec<String> = vec![
            row.iter.to_string(),
            row.k.to_string(),
            join_list(&row.blocks[0]),
            join_list(&row.blocks[1]),
            join_list(&row.blocks[2]),
            join_list(&row.blocks[3]),
        ];
        record.extend(f[..7].iter().map(|v| v.to_string()));
        record.push(join_list(&f[7..7 + n_sites]));
        record.push(join_list(&f[7 + n_sites..7 + 2 * n_sites]));
        record.push(join_list(&f[7 + 2 * n_sites..7 + 3 * n_sites]));
        if regression {
            record.push(f[7 + 3 * n_sites].to_string());
            record.push(f[7 + 3 * n_sites + 1].to_string());
        }
        record.push(row.log_post.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// An archive read back from disk, plus what the header told us about it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedArchive {
    pub rows: Vec<ArchiveRow>,
    pub n_sites: usize,
    pub regression: bool,
}

pub fn read_archive(path: &Path) -> Result<LoadedArchive> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let regression = header.iter().any(|h| h == "alpha0");
    let mut rows = Vec::new();
    let mut n_sites = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("archive row {}", i + 2))?;
        let mut idx = 0usize;
        let mut next = || {
            let v = record.get(idx).map(|s| s.to_string());
            idx += 1;
            v.with_context(|| format!("archive row {}: missing field {}", i + 2, idx))
        };
        let iter: usize = next()?.parse()?;
        let k: usize = next()?.parse()?;
        let blocks = vec![
            parse_list(&next()?)?,
            parse_list(&next()?)?,
            parse_list(&next()?)?,
            parse_list(&next()?)?,
        ];
        let mut fixed: Vec<f64> = Vec::new();
        for _ in 0..7 {
            fixed.push(next()?.parse()?);
        }
        let psi1 = parse_list(&next()?)?;
        let psi2 = parse_list(&next()?)?;
        let log_delta = parse_list(&next()?)?;
        n_sites = psi1.len();
        fixed.extend(psi1);
        fixed.extend(psi2);
        fixed.extend(log_delta);
        if regression {
            fixed.push(next()?.parse()?);
            fixed.push(next()?.parse()?);
        }
        let log_post: f64 = next()?.parse()?;
        rows.push(ArchiveRow {
            iter,
            k,
            blocks,
            fixed,
            log_post,
        });
    }
    Ok(LoadedArchive {
        rows,
        n_sites,
        regression,
    })
}

/// Acceptance-rate summary, one row per (chain, move type).
pub fn write_acceptance(path: &Path, stats: &[(usize, MoveStats)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["chain", "move_type", "proposed", "accepted", "rate"])?;
    for (chain, s) in stats {
        for (name, mt) in [
            ("birth", MoveType::Birth),
            ("death", MoveType::Death),
            ("no_change", MoveType::NoChange),
        ] {
            let slot = match mt {
                MoveType::Birth => 0,
                MoveType::Death => 1,
                MoveType::NoChange => 2,
            };
            writer.write_record([
                chain.to_string(),
                name.to_string(),
                s.proposed[slot].to_string(),
                s.accepted[slot].to_string(),
                s.rate(mt).to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// One separation point of the correlation sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub separation: f64,
    pub estimate: f64,
    pub std_error: f64,
}

pub fn write_corr_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["separation", "estimate", "std_error"])?;
    for r in rows {
        writer.write_record([
            r.separation.to_string(),
            r.estimate.to_string(),
            r.std_error.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_corr_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(SweepRow {
            separation: record[0].parse()?,
            estimate: record[1].parse()?,
            std_error: record[2].parse()?,
        });
    }
    Ok(rows)
}

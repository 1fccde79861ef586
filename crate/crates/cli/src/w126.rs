//! The W126 ozone exposure metric: sigmoid-weighted hourly concentrations,
//! daily and monthly sums, three-month running totals, and the annual
//! maximum with its exceedance flag.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Number of daylight hours entering each daily index.
pub const HOURS_PER_DAY: usize = 12;

/// Number of months in the high-ozone season (April through October).
pub const SEASON_MONTHS: usize = 7;

/// Annual index threshold in ppm-hours: the standard is met below it.
pub const EXCEEDANCE_THRESHOLD: f64 = 21.0;

/// Calendar day counts for April..October (non-leap; the season length is
/// 214 days).
pub const SEASON_MONTH_LENGTHS: [usize; SEASON_MONTHS] = [30, 31, 30, 31, 31, 30, 31];

/// Hourly ozone concentrations for one site: `q[day][hour]` in ppm plus a
/// day-to-month map with months numbered 1..=7.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyOzoneSeries {
    pub q: Vec<[f64; HOURS_PER_DAY]>,
    pub month_of_day: Vec<usize>,
}

impl HourlyOzoneSeries {
    pub fn new(q: Vec<[f64; HOURS_PER_DAY]>, month_of_day: Vec<usize>) -> Result<Self> {
        if q.len() != month_of_day.len() {
            bail!("day count mismatch between q and month map");
        }
        if q.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            bail!("hourly concentrations must be finite and >= 0");
        }
        if month_of_day.iter().any(|m| *m < 1 || *m > SEASON_MONTHS) {
            bail!("months must lie in 1..={SEASON_MONTHS}");
        }
        for m in 1..=SEASON_MONTHS {
            if !month_of_day.contains(&m) {
                bail!("month {m} has no days");
            }
        }
        Ok(HourlyOzoneSeries { q, month_of_day })
    }

    /// The April-through-October calendar map for a 214-day series.
    pub fn calendar_months(n_days: usize) -> Result<Vec<usize>> {
        let season: usize = SEASON_MONTH_LENGTHS.iter().sum();
        if n_days != season {
            bail!(
                "cannot derive months for {n_days} days; the April-October season has {season} \
                 days, so supply an explicit month column"
            );
        }
        let mut map = Vec::with_capacity(n_days);
        for (m, len) in SEASON_MONTH_LENGTHS.iter().enumerate() {
            map.extend(std::iter::repeat(m + 1).take(*len));
        }
        Ok(map)
    }

    /// Load `day,hour,q_ppm[,month]` rows. Days and hours are 1-based;
    /// every day needs all twelve hours. Without a month column the series
    /// must cover the full 214-day season.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let headers = reader.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 3 || cols[0] != "day" || cols[1] != "hour" || cols[2] != "q_ppm" {
            bail!("unexpected header {:?}; expected day,hour,q_ppm[,month]", cols);
        }
        let has_month = cols.len() >= 4 && cols[3] == "month";

        let mut cells: Vec<(usize, usize, f64, Option<usize>)> = Vec::new();
        let mut n_days = 0usize;
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.with_context(|| format!("row {row}"))?;
            let day: usize = record[0]
                .parse()
                .with_context(|| format!("row {row}: day"))?;
            let hour: usize = record[1]
                .parse()
                .with_context(|| format!("row {row}: hour"))?;
            let q: f64 = record[2]
                .parse()
                .with_context(|| format!("row {row}: q_ppm"))?;
            if day < 1 {
                bail!("row {row}: day must be >= 1");
            }
            if !(1..=HOURS_PER_DAY).contains(&hour) {
                bail!("row {row}: hour must lie in 1..={HOURS_PER_DAY}");
            }
            if !(q >= 0.0) || !q.is_finite() {
                bail!("row {row}: q_ppm must be finite and >= 0");
            }
            let month = if has_month {
                Some(
                    record[3]
                        .parse::<usize>()
                        .with_context(|| format!("row {row}: month"))?,
                )
            } else {
                None
            };
            n_days = n_days.max(day);
            cells.push((day, hour, q, month));
        }
        if n_days == 0 {
            bail!("empty hourly series");
        }

        let mut q = vec![[f64::NAN; HOURS_PER_DAY]; n_days];
        let mut months = vec![0usize; n_days];
        for (day, hour, value, month) in cells {
            q[day - 1][hour - 1] = value;
            if let Some(m) = month {
                if months[day - 1] != 0 && months[day - 1] != m {
                    bail!("day {day}: inconsistent month assignments");
                }
                months[day - 1] = m;
            }
        }
        for (d, row) in q.iter().enumerate() {
            if row.iter().any(|v| v.is_nan()) {
                bail!("day {}: missing hourly values", d + 1);
            }
        }
        let month_of_day = if has_month {
            if months.iter().any(|m| *m == 0) {
                bail!("some days have no month assignment");
            }
            months
        } else {
            Self::calendar_months(n_days)?
        };
        HourlyOzoneSeries::new(q, month_of_day)
    }
}

/// Sigmoid-weighted hourly value: `q / (1 + 4403 exp(-126 q))`.
///
/// The weight truncates values below 0.05 ppm toward zero and leaves
/// values above 0.10 ppm essentially unchanged.
pub fn w126_weight(q: f64) -> Result<f64> {
    if !(q >= 0.0) || !q.is_finite() {
        bail!("q must be finite and >= 0 (got {q})");
    }
    Ok(q / (1.0 + 4403.0 * (-126.0 * q).exp()))
}

/// Annual W126 summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W126Summary {
    /// Annual index: the maximum three-month running total.
    pub annual_index: f64,
    /// Whether the index reaches the 21 ppm-hours threshold.
    pub exceeds: bool,
    /// Monthly sums of the daily indices.
    pub monthly: [f64; SEASON_MONTHS],
}

/// Daily indices, monthly sums, running three-month totals centered at the
/// last month, and the annual maximum.
pub fn w126_annual(series: &HourlyOzoneSeries) -> Result<W126Summary> {
    let mut monthly = [0.0f64; SEASON_MONTHS];
    for (day, hours) in series.q.iter().enumerate() {
        let mut daily = 0.0;
        for &q in hours {
            daily += w126_weight(q)?;
        }
        monthly[series.month_of_day[day] - 1] += daily;
    }
    let mut annual_index = f64::NEG_INFINITY;
    for j in 2..SEASON_MONTHS {
        let running = monthly[j - 2] + monthly[j - 1] + monthly[j];
        annual_index = annual_index.max(running);
    }
    Ok(W126Summary {
        annual_index,
        exceeds: annual_index >= EXCEEDANCE_THRESHOLD,
        monthly,
    })
}

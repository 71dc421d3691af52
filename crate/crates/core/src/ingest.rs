//! Price loading, log-returns, descriptive statistics and sample/test splits.
//!
//! Input files are CSV with a `date,close` header, ISO-8601 dates and plain decimal
//! closes, one file per symbol.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

pub const TRADING_DAYS: u32 = 252;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    symbol: String,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Sorts by date; fails on duplicate dates or nonpositive closes.
    pub fn new(symbol: impl Into<String>, rows: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let symbol = symbol.into();
        let path = Path::new(&symbol).to_path_buf();
        Self::from_rows(
            symbol,
            rows.into_iter()
                .enumerate()
                .map(|(i, (d, c))| (i + 1, d, c))
                .collect(),
            &path,
        )
    }

    fn from_rows(
        symbol: String,
        mut rows: Vec<(usize, NaiveDate, f64)>,
        path: &Path,
    ) -> Result<Self> {
        for &(row, _, close) in &rows {
            if !(close > 0.0 && close.is_finite()) {
                return Err(Error::NonPositivePrice {
                    path: path.to_path_buf(),
                    row,
                    close,
                });
            }
        }
        rows.sort_by_key(|&(row, date, _)| (date, row));
        if let Some(w) = rows.windows(2).find(|w| w[0].1 == w[1].1) {
            return Err(Error::DuplicateDate {
                path: path.to_path_buf(),
                row: w[1].0,
                date: w[1].1,
            });
        }
        Ok(Self {
            symbol,
            dates: rows.iter().map(|r| r.1).collect(),
            closes: rows.iter().map(|r| r.2).collect(),
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    fn restrict(&self, keep: &dyn Fn(&NaiveDate) -> bool) -> Self {
        let (dates, closes) = self
            .dates
            .iter()
            .zip(&self.closes)
            .filter(|(d, _)| keep(d))
            .map(|(d, c)| (*d, *c))
            .unzip();
        Self {
            symbol: self.symbol.clone(),
            dates,
            closes,
        }
    }
}

/// Reads a `date,close` CSV. Row numbers in errors are file line numbers.
pub fn load_prices(symbol: impl Into<String>, path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;

    let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
    let normalized: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if normalized != ["date", "close"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: format!(
                "expected header `date,close`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| csv_error(path, row, e))?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date {:?}: {e}", &record[0])))?;
        let close: f64 = record[1]
            .parse()
            .map_err(|e| parse_err(format!("bad close {:?}: {e}", &record[1])))?;
        rows.push((row, date, close));
    }
    PriceSeries::from_rows(symbol.into(), rows, path)
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(row);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("{kind:?}"),
        },
    }
}

/// Inner-joins price series on date. Returns the aligned series and, per input,
/// how many dates were dropped.
pub fn align(series: &[PriceSeries]) -> (Vec<PriceSeries>, Vec<usize>) {
    let mut counts: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for s in series {
        for d in s.dates() {
            *counts.entry(*d).or_default() += 1;
        }
    }
    let n = series.len();
    let aligned: Vec<PriceSeries> = series
        .iter()
        .map(|s| s.restrict(&|d| counts.get(d) == Some(&n)))
        .collect();
    let dropped = series
        .iter()
        .zip(&aligned)
        .map(|(orig, kept)| orig.len() - kept.len())
        .collect();
    (aligned, dropped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    symbol: String,
    /// Date of the later close in each pair.
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(symbol: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            symbol: symbol.into(),
            dates,
            values,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            symbol: self.symbol.clone(),
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }
}

pub fn log_returns(p: &PriceSeries) -> Result<ReturnSeries> {
    if p.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 1,
            got: p.len(),
        });
    }
    let values = p.closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(ReturnSeries {
        symbol: p.symbol.clone(),
        dates: p.dates[1..].to_vec(),
        values,
    })
}

/// Splits into the first `window` observations and the remainder.
pub fn split_periods(r: &ReturnSeries, window: usize) -> Result<(ReturnSeries, ReturnSeries)> {
    if r.len() <= window {
        return Err(Error::InsufficientData {
            needed: window,
            got: r.len(),
        });
    }
    Ok((r.slice(0..window), r.slice(window..r.len())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptiveStats {
    pub count: usize,
    pub mean: f64,
    pub annualized_mean: f64,
    pub sd: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Absent when the series has zero dispersion.
    pub excess_kurtosis: Option<f64>,
    pub skewness: Option<f64>,
}

/// Sample moments of a return series. `annualized_mean = exp(mean · trading_days) − 1`.
pub fn describe(r: &ReturnSeries, trading_days: u32) -> Result<DescriptiveStats> {
    describe_values(r.values(), trading_days)
}

pub fn describe_values(x: &[f64], trading_days: u32) -> Result<DescriptiveStats> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 1, got: n });
    }
    let mean = sample_mean(x);
    let sd = sample_sd(x)?;
    let nf = n as f64;
    let (m2, m3, m4) = x.iter().fold((0.0, 0.0, 0.0), |(a, b, c), v| {
        let d = v - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d, c + d2 * d2)
    });
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    // Dispersion below rounding noise of the largest magnitude counts as none.
    let magnitude = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let noise = 1e-14 * magnitude;
    let (skewness, excess_kurtosis) = if m2 > noise * noise && m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    } else {
        (None, None)
    };

    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    Ok(DescriptiveStats {
        count: n,
        mean,
        annualized_mean: (mean * trading_days as f64).exp() - 1.0,
        sd,
        min: sorted[0],
        median,
        max: sorted[n - 1],
        excess_kurtosis,
        skewness,
    })
}

pub fn sample_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard deviation with the `n − 1` denominator.
pub fn sample_sd(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 1,
            got: x.len(),
        });
    }
    if x.iter().all(|v| *v == x[0]) {
        return Ok(0.0);
    }
    let m = sample_mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((ss / (x.len() - 1) as f64).sqrt())
}

/// Date-aligned returns for several assets, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    symbols: Vec<String>,
    dates: Vec<NaiveDate>,
    columns: Vec<Vec<f64>>,
}

impl ReturnMatrix {
    /// Fails unless every series carries the same dates.
    pub fn from_series(series: &[ReturnSeries]) -> Result<Self> {
        let first = series.first().ok_or(Error::Empty("no return series"))?;
        for s in &series[1..] {
            if s.dates() != first.dates() {
                return Err(Error::Misaligned(format!(
                    "{} and {} do not share dates",
                    first.symbol(),
                    s.symbol()
                )));
            }
        }
        Ok(Self {
            symbols: series.iter().map(|s| s.symbol().to_string()).collect(),
            dates: first.dates().to_vec(),
            columns: series.iter().map(|s| s.values().to_vec()).collect(),
        })
    }

    /// Undated columns; dates are filled with consecutive days from 1970-01-01.
    pub fn from_columns(symbols: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let len = columns
            .first()
            .ok_or(Error::Empty("no return columns"))?
            .len();
        if symbols.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: symbols.len(),
            });
        }
        if let Some(c) = columns.iter().find(|c| c.len() != len) {
            return Err(Error::Misaligned(format!(
                "column lengths differ ({len} vs {})",
                c.len()
            )));
        }
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        let dates = epoch.iter_days().take(len).collect();
        Ok(Self {
            symbols,
            dates,
            columns,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn n_assets(&self) -> usize {
        self.columns.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }
}

//! Dated daily return and risk-free rate series loaded from `date,value` CSV.
//!
//! Dates are ISO-8601 (`YYYY-MM-DD`) and must be strictly increasing. Row
//! numbers in errors count data rows from 1, excluding the header.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

/// How the `value` column of a series file is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ValueFormat {
    /// Price or index levels; the first row only anchors the first return.
    Levels,
    /// Simple returns `r_t`, converted with `ln(1 + r_t)`.
    #[value(name = "simple")]
    SimpleReturns,
    #[value(name = "log")]
    LogReturns,
}

/// Daily log-returns on the series' own trading calendar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    pub source_id: String,
    pub dates: Vec<NaiveDate>,
    pub log_returns: Vec<f64>,
}

fn check_dates(source_id: &str, dates: &[NaiveDate]) -> Result<()> {
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::Parse {
                source_id: source_id.to_string(),
                row: i + 2,
                message: format!("date {} does not follow {}", w[1], w[0]),
            });
        }
    }
    Ok(())
}

impl ReturnSeries {
    pub fn new(source_id: &str, dates: Vec<NaiveDate>, log_returns: Vec<f64>) -> Result<Self> {
        if dates.len() != log_returns.len() {
            return Err(Error::config(format!(
                "{} dates but {} returns",
                dates.len(),
                log_returns.len()
            )));
        }
        check_dates(source_id, &dates)?;
        if let Some(i) = log_returns.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parse {
                source_id: source_id.to_string(),
                row: i + 1,
                message: "non-finite return".into(),
            });
        }
        Ok(Self {
            source_id: source_id.to_string(),
            dates,
            log_returns,
        })
    }

    pub fn len(&self) -> usize {
        self.log_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_returns.is_empty()
    }

    /// Levels after each return, starting from `base` before the first one.
    pub fn levels(&self, base: f64) -> Vec<f64> {
        let mut cum = 0.0;
        self.log_returns
            .iter()
            .map(|r| {
                cum += r;
                base * cum.exp()
            })
            .collect()
    }

    /// Index of the first date on or after `date`.
    pub fn position_on_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }
}

/// Annual continuously compounded risk-free rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSeries {
    pub dates: Vec<NaiveDate>,
    pub annual_rates: Vec<f64>,
}

impl RateSeries {
    pub fn new(dates: Vec<NaiveDate>, annual_rates: Vec<f64>) -> Result<Self> {
        if dates.is_empty() || dates.len() != annual_rates.len() {
            return Err(Error::config(
                "rate series needs matching, non-empty columns",
            ));
        }
        check_dates("rates", &dates)?;
        if annual_rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("rate series contains non-finite values"));
        }
        Ok(Self {
            dates,
            annual_rates,
        })
    }

    /// A single rate valid from `start` onward.
    pub fn constant(start: NaiveDate, rate: f64) -> Self {
        Self {
            dates: vec![start],
            annual_rates: vec![rate],
        }
    }

    /// Last observation on or before `date`.
    pub fn rate_at(&self, date: NaiveDate) -> Result<f64> {
        let idx = self.dates.partition_point(|d| *d <= date);
        if idx == 0 {
            return Err(Error::Lookup(format!(
                "no rate on or before {date}; series starts {}",
                self.dates[0]
            )));
        }
        Ok(self.annual_rates[idx - 1])
    }
}

pub fn rate_at(rates: &RateSeries, date: NaiveDate) -> Result<f64> {
    rates.rate_at(date)
}

fn read_rows<R: Read>(reader: R, source_id: &str) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "value" {
        return Err(Error::Parse {
            source_id: source_id.to_string(),
            row: 0,
            message: format!(
                "expected header `date,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let parse_err = |message: String| Error::Parse {
            source_id: source_id.to_string(),
            row,
            message,
        };
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let date_field = record.get(0).unwrap_or("");
        let value_field = record.get(1).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_field, "%Y-%m-%d")
            .map_err(|e| parse_err(format!("malformed date `{date_field}`: {e}")))?;
        if value_field.is_empty() {
            return Err(parse_err("missing value".into()));
        }
        let value: f64 = value_field
            .parse()
            .map_err(|_| parse_err(format!("non-numeric value `{value_field}`")))?;
        if !value.is_finite() {
            return Err(parse_err(format!("non-finite value `{value_field}`")));
        }
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(parse_err(format!("date {date} does not follow {prev}")));
            }
        }
        dates.push(date);
        values.push(value);
    }
    Ok((dates, values))
}

/// Parses a `date,value` CSV from any reader.
pub fn parse_returns<R: Read>(
    reader: R,
    format: ValueFormat,
    source_id: &str,
) -> Result<ReturnSeries> {
    let (dates, values) = read_rows(reader, source_id)?;
    let (dates, log_returns) = match format {
        ValueFormat::Levels => {
            if let Some(i) = values.iter().position(|v| *v <= 0.0) {
                return Err(Error::Parse {
                    source_id: source_id.to_string(),
                    row: i + 1,
                    message: "levels must be positive".into(),
                });
            }
            let rets = values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
            (dates.into_iter().skip(1).collect(), rets)
        }
        ValueFormat::SimpleReturns => {
            if let Some(i) = values.iter().position(|v| *v <= -1.0) {
                return Err(Error::Parse {
                    source_id: source_id.to_string(),
                    row: i + 1,
                    message: "simple return must exceed -1".into(),
                });
            }
            (dates, values.iter().map(|v| v.ln_1p()).collect())
        }
        ValueFormat::LogReturns => (dates, values),
    };
    ReturnSeries::new(source_id, dates, log_returns)
}

fn source_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a return series; the file stem becomes the source id.
pub fn load_returns(path: impl AsRef<Path>, format: ValueFormat) -> Result<ReturnSeries> {
    let path = path.as_ref();
    parse_returns(open(path)?, format, &source_id_of(path))
}

pub fn parse_rates<R: Read>(reader: R) -> Result<RateSeries> {
    let (dates, values) = read_rows(reader, "rates")?;
    RateSeries::new(dates, values)
}

pub fn load_rates(path: impl AsRef<Path>) -> Result<RateSeries> {
    parse_rates(open(path.as_ref())?)
}

/// Writes `date,value` rows.
pub fn write_series<W: Write>(writer: W, dates: &[NaiveDate], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "value"])?;
    for (d, v) in dates.iter().zip(values) {
        w.write_record([d.format("%Y-%m-%d").to_string(), format!("{v}")])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Equal-weight buy-and-hold portfolio of several return series.
///
/// Each index starts with weight `1/n` and is never rebalanced, so the
/// portfolio level is the average of the individual growth factors. Series
/// are aligned on the intersection of their dates; returns over dates missing
/// from the intersection accumulate into the next common date.
pub fn equal_weight_buy_and_hold(series: &[ReturnSeries]) -> Result<ReturnSeries> {
    if series.len() < 2 {
        return Err(Error::Alignment(format!(
            "a portfolio needs at least two series, got {}",
            series.len()
        )));
    }
    let mut common: BTreeSet<NaiveDate> = series[0].dates.iter().copied().collect();
    for s in &series[1..] {
        let other: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&other).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::Alignment("series share no common dates".into()));
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    let first = dates[0];
    // When every series starts on the first common date, the pre-sample
    // level 1 is the common base and the first return is kept.
    let shared_start = series.iter().all(|s| s.dates[0] == first);

    let n = series.len() as f64;
    let mut portfolio = vec![0.0; dates.len()];
    for s in series {
        let levels = s.levels(1.0);
        let aligned: Vec<f64> = dates
            .iter()
            .map(|d| {
                levels[s
                    .dates
                    .binary_search(d)
                    .expect("date is in the intersection")]
            })
            .collect();
        let base = if shared_start { 1.0 } else { aligned[0] };
        for (p, l) in portfolio.iter_mut().zip(&aligned) {
            *p += l / base / n;
        }
    }

    let (out_dates, rets) = if shared_start {
        let mut prev = 1.0;
        let rets = portfolio
            .iter()
            .map(|p| {
                let r = (p / prev).ln();
                prev = *p;
                r
            })
            .collect();
        (dates, rets)
    } else {
        let rets = portfolio.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        (dates[1..].to_vec(), rets)
    };
    let id = series
        .iter()
        .map(|s| s.source_id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    ReturnSeries::new(&id, out_dates, rets)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Measurement records and the daily-maximum coarse series.
//!
//! A measurement is either quantified (`value` present, `value >= loq`) or
//! left-censored below its limit of quantification. The coarse series keeps
//! one entry per calendar day (UTC) holding the largest quantified value and
//! the largest LOQ of that day.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
    #[error("no measurements")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One station sample. `value == None` means the sample was below `loq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement<T> {
    pub station_id: String,
    pub date: NaiveDate,
    pub loq: T,
    pub value: Option<T>,
}

impl<T: Scalar> Measurement<T> {
    pub fn new(
        station_id: impl Into<String>,
        date: NaiveDate,
        loq: T,
        value: Option<T>,
    ) -> Result<Self, String> {
        if !(loq > T::zero()) || !loq.is_finite() {
            return Err(format!("loq must be positive and finite, got {loq}"));
        }
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(format!("value must be finite, got {v}"));
            }
            if v < loq {
                return Err(format!("quantified value {v} is below its loq {loq}"));
            }
        }
        Ok(Self {
            station_id: station_id.into(),
            date,
            loq,
            value,
        })
    }

    #[inline]
    pub fn is_censored(&self) -> bool {
        self.value.is_none()
    }

    /// The value used where a number is needed: the measurement itself, or
    /// its LOQ when censored.
    #[inline]
    pub fn value_or_loq(&self) -> T {
        self.value.unwrap_or(self.loq)
    }
}

/// Parse a date or date-time and truncate it to its UTC calendar day.
pub fn parse_day(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.with_timezone(&Utc).date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(dt.date());
        }
    }
    NaiveDate::parse_from_str(text, "%d/%m/%Y").ok()
}

fn parse_number<T: Scalar>(text: &str) -> Option<T> {
    let v: f64 = text.trim().replace(',', ".").parse().ok()?;
    v.is_finite().then(|| T::lit(v))
}

const MEASUREMENT_HEADER: [&str; 4] = ["station_id", "date", "loq", "value"];

/// Parse the `station_id,date,loq,value` CSV format. An empty `value` marks
/// a censored sample. Row order is preserved.
pub fn parse_measurements<T: Scalar, R: Read>(input: R) -> Result<Vec<Measurement<T>>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != MEASUREMENT_HEADER {
        return Err(IngestError::Header {
            found: found.join(","),
            expected: MEASUREMENT_HEADER.join(","),
        });
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| IngestError::Malformed { line, message };

        let station_id = &record[0];
        if station_id.is_empty() {
            return Err(malformed("empty station_id".into()));
        }
        let date = parse_day(&record[1])
            .ok_or_else(|| malformed(format!("unparseable date {:?}", &record[1])))?;
        let loq: T = parse_number(&record[2])
            .ok_or_else(|| malformed(format!("unparseable loq {:?}", &record[2])))?;
        let value = match &record[3] {
            "" => None,
            v => Some(parse_number(v).ok_or_else(|| malformed(format!("unparseable value {v:?}")))?),
        };
        let m = Measurement::new(station_id, date, loq, value)
            .map_err(|message| IngestError::Invalid { line, message })?;
        out.push(m);
    }
    Ok(out)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> IngestError {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line());
    IngestError::Malformed {
        line,
        message: e.to_string(),
    }
}

/// Parse a semicolon-separated export of the French surface-water quality
/// database (Naïades "physicochimie/resultats").
///
/// Columns are located by name: `CdStationMesureEauxSurface`, `DatePrel`,
/// `RsAna`, `LqAna` and `CdRqAna`. A sample counts as quantified only when
/// its remark code is `1`; every other code is treated as below the LOQ.
pub fn parse_naiades<T: Scalar, R: Read>(input: R) -> Result<Vec<Measurement<T>>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b';')
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h.trim_matches('"').eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::Header {
                found: header.iter().collect::<Vec<_>>().join(";"),
                expected: format!("a column named {name}"),
            })
    };
    let (c_station, c_date, c_value, c_loq, c_code) = (
        column("CdStationMesureEauxSurface")?,
        column("DatePrel")?,
        column("RsAna")?,
        column("LqAna")?,
        column("CdRqAna")?,
    );

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            record
                .get(i)
                .map(|s| s.trim_matches('"'))
                .ok_or_else(|| IngestError::Malformed {
                    line,
                    message: format!("missing column {i}"),
                })
        };
        let date = parse_day(field(c_date)?).ok_or_else(|| IngestError::Malformed {
            line,
            message: format!("unparseable date {:?}", field(c_date).unwrap_or_default()),
        })?;
        let loq: T = parse_number(field(c_loq)?).ok_or_else(|| IngestError::Malformed {
            line,
            message: "unparseable LqAna".into(),
        })?;
        let value = if field(c_code)? == "1" {
            Some(parse_number(field(c_value)?).ok_or_else(|| IngestError::Malformed {
                line,
                message: "unparseable RsAna".into(),
            })?)
        } else {
            None
        };
        let m = Measurement::new(field(c_station)?, date, loq, value)
            .map_err(|message| IngestError::Invalid { line, message })?;
        out.push(m);
    }
    Ok(out)
}

pub fn write_measurements<T: Scalar, W: Write>(
    ms: &[Measurement<T>],
    out: W,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MEASUREMENT_HEADER).map_err(csv_io)?;
    for m in ms {
        let value = m.value.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            m.station_id.as_str(),
            &m.date.to_string(),
            &m.loq.to_string(),
            &value,
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> IngestError {
    IngestError::Io(std::io::Error::other(e))
}

/// One day of the coarse series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseEntry<T> {
    pub day: NaiveDate,
    pub y_bar: T,
    pub q_bar: T,
    pub censored: bool,
}

/// Daily-maximum series, strictly increasing in `day`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseSeries<T> {
    pub entries: Vec<CoarseEntry<T>>,
}

impl<T: Scalar> CoarseSeries<T> {
    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn quantified_fraction(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let q = self.entries.iter().filter(|e| !e.censored).count();
        q as f64 / self.entries.len() as f64
    }

    /// Build a series directly from per-day values, mostly for tests and
    /// simulation. Days are synthesised as consecutive dates from `start`.
    pub fn from_values(start: NaiveDate, values: &[(T, T, bool)]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .map(|(k, &(y, q, censored))| CoarseEntry {
                day: start + chrono::Days::new(k as u64),
                y_bar: if censored { q } else { y },
                q_bar: q,
                censored,
            })
            .collect();
        Self { entries }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "y_bar", "q_bar", "censored"]).map_err(csv_io)?;
        for e in &self.entries {
            w.write_record([
                e.day.to_string(),
                e.y_bar.to_string(),
                e.q_bar.to_string(),
                e.censored.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
        let expected = ["day", "y_bar", "q_bar", "censored"];
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(IngestError::Header {
                found: header.iter().collect::<Vec<_>>().join(","),
                expected: expected.join(","),
            });
        }
        let mut entries: Vec<CoarseEntry<T>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |what: &str| IngestError::Malformed {
                line,
                message: format!("unparseable {what}"),
            };
            let day = parse_day(&record[0]).ok_or_else(|| bad("day"))?;
            let y_bar = parse_number(&record[1]).ok_or_else(|| bad("y_bar"))?;
            let q_bar = parse_number(&record[2]).ok_or_else(|| bad("q_bar"))?;
            let censored = record[3].parse::<bool>().map_err(|_| bad("censored"))?;
            if let Some(prev) = entries.last() {
                if prev.day >= day {
                    return Err(IngestError::Invalid {
                        line,
                        message: format!("days not strictly increasing at {day}"),
                    });
                }
            }
            entries.push(CoarseEntry {
                day,
                y_bar,
                q_bar,
                censored,
            });
        }
        if entries.is_empty() {
            return Err(IngestError::Empty);
        }
        Ok(Self { entries })
    }
}

/// Aggregate measurements into the daily-maximum series.
///
/// A day is uncensored as soon as one of its measurements is quantified; its
/// `y_bar` is then the largest quantified value. `q_bar` is always the
/// largest LOQ of the day, and a fully censored day has `y_bar == q_bar`.
pub fn build_coarse_series<T: Scalar>(ms: &[Measurement<T>]) -> Result<CoarseSeries<T>, IngestError> {
    if ms.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut days: BTreeMap<NaiveDate, (T, Option<T>)> = BTreeMap::new();
    for m in ms {
        let slot = days.entry(m.date).or_insert((m.loq, None));
        slot.0 = slot.0.max(m.loq);
        if let Some(v) = m.value {
            slot.1 = Some(slot.1.map_or(v, |cur: T| cur.max(v)));
        }
    }
    let entries = days
        .into_iter()
        .map(|(day, (q_bar, y))| CoarseEntry {
            day,
            y_bar: y.unwrap_or(q_bar),
            q_bar,
            censored: y.is_none(),
        })
        .collect();
    Ok(CoarseSeries { entries })
}

/// Measurements whose day lies in the closed interval `[start, end]`.
pub fn filter_interval<T: Clone>(
    ms: &[Measurement<T>],
    start: NaiveDate,
    end: NaiveDate,
) -> Vec<Measurement<T>> {
    ms.iter()
        .filter(|m| m.date >= start && m.date <= end)
        .cloned()
        .collect()
}

/// Stations with at least one measurement in `[start, end]`.
pub fn active_stations<T>(ms: &[Measurement<T>], start: NaiveDate, end: NaiveDate) -> BTreeSet<String> {
    ms.iter()
        .filter(|m| m.date >= start && m.date <= end)
        .map(|m| m.station_id.clone())
        .collect()
}

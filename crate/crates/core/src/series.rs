//! Calendar months and monthly time series.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A calendar month, `month` in 1..=12.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Domain(format!("month {month} not in 1..=12")));
        }
        Ok(Self { year, month })
    }

    /// Zero-based calendar month (January = 0).
    pub fn month0(self) -> usize {
        (self.month - 1) as usize
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + self.month0() as i64
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: ord.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(self, other: YearMonth) -> i64 {
        self.ordinal() - other.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Data(format!("date {s:?} is not YYYY-MM")))?;
        let year = y
            .parse::<i32>()
            .map_err(|_| Error::Data(format!("bad year in {s:?}")))?;
        let month = m
            .parse::<u32>()
            .map_err(|_| Error::Data(format!("bad month in {s:?}")))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(Error::Data(format!("date {s:?} is not YYYY-MM")));
        }
        YearMonth::new(year, month).map_err(|_| Error::Data(format!("bad month in {s:?}")))
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Contiguous monthly samples starting at `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub start: YearMonth,
    pub values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(start: YearMonth, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn month_at(&self, index: usize) -> YearMonth {
        self.start.add_months(index as i64)
    }

    /// Zero-based calendar month of sample `index`.
    pub fn calendar_month(&self, index: usize) -> usize {
        (self.start.month0() + index) % 12
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    /// Samples for months in `[from, from + len)`; errors if not covered.
    pub fn window(&self, from: YearMonth, len: usize) -> Result<&[f64]> {
        let offset = from.months_since(self.start);
        if offset < 0 || offset as usize + len > self.values.len() {
            return Err(Error::Precondition(format!(
                "series {}..{} does not cover {} months from {}",
                self.start,
                self.end(),
                len,
                from
            )));
        }
        Ok(&self.values[offset as usize..offset as usize + len])
    }

    pub fn aligned_with(&self, other: &MonthlySeries) -> bool {
        self.start == other.start && self.values.len() == other.values.len()
    }
}

/// Arithmetic mean; `NaN` for an empty slice.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by n).
pub(crate) fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

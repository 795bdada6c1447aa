//! Calendar months and contiguous monthly series.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid date `{0}`: expected YYYY-MM or YYYY-Qn")]
pub struct DateParseError(pub String);

/// A calendar month. Orders chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    year: i32,
    month: u8,
}

impl Month {
    /// Returns `None` unless `1 <= month <= 12`.
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Month { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    /// Months elapsed since January of year 0; used for arithmetic.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Month {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn offset(self, months: i64) -> Self {
        Month::from_ordinal(self.ordinal() + months)
    }

    pub fn succ(self) -> Self {
        self.offset(1)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: Month) -> i64 {
        other.ordinal() - self.ordinal()
    }

    /// Quarter number 1..=4 that contains this month.
    pub fn quarter(self) -> u8 {
        (self.month - 1) / 3 + 1
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = DateParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DateParseError(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(err)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(err());
        }
        let year = y.parse::<i32>().map_err(|_| err())?;
        let month = m.parse::<u8>().map_err(|_| err())?;
        Month::new(year, month).ok_or_else(err)
    }
}

/// A date as written in a macro file: either a month or a quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodLabel {
    Month(Month),
    /// Carries the first month of the quarter.
    Quarter(Month),
}

impl FromStr for PeriodLabel {
    type Err = DateParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some((y, q)) = t.split_once("-Q") {
            let err = || DateParseError(s.to_string());
            if y.len() != 4 || q.len() != 1 {
                return Err(err());
            }
            let year = y.parse::<i32>().map_err(|_| err())?;
            let quarter = q.parse::<u8>().map_err(|_| err())?;
            if !(1..=4).contains(&quarter) {
                return Err(err());
            }
            return Ok(PeriodLabel::Quarter(Month { year, month: (quarter - 1) * 3 + 1 }));
        }
        t.parse().map(PeriodLabel::Month)
    }
}

/// Real values observed on consecutive months starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub start: Month,
    pub values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(start: Month, values: Vec<f64>) -> Self {
        MonthlySeries { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last covered month, `None` for an empty series.
    pub fn end(&self) -> Option<Month> {
        (!self.values.is_empty()).then(|| self.start.offset(self.values.len() as i64 - 1))
    }

    pub fn dates(&self) -> impl Iterator<Item = Month> + '_ {
        (0..self.values.len()).map(move |i| self.start.offset(i as i64))
    }

    pub fn get(&self, month: Month) -> Option<f64> {
        let idx = self.start.months_until(month);
        usize::try_from(idx).ok().and_then(|i| self.values.get(i).copied())
    }

    /// Values on the inclusive range `[from, to]`, or `None` if not fully covered.
    pub fn window(&self, from: Month, to: Month) -> Option<&[f64]> {
        let lo = usize::try_from(self.start.months_until(from)).ok()?;
        let hi = usize::try_from(self.start.months_until(to)).ok()?;
        if hi < lo || hi >= self.values.len() {
            return None;
        }
        Some(&self.values[lo..=hi])
    }

    /// Common coverage of two series as `(first, last)`.
    pub fn overlap(&self, other: &MonthlySeries) -> Option<(Month, Month)> {
        let from = self.start.max(other.start);
        let to = self.end()?.min(other.end()?);
        (from <= to).then_some((from, to))
    }

    /// First differences; the result starts one month later.
    pub fn diff(&self) -> MonthlySeries {
        MonthlySeries {
            start: self.start.succ(),
            values: self.values.windows(2).map(|w| w[1] - w[0]).collect(),
        }
    }
}

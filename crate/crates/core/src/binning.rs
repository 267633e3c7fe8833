//! Calendar binning of date labels into evenly spaced, half-open bins.

use chrono::{Datelike, Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of one temporal bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinWidth {
    Days(u32),
    Months(u32),
    Years(u32),
}

impl BinWidth {
    /// Parses `"7d"`, `"4m"`, `"5y"` style widths.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("bin width '{s}' (expected e.g. 7d, 4m or 5y)"));
        if s.len() < 2 {
            return Err(bad());
        }
        let (num, unit) = s.split_at(s.len() - 1);
        let n: u32 = num.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match unit {
            "d" | "D" => Ok(BinWidth::Days(n)),
            "m" | "M" => Ok(BinWidth::Months(n)),
            "y" | "Y" => Ok(BinWidth::Years(n)),
            _ => Err(bad()),
        }
    }
}

impl BinWidth {
    fn months(self) -> Option<u32> {
        match self {
            BinWidth::Days(_) => None,
            BinWidth::Months(m) => Some(m),
            BinWidth::Years(y) => Some(12 * y),
        }
    }
}

impl std::fmt::Display for BinWidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BinWidth::Days(n) => write!(f, "{n}d"),
            BinWidth::Months(n) => write!(f, "{n}m"),
            BinWidth::Years(n) => write!(f, "{n}y"),
        }
    }
}

/// Bins `[origin + k*width, origin + (k+1)*width)` for `k` in `0..bin_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateBinning {
    pub origin: NaiveDate,
    pub width: BinWidth,
    pub bin_count: usize,
}

impl DateBinning {
    pub fn new(origin: NaiveDate, width: BinWidth, bin_count: usize) -> Result<Self> {
        if matches!(width, BinWidth::Days(0) | BinWidth::Months(0) | BinWidth::Years(0)) {
            return Err(Error::InvalidParameter("bin width must be positive".into()));
        }
        // month arithmetic clamps to month ends, which would break bin_of
        if width.months().is_some() && origin.day() > 28 {
            return Err(Error::InvalidParameter(format!(
                "origin {origin} falls after the 28th; month and year bins need an earlier day"
            )));
        }
        if bin_count == 0 {
            return Err(Error::InvalidParameter("bin_count must be positive".into()));
        }
        Ok(Self {
            origin,
            width,
            bin_count,
        })
    }

    /// First day of bin `k`. `k == bin_count` gives the exclusive end of the range.
    pub fn bin_start(&self, k: usize) -> NaiveDate {
        match self.width {
            BinWidth::Days(w) => self.origin + Days::new(w as u64 * k as u64),
            calendar => self.origin + Months::new(calendar.months().unwrap_or(0) * k as u32),
        }
    }

    pub fn end(&self) -> NaiveDate {
        self.bin_start(self.bin_count)
    }

    /// Index of the bin containing `date`.
    pub fn bin_of(&self, date: NaiveDate) -> Result<usize> {
        let out_of_range = || Error::DateOutOfRange {
            date,
            start: self.origin,
            end: self.end(),
        };
        if date < self.origin {
            return Err(out_of_range());
        }
        let idx = match self.width {
            BinWidth::Days(w) => ((date - self.origin).num_days() as u64 / w as u64) as usize,
            calendar => {
                let w = calendar.months().unwrap_or(1);
                let mut months = (date.year() - self.origin.year()) * 12 + date.month() as i32
                    - self.origin.month() as i32;
                if date.day() < self.origin.day() {
                    months -= 1;
                }
                months as usize / w as usize
            }
        };
        if idx >= self.bin_count {
            return Err(out_of_range());
        }
        Ok(idx)
    }

    /// Smallest binning starting at `origin` that covers every date.
    pub fn covering(origin: NaiveDate, width: BinWidth, dates: &[NaiveDate]) -> Result<Self> {
        let last = dates
            .iter()
            .max()
            .ok_or_else(|| Error::Empty("no dates to bin".into()))?;
        let mut b = Self::new(origin, width, usize::MAX / 2)?;
        let count = b.bin_of(*last)? + 1;
        b.bin_count = count;
        Ok(b)
    }
}

/// Parses an ISO-8601 date label. Year-only labels map to January 1 and
/// year-month labels to the first of the month; anything else is rejected.
pub fn parse_date(s: &str) -> Result<NaiveDate> {
    let t = s.trim();
    let bad = || Error::BadDate(s.to_string());
    let parts: Vec<&str> = t.split('-').collect();
    if parts.iter().any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit())) {
        return Err(bad());
    }
    let num = |p: &str| p.parse::<u32>().map_err(|_| bad());
    match parts.as_slice() {
        [y] if y.len() == 4 => NaiveDate::from_ymd_opt(num(y)? as i32, 1, 1).ok_or_else(bad),
        [y, m] if y.len() == 4 => {
            NaiveDate::from_ymd_opt(num(y)? as i32, num(m)?, 1).ok_or_else(bad)
        }
        [y, m, d] if y.len() == 4 => {
            NaiveDate::from_ymd_opt(num(y)? as i32, num(m)?, num(d)?).ok_or_else(bad)
        }
        _ => Err(bad()),
    }
}

//! Calendar period labels for the supported sampling frequencies.
//!
//! Quarterly labels are `YYYY-Qn`, monthly labels `YYYY-MM`, weekly and
//! daily labels plain ISO dates `YYYY-MM-DD`. Weekly series are treated as
//! an equally spaced grid (7-day steps from the first observation).

use crate::error::{Error, Result};
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Sampling frequency codes used in the long-format CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Freq {
    #[serde(rename = "Q")]
    Quarterly,
    #[serde(rename = "M")]
    Monthly,
    #[serde(rename = "W")]
    Weekly,
    #[serde(rename = "D")]
    Daily,
}

impl Freq {
    pub fn parse(code: &str) -> Result<Freq> {
        match code.trim() {
            "Q" => Ok(Freq::Quarterly),
            "M" => Ok(Freq::Monthly),
            "W" => Ok(Freq::Weekly),
            "D" => Ok(Freq::Daily),
            other => Err(Error::Frequency(format!(
                "unknown frequency code `{other}` (expected Q, M, W or D)"
            ))),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Freq::Quarterly => "Q",
            Freq::Monthly => "M",
            Freq::Weekly => "W",
            Freq::Daily => "D",
        }
    }

    /// Grid step in days for date-labelled frequencies.
    fn day_step(&self) -> i64 {
        match self {
            Freq::Weekly => 7,
            Freq::Daily => 1,
            _ => unreachable!("day_step only defined for W/D"),
        }
    }
}

impl fmt::Display for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One period on a frequency grid. `ord` counts quarters or months since
/// year 0 for Q/M, and days since the common era for W/D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Period {
    pub freq: Freq,
    ord: i64,
}

impl Period {
    pub fn quarterly(year: i32, quarter: u32) -> Period {
        assert!((1..=4).contains(&quarter), "quarter must be 1..=4");
        Period {
            freq: Freq::Quarterly,
            ord: year as i64 * 4 + (quarter as i64 - 1),
        }
    }

    pub fn monthly(year: i32, month: u32) -> Period {
        assert!((1..=12).contains(&month), "month must be 1..=12");
        Period {
            freq: Freq::Monthly,
            ord: year as i64 * 12 + (month as i64 - 1),
        }
    }

    pub fn from_date(freq: Freq, date: NaiveDate) -> Period {
        match freq {
            Freq::Quarterly => Period::quarterly(date.year(), (date.month() - 1) / 3 + 1),
            Freq::Monthly => Period::monthly(date.year(), date.month()),
            Freq::Weekly | Freq::Daily => Period {
                freq,
                ord: date.num_days_from_ce() as i64,
            },
        }
    }

    /// Parse a period label in the frequency's canonical format.
    pub fn parse(freq: Freq, label: &str) -> Result<Period> {
        let label = label.trim();
        let bad = || Error::Schema(format!("unparseable {freq} date `{label}`"));
        match freq {
            Freq::Quarterly => {
                let (y, q) = label.split_once("-Q").ok_or_else(bad)?;
                let year: i32 = y.parse().map_err(|_| bad())?;
                let quarter: u32 = q.parse().map_err(|_| bad())?;
                if !(1..=4).contains(&quarter) {
                    return Err(bad());
                }
                Ok(Period::quarterly(year, quarter))
            }
            Freq::Monthly => {
                let (y, m) = label.split_once('-').ok_or_else(bad)?;
                let year: i32 = y.parse().map_err(|_| bad())?;
                let month: u32 = m.parse().map_err(|_| bad())?;
                if !(1..=12).contains(&month) {
                    return Err(bad());
                }
                Ok(Period::monthly(year, month))
            }
            Freq::Weekly | Freq::Daily => {
                let date = NaiveDate::parse_from_str(label, "%Y-%m-%d").map_err(|_| bad())?;
                Ok(Period::from_date(freq, date))
            }
        }
    }

    /// The immediately following period on the same grid.
    pub fn next(&self) -> Period {
        let step = match self.freq {
            Freq::Quarterly | Freq::Monthly => 1,
            f => f.day_step(),
        };
        Period {
            freq: self.freq,
            ord: self.ord + step,
        }
    }

    /// Period `n` steps ahead (negative for past periods).
    pub fn offset(&self, n: i64) -> Period {
        let step = match self.freq {
            Freq::Quarterly | Freq::Monthly => 1,
            f => f.day_step(),
        };
        Period {
            freq: self.freq,
            ord: self.ord + n * step,
        }
    }

    /// Number of grid steps from `earlier` to `self`; error when the two
    /// labels do not sit on the same grid.
    pub fn steps_since(&self, earlier: &Period) -> Result<i64> {
        if self.freq != earlier.freq {
            return Err(Error::Frequency(format!(
                "cannot mix {} and {} labels",
                self.freq, earlier.freq
            )));
        }
        let step = match self.freq {
            Freq::Quarterly | Freq::Monthly => 1,
            f => f.day_step(),
        };
        let diff = self.ord - earlier.ord;
        if diff % step != 0 {
            return Err(Error::Frequency(format!(
                "{} is not on the same {} grid as {}",
                self, self.freq, earlier
            )));
        }
        Ok(diff / step)
    }

    /// First monthly sub-period of a quarterly period.
    pub fn first_month(&self) -> Period {
        assert_eq!(self.freq, Freq::Quarterly);
        Period {
            freq: Freq::Monthly,
            ord: self.ord * 3,
        }
    }

    /// True when a monthly label falls inside this quarterly period.
    pub fn contains_month(&self, month: &Period) -> bool {
        self.freq == Freq::Quarterly
            && month.freq == Freq::Monthly
            && month.ord.div_euclid(3) == self.ord
    }

    fn as_date(&self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.ord as i32).expect("valid day ordinal")
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.freq {
            Freq::Quarterly => {
                let year = self.ord.div_euclid(4);
                let q = self.ord.rem_euclid(4) + 1;
                write!(f, "{year:04}-Q{q}")
            }
            Freq::Monthly => {
                let year = self.ord.div_euclid(12);
                let m = self.ord.rem_euclid(12) + 1;
                write!(f, "{year:04}-{m:02}")
            }
            Freq::Weekly | Freq::Daily => write!(f, "{}", self.as_date().format("%Y-%m-%d")),
        }
    }
}

/// Consecutive run of periods starting at `first`.
pub fn consecutive_index(first: Period, len: usize) -> Vec<Period> {
    let mut out = Vec::with_capacity(len);
    let mut p = first;
    for _ in 0..len {
        out.push(p);
        p = p.next();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarterly_labels_round_trip() {
        let p = Period::parse(Freq::Quarterly, "2015-Q3").unwrap();
        assert_eq!(p.to_string(), "2015-Q3");
        assert_eq!(p.next().to_string(), "2015-Q4");
        assert_eq!(p.next().next().to_string(), "2016-Q1");
    }

    #[test]
    fn monthly_labels_round_trip() {
        let p = Period::parse(Freq::Monthly, "2019-12").unwrap();
        assert_eq!(p.to_string(), "2019-12");
        assert_eq!(p.next().to_string(), "2020-01");
    }

    #[test]
    fn weekly_grid_steps_by_seven_days() {
        let p = Period::parse(Freq::Weekly, "2020-01-06").unwrap();
        assert_eq!(p.next().to_string(), "2020-01-13");
        assert_eq!(p.next().steps_since(&p).unwrap(), 1);
    }

    #[test]
    fn off_grid_weekly_label_is_rejected() {
        let a = Period::parse(Freq::Weekly, "2020-01-06").unwrap();
        let b = Period::parse(Freq::Weekly, "2020-01-10").unwrap();
        assert!(b.steps_since(&a).is_err());
    }

    #[test]
    fn month_quarter_containment() {
        let q = Period::parse(Freq::Quarterly, "2021-Q2").unwrap();
        assert!(q.contains_month(&Period::parse(Freq::Monthly, "2021-04").unwrap()));
        assert!(q.contains_month(&Period::parse(Freq::Monthly, "2021-06").unwrap()));
        assert!(!q.contains_month(&Period::parse(Freq::Monthly, "2021-07").unwrap()));
        assert_eq!(q.first_month().to_string(), "2021-04");
    }

    #[test]
    fn bad_labels_error() {
        assert!(Period::parse(Freq::Quarterly, "2015-Q5").is_err());
        assert!(Period::parse(Freq::Monthly, "2015-13").is_err());
        assert!(Period::parse(Freq::Daily, "20150101").is_err());
    }
}

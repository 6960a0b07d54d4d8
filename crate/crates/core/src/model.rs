//! Shared domain types: transactions, policy-round partitions, deflators,
//! quarterly price indices and weighted samples.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market segment a dwelling belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Public,
    Private,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::Public => write!(f, "public"),
            Sector::Private => write!(f, "private"),
        }
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "public" => Ok(Sector::Public),
            "private" => Ok(Sector::Private),
            other => Err(Error::data(format!("unknown sector {other:?}"))),
        }
    }
}

/// Dwelling-type code within a sector, e.g. "3room" or "condo".
pub type TypeCode = String;

/// Observed dwelling characteristics. All fields are optional at the record
/// level; the hedonic design drops a column for a round when any record in
/// that round lacks it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub floor_area: Option<f64>,
    pub storey: Option<f64>,
    pub lease_flag: Option<f64>,
    pub age: Option<f64>,
}

/// One resale transaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub date: NaiveDate,
    pub nominal_price: f64,
    pub sector: Sector,
    pub dwelling_type: TypeCode,
    pub chars: Characteristics,
    pub location: [f64; 2],
}

/// Month or quarter key for deflator series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Period {
    Month { year: i32, month: u32 },
    Quarter { year: i32, quarter: u32 },
}

impl Period {
    /// Parses "YYYY-MM" or "YYYY-Qn".
    pub fn parse(s: &str) -> Result<Period> {
        let s = s.trim();
        let (y, rest) = s
            .split_once('-')
            .ok_or_else(|| Error::data(format!("malformed period {s:?}")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::data(format!("malformed period {s:?}")))?;
        if let Some(q) = rest.strip_prefix('Q').or_else(|| rest.strip_prefix('q')) {
            let quarter: u32 = q
                .parse()
                .map_err(|_| Error::data(format!("malformed period {s:?}")))?;
            if !(1..=4).contains(&quarter) {
                return Err(Error::data(format!("quarter out of range in {s:?}")));
            }
            Ok(Period::Quarter { year, quarter })
        } else {
            let month: u32 = rest
                .parse()
                .map_err(|_| Error::data(format!("malformed period {s:?}")))?;
            if !(1..=12).contains(&month) {
                return Err(Error::data(format!("month out of range in {s:?}")));
            }
            Ok(Period::Month { year, month })
        }
    }

    pub fn month_of(date: NaiveDate) -> Period {
        Period::Month {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn quarter_of(date: NaiveDate) -> Period {
        Period::Quarter {
            year: date.year(),
            quarter: (date.month() - 1) / 3 + 1,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            Period::Quarter { year, quarter } => write!(f, "{year:04}-Q{quarter}"),
        }
    }
}

/// Which deflator a run uses to turn nominal prices real.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeflatorKind {
    Cpi,
    Wr,
    Gni,
}

impl DeflatorKind {
    pub const ALL: [DeflatorKind; 3] = [DeflatorKind::Cpi, DeflatorKind::Wr, DeflatorKind::Gni];
}

impl fmt::Display for DeflatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeflatorKind::Cpi => write!(f, "cpi"),
            DeflatorKind::Wr => write!(f, "wr"),
            DeflatorKind::Gni => write!(f, "gni"),
        }
    }
}

impl FromStr for DeflatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpi" => Ok(DeflatorKind::Cpi),
            "wr" => Ok(DeflatorKind::Wr),
            "gni" => Ok(DeflatorKind::Gni),
            other => Err(Error::config(format!("unknown deflator {other:?}"))),
        }
    }
}

/// One deflator series at monthly or quarterly resolution. Values are the
/// divisor applied to nominal prices.
#[derive(Clone, Debug)]
pub struct DeflatorSeries {
    pub name: String,
    values: BTreeMap<Period, f64>,
}

impl DeflatorSeries {
    pub fn new(name: impl Into<String>, values: BTreeMap<Period, f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::data(format!("deflator {name}: empty series")));
        }
        for (period, v) in &values {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::data(format!(
                    "deflator {name}: non-positive value {v} at {period}"
                )));
            }
        }
        Ok(DeflatorSeries { name, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Deflator applying to a transaction date: the matching month for a
    /// monthly series, the matching quarter for a quarterly one.
    pub fn at_date(&self, date: NaiveDate) -> Result<f64> {
        let key = match self.values.keys().next() {
            Some(Period::Month { .. }) => Period::month_of(date),
            Some(Period::Quarter { .. }) => Period::quarter_of(date),
            None => return Err(Error::data(format!("deflator {}: empty series", self.name))),
        };
        self.values.get(&key).copied().ok_or_else(|| {
            Error::data(format!("deflator {}: no value for {key}", self.name))
        })
    }

    /// Deflator applying to a calendar quarter. A quarterly series answers
    /// directly; a monthly one contributes the mean of its three months.
    pub fn at_quarter(&self, year: i32, quarter: u32) -> Result<f64> {
        match self.values.keys().next() {
            Some(Period::Quarter { .. }) => {
                let key = Period::Quarter { year, quarter };
                self.values.get(&key).copied().ok_or_else(|| {
                    Error::data(format!("deflator {}: no value for {key}", self.name))
                })
            }
            Some(Period::Month { .. }) => {
                let mut sum = 0.0;
                for m in (quarter - 1) * 3 + 1..=quarter * 3 {
                    let key = Period::Month { year, month: m };
                    sum += self.values.get(&key).copied().ok_or_else(|| {
                        Error::data(format!("deflator {}: no value for {key}", self.name))
                    })?;
                }
                Ok(sum / 3.0)
            }
            None => Err(Error::data(format!("deflator {}: empty series", self.name))),
        }
    }
}

/// The three deflator series a run may draw on.
#[derive(Clone, Debug)]
pub struct DeflatorBundle {
    pub cpi: DeflatorSeries,
    pub wr: DeflatorSeries,
    pub gni: DeflatorSeries,
}

impl DeflatorBundle {
    pub fn series(&self, kind: DeflatorKind) -> &DeflatorSeries {
        match kind {
            DeflatorKind::Cpi => &self.cpi,
            DeflatorKind::Wr => &self.wr,
            DeflatorKind::Gni => &self.gni,
        }
    }
}

fn quarter_ordinal(year: i32, quarter0: i32) -> i64 {
    year as i64 * 4 + quarter0 as i64
}

fn date_quarter_ordinal(date: NaiveDate) -> i64 {
    quarter_ordinal(date.year(), (date.month() as i32 - 1) / 3)
}

/// Ordered policy rounds partitioning the study window into contiguous
/// half-open date intervals `[start, end)`. Round 0 is the base period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundPartition {
    bounds: Vec<(NaiveDate, NaiveDate)>,
}

impl RoundPartition {
    pub fn new(bounds: Vec<(NaiveDate, NaiveDate)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::config("round partition: no rounds given".to_string()));
        }
        for (r, (start, end)) in bounds.iter().enumerate() {
            if start >= end {
                return Err(Error::config(format!(
                    "round {r}: start {start} not before end {end}"
                )));
            }
        }
        for r in 1..bounds.len() {
            if bounds[r].0 != bounds[r - 1].1 {
                return Err(Error::config(format!(
                    "round {r} starts {} but round {} ends {}; rounds must tile the window",
                    bounds[r].0,
                    r - 1,
                    bounds[r - 1].1
                )));
            }
        }
        Ok(RoundPartition { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn bounds(&self, round: usize) -> (NaiveDate, NaiveDate) {
        self.bounds[round]
    }

    pub fn window(&self) -> (NaiveDate, NaiveDate) {
        (self.bounds[0].0, self.bounds[self.bounds.len() - 1].1)
    }

    /// Round containing `date`, if the date falls inside the window.
    pub fn round_of(&self, date: NaiveDate) -> Option<usize> {
        if date < self.bounds[0].0 {
            return None;
        }
        self.bounds
            .iter()
            .position(|(start, end)| *start <= date && date < *end)
    }

    /// Midpoint of a round on a continuous day axis.
    pub fn midpoint(&self, round: usize) -> f64 {
        let (start, end) = self.bounds[round];
        let s = start.num_days_from_ce() as f64;
        let e = end.num_days_from_ce() as f64;
        (s + e) / 2.0
    }

    /// Calendar quarters spanned by the whole window.
    pub fn total_quarters(&self) -> usize {
        let (start, end) = self.window();
        let last_day = end.pred_opt().expect("window end above calendar floor");
        (date_quarter_ordinal(last_day) - date_quarter_ordinal(start) + 1) as usize
    }

    /// Global quarter index of a date, counted from the first quarter of the
    /// window. The caller must pass a date inside the window.
    pub fn global_quarter(&self, date: NaiveDate) -> usize {
        let (start, _) = self.window();
        (date_quarter_ordinal(date) - date_quarter_ordinal(start)) as usize
    }

    /// Global indices of the calendar quarters intersecting round `r`.
    /// A quarter straddling a boundary shows up in both adjacent rounds.
    pub fn quarters_of_round(&self, round: usize) -> std::ops::Range<usize> {
        let (start, end) = self.bounds[round];
        let last_day = end.pred_opt().expect("round end above calendar floor");
        let first = self.global_quarter(start);
        let last = self.global_quarter(last_day);
        first..last + 1
    }
}

/// Whether a sample carries strictly positive price-like values or signed
/// log-scale values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Price,
    LogLevel,
}

/// Transaction-level values for one round, with post-stratification weights
/// normalized to sum to the sample size.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedSample {
    pub round: usize,
    pub kind: SampleKind,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(round: usize, kind: SampleKind, values: Vec<f64>, weights: Vec<f64>) -> Self {
        WeightedSample {
            round,
            kind,
            values,
            weights,
        }
    }

    /// Price sample with all weights one.
    pub fn unweighted(round: usize, values: Vec<f64>) -> Self {
        let weights = vec![1.0; values.len()];
        WeightedSample::new(round, SampleKind::Price, values, weights)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted mean of the values.
    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            acc += v * w;
        }
        acc / self.weight_sum()
    }
}

/// Validity diagnostics for a weighted sample. Returns one message per
/// violation; an empty list means the sample is usable. The weight-sum check
/// runs at tolerance `1e-6 * n`.
pub fn validate_sample(sample: &WeightedSample) -> Vec<String> {
    let mut violations = Vec::new();
    let n = sample.values.len();
    if n == 0 {
        violations.push("sample is empty".to_string());
        return violations;
    }
    if sample.weights.len() != n {
        violations.push(format!(
            "lengths differ: {} values vs {} weights",
            n,
            sample.weights.len()
        ));
        return violations;
    }
    for (k, v) in sample.values.iter().enumerate() {
        if !v.is_finite() {
            violations.push(format!("values[{k}] = {v} is not finite"));
        } else if sample.kind == SampleKind::Price && *v <= 0.0 {
            violations.push(format!("values[{k}] = {v} <= 0"));
        }
    }
    for (k, w) in sample.weights.iter().enumerate() {
        if !w.is_finite() || *w <= 0.0 {
            violations.push(format!("weights[{k}] = {w} <= 0"));
        }
    }
    let sum = sample.weight_sum();
    let tol = 1e-6 * n as f64;
    if (sum - n as f64).abs() > tol {
        violations.push(format!("weight sum {sum} != n = {n}"));
    }
    violations
}

/// Quarterly log price index for one sector, normalized so the first quarter
/// of the window is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceIndexSeries {
    pub sector: Sector,
    /// `levels[q]` is the normalized log index of global quarter `q`.
    pub levels: Vec<f64>,
}

impl PriceIndexSeries {
    pub fn level(&self, global_quarter: usize) -> Result<f64> {
        self.levels.get(global_quarter).copied().ok_or_else(|| {
            Error::data(format!(
                "price index for {}: no quarter {global_quarter} (have {})",
                self.sector,
                self.levels.len()
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn period_parses_both_shapes() {
        assert_eq!(
            Period::parse("2009-03").unwrap(),
            Period::Month { year: 2009, month: 3 }
        );
        assert_eq!(
            Period::parse("2009-Q2").unwrap(),
            Period::Quarter { year: 2009, quarter: 2 }
        );
        assert!(Period::parse("2009/03").is_err());
        assert!(Period::parse("2009-13").is_err());
        assert!(Period::parse("2009-Q5").is_err());
    }

    #[test]
    fn partition_assigns_every_day_to_one_round() {
        let p = RoundPartition::new(vec![
            (d(2009, 2, 1), d(2010, 3, 5)),
            (d(2010, 3, 5), d(2011, 12, 8)),
            (d(2011, 12, 8), d(2013, 1, 12)),
        ])
        .unwrap();
        let (start, end) = p.window();
        let mut date = start;
        while date < end {
            let hits = (0..p.len())
                .filter(|&r| {
                    let (s, e) = p.bounds(r);
                    s <= date && date < e
                })
                .count();
            assert_eq!(hits, 1, "{date} covered {hits} times");
            assert!(p.round_of(date).is_some());
            date = date.succ_opt().unwrap();
        }
        assert_eq!(p.round_of(end), None);
        assert_eq!(p.round_of(d(2009, 1, 31)), None);
    }

    #[test]
    fn partition_rejects_gaps_and_inversions() {
        assert!(RoundPartition::new(vec![(d(2009, 2, 1), d(2009, 2, 1))]).is_err());
        assert!(RoundPartition::new(vec![
            (d(2009, 2, 1), d(2010, 1, 1)),
            (d(2010, 1, 2), d(2011, 1, 1)),
        ])
        .is_err());
    }

    #[test]
    fn quarter_indexing_counts_from_window_start() {
        let p = RoundPartition::new(vec![
            (d(2009, 2, 1), d(2010, 3, 5)),
            (d(2010, 3, 5), d(2011, 1, 1)),
        ])
        .unwrap();
        // Window spans 2009Q1 .. 2010Q4.
        assert_eq!(p.total_quarters(), 8);
        assert_eq!(p.global_quarter(d(2009, 2, 1)), 0);
        assert_eq!(p.global_quarter(d(2009, 4, 1)), 1);
        assert_eq!(p.global_quarter(d(2010, 12, 31)), 7);
        // Round 0 touches 2009Q1..2010Q1; the straddled 2010Q1 also opens round 1.
        assert_eq!(p.quarters_of_round(0), 0..5);
        assert_eq!(p.quarters_of_round(1), 4..8);
    }

    #[test]
    fn validate_flags_each_violation() {
        let good = WeightedSample::new(
            0,
            SampleKind::Price,
            vec![1.0, 2.0],
            vec![0.5, 1.5],
        );
        assert!(validate_sample(&good).is_empty());

        let bad = WeightedSample::new(
            0,
            SampleKind::Price,
            vec![1.0, -2.0, 3.0],
            vec![0.5, 1.5, -1.0],
        );
        let msgs = validate_sample(&bad);
        assert!(msgs.iter().any(|m| m.contains("values[1]")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("weights[2]")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("weight sum")), "{msgs:?}");

        // Log-level samples may be negative.
        let log = WeightedSample::new(
            1,
            SampleKind::LogLevel,
            vec![-0.3, 0.2],
            vec![1.0, 1.0],
        );
        assert!(validate_sample(&log).is_empty());
    }

    #[test]
    fn weight_sum_tolerance_is_relative_to_n() {
        let n = 5;
        let mut weights = vec![1.0; n];
        weights[0] += 4.0e-6; // inside 1e-6 * n
        let s = WeightedSample::new(0, SampleKind::Price, vec![1.0; n], weights);
        assert!(validate_sample(&s).is_empty());

        let mut weights = vec![1.0; n];
        weights[0] += 6.0e-6; // outside
        let s = WeightedSample::new(0, SampleKind::Price, vec![1.0; n], weights);
        assert!(!validate_sample(&s).is_empty());
    }

    #[test]
    fn deflator_lookup_by_date_and_quarter() {
        let mut m = BTreeMap::new();
        for month in 1..=6 {
            m.insert(
                Period::Month { year: 2009, month },
                1.0 + month as f64 / 100.0,
            );
        }
        let cpi = DeflatorSeries::new("cpi", m).unwrap();
        assert_eq!(cpi.at_date(d(2009, 3, 15)).unwrap(), 1.03);
        // Quarterly view of a monthly series averages the three months.
        let q1 = cpi.at_quarter(2009, 1).unwrap();
        assert!((q1 - 1.02).abs() < 1e-12);
        assert!(cpi.at_date(d(2010, 1, 1)).is_err());

        let mut q = BTreeMap::new();
        q.insert(Period::Quarter { year: 2009, quarter: 1 }, 2.0);
        let wr = DeflatorSeries::new("wr", q).unwrap();
        assert_eq!(wr.at_date(d(2009, 2, 10)).unwrap(), 2.0);
        assert_eq!(wr.at_quarter(2009, 1).unwrap(), 2.0);
        assert!(wr.at_quarter(2009, 2).is_err());
    }

    #[test]
    fn deflator_rejects_nonpositive_values() {
        let mut m = BTreeMap::new();
        m.insert(Period::Month { year: 2009, month: 1 }, 0.0);
        assert!(DeflatorSeries::new("cpi", m).is_err());
    }
}

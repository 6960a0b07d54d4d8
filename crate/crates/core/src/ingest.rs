//! Input parsing and preprocessing: transaction files, deflator series,
//! dwelling-stock interpolation and index normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    Characteristics, DeflatorSeries, Period, PriceIndexSeries, RoundPartition, Sector,
    TransactionRecord, TypeCode,
};

/// Maps logical fields to CSV header names. Fields set to `None` are read
/// under their default header when present and skipped otherwise.
#[derive(Clone, Debug)]
pub struct ColumnMap {
    pub date: String,
    pub price: String,
    pub sector: String,
    pub dwelling_type: String,
    pub x: String,
    pub y: String,
    pub floor_area: String,
    pub storey: String,
    pub lease_flag: String,
    pub age: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            date: "date".into(),
            price: "price".into(),
            sector: "sector".into(),
            dwelling_type: "type".into(),
            x: "x".into(),
            y: "y".into(),
            floor_area: "area".into(),
            storey: "storey".into(),
            lease_flag: "lease".into(),
            age: "age".into(),
        }
    }
}

/// A row the parser refused, with its 1-based line number and the reason.
#[derive(Clone, Debug, Serialize)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

/// Parse outcome: accepted records plus per-row rejects. Only structural
/// problems (missing required columns, unreadable file) are fatal.
#[derive(Debug, Default)]
pub struct ParseReport {
    pub records: Vec<TransactionRecord>,
    pub rejects: Vec<RowError>,
}

pub fn parse_transactions_path(path: &Path, map: &ColumnMap) -> Result<ParseReport> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    parse_transactions(file, map)
}

pub fn parse_transactions<R: Read>(reader: R, map: &ColumnMap) -> Result<ParseReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        col(name).ok_or_else(|| Error::data(format!("missing required column {name:?}")))
    };

    let c_date = require(&map.date)?;
    let c_price = require(&map.price)?;
    let c_sector = require(&map.sector)?;
    let c_type = require(&map.dwelling_type)?;
    let c_x = require(&map.x)?;
    let c_y = require(&map.y)?;
    let c_area = col(&map.floor_area);
    let c_storey = col(&map.storey);
    let c_lease = col(&map.lease_flag);
    let c_age = col(&map.age);

    let mut report = ParseReport::default();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.rejects.push(RowError {
                    line,
                    message: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        match parse_row(&row, line, c_date, c_price, c_sector, c_type, c_x, c_y, c_area, c_storey, c_lease, c_age) {
            Ok(rec) => report.records.push(rec),
            Err(message) => report.rejects.push(RowError { line, message }),
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn parse_row(
    row: &csv::StringRecord,
    line: usize,
    c_date: usize,
    c_price: usize,
    c_sector: usize,
    c_type: usize,
    c_x: usize,
    c_y: usize,
    c_area: Option<usize>,
    c_storey: Option<usize>,
    c_lease: Option<usize>,
    c_age: Option<usize>,
) -> std::result::Result<TransactionRecord, String> {
    let field = |i: usize, name: &str| {
        row.get(i)
            .ok_or_else(|| format!("line {line}: missing field {name}"))
    };
    let date_s = field(c_date, "date")?;
    let date = NaiveDate::parse_from_str(date_s, "%Y-%m-%d")
        .map_err(|_| format!("line {line}: malformed date {date_s:?}"))?;
    let price_s = field(c_price, "price")?;
    let nominal_price: f64 = price_s
        .parse()
        .map_err(|_| format!("line {line}: malformed price {price_s:?}"))?;
    if !nominal_price.is_finite() || nominal_price <= 0.0 {
        return Err(format!("line {line}: non-positive price {nominal_price}"));
    }
    let sector: Sector = field(c_sector, "sector")?
        .parse()
        .map_err(|_| format!("line {line}: unknown sector {:?}", row.get(c_sector).unwrap_or("")))?;
    let dwelling_type: TypeCode = field(c_type, "type")?.to_string();
    if dwelling_type.is_empty() {
        return Err(format!("line {line}: empty dwelling type"));
    }
    let coord = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let s = field(i, name)?;
        s.parse()
            .map_err(|_| format!("line {line}: malformed {name} {s:?}"))
    };
    let x = coord(c_x, "x")?;
    let y = coord(c_y, "y")?;

    let optional = |i: Option<usize>| -> Option<f64> {
        i.and_then(|i| row.get(i))
            .filter(|s| !s.is_empty())
            .and_then(|s| s.parse().ok())
    };

    Ok(TransactionRecord {
        date,
        nominal_price,
        sector,
        dwelling_type,
        chars: Characteristics {
            floor_area: optional(c_area),
            storey: optional(c_storey),
            lease_flag: optional(c_lease),
            age: optional(c_age),
        },
        location: [x, y],
    })
}

/// Reads a two-column `period,value` series ("YYYY-MM" or "YYYY-Qn" periods).
pub fn parse_deflator<R: Read>(reader: R, name: &str) -> Result<DeflatorSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = BTreeMap::new();
    let mut resolution: Option<bool> = None; // true = monthly
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let line = idx + 2;
        let period = Period::parse(row.get(0).unwrap_or("")).map_err(|e| {
            Error::data(format!("{name} line {line}: {e}"))
        })?;
        let monthly = matches!(period, Period::Month { .. });
        match resolution {
            None => resolution = Some(monthly),
            Some(r) if r != monthly => {
                return Err(Error::data(format!(
                    "{name} line {line}: mixes monthly and quarterly periods"
                )))
            }
            _ => {}
        }
        let v_s = row.get(1).unwrap_or("");
        let v: f64 = v_s
            .parse()
            .map_err(|_| Error::data(format!("{name} line {line}: malformed value {v_s:?}")))?;
        if values.insert(period, v).is_some() {
            return Err(Error::data(format!(
                "{name} line {line}: duplicate period {period}"
            )));
        }
    }
    DeflatorSeries::new(name, values)
}

pub fn parse_deflator_path(path: &Path, name: &str) -> Result<DeflatorSeries> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    parse_deflator(file, name)
}

/// Converts nominal prices to real ones in place of the nominal field,
/// returning a new record vector in input order.
pub fn deflate(
    records: &[TransactionRecord],
    series: &DeflatorSeries,
) -> Result<Vec<TransactionRecord>> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let d = series.at_date(rec.date)?;
        let mut real = rec.clone();
        real.nominal_price = rec.nominal_price / d;
        out.push(real);
    }
    Ok(out)
}

/// Year-end dwelling counts by sector and type, with any ownership multiplier
/// already applied.
#[derive(Clone, Debug, Default)]
pub struct StockTable {
    counts: BTreeMap<(i32, Sector, TypeCode), f64>,
}

impl StockTable {
    pub fn insert(&mut self, year: i32, sector: Sector, dwelling_type: TypeCode, count: f64) {
        self.counts.insert((year, sector, dwelling_type), count);
    }

    pub fn get(&self, year: i32, sector: Sector, dwelling_type: &str) -> Option<f64> {
        self.counts
            .get(&(year, sector, dwelling_type.to_string()))
            .copied()
    }

    pub fn years(&self, sector: Sector) -> Vec<i32> {
        // Keys iterate in (year, sector, type) order, so years arrive sorted.
        let mut years: Vec<i32> = self
            .counts
            .keys()
            .filter(|(_, s, _)| *s == sector)
            .map(|(y, _, _)| *y)
            .collect();
        years.dedup();
        years
    }

    pub fn type_codes(&self, sector: Sector) -> Vec<TypeCode> {
        let set: BTreeSet<&TypeCode> = self
            .counts
            .keys()
            .filter(|(_, s, _)| *s == sector)
            .map(|(_, _, t)| t)
            .collect();
        set.into_iter().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// `year,sector,type,count` rows; `multipliers` (from an ownership file) are
/// matched by the same key and default to one.
pub fn parse_stock<R: Read>(
    reader: R,
    multipliers: Option<&BTreeMap<(i32, Sector, TypeCode), f64>>,
) -> Result<StockTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut table = StockTable::default();
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let line = idx + 2;
        let year: i32 = row
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("stock line {line}: malformed year")))?;
        let sector: Sector = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("stock line {line}: unknown sector")))?;
        let ty = row.get(2).unwrap_or("").to_string();
        let count: f64 = row
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("stock line {line}: malformed count")))?;
        if count < 0.0 {
            return Err(Error::data(format!("stock line {line}: negative count")));
        }
        let mult = multipliers
            .and_then(|m| m.get(&(year, sector, ty.clone())))
            .copied()
            .unwrap_or(1.0);
        table.insert(year, sector, ty, count * mult);
    }
    Ok(table)
}

/// `year,sector,type,rate` ownership rates used to scale stock counts.
pub fn parse_ownership<R: Read>(reader: R) -> Result<BTreeMap<(i32, Sector, TypeCode), f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut map = BTreeMap::new();
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let line = idx + 2;
        let year: i32 = row
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("ownership line {line}: malformed year")))?;
        let sector: Sector = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("ownership line {line}: unknown sector")))?;
        let ty = row.get(2).unwrap_or("").to_string();
        let rate: f64 = row
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("ownership line {line}: malformed rate")))?;
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::data(format!(
                "ownership line {line}: rate {rate} outside [0, 1]"
            )));
        }
        map.insert((year, sector, ty), rate);
    }
    Ok(map)
}

fn july_first(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 7, 1).expect("july 1 exists")
}

/// Interpolated stock count for one type at each round midpoint. Yearly
/// values anchor at July 1; outside the anchored span the nearest segment
/// extrapolates linearly.
pub fn interpolate_stock(
    table: &StockTable,
    sector: Sector,
    partition: &RoundPartition,
) -> Result<Vec<BTreeMap<TypeCode, f64>>> {
    let years = table.years(sector);
    if years.is_empty() {
        return Err(Error::data(format!("stock table has no rows for {sector}")));
    }
    let types = table.type_codes(sector);
    let mut per_round = Vec::with_capacity(partition.len());
    for r in 0..partition.len() {
        let mid = partition.midpoint(r);
        let mut row = BTreeMap::new();
        for ty in &types {
            let mut pts: Vec<(f64, f64)> = Vec::with_capacity(years.len());
            for &y in &years {
                if let Some(c) = table.get(y, sector, ty) {
                    pts.push((july_first(y).num_days_from_ce() as f64, c));
                }
            }
            if pts.is_empty() {
                continue;
            }
            row.insert(ty.clone(), linear_at(&pts, mid));
        }
        per_round.push(row);
    }
    Ok(per_round)
}

fn linear_at(pts: &[(f64, f64)], x: f64) -> f64 {
    if pts.len() == 1 {
        return pts[0].1;
    }
    // Clamp to the outermost segments for extrapolation.
    let seg = match pts.iter().position(|(px, _)| *px > x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => pts.len() - 2,
    };
    let (x0, y0) = pts[seg];
    let (x1, y1) = pts[seg + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Quarterly nominal index values by sector, from `quarter,sector,value` rows.
pub fn parse_index<R: Read>(reader: R) -> Result<BTreeMap<(Sector, i32, u32), f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut map = BTreeMap::new();
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let line = idx + 2;
        let period = Period::parse(row.get(0).unwrap_or(""))
            .map_err(|e| Error::data(format!("index line {line}: {e}")))?;
        let (year, quarter) = match period {
            Period::Quarter { year, quarter } => (year, quarter),
            Period::Month { .. } => {
                return Err(Error::data(format!(
                    "index line {line}: expected a quarterly period"
                )))
            }
        };
        let sector: Sector = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("index line {line}: unknown sector")))?;
        let v: f64 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("index line {line}: malformed value")))?;
        if v <= 0.0 {
            return Err(Error::data(format!("index line {line}: non-positive value")));
        }
        map.insert((sector, year, quarter), v);
    }
    Ok(map)
}

/// Deflates a nominal quarterly index and normalizes it to a log series with
/// the window's first quarter at zero.
pub fn normalize_index(
    nominal: &BTreeMap<(Sector, i32, u32), f64>,
    sector: Sector,
    partition: &RoundPartition,
    deflator: &DeflatorSeries,
) -> Result<PriceIndexSeries> {
    let (start, _) = partition.window();
    let mut year = start.year();
    let mut quarter = (start.month() - 1) / 3 + 1;
    let total = partition.total_quarters();

    let mut real = Vec::with_capacity(total);
    for q in 0..total {
        let nom = nominal.get(&(sector, year, quarter)).copied().ok_or_else(|| {
            Error::data(format!(
                "index for {sector}: missing quarter {year}-Q{quarter} (global {q})"
            ))
        })?;
        let defl = deflator.at_quarter(year, quarter)?;
        real.push(nom / defl);
        quarter += 1;
        if quarter == 5 {
            quarter = 1;
            year += 1;
        }
    }
    let base = real[0];
    let levels: Vec<f64> = real.iter().map(|v| (v / base).ln()).collect();
    Ok(PriceIndexSeries { sector, levels })
}

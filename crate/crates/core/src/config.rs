//! Run configuration: the JSON document that names the input files and fixes
//! the estimation settings for a pipeline run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    parse_deflator_path, parse_index, parse_ownership, parse_stock, parse_transactions_path,
    ColumnMap, ParseReport, StockTable,
};
use crate::model::{
    DeflatorBundle, DeflatorKind, RoundPartition, Sector, TransactionRecord,
};

/// Locations of the three deflator series.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeflatorPaths {
    pub cpi: PathBuf,
    pub wr: PathBuf,
    pub gni: PathBuf,
}

/// One policy round's date window, start inclusive, end exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Which comparisons a dominance run makes: each round against the base
/// round, or each round against every earlier one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    #[default]
    VsBase,
    VsAll,
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vs-base" => Ok(Design::VsBase),
            "vs-all" => Ok(Design::VsAll),
            other => Err(Error::config(format!("unknown design {other:?}"))),
        }
    }
}

fn default_bootstrap() -> usize {
    1000
}

fn default_nu_grid() -> Vec<f64> {
    crate::welfare::DEFAULT_NU_GRID.to_vec()
}

fn default_orders() -> Vec<u8> {
    vec![1, 2, 3]
}

fn default_deflator() -> DeflatorKind {
    DeflatorKind::Cpi
}

/// Full description of a run. Relative paths are resolved against the
/// directory containing the config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub transactions: PathBuf,
    pub deflators: DeflatorPaths,
    pub stock: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ownership: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<PathBuf>,
    pub sector: Sector,
    pub rounds: Vec<RoundWindow>,
    #[serde(default = "default_deflator")]
    pub deflator: DeflatorKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_nu_grid")]
    pub nu_grid: Vec<f64>,
    #[serde(default = "default_orders")]
    pub orders: Vec<u8>,
    #[serde(default)]
    pub design: Design,
}

impl RunConfig {
    /// Reads and validates a config file, resolving relative paths against
    /// its parent directory.
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.transactions);
        fix(&mut self.deflators.cpi);
        fix(&mut self.deflators.wr);
        fix(&mut self.deflators.gni);
        fix(&mut self.stock);
        if let Some(p) = &mut self.ownership {
            fix(p);
        }
        if let Some(p) = &mut self.index {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.partition()?;
        if self.bootstrap == 0 {
            return Err(Error::config("bootstrap replication count must be positive".to_string()));
        }
        if self.nu_grid.is_empty() {
            return Err(Error::config("aversion grid is empty".to_string()));
        }
        if let Some(nu) = self.nu_grid.iter().find(|n| !n.is_finite() || **n < 0.0) {
            return Err(Error::config(format!("aversion value {nu} outside [0, inf)")));
        }
        if self.orders.is_empty() {
            return Err(Error::config("dominance order list is empty".to_string()));
        }
        if let Some(s) = self.orders.iter().find(|s| !(1..=3).contains(*s)) {
            return Err(Error::config(format!("dominance order {s} outside 1..=3")));
        }
        Ok(())
    }

    pub fn partition(&self) -> Result<RoundPartition> {
        RoundPartition::new(self.rounds.iter().map(|r| (r.start, r.end)).collect())
    }
}

/// Everything a run reads from disk, parsed but not yet transformed.
#[derive(Debug)]
pub struct LoadedData {
    pub transactions: ParseReport,
    pub deflators: DeflatorBundle,
    pub stock: StockTable,
    pub index: Option<BTreeMap<(Sector, i32, u32), f64>>,
    pub partition: RoundPartition,
}

/// Parses every input file named by the config.
pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    let transactions = parse_transactions_path(&cfg.transactions, &ColumnMap::default())?;
    let deflators = DeflatorBundle {
        cpi: parse_deflator_path(&cfg.deflators.cpi, "cpi")?,
        wr: parse_deflator_path(&cfg.deflators.wr, "wr")?,
        gni: parse_deflator_path(&cfg.deflators.gni, "gni")?,
    };
    let ownership = match &cfg.ownership {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
            Some(parse_ownership(file)?)
        }
        None => None,
    };
    let stock_file = std::fs::File::open(&cfg.stock)
        .map_err(|e| Error::data(format!("{}: {e}", cfg.stock.display())))?;
    let stock = parse_stock(stock_file, ownership.as_ref())?;
    let index = match &cfg.index {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
            Some(parse_index(file)?)
        }
        None => None,
    };
    Ok(LoadedData {
        transactions,
        deflators,
        stock,
        index,
        partition: cfg.partition()?,
    })
}

/// Splits records by round for one sector, preserving input order within each
/// round. Records outside the window or in the other sector are dropped.
pub fn split_rounds<'a>(
    records: &'a [TransactionRecord],
    partition: &RoundPartition,
    sector: Sector,
) -> Vec<Vec<&'a TransactionRecord>> {
    let mut out: Vec<Vec<&TransactionRecord>> = vec![Vec::new(); partition.len()];
    for rec in records {
        if rec.sector != sector {
            continue;
        }
        if let Some(r) = partition.round_of(rec.date) {
            out[r].push(rec);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "transactions": "tx.csv",
            "deflators": {"cpi": "cpi.csv", "wr": "wr.csv", "gni": "gni.csv"},
            "stock": "stock.csv",
            "sector": "public",
            "rounds": [
                {"start": "2009-02-01", "end": "2010-03-05"},
                {"start": "2010-03-05", "end": "2011-12-08"}
            ]
        })
    }

    #[test]
    fn defaults_fill_optional_settings() {
        let cfg: RunConfig = serde_json::from_value(minimal_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.deflator, DeflatorKind::Cpi);
        assert_eq!(cfg.bootstrap, 1000);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.nu_grid, vec![0.0, 1.0, 1.5, 2.0, 2.5]);
        assert_eq!(cfg.orders, vec![1, 2, 3]);
        assert_eq!(cfg.design, Design::VsBase);
        assert_eq!(cfg.partition().unwrap().len(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = minimal_json();
        v["surprise"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn non_contiguous_rounds_fail_validation() {
        let mut v = minimal_json();
        v["rounds"][1]["start"] = serde_json::json!("2010-03-06");
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bad_settings_fail_validation() {
        let mut v = minimal_json();
        v["orders"] = serde_json::json!([1, 4]);
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().is_err());

        let mut v = minimal_json();
        v["bootstrap"] = serde_json::json!(0);
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().is_err());

        let mut v = minimal_json();
        v["nu_grid"] = serde_json::json!([-0.5]);
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn from_path_rebases_relative_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, serde_json::to_string(&minimal_json()).unwrap()).unwrap();
        let cfg = RunConfig::from_path(&path).unwrap();
        assert_eq!(cfg.transactions, dir.path().join("tx.csv"));
        assert_eq!(cfg.deflators.gni, dir.path().join("gni.csv"));
    }

    #[test]
    fn design_parses_both_variants() {
        let d: Design = "vs-all".parse().unwrap();
        assert_eq!(d, Design::VsAll);
        assert!("sideways".parse::<Design>().is_err());
        let j = serde_json::to_string(&Design::VsBase).unwrap();
        assert_eq!(j, "\"vs-base\"");
    }

    #[test]
    fn split_rounds_respects_sector_and_window() {
        use crate::model::Characteristics;
        let d = |y: i32, m: u32, day: u32| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        let partition =
            RoundPartition::new(vec![(d(2009, 1, 1), d(2010, 1, 1)), (d(2010, 1, 1), d(2011, 1, 1))])
                .unwrap();
        let rec = |date: NaiveDate, sector: Sector| TransactionRecord {
            date,
            nominal_price: 1.0,
            sector,
            dwelling_type: "3room".into(),
            chars: Characteristics::default(),
            location: [0.0, 0.0],
        };
        let records = vec![
            rec(d(2009, 5, 1), Sector::Public),
            rec(d(2010, 5, 1), Sector::Public),
            rec(d(2010, 6, 1), Sector::Private),
            rec(d(2011, 5, 1), Sector::Public),
        ];
        let rounds = split_rounds(&records, &partition, Sector::Public);
        assert_eq!(rounds[0].len(), 1);
        assert_eq!(rounds[1].len(), 1);
        assert_eq!(rounds[1][0].date, d(2010, 5, 1));
    }
}

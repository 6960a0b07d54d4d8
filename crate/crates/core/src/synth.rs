//! Synthetic data with known ground truth: parametric price laws, exact
//! dominance curves for them, and a writer that lays a full input bundle on
//! disk for end-to-end runs.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{DeflatorPaths, RoundWindow, RunConfig};
use crate::error::{Error, Result};
use crate::model::{Characteristics, RoundPartition, Sector, TransactionRecord};
use crate::resample::replication_rng;

/// Parametric law for synthetic prices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PriceLaw {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl PriceLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriceLaw::Uniform { lo, hi } if lo < hi => Ok(()),
            PriceLaw::Uniform { lo, hi } => Err(Error::config(format!(
                "uniform law needs lo < hi, got [{lo}, {hi}]"
            ))),
            PriceLaw::Exponential { rate } if rate > 0.0 => Ok(()),
            PriceLaw::Exponential { rate } => {
                Err(Error::config(format!("exponential rate {rate} must be positive")))
            }
            PriceLaw::Lognormal { sigma, .. } if sigma > 0.0 => Ok(()),
            PriceLaw::Lognormal { sigma, .. } => {
                Err(Error::config(format!("lognormal sigma {sigma} must be positive")))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            PriceLaw::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            PriceLaw::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
            PriceLaw::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = Normal::new(mu, sigma).expect("validated parameters");
                    z.cdf(x.ln())
                }
            }
        }
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            PriceLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
            PriceLaw::Exponential { rate } => -(-u).ln_1p() / rate,
            PriceLaw::Lognormal { mu, sigma } => {
                let z = Normal::new(0.0, 1.0).expect("unit normal");
                (mu + sigma * z.inverse_cdf(u)).exp()
            }
        }
    }

    /// Inverse-CDF draw; the uniform input is floored away from zero so
    /// positive-support laws never emit an exact zero.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>().max(1e-300);
        self.quantile(u)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PriceLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            PriceLaw::Exponential { rate } => 1.0 / rate,
            PriceLaw::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// Lower edge of the support.
    pub fn support_lo(&self) -> f64 {
        match *self {
            PriceLaw::Uniform { lo, .. } => lo,
            PriceLaw::Exponential { .. } | PriceLaw::Lognormal { .. } => 0.0,
        }
    }
}

/// Deterministic value vector for one law on one RNG stream.
pub fn sample_values(law: &PriceLaw, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    law.validate()?;
    let mut rng = replication_rng(seed, stream);
    Ok((0..n).map(|_| law.sample(&mut rng)).collect())
}

/// Adaptive Simpson quadrature with Richardson correction.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a >= b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Exact order-`s` dominance ordinate `D[s]_j(p) - D[s]_i(p)` for two laws.
/// Orders two and three integrate the CDF gap numerically to a 1e-10
/// tolerance.
pub fn oracle_dominance(j: &PriceLaw, i: &PriceLaw, s: u8, p: f64) -> Result<f64> {
    j.validate()?;
    i.validate()?;
    let gap = |z: f64| j.cdf(z) - i.cdf(z);
    let lo = j.support_lo().min(i.support_lo());
    Ok(match s {
        1 => gap(p),
        2 => adaptive_simpson(&gap, lo, p, 1e-10),
        3 => {
            let i1 = adaptive_simpson(&gap, lo, p, 1e-10);
            let i2 = adaptive_simpson(&|z: f64| z * gap(z), lo, p, 1e-10);
            p * i1 - i2
        }
        other => return Err(Error::config(format!("dominance order {other} outside 1..=3"))),
    })
}

/// Share of the dwelling stock and of transactions held by one type code.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeShare {
    pub code: String,
    pub stock_share: f64,
    pub sample_share: f64,
}

/// One synthetic round: a price law active over a date window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundScenario {
    pub n: usize,
    pub law: PriceLaw,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Full synthetic scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub sector: Sector,
    pub rounds: Vec<RoundScenario>,
    pub types: Vec<TypeShare>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.partition()?;
        for r in &self.rounds {
            r.law.validate()?;
            if r.n == 0 {
                return Err(Error::config("scenario round with zero transactions".to_string()));
            }
        }
        if self.types.is_empty() {
            return Err(Error::config("scenario needs at least one type".to_string()));
        }
        for t in &self.types {
            if t.code.is_empty() {
                return Err(Error::config("scenario type with empty code".to_string()));
            }
            if !(t.stock_share > 0.0) || !(t.sample_share > 0.0) {
                return Err(Error::config(format!(
                    "type {:?}: shares must be positive",
                    t.code
                )));
            }
        }
        Ok(())
    }

    pub fn partition(&self) -> Result<RoundPartition> {
        RoundPartition::new(self.rounds.iter().map(|r| (r.start, r.end)).collect())
    }
}

/// Draws the transaction table for a scenario. Round `r` consumes RNG stream
/// `(seed, r)`; per record the stream yields date, price, type, then the
/// characteristics and location, so adding rounds never disturbs earlier
/// ones.
pub fn generate_transactions(spec: &ScenarioSpec) -> Result<Vec<TransactionRecord>> {
    spec.validate()?;
    let share_sum: f64 = spec.types.iter().map(|t| t.sample_share).sum();
    let mut cum = Vec::with_capacity(spec.types.len());
    let mut acc = 0.0;
    for t in &spec.types {
        acc += t.sample_share / share_sum;
        cum.push(acc);
    }
    let mut out = Vec::with_capacity(spec.rounds.iter().map(|r| r.n).sum());
    for (r, round) in spec.rounds.iter().enumerate() {
        let mut rng = replication_rng(spec.seed, r as u64);
        let days = (round.end - round.start).num_days();
        for _ in 0..round.n {
            let date = round.start + chrono::Days::new(rng.random_range(0..days) as u64);
            let price = round.law.sample(&mut rng);
            let u: f64 = rng.random();
            let ty = match cum.iter().position(|c| u < *c) {
                Some(k) => k,
                None => spec.types.len() - 1,
            };
            let area = 50.0 + 100.0 * rng.random::<f64>();
            let storey = (1 + rng.random_range(0..20)) as f64;
            let lease = f64::from(rng.random::<f64>() < 0.5);
            let age = 1.0 + 39.0 * rng.random::<f64>();
            let location = [rng.random::<f64>(), rng.random::<f64>()];
            out.push(TransactionRecord {
                date,
                nominal_price: price,
                sector: spec.sector,
                dwelling_type: spec.types[ty].code.clone(),
                chars: Characteristics {
                    floor_area: Some(area),
                    storey: Some(storey),
                    lease_flag: Some(lease),
                    age: Some(age),
                },
                location,
            });
        }
    }
    Ok(out)
}

/// Paths written by [`write_bundle`].
#[derive(Clone, Debug)]
pub struct BundlePaths {
    pub config: PathBuf,
    pub transactions: PathBuf,
}

/// Writes a ready-to-run input bundle: transactions, unit deflators, constant
/// stock and ownership tables, a flat nominal index, and a `config.json`
/// wired to all of them. Unit deflators keep real prices equal to nominal
/// ones, so the generating laws stay the ground truth end to end.
pub fn write_bundle(dir: &Path, spec: &ScenarioSpec) -> Result<BundlePaths> {
    spec.validate()?;
    std::fs::create_dir_all(dir)?;
    let partition = spec.partition()?;
    let (w_start, w_end) = partition.window();
    let records = generate_transactions(spec)?;

    let tx_path = dir.join("transactions.csv");
    {
        let mut w = csv::Writer::from_path(&tx_path)?;
        w.write_record(["date", "price", "sector", "type", "area", "storey", "lease", "age", "x", "y"])?;
        for rec in &records {
            w.write_record([
                rec.date.to_string(),
                format!("{:.6}", rec.nominal_price),
                rec.sector.to_string(),
                rec.dwelling_type.clone(),
                format!("{:.3}", rec.chars.floor_area.unwrap_or(0.0)),
                format!("{}", rec.chars.storey.unwrap_or(0.0)),
                format!("{}", rec.chars.lease_flag.unwrap_or(0.0)),
                format!("{:.3}", rec.chars.age.unwrap_or(0.0)),
                format!("{:.6}", rec.location[0]),
                format!("{:.6}", rec.location[1]),
            ])?;
        }
        w.flush()?;
    }

    let cpi_path = dir.join("cpi.csv");
    {
        let mut f = std::fs::File::create(&cpi_path)?;
        writeln!(f, "period,value")?;
        let mut year = w_start.year();
        let mut month = w_start.month();
        let last = w_end.pred_opt().expect("window end above calendar floor");
        while (year, month) <= (last.year(), last.month()) {
            writeln!(f, "{year:04}-{month:02},1.0")?;
            month += 1;
            if month == 13 {
                month = 1;
                year += 1;
            }
        }
    }
    let quarterly_unit = |path: &Path| -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "period,value")?;
        let total = partition.total_quarters();
        let mut year = w_start.year();
        let mut quarter = (w_start.month() - 1) / 3 + 1;
        for _ in 0..total {
            writeln!(f, "{year:04}-Q{quarter},1.0")?;
            quarter += 1;
            if quarter == 5 {
                quarter = 1;
                year += 1;
            }
        }
        Ok(())
    };
    let wr_path = dir.join("wr.csv");
    quarterly_unit(&wr_path)?;
    let gni_path = dir.join("gni.csv");
    quarterly_unit(&gni_path)?;

    let share_sum: f64 = spec.types.iter().map(|t| t.stock_share).sum();
    let stock_path = dir.join("stock.csv");
    let own_path = dir.join("ownership.csv");
    {
        let mut fs = std::fs::File::create(&stock_path)?;
        let mut fo = std::fs::File::create(&own_path)?;
        writeln!(fs, "year,sector,type,count")?;
        writeln!(fo, "year,sector,type,rate")?;
        for year in w_start.year()..=w_end.year() {
            for t in &spec.types {
                let count = 1_000_000.0 * t.stock_share / share_sum;
                writeln!(fs, "{year},{},{},{count:.3}", spec.sector, t.code)?;
                writeln!(fo, "{year},{},{},1.0", spec.sector, t.code)?;
            }
        }
    }

    let index_path = dir.join("index.csv");
    {
        let mut f = std::fs::File::create(&index_path)?;
        writeln!(f, "period,sector,value")?;
        let total = partition.total_quarters();
        let mut year = w_start.year();
        let mut quarter = (w_start.month() - 1) / 3 + 1;
        for _ in 0..total {
            writeln!(f, "{year:04}-Q{quarter},{},100.0", spec.sector)?;
            quarter += 1;
            if quarter == 5 {
                quarter = 1;
                year += 1;
            }
        }
    }

    let cfg = RunConfig {
        transactions: PathBuf::from("transactions.csv"),
        deflators: DeflatorPaths {
            cpi: PathBuf::from("cpi.csv"),
            wr: PathBuf::from("wr.csv"),
            gni: PathBuf::from("gni.csv"),
        },
        stock: PathBuf::from("stock.csv"),
        ownership: Some(PathBuf::from("ownership.csv")),
        index: Some(PathBuf::from("index.csv")),
        sector: spec.sector,
        rounds: spec
            .rounds
            .iter()
            .map(|r| RoundWindow {
                start: r.start,
                end: r.end,
            })
            .collect(),
        deflator: crate::model::DeflatorKind::Cpi,
        seed: spec.seed,
        bootstrap: 200,
        nu_grid: crate::welfare::DEFAULT_NU_GRID.to_vec(),
        orders: vec![1, 2, 3],
        design: Default::default(),
    };
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&cfg).map_err(|e| {
        Error::config(format!("serializing bundle config: {e}"))
    })?)?;

    Ok(BundlePaths {
        config: config_path,
        transactions: tx_path,
    })
}

//! `domos`: command-line front end for the estimators in `domos-core`.
//!
//! Every subcommand reads a JSON run config, applies flag overrides, runs
//! one stage of the pipeline, and emits a single JSON document to stdout or
//! (atomically) to `--out`. Reports are deterministic byte for byte given
//! the same inputs and seed. Diagnostics go to stderr through `log`; set
//! `RUST_LOG=info` or `RUST_LOG=debug` for more than warnings.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use domos_core::config::{load_data, split_rounds, Design, LoadedData, RunConfig};
use domos_core::dominance::{sd_test, GridConfig, SdTestReport};
use domos_core::hedonic::{
    fit_partial_linear, residual_sd_test, HedonicConfig, HedonicFit, HedonicReport,
    ResidualScale,
};
use domos_core::ingest::{deflate, normalize_index, RowError};
use domos_core::model::{
    DeflatorKind, RoundPartition, Sector, TransactionRecord, WeightedSample,
};
use domos_core::pipeline::{hedonic_input, observation_levels, weighted_price_samples};
use domos_core::reweight::{WeightCell, WeightTable};
use domos_core::summary::{kde, summarize, DensityEstimate, SummaryStats};
use domos_core::synth::{write_bundle, ScenarioSpec};
use domos_core::welfare::{ratio_test, welfare_estimate, RatioTestReport, WelfareEstimate};
use domos_core::{Error, Result};

const KDE_POINTS: usize = 201;
const MAX_REJECTS_SHOWN: usize = 50;

#[derive(Parser)]
#[command(
    name = "domos",
    version,
    about = "Compare weighted housing-price distributions across policy rounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse every input named by the config and report what was read
    Ingest(RunArgs),
    /// Post-stratification weights per round and dwelling type
    Weights(RunArgs),
    /// Equivalent-wealth ratio tests of each round against the base
    Welfare(WelfareArgs),
    /// Stochastic-dominance bootstrap tests on weighted prices
    Sd(SdArgs),
    /// Partial-linear price regressions per round
    Hedonic(RunArgs),
    /// Residual-bootstrap dominance tests on level-enhanced values
    ResidualSd(ResidualArgs),
    /// Full report: summaries, weights, welfare and dominance
    Report(ReportArgs),
    /// Write a synthetic input bundle from a scenario file
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the bootstrap replication count
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Override the deflator series: cpi, wr or gni
    #[arg(long)]
    deflator: Option<DeflatorKind>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WelfareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Override the inequality-aversion grid, e.g. 0,1,1.5,2
    #[arg(long, value_delimiter = ',')]
    nu_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct SdArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Override the dominance orders, e.g. 1,2,3
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u8>>,
    /// Override the comparison design: vs-base or vs-all
    #[arg(long)]
    design: Option<Design>,
    /// Which distribution to test
    #[arg(long, value_enum, default_value_t = InputKind::Prices)]
    input: InputKind,
    /// Keep level-enhanced values in logs instead of exponentiating
    #[arg(long)]
    log_scale: bool,
}

#[derive(Args)]
struct ResidualArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Override the dominance orders, e.g. 1,2,3
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u8>>,
    /// Override the comparison design: vs-base or vs-all
    #[arg(long)]
    design: Option<Design>,
    /// Keep level-enhanced values in logs instead of exponentiating
    #[arg(long)]
    log_scale: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Override the inequality-aversion grid, e.g. 0,1,1.5,2
    #[arg(long, value_delimiter = ',')]
    nu_grid: Option<Vec<f64>>,
    /// Override the dominance orders, e.g. 1,2,3
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u8>>,
    /// Override the comparison design: vs-base or vs-all
    #[arg(long)]
    design: Option<Design>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario description (JSON)
    #[arg(long)]
    scenario: PathBuf,
    /// Directory to write the bundle into
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputKind {
    /// Post-stratified real transaction prices
    Prices,
    /// Index level plus regression residual per transaction
    LevelEnhanced,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Weights(args) => cmd_weights(args),
        Command::Welfare(args) => cmd_welfare(args),
        Command::Sd(args) => cmd_sd(args),
        Command::Hedonic(args) => cmd_hedonic(args),
        Command::ResidualSd(args) => cmd_residual_sd(args),
        Command::Report(args) => cmd_report(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

/// Loads the config and applies the overrides shared by every subcommand.
fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(b) = args.bootstrap {
        cfg.bootstrap = b;
    }
    if let Some(d) = args.deflator {
        cfg.deflator = d;
    }
    Ok(cfg)
}

struct Prepared {
    cfg: RunConfig,
    data: LoadedData,
    /// Deflated records, all sectors.
    real: Vec<TransactionRecord>,
}

impl Prepared {
    fn rounds(&self) -> Vec<Vec<&TransactionRecord>> {
        split_rounds(&self.real, &self.data.partition, self.cfg.sector)
    }
}

fn prepare(args: &RunArgs) -> Result<Prepared> {
    let cfg = load_config(args)?;
    let data = load_data(&cfg)?;
    let series = data.deflators.series(cfg.deflator);
    let real = deflate(&data.transactions.records, series)?;
    Ok(Prepared { cfg, data, real })
}

/// Pretty-prints the payload to stdout, or writes it atomically when a path
/// was given (temp file in the same directory, then rename).
fn emit<T: Serialize>(out: Option<&Path>, payload: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(payload)
        .map_err(|e| Error::data(format!("render report: {e}")))?;
    text.push('\n');
    match out {
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
        }
        Some(path) => {
            let name = path.file_name().ok_or_else(|| {
                Error::config(format!("--out {}: not a file path", path.display()))
            })?;
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
            fs::write(&tmp, &text)?;
            fs::rename(&tmp, path)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct IngestReport {
    sector: Sector,
    deflator: DeflatorKind,
    records_parsed: usize,
    records_in_scope: usize,
    rejects_total: usize,
    rejects: Vec<RowError>,
    rounds: Vec<RoundIngest>,
}

#[derive(Serialize)]
struct RoundIngest {
    round: usize,
    start: NaiveDate,
    end: NaiveDate,
    quarters: usize,
    n: usize,
}

fn cmd_ingest(args: RunArgs) -> Result<()> {
    let prep = prepare(&args)?;
    let rounds = prep.rounds();
    let partition = &prep.data.partition;
    let round_rows: Vec<RoundIngest> = rounds
        .iter()
        .enumerate()
        .map(|(r, recs)| {
            let (start, end) = partition.bounds(r);
            RoundIngest {
                round: r,
                start,
                end,
                quarters: partition.quarters_of_round(r).len(),
                n: recs.len(),
            }
        })
        .collect();
    let rejects = &prep.data.transactions.rejects;
    let report = IngestReport {
        sector: prep.cfg.sector,
        deflator: prep.cfg.deflator,
        records_parsed: prep.data.transactions.records.len(),
        records_in_scope: round_rows.iter().map(|r| r.n).sum(),
        rejects_total: rejects.len(),
        rejects: rejects.iter().take(MAX_REJECTS_SHOWN).cloned().collect(),
        rounds: round_rows,
    };
    emit(args.out.as_deref(), &report)
}

#[derive(Serialize)]
struct WeightsReport {
    sector: Sector,
    deflator: DeflatorKind,
    rounds: Vec<RoundWeights>,
}

#[derive(Serialize)]
struct RoundWeights {
    round: usize,
    n: usize,
    cells: BTreeMap<String, WeightCell>,
}

fn build_weights(cfg: &RunConfig, table: &WeightTable, sizes: &[usize]) -> WeightsReport {
    let rounds = (0..table.len())
        .map(|r| RoundWeights {
            round: r,
            n: sizes[r],
            cells: table
                .cells(r)
                .map(|(ty, cell)| (ty.clone(), *cell))
                .collect(),
        })
        .collect();
    WeightsReport {
        sector: cfg.sector,
        deflator: cfg.deflator,
        rounds,
    }
}

fn cmd_weights(args: RunArgs) -> Result<()> {
    let prep = prepare(&args)?;
    let rounds = prep.rounds();
    let (table, samples) = weighted_price_samples(
        &rounds,
        &prep.data.stock,
        prep.cfg.sector,
        &prep.data.partition,
    )?;
    let sizes: Vec<usize> = samples.iter().map(|s| s.n()).collect();
    let report = build_weights(&prep.cfg, &table, &sizes);
    emit(args.out.as_deref(), &report)
}

#[derive(Serialize)]
struct WelfareReport {
    base: usize,
    seed: u64,
    #[serde(rename = "B")]
    b: usize,
    nu_grid: Vec<f64>,
    base_estimates: Vec<WelfareEstimate>,
    rounds: Vec<RoundWelfare>,
}

#[derive(Serialize)]
struct RoundWelfare {
    round: usize,
    estimates: Vec<WelfareEstimate>,
    tests: Vec<RatioTestReport>,
}

fn build_welfare(
    samples: &[WeightedSample],
    nu_grid: &[f64],
    b: usize,
    seed: u64,
) -> Result<WelfareReport> {
    let base = &samples[0];
    let base_estimates = nu_grid
        .iter()
        .map(|&nu| welfare_estimate(base, nu))
        .collect::<Result<Vec<_>>>()?;
    let mut rounds = Vec::with_capacity(samples.len().saturating_sub(1));
    for (r, sample) in samples.iter().enumerate().skip(1) {
        let estimates = nu_grid
            .iter()
            .map(|&nu| welfare_estimate(sample, nu))
            .collect::<Result<Vec<_>>>()?;
        let tests = nu_grid
            .iter()
            .map(|&nu| ratio_test(sample, base, nu, b, seed))
            .collect::<Result<Vec<_>>>()?;
        rounds.push(RoundWelfare {
            round: r,
            estimates,
            tests,
        });
    }
    Ok(WelfareReport {
        base: 0,
        seed,
        b,
        nu_grid: nu_grid.to_vec(),
        base_estimates,
        rounds,
    })
}

fn cmd_welfare(args: WelfareArgs) -> Result<()> {
    let mut prep = prepare(&args.run)?;
    if let Some(grid) = args.nu_grid {
        prep.cfg.nu_grid = grid;
    }
    prep.cfg.validate()?;
    let rounds = prep.rounds();
    let (_, samples) = weighted_price_samples(
        &rounds,
        &prep.data.stock,
        prep.cfg.sector,
        &prep.data.partition,
    )?;
    let report = build_welfare(&samples, &prep.cfg.nu_grid, prep.cfg.bootstrap, prep.cfg.seed)?;
    emit(args.run.out.as_deref(), &report)
}

#[derive(Serialize)]
struct SdReport {
    input: &'static str,
    design: Design,
    seed: u64,
    #[serde(rename = "B")]
    b: usize,
    orders: Vec<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<ResidualScale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fits: Option<Vec<HedonicReport>>,
    tests: Vec<SdTestReport>,
}

fn build_sd(
    samples: &[WeightedSample],
    orders: &[u8],
    design: Design,
    b: usize,
    seed: u64,
) -> Result<Vec<SdTestReport>> {
    let grid = GridConfig::default();
    let mut tests = Vec::new();
    for j in 1..samples.len() {
        let comps: Vec<&WeightedSample> = match design {
            Design::VsBase => vec![&samples[0]],
            Design::VsAll => samples[..j].iter().collect(),
        };
        for &s in orders {
            tests.push(sd_test(&samples[j], &comps, s, b, seed, &grid)?);
        }
    }
    Ok(tests)
}

fn cmd_sd(args: SdArgs) -> Result<()> {
    if args.log_scale && args.input == InputKind::Prices {
        return Err(Error::config(
            "--log-scale only applies to --input level-enhanced".to_string(),
        ));
    }
    if args.input == InputKind::LevelEnhanced {
        return run_residual_sd(args.run, args.orders, args.design, args.log_scale);
    }
    let mut prep = prepare(&args.run)?;
    if let Some(orders) = args.orders {
        prep.cfg.orders = orders;
    }
    if let Some(design) = args.design {
        prep.cfg.design = design;
    }
    prep.cfg.validate()?;
    let rounds = prep.rounds();
    let (_, samples) = weighted_price_samples(
        &rounds,
        &prep.data.stock,
        prep.cfg.sector,
        &prep.data.partition,
    )?;
    let tests = build_sd(
        &samples,
        &prep.cfg.orders,
        prep.cfg.design,
        prep.cfg.bootstrap,
        prep.cfg.seed,
    )?;
    let report = SdReport {
        input: "prices",
        design: prep.cfg.design,
        seed: prep.cfg.seed,
        b: prep.cfg.bootstrap,
        orders: prep.cfg.orders.clone(),
        scale: None,
        fits: None,
        tests,
    };
    emit(args.run.out.as_deref(), &report)
}

fn fit_all_rounds(
    rounds: &[Vec<&TransactionRecord>],
    partition: &RoundPartition,
) -> Result<Vec<HedonicFit>> {
    let hcfg = HedonicConfig::default();
    rounds
        .iter()
        .enumerate()
        .map(|(r, recs)| {
            log::info!("fitting round {r} ({} observations)", recs.len());
            fit_partial_linear(&hedonic_input(recs, r, partition)?, &hcfg)
        })
        .collect()
}

#[derive(Serialize)]
struct HedonicRunReport {
    sector: Sector,
    deflator: DeflatorKind,
    rounds: Vec<HedonicReport>,
}

fn cmd_hedonic(args: RunArgs) -> Result<()> {
    let prep = prepare(&args)?;
    let rounds = prep.rounds();
    let fits = fit_all_rounds(&rounds, &prep.data.partition)?;
    let report = HedonicRunReport {
        sector: prep.cfg.sector,
        deflator: prep.cfg.deflator,
        rounds: fits.iter().map(|f| f.report()).collect(),
    };
    emit(args.out.as_deref(), &report)
}

fn cmd_residual_sd(args: ResidualArgs) -> Result<()> {
    run_residual_sd(args.run, args.orders, args.design, args.log_scale)
}

fn run_residual_sd(
    run: RunArgs,
    orders: Option<Vec<u8>>,
    design: Option<Design>,
    log_scale: bool,
) -> Result<()> {
    let mut prep = prepare(&run)?;
    if let Some(orders) = orders {
        prep.cfg.orders = orders;
    }
    if let Some(design) = design {
        prep.cfg.design = design;
    }
    prep.cfg.validate()?;
    let nominal = prep.data.index.as_ref().ok_or_else(|| {
        Error::config("level-enhanced comparisons need an `index` entry in the config".to_string())
    })?;
    let series = normalize_index(
        nominal,
        prep.cfg.sector,
        &prep.data.partition,
        prep.data.deflators.series(prep.cfg.deflator),
    )?;
    let rounds = prep.rounds();
    let fits = fit_all_rounds(&rounds, &prep.data.partition)?;
    let levels: Vec<Vec<f64>> = rounds
        .iter()
        .map(|recs| observation_levels(recs, &prep.data.partition, &series))
        .collect::<Result<Vec<_>>>()?;
    let scale = if log_scale {
        ResidualScale::Log
    } else {
        ResidualScale::Price
    };
    let grid = GridConfig::default();
    let mut tests = Vec::new();
    for j in 1..fits.len() {
        let comps: Vec<usize> = match prep.cfg.design {
            Design::VsBase => vec![0],
            Design::VsAll => (0..j).collect(),
        };
        for i in comps {
            for &s in &prep.cfg.orders {
                tests.push(residual_sd_test(
                    &fits[j],
                    &levels[j],
                    &fits[i],
                    &levels[i],
                    s,
                    prep.cfg.bootstrap,
                    prep.cfg.seed,
                    scale,
                    &grid,
                )?);
            }
        }
    }
    let report = SdReport {
        input: "level-enhanced",
        design: prep.cfg.design,
        seed: prep.cfg.seed,
        b: prep.cfg.bootstrap,
        orders: prep.cfg.orders.clone(),
        scale: Some(scale),
        fits: Some(fits.iter().map(|f| f.report()).collect()),
        tests,
    };
    emit(run.out.as_deref(), &report)
}

#[derive(Serialize)]
struct FullReport {
    sector: Sector,
    deflator: DeflatorKind,
    seed: u64,
    #[serde(rename = "B")]
    b: usize,
    rounds: Vec<RoundBlock>,
    weights: WeightsReport,
    welfare: WelfareReport,
    dominance: SdReport,
}

#[derive(Serialize)]
struct RoundBlock {
    round: usize,
    summary: SummaryStats,
    density: DensityEstimate,
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut prep = prepare(&args.run)?;
    if let Some(grid) = args.nu_grid {
        prep.cfg.nu_grid = grid;
    }
    if let Some(orders) = args.orders {
        prep.cfg.orders = orders;
    }
    if let Some(design) = args.design {
        prep.cfg.design = design;
    }
    prep.cfg.validate()?;
    let rounds = prep.rounds();
    let (table, samples) = weighted_price_samples(
        &rounds,
        &prep.data.stock,
        prep.cfg.sector,
        &prep.data.partition,
    )?;
    let sizes: Vec<usize> = samples.iter().map(|s| s.n()).collect();

    let round_blocks = samples
        .iter()
        .enumerate()
        .map(|(r, sample)| {
            Ok(RoundBlock {
                round: r,
                summary: summarize(sample)?,
                density: kde(sample, KDE_POINTS)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let weights = build_weights(&prep.cfg, &table, &sizes);
    let welfare = build_welfare(&samples, &prep.cfg.nu_grid, prep.cfg.bootstrap, prep.cfg.seed)?;
    let tests = build_sd(
        &samples,
        &prep.cfg.orders,
        prep.cfg.design,
        prep.cfg.bootstrap,
        prep.cfg.seed,
    )?;
    let report = FullReport {
        sector: prep.cfg.sector,
        deflator: prep.cfg.deflator,
        seed: prep.cfg.seed,
        b: prep.cfg.bootstrap,
        rounds: round_blocks,
        weights,
        welfare,
        dominance: SdReport {
            input: "prices",
            design: prep.cfg.design,
            seed: prep.cfg.seed,
            b: prep.cfg.bootstrap,
            orders: prep.cfg.orders.clone(),
            scale: None,
            fits: None,
            tests,
        },
    };
    emit(args.run.out.as_deref(), &report)
}

#[derive(Serialize)]
struct SynthReport {
    config: PathBuf,
    transactions: PathBuf,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&args.scenario)
        .map_err(|e| Error::config(format!("{}: {e}", args.scenario.display())))?;
    let spec: ScenarioSpec = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", args.scenario.display())))?;
    let paths = write_bundle(&args.out_dir, &spec)?;
    let report = SynthReport {
        config: paths.config,
        transactions: paths.transactions,
    };
    emit(None, &report)
}

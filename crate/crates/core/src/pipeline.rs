//! Assembly between parsed inputs and the estimators: per-round weighted
//! samples, hedonic regression inputs, and per-observation index levels.

use crate::error::{Error, Result};
use crate::hedonic::HedonicInput;
use crate::ingest::{interpolate_stock, StockTable};
use crate::model::{
    PriceIndexSeries, RoundPartition, SampleKind, Sector, TransactionRecord, TypeCode,
    WeightedSample,
};
use crate::reweight::{attach_weights, compute_weights, count_by_type, WeightTable};

/// Builds each round's post-stratified price sample from deflated records.
/// Stock counts are interpolated to round midpoints; weights follow the
/// stock-share over count-share rule.
pub fn weighted_price_samples(
    rounds: &[Vec<&TransactionRecord>],
    stock: &StockTable,
    sector: Sector,
    partition: &RoundPartition,
) -> Result<(WeightTable, Vec<WeightedSample>)> {
    let stock_rounds = interpolate_stock(stock, sector, partition)?;
    let mut counts = Vec::with_capacity(rounds.len());
    let mut types_per_round: Vec<Vec<TypeCode>> = Vec::with_capacity(rounds.len());
    for recs in rounds {
        let types: Vec<TypeCode> = recs.iter().map(|r| r.dwelling_type.clone()).collect();
        counts.push(count_by_type(&types));
        types_per_round.push(types);
    }
    let table = compute_weights(&stock_rounds, &counts)?;
    let mut samples = Vec::with_capacity(rounds.len());
    for (r, recs) in rounds.iter().enumerate() {
        let values: Vec<f64> = recs.iter().map(|rec| rec.nominal_price).collect();
        samples.push(attach_weights(
            r,
            SampleKind::Price,
            values,
            &types_per_round[r],
            &table,
        )?);
    }
    Ok((table, samples))
}

const CHAR_COLUMNS: [&str; 4] = ["area", "storey", "lease", "age"];

fn char_value(rec: &TransactionRecord, col: usize) -> Option<f64> {
    match col {
        0 => rec.chars.floor_area,
        1 => rec.chars.storey,
        2 => rec.chars.lease_flag,
        3 => rec.chars.age,
        _ => None,
    }
}

/// Regression input for one round from deflated records. The response is the
/// log real price; quarters are indexed within the round. A characteristic
/// column enters only when every record in the round carries it.
pub fn hedonic_input(
    records: &[&TransactionRecord],
    round: usize,
    partition: &RoundPartition,
) -> Result<HedonicInput> {
    if records.is_empty() {
        return Err(Error::data(format!("round {round}: no observations")));
    }
    let quarters = partition.quarters_of_round(round);
    let first = quarters.start;
    let n_quarters = quarters.len();

    let keep: Vec<usize> = (0..CHAR_COLUMNS.len())
        .filter(|&c| records.iter().all(|rec| char_value(rec, c).is_some()))
        .collect();
    let char_names: Vec<String> = keep.iter().map(|&c| CHAR_COLUMNS[c].to_string()).collect();

    let mut y = Vec::with_capacity(records.len());
    let mut quarter = Vec::with_capacity(records.len());
    let mut chars = Vec::with_capacity(records.len());
    let mut locations = Vec::with_capacity(records.len());
    for rec in records {
        if !(rec.nominal_price > 0.0) {
            return Err(Error::data(format!(
                "round {round}: non-positive real price {}",
                rec.nominal_price
            )));
        }
        y.push(rec.nominal_price.ln());
        quarter.push(partition.global_quarter(rec.date) - first);
        chars.push(keep.iter().map(|&c| char_value(rec, c).unwrap()).collect());
        locations.push(rec.location);
    }
    Ok(HedonicInput {
        round,
        y,
        quarter,
        n_quarters,
        chars,
        char_names,
        locations,
    })
}

/// Normalized log index level of each record's calendar quarter.
pub fn observation_levels(
    records: &[&TransactionRecord],
    partition: &RoundPartition,
    index: &PriceIndexSeries,
) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|rec| index.level(partition.global_quarter(rec.date)))
        .collect()
}

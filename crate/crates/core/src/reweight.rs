//! Post-stratification re-weighting. Transactions over-represent types that
//! trade often; each observation of type `t` in round `r` gets the weight
//!
//! ```text
//! w[t][r] = (S[t][r] / S[r]) / (N[t][r] / N[r])
//! ```
//!
//! where `S` counts dwellings in stock and `N` counts transactions. By
//! construction the weighted type composition matches the stock composition
//! and the weights of a round sum back to its sample size.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{SampleKind, TypeCode, WeightedSample};

/// Post-stratification weight for every (round, type) cell, plus the shares
/// that produced it.
#[derive(Clone, Debug, Default)]
pub struct WeightTable {
    rounds: Vec<BTreeMap<TypeCode, WeightCell>>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeightCell {
    pub weight: f64,
    pub stock_share: f64,
    pub count_share: f64,
    pub transactions: usize,
}

impl WeightTable {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn weight(&self, round: usize, dwelling_type: &str) -> Option<f64> {
        self.rounds
            .get(round)?
            .get(dwelling_type)
            .map(|c| c.weight)
    }

    pub fn cells(&self, round: usize) -> impl Iterator<Item = (&TypeCode, &WeightCell)> {
        self.rounds[round].iter()
    }
}

/// Computes the weight table from interpolated stock counts and transaction
/// counts, one map per round.
///
/// A type with stock but no transactions is an empty stratum; a type with
/// transactions but no stock is an unknown stratum. Both are fatal. Types
/// absent from both sides are dropped silently.
pub fn compute_weights(
    stock: &[BTreeMap<TypeCode, f64>],
    counts: &[BTreeMap<TypeCode, usize>],
) -> Result<WeightTable> {
    if stock.len() != counts.len() {
        return Err(Error::data(format!(
            "stock covers {} rounds but counts cover {}",
            stock.len(),
            counts.len()
        )));
    }
    let mut rounds = Vec::with_capacity(stock.len());
    for (r, (stock_r, counts_r)) in stock.iter().zip(counts).enumerate() {
        let mut cells = BTreeMap::new();
        let stock_total: f64 = stock_r.values().filter(|s| **s > 0.0).sum();
        let count_total: usize = counts_r.values().sum();
        if count_total == 0 {
            return Err(Error::data(format!("round {r}: no transactions")));
        }
        if stock_total <= 0.0 {
            return Err(Error::data(format!("round {r}: no stock")));
        }
        for (ty, &s) in stock_r {
            if s <= 0.0 {
                continue;
            }
            let n = counts_r.get(ty).copied().unwrap_or(0);
            if n == 0 {
                return Err(Error::data(format!(
                    "round {r}: empty stratum: type {ty:?} has stock {s} but no transactions"
                )));
            }
            let stock_share = s / stock_total;
            let count_share = n as f64 / count_total as f64;
            cells.insert(
                ty.clone(),
                WeightCell {
                    weight: stock_share / count_share,
                    stock_share,
                    count_share,
                    transactions: n,
                },
            );
        }
        for (ty, &n) in counts_r {
            if n > 0 && !cells.contains_key(ty) {
                return Err(Error::data(format!(
                    "round {r}: unknown stratum: type {ty:?} transacted {n} times but has no stock"
                )));
            }
        }
        rounds.push(cells);
    }
    Ok(WeightTable { rounds })
}

/// Builds the weighted sample of one round by attaching each observation's
/// type weight.
pub fn attach_weights(
    round: usize,
    kind: SampleKind,
    values: Vec<f64>,
    types: &[TypeCode],
    table: &WeightTable,
) -> Result<WeightedSample> {
    if values.len() != types.len() {
        return Err(Error::data(format!(
            "round {round}: {} values but {} type labels",
            values.len(),
            types.len()
        )));
    }
    let mut weights = Vec::with_capacity(values.len());
    for ty in types {
        let w = table.weight(round, ty).ok_or_else(|| {
            Error::data(format!("round {round}: no weight for type {ty:?}"))
        })?;
        weights.push(w);
    }
    Ok(WeightedSample::new(round, kind, values, weights))
}

/// Tallies transactions by type for one round.
pub fn count_by_type(types: &[TypeCode]) -> BTreeMap<TypeCode, usize> {
    let mut counts = BTreeMap::new();
    for ty in types {
        *counts.entry(ty.clone()).or_insert(0) += 1;
    }
    counts
}

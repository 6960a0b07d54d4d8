//! Weighted summary statistics and kernel density estimates for reports.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::WeightedSample;

/// Weighted quantile with cumulative-weight midpoint handling: when the
/// target mass falls exactly on an observation's cumulative weight, the value
/// is averaged with the next one. With unit weights this reproduces the
/// textbook even-length median.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::data("quantile of an empty sample".to_string()));
    }
    if values.len() != weights.len() {
        return Err(Error::data(format!(
            "quantile: {} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::config(format!("quantile level {q} outside [0, 1]")));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::data("quantile: weights sum to zero".to_string()));
    }
    let target = q * total;
    let tol = 1e-9 * total;
    let mut cum = 0.0;
    for (pos, &k) in idx.iter().enumerate() {
        cum += weights[k];
        if cum >= target - tol {
            let at_boundary = (cum - target).abs() <= tol && target > tol;
            return Ok(if at_boundary && pos + 1 < idx.len() {
                0.5 * (values[k] + values[idx[pos + 1]])
            } else {
                values[k]
            });
        }
    }
    Ok(values[*idx.last().unwrap()])
}

/// Weighted location and dispersion plus a fixed ladder of quantiles.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub weight_sum: f64,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub quantiles: BTreeMap<String, f64>,
}

const QUANTILE_LADDER: [(&str, f64); 5] = [
    ("p05", 0.05),
    ("p25", 0.25),
    ("p50", 0.50),
    ("p75", 0.75),
    ("p95", 0.95),
];

pub fn summarize(sample: &WeightedSample) -> Result<SummaryStats> {
    if sample.n() == 0 {
        return Err(Error::data("summary of an empty sample".to_string()));
    }
    let total = sample.weight_sum();
    let mean = sample.mean();
    let var = sample
        .values
        .iter()
        .zip(&sample.weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / total;
    let mut quantiles = BTreeMap::new();
    for (label, q) in QUANTILE_LADDER {
        quantiles.insert(
            label.to_string(),
            weighted_quantile(&sample.values, &sample.weights, q)?,
        );
    }
    Ok(SummaryStats {
        n: sample.n(),
        weight_sum: total,
        mean,
        sd: var.sqrt(),
        min: sample.values.iter().copied().fold(f64::INFINITY, f64::min),
        max: sample
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        quantiles,
    })
}

/// Gaussian kernel density on an equally spaced grid.
#[derive(Clone, Debug, Serialize)]
pub struct DensityEstimate {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Weighted KDE with a Silverman bandwidth. The sample-size term uses the
/// Kish effective size `(sum w)^2 / sum w^2` so heavy weights widen the
/// bandwidth the way replication would.
pub fn kde(sample: &WeightedSample, points: usize) -> Result<DensityEstimate> {
    if sample.n() == 0 {
        return Err(Error::data("density of an empty sample".to_string()));
    }
    if points < 2 {
        return Err(Error::config("density grid needs at least two points".to_string()));
    }
    let total = sample.weight_sum();
    let mean = sample.mean();
    let var = sample
        .values
        .iter()
        .zip(&sample.weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / total;
    let sd = var.sqrt();
    let iqr = weighted_quantile(&sample.values, &sample.weights, 0.75)?
        - weighted_quantile(&sample.values, &sample.weights, 0.25)?;
    let mut spread = sd.min(iqr / 1.34);
    if spread <= 0.0 {
        spread = sd;
    }
    if spread <= 0.0 {
        return Err(Error::numeric("density: sample has zero spread".to_string()));
    }
    let n_eff = total * total / sample.weights.iter().map(|w| w * w).sum::<f64>();
    let h = 0.9 * spread * n_eff.powf(-0.2);

    let lo = sample.values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = sample
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        + 3.0 * h;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt() * total);
    let grid: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for (v, w) in sample.values.iter().zip(&sample.weights) {
                let z = (x - v) / h;
                acc += w * (-0.5 * z * z).exp();
            }
            acc * norm
        })
        .collect();
    Ok(DensityEstimate {
        bandwidth: h,
        grid,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SampleKind;

    #[test]
    fn weighted_median_splits_a_boundary_tie() {
        let v = [1.0, 2.0, 3.0];
        let w = [1.0, 1.0, 2.0];
        assert_eq!(weighted_quantile(&v, &w, 0.5).unwrap(), 2.5);
    }

    #[test]
    fn unit_weights_reproduce_textbook_medians() {
        let even = [4.0, 1.0, 3.0, 2.0];
        let w = [1.0; 4];
        assert_eq!(weighted_quantile(&even, &w, 0.5).unwrap(), 2.5);
        let odd = [3.0, 1.0, 2.0];
        assert_eq!(weighted_quantile(&odd, &w[..3], 0.5).unwrap(), 2.0);
    }

    #[test]
    fn extreme_levels_hit_the_sample_range() {
        let v = [5.0, 1.0, 9.0];
        let w = [2.0, 1.0, 0.5];
        assert_eq!(weighted_quantile(&v, &w, 0.0).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&v, &w, 1.0).unwrap(), 9.0);
    }

    #[test]
    fn heavy_weight_pulls_the_median() {
        let v = [1.0, 2.0, 10.0];
        let w = [1.0, 1.0, 10.0];
        assert_eq!(weighted_quantile(&v, &w, 0.5).unwrap(), 10.0);
    }

    #[test]
    fn quantile_rejects_bad_inputs() {
        assert!(weighted_quantile(&[], &[], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0], 1.5).is_err());
    }

    #[test]
    fn summary_reports_weighted_moments() {
        let s = WeightedSample::new(
            0,
            SampleKind::Price,
            vec![1.0, 2.0, 3.0],
            vec![1.0, 1.0, 2.0],
        );
        let stats = summarize(&s).unwrap();
        assert_eq!(stats.n, 3);
        assert_eq!(stats.mean, 2.25);
        assert_eq!(stats.min, 1.0);
        assert_eq!(stats.max, 3.0);
        assert_eq!(stats.quantiles["p50"], 2.5);
        let var: f64 = (1.0 * 1.5625 + 1.0 * 0.0625 + 2.0 * 0.5625) / 4.0;
        assert!((stats.sd - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kde_mass_is_close_to_one() {
        let values: Vec<f64> = (0..200).map(|k| (k as f64 * 0.7).sin() * 2.0 + 5.0).collect();
        let s = WeightedSample::unweighted(0, values);
        let d = kde(&s, 512).unwrap();
        let step = d.grid[1] - d.grid[0];
        let mass: f64 = d.density.iter().sum::<f64>() * step;
        assert!((mass - 1.0).abs() < 0.01, "mass = {mass}");
        assert!(d.density.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn equal_weights_give_kish_size_n() {
        let s = WeightedSample::unweighted(0, (0..50).map(|k| k as f64).collect());
        let d = kde(&s, 64).unwrap();
        // Bandwidth must match the unweighted Silverman rule exactly.
        let mean = 24.5;
        let var: f64 = (0..50).map(|k| (k as f64 - mean).powi(2)).sum::<f64>() / 50.0;
        let iqr = weighted_quantile(&s.values, &s.weights, 0.75).unwrap()
            - weighted_quantile(&s.values, &s.weights, 0.25).unwrap();
        let expect = 0.9 * var.sqrt().min(iqr / 1.34) * (50.0f64).powf(-0.2);
        assert!((d.bandwidth - expect).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sample_is_a_numeric_error() {
        let s = WeightedSample::unweighted(0, vec![2.0, 2.0, 2.0]);
        assert!(kde(&s, 64).is_err());
    }
}

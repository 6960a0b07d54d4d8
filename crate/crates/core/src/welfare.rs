//! Equivalent-wealth comparison under iso-elastic utility.
//!
//! For aversion `nu`, utility is `u(p) = p^(1-nu) / (1-nu)` (natural log at
//! `nu = 1`). A round's welfare is the weighted mean utility; its equivalent
//! wealth is the certain amount with that utility. The ratio test studentizes
//! the equivalent-wealth ratio of a round against the base round and reads
//! significance off a re-centred bootstrap.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::WeightedSample;
use crate::resample::{lower_critical, replication_rng, resample_counts, sort_draws};

/// Aversion grid reports run over by default.
pub const DEFAULT_NU_GRID: [f64; 5] = [0.0, 1.0, 1.5, 2.0, 2.5];

/// Iso-elastic utility of wealth. Defined for `p > 0`.
pub fn utility(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::numeric(format!("utility undefined for p = {p}")));
    }
    if nu == 1.0 {
        Ok(p.ln())
    } else {
        Ok(p.powf(1.0 - nu) / (1.0 - nu))
    }
}

/// Certain wealth level whose utility equals `w`: the inverse of the utility
/// map, `((1-nu) w)^(1/(1-nu))`, or `exp(w)` at `nu = 1`.
pub fn equivalent_wealth(w: f64, nu: f64) -> Result<f64> {
    if nu == 1.0 {
        return Ok(w.exp());
    }
    let x = (1.0 - nu) * w;
    if !(x > 0.0) {
        return Err(Error::numeric(format!(
            "equivalent wealth undefined: (1-nu) W = {x} at nu = {nu}"
        )));
    }
    Ok(x.powf(1.0 / (1.0 - nu)))
}

/// Welfare level of one round at one aversion value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WelfareEstimate {
    pub nu: f64,
    /// Weighted mean utility.
    pub w_hat: f64,
    /// Weighted population variance of utility values.
    pub var_w: f64,
    /// Equivalent wealth implied by `w_hat`.
    pub e_hat: f64,
    pub n: usize,
}

pub fn welfare_estimate(sample: &WeightedSample, nu: f64) -> Result<WelfareEstimate> {
    let n = sample.n();
    if n == 0 {
        return Err(Error::data("welfare estimate on empty sample".to_string()));
    }
    let mut utils = Vec::with_capacity(n);
    for &v in &sample.values {
        utils.push(utility(v, nu)?);
    }
    let (w_hat, var_w) = weighted_moments(&utils, &sample.weights, n);
    Ok(WelfareEstimate {
        nu,
        w_hat,
        var_w,
        e_hat: equivalent_wealth(w_hat, nu)?,
        n,
    })
}

fn weighted_moments(utils: &[f64], weights: &[f64], n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mut mean = 0.0;
    for (u, w) in utils.iter().zip(weights) {
        mean += u * w;
    }
    mean /= nf;
    let mut var = 0.0;
    for (u, w) in utils.iter().zip(weights) {
        let d = u - mean;
        var += d * d * w;
    }
    (mean, var / nf)
}

/// Equivalent-wealth ratio of `round` against `base` with its delta-method
/// standard error.
#[derive(Clone, Copy, Debug)]
pub struct RatioPoint {
    pub psi_hat: f64,
    pub sigma_psi: f64,
}

pub fn wealth_ratio(round: &WelfareEstimate, base: &WelfareEstimate) -> Result<RatioPoint> {
    if round.nu != base.nu {
        return Err(Error::numeric(format!(
            "ratio mixes nu = {} and nu = {}",
            round.nu, base.nu
        )));
    }
    ratio_from_moments(round.nu, round.w_hat, round.var_w, base.w_hat, base.var_w)
}

fn ratio_from_moments(nu: f64, w_r: f64, var_r: f64, w_0: f64, var_0: f64) -> Result<RatioPoint> {
    if nu == 1.0 {
        let diff = w_r - w_0;
        let psi_hat = diff.exp();
        let sigma2 = (2.0 * diff).exp() * (var_r + var_0);
        return Ok(RatioPoint {
            psi_hat,
            sigma_psi: sigma2.sqrt(),
        });
    }
    if w_0 == 0.0 {
        return Err(Error::numeric("ratio undefined: base welfare is zero".to_string()));
    }
    let ratio = w_r / w_0;
    if !(ratio > 0.0) {
        return Err(Error::numeric(format!(
            "welfare ratio {ratio} is not positive at nu = {nu}"
        )));
    }
    let one_minus = 1.0 - nu;
    let psi_hat = ratio.powf(1.0 / one_minus);
    let slope = ratio.powf(nu / one_minus) / (one_minus * w_0);
    let sigma2 = slope * slope * (var_r + var_0 * ratio * ratio);
    Ok(RatioPoint {
        psi_hat,
        sigma_psi: sigma2.sqrt(),
    })
}

/// Lower-tail bootstrap critical values of the studentized ratio statistic.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalValues {
    #[serde(rename = "1%")]
    pub at_1pct: f64,
    #[serde(rename = "5%")]
    pub at_5pct: f64,
    #[serde(rename = "10%")]
    pub at_10pct: f64,
}

/// Outcome of the equivalent-wealth ratio test of one round against base.
/// Small `p_value` is evidence the round's equivalent wealth fell below the
/// base level.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioTestReport {
    pub nu: f64,
    pub psi_hat: f64,
    pub sigma_psi: f64,
    pub theta: f64,
    pub p_value: f64,
    pub critical_values: CriticalValues,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
}

struct UtilitySample {
    utils: Vec<f64>,
    weights: Vec<f64>,
}

impl UtilitySample {
    fn build(sample: &WeightedSample, nu: f64) -> Result<Self> {
        let mut utils = Vec::with_capacity(sample.n());
        for &v in &sample.values {
            utils.push(utility(v, nu)?);
        }
        Ok(UtilitySample {
            utils,
            weights: sample.weights.clone(),
        })
    }

    /// Weighted moments of a counted resample, reusing scratch buffers.
    fn resampled_moments(&self, counts: &[u32]) -> (f64, f64) {
        let n = self.utils.len();
        let nf = n as f64;
        let mut mean = 0.0;
        for ((u, w), &c) in self.utils.iter().zip(&self.weights).zip(counts) {
            if c > 0 {
                mean += u * w * c as f64;
            }
        }
        mean /= nf;
        let mut var = 0.0;
        for ((u, w), &c) in self.utils.iter().zip(&self.weights).zip(counts) {
            if c > 0 {
                let d = u - mean;
                var += d * d * w * c as f64;
            }
        }
        (mean, var / nf)
    }
}

/// Tests H0 "equivalent wealth did not fall" (`psi >= 1`) against
/// H1 `psi < 1` with a re-centred, studentized pairs bootstrap.
///
/// Replication `b` resamples each round's (value, weight) pairs with
/// replacement at the original size from the stream `(seed, b)`, and
/// contributes `theta_b = (psi_b - psi_hat) / sigma_b`. A replication whose
/// resampled variance degenerates is redrawn once from a disjoint stream;
/// a second degeneracy is fatal.
pub fn ratio_test(
    round: &WeightedSample,
    base: &WeightedSample,
    nu: f64,
    b_reps: usize,
    seed: u64,
) -> Result<RatioTestReport> {
    if b_reps == 0 {
        return Err(Error::config("ratio test needs at least one replication".to_string()));
    }
    let round_u = UtilitySample::build(round, nu)?;
    let base_u = UtilitySample::build(base, nu)?;
    let (w_r, var_r) = weighted_moments(&round_u.utils, &round_u.weights, round.n());
    let (w_0, var_0) = weighted_moments(&base_u.utils, &base_u.weights, base.n());
    let point = ratio_from_moments(nu, w_r, var_r, w_0, var_0)?;
    // Variance amounting to rounding dust cannot studentize anything.
    let sigma_floor = 1e-12 * point.psi_hat.abs().max(1.0);
    if !(point.sigma_psi > sigma_floor) {
        return Err(Error::numeric(format!(
            "degenerate ratio variance {} at nu = {nu}",
            point.sigma_psi
        )));
    }
    let theta = (point.psi_hat - 1.0) / point.sigma_psi;

    let draw = |rng: &mut ChaCha8Rng| -> Result<Option<f64>> {
        let mut counts = Vec::new();
        resample_counts(rng, round_u.utils.len(), &mut counts);
        let (bw_r, bvar_r) = round_u.resampled_moments(&counts);
        resample_counts(rng, base_u.utils.len(), &mut counts);
        let (bw_0, bvar_0) = base_u.resampled_moments(&counts);
        let bp = ratio_from_moments(nu, bw_r, bvar_r, bw_0, bvar_0)?;
        if !(bp.sigma_psi > sigma_floor) {
            return Ok(None);
        }
        Ok(Some((bp.psi_hat - point.psi_hat) / bp.sigma_psi))
    };

    let mut draws: Vec<f64> = (0..b_reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_rng(seed, b as u64);
            match draw(&mut rng)? {
                Some(t) => Ok(t),
                None => {
                    let mut rng = replication_rng(seed, (b_reps + b) as u64);
                    draw(&mut rng)?.ok_or_else(|| {
                        Error::numeric(format!(
                            "replication {b}: resampled ratio variance degenerate twice"
                        ))
                    })
                }
            }
        })
        .collect::<Result<_>>()?;

    let exceed = draws.iter().filter(|t| **t <= theta).count();
    let p_value = exceed as f64 / b_reps as f64;
    sort_draws(&mut draws);
    Ok(RatioTestReport {
        nu,
        psi_hat: point.psi_hat,
        sigma_psi: point.sigma_psi,
        theta,
        p_value,
        critical_values: CriticalValues {
            at_1pct: lower_critical(&draws, 0.01),
            at_5pct: lower_critical(&draws, 0.05),
            at_10pct: lower_critical(&draws, 0.10),
        },
        b: b_reps,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SampleKind, WeightedSample};

    fn sample(values: Vec<f64>) -> WeightedSample {
        WeightedSample::unweighted(0, values)
    }

    #[test]
    fn utility_spot_values() {
        assert_eq!(utility(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(utility(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(utility(4.0, 2.0).unwrap(), -0.25);
        assert!(utility(0.0, 1.0).is_err());
        assert!(utility(-1.0, 0.5).is_err());
    }

    #[test]
    fn log_case_equivalent_wealth() {
        // Values {1, e^2} at nu = 1: mean log utility 1, equivalent wealth e.
        let s = sample(vec![1.0, (2.0f64).exp()]);
        let est = welfare_estimate(&s, 1.0).unwrap();
        assert!((est.w_hat - 1.0).abs() < 1e-12);
        assert!((est.e_hat - 1.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn nu_zero_equivalent_wealth_is_the_weighted_mean() {
        let s = WeightedSample::new(
            0,
            SampleKind::Price,
            vec![2.0, 10.0, 4.0],
            vec![1.5, 0.5, 1.0],
        );
        let est = welfare_estimate(&s, 0.0).unwrap();
        assert!((est.e_hat - s.mean()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sample_recovers_the_constant() {
        let s = sample(vec![3.25; 40]);
        for nu in DEFAULT_NU_GRID {
            let est = welfare_estimate(&s, nu).unwrap();
            assert!(
                (est.e_hat - 3.25).abs() <= 1e-9 * 3.25,
                "nu={nu}: {}",
                est.e_hat
            );
            assert!(est.var_w.abs() < 1e-18);
        }
    }

    #[test]
    fn higher_aversion_lowers_equivalent_wealth() {
        let s = sample(vec![1.0, 2.0, 3.0, 4.0, 10.0]);
        let mut last = f64::INFINITY;
        for nu in DEFAULT_NU_GRID {
            let e = welfare_estimate(&s, nu).unwrap().e_hat;
            assert!(e < last, "nu={nu}: {e} !< {last}");
            last = e;
        }
    }

    #[test]
    fn negative_welfare_above_one() {
        // nu > 1 puts utility below zero but equivalent wealth stays positive.
        let s = sample(vec![0.5, 1.5, 2.5]);
        let est = welfare_estimate(&s, 2.5).unwrap();
        assert!(est.w_hat < 0.0);
        assert!(est.e_hat > 0.0);
    }

    #[test]
    fn scaled_sample_ratio_is_the_scale() {
        let base = sample(vec![1.0, 2.0, 3.0, 5.0, 8.0]);
        for nu in DEFAULT_NU_GRID {
            for c in [0.5, 1.3] {
                let scaled = sample(base.values.iter().map(|v| v * c).collect());
                let e0 = welfare_estimate(&base, nu).unwrap();
                let er = welfare_estimate(&scaled, nu).unwrap();
                let psi = wealth_ratio(&er, &e0).unwrap().psi_hat;
                assert!((psi - c).abs() <= 1e-9 * c, "nu={nu} c={c}: {psi}");
            }
        }
    }

    #[test]
    fn delta_method_matches_log_form_in_the_limit() {
        // At nu = 1 the closed form is exp(2 diff) (var_r + var_0); check the
        // generic branch approaches it as nu -> 1.
        let r = sample(vec![1.1, 2.3, 3.7]);
        let b0 = sample(vec![1.0, 2.0, 4.2]);
        let exact = {
            let er = welfare_estimate(&r, 1.0).unwrap();
            let e0 = welfare_estimate(&b0, 1.0).unwrap();
            wealth_ratio(&er, &e0).unwrap()
        };
        let near = {
            let nu = 1.0 + 1e-7;
            let er = welfare_estimate(&r, nu).unwrap();
            let e0 = welfare_estimate(&b0, nu).unwrap();
            wealth_ratio(&er, &e0).unwrap()
        };
        assert!((exact.psi_hat - near.psi_hat).abs() < 1e-6);
        assert!((exact.sigma_psi - near.sigma_psi).abs() < 1e-5);
    }

    #[test]
    fn ratio_test_is_reproducible_and_centred_under_the_null() {
        let values: Vec<f64> = (0..400).map(|i| 1.0 + (i % 37) as f64 / 7.0).collect();
        let round = sample(values.clone());
        let base = sample(values);
        let a = ratio_test(&round, &base, 1.5, 400, 11).unwrap();
        let b = ratio_test(&round, &base, 1.5, 400, 11).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.theta, 0.0);
        assert!((0.35..=0.65).contains(&a.p_value), "p = {}", a.p_value);
        assert!(a.critical_values.at_1pct <= a.critical_values.at_5pct);
        assert!(a.critical_values.at_5pct <= a.critical_values.at_10pct);
    }

    #[test]
    fn ratio_test_rejects_a_clear_deterioration() {
        let base_vals: Vec<f64> = (1..=500).map(|i| 1.0 + i as f64 / 100.0).collect();
        let round_vals: Vec<f64> = base_vals.iter().map(|v| v * 0.6).collect();
        let rep = ratio_test(&sample(round_vals), &sample(base_vals), 2.0, 500, 5).unwrap();
        assert!(rep.psi_hat < 0.7);
        assert!(rep.p_value <= 0.01, "p = {}", rep.p_value);
        assert!(rep.theta <= rep.critical_values.at_1pct);
    }

    #[test]
    fn degenerate_input_sample_is_a_numeric_error() {
        let s = sample(vec![2.0; 50]);
        let err = ratio_test(&s, &s, 1.0, 100, 0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }
}

//! Partial-linear hedonic regression with a penalized spatial surface, and
//! the residual bootstrap built on top of it.
//!
//! Per round the model is `y = Z delta + S beta + g(l) + e` on log real
//! prices: `Z` holds an intercept and within-round quarter dummies, `S` the
//! dwelling characteristics, and `g` a thin-plate surface over location whose
//! linear part rides in the unpenalized block and whose radial part is ridge
//! penalized. The penalty weight is chosen by generalized cross-validation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use crate::dominance::{grid_for, pair_sup, recentered_pair_sup, GridConfig, PairReport, SdTestReport};
use crate::error::{Error, Result};
use crate::model::{SampleKind, WeightedSample};
use crate::resample::{replication_rng, sort_draws, upper_critical};
use crate::spatial::{select_knots, SpatialBasis};
use crate::welfare::CriticalValues;
use rand::Rng;

/// Tuning for the penalized fit.
#[derive(Clone, Debug)]
pub struct HedonicConfig {
    /// Hard ceiling on knot count.
    pub knots_cap: usize,
    /// Observations per knot before the ceiling binds.
    pub obs_per_knot: usize,
    /// Relative ridge weights to score by GCV, ascending.
    pub lambda_grid: Vec<f64>,
}

impl Default for HedonicConfig {
    fn default() -> Self {
        HedonicConfig {
            knots_cap: 150,
            obs_per_knot: 20,
            lambda_grid: default_lambda_grid(),
        }
    }
}

/// 41 log-spaced relative penalties spanning 1e-6 through 1e6.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..41).map(|k| 10f64.powf(-6.0 + 0.3 * k as f64)).collect()
}

/// One round's regression data. Quarters are indexed within the round,
/// starting at zero; the zero quarter is the dummy baseline.
#[derive(Clone, Debug)]
pub struct HedonicInput {
    pub round: usize,
    /// Log real price per transaction.
    pub y: Vec<f64>,
    pub quarter: Vec<usize>,
    pub n_quarters: usize,
    /// One characteristics row per transaction.
    pub chars: Vec<Vec<f64>>,
    pub char_names: Vec<String>,
    pub locations: Vec<[f64; 2]>,
}

impl HedonicInput {
    fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::data(format!("round {}: no observations", self.round)));
        }
        if self.quarter.len() != n || self.chars.len() != n || self.locations.len() != n {
            return Err(Error::data(format!(
                "round {}: column lengths disagree ({}, {}, {}, {})",
                self.round,
                n,
                self.quarter.len(),
                self.chars.len(),
                self.locations.len()
            )));
        }
        if self.n_quarters == 0 {
            return Err(Error::data(format!("round {}: zero quarters", self.round)));
        }
        if let Some(q) = self.quarter.iter().find(|q| **q >= self.n_quarters) {
            return Err(Error::data(format!(
                "round {}: quarter index {q} outside 0..{}",
                self.round, self.n_quarters
            )));
        }
        for (k, row) in self.chars.iter().enumerate() {
            if row.len() != self.char_names.len() {
                return Err(Error::data(format!(
                    "round {}: characteristics row {k} has {} entries, expected {}",
                    self.round,
                    row.len(),
                    self.char_names.len()
                )));
            }
        }
        let finite = self.y.iter().all(|v| v.is_finite())
            && self.chars.iter().flatten().all(|v| v.is_finite())
            && self.locations.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::data(format!("round {}: non-finite regression input", self.round)));
        }
        Ok(())
    }
}

/// GCV score at one grid point, kept for reporting.
#[derive(Clone, Debug, Serialize)]
pub struct GcvPoint {
    pub lambda_rel: f64,
    pub edf: f64,
    pub gcv: f64,
}

/// Fitted model plus everything needed to refit the same design against new
/// responses at the chosen penalty.
#[derive(Clone, Debug)]
pub struct HedonicFit {
    pub round: usize,
    pub n: usize,
    pub intercept: f64,
    /// Per-quarter shifts within the round; index 0 is the baseline zero.
    pub quarter_effects: Vec<f64>,
    pub char_effects: Vec<(String, f64)>,
    /// Linear surface slopes in x and y.
    pub coord_effects: [f64; 2],
    pub spline_coefficients: Vec<f64>,
    pub lambda_rel: f64,
    pub lambda_eff: f64,
    pub edf: f64,
    pub gcv: f64,
    pub sigma2: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub gcv_trace: Vec<GcvPoint>,
    basis: SpatialBasis,
    m: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// Serializable summary of a fit.
#[derive(Clone, Debug, Serialize)]
pub struct HedonicReport {
    pub round: usize,
    pub n: usize,
    pub knots: usize,
    pub lambda_rel: f64,
    pub lambda_eff: f64,
    pub edf: f64,
    pub gcv: f64,
    pub sigma2: f64,
    pub intercept: f64,
    pub quarter_effects: Vec<f64>,
    pub char_effects: std::collections::BTreeMap<String, f64>,
    pub coord_effects: [f64; 2],
    pub gcv_trace: Vec<GcvPoint>,
}

impl HedonicFit {
    pub fn knot_count(&self) -> usize {
        self.basis.k()
    }

    pub fn report(&self) -> HedonicReport {
        HedonicReport {
            round: self.round,
            n: self.n,
            knots: self.basis.k(),
            lambda_rel: self.lambda_rel,
            lambda_eff: self.lambda_eff,
            edf: self.edf,
            gcv: self.gcv,
            sigma2: self.sigma2,
            intercept: self.intercept,
            quarter_effects: self.quarter_effects.clone(),
            char_effects: self.char_effects.iter().cloned().collect(),
            coord_effects: self.coord_effects,
            gcv_trace: self.gcv_trace.clone(),
        }
    }

    /// Spatial surface at arbitrary locations: linear slopes plus the radial
    /// expansion. Defined up to an additive constant shared with the
    /// intercept.
    pub fn surface(&self, locations: &[[f64; 2]]) -> Vec<f64> {
        let z = self.basis.design(locations);
        let b = DVector::from_column_slice(&self.spline_coefficients);
        let radial = z * b;
        locations
            .iter()
            .zip(radial.iter())
            .map(|(l, r)| self.coord_effects[0] * l[0] + self.coord_effects[1] * l[1] + r)
            .collect()
    }

    /// Refits the stored design against a new response at the chosen penalty
    /// and returns the new residual vector.
    pub fn refit_residuals(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::data(format!(
                "refit response has {} entries, design has {}",
                y.len(),
                self.n
            )));
        }
        let yv = DVector::from_column_slice(y);
        let rhs = self.m.tr_mul(&yv);
        let theta = self.chol.solve(&rhs);
        let fitted = &self.m * theta;
        Ok(y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect())
    }
}

/// Flags the first column of the unpenalized block that is (numerically) a
/// linear combination of its predecessors, by name.
fn rank_check(m: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let n = m.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(names.len());
    for (c, name) in names.iter().enumerate() {
        let mut col = DVector::from_iterator(n, m.column(c).iter().copied());
        let orig = col.norm();
        for b in &basis {
            let proj = b.dot(&col);
            col.axpy(-proj, b, 1.0);
        }
        let resid = col.norm();
        if resid <= 1e-10 * orig.max(1e-30) {
            return Err(Error::numeric(format!(
                "design column '{name}' is collinear with earlier columns"
            )));
        }
        basis.push(col / resid);
    }
    Ok(())
}

/// Fits the partial-linear model, choosing the ridge weight by GCV over the
/// configured grid. Ties prefer the larger penalty; a minimum on the grid
/// edge is logged as a warning.
pub fn fit_partial_linear(input: &HedonicInput, cfg: &HedonicConfig) -> Result<HedonicFit> {
    input.validate()?;
    if cfg.lambda_grid.is_empty() {
        return Err(Error::config("empty penalty grid".to_string()));
    }
    if cfg.lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("penalty grid must be strictly ascending".to_string()));
    }
    if cfg.lambda_grid.iter().any(|l| *l <= 0.0) {
        return Err(Error::config("penalties must be positive".to_string()));
    }
    let n = input.y.len();
    let nq = input.n_quarters;
    let nc = input.char_names.len();
    let m_unpen = 1 + (nq - 1) + nc + 2;

    let k_target = ((n + cfg.obs_per_knot - 1) / cfg.obs_per_knot).min(cfg.knots_cap).max(1);
    let knots = select_knots(&input.locations, k_target)?;
    let basis = SpatialBasis::new(knots)?;
    let k = basis.k();
    let p = m_unpen + k;
    if n <= m_unpen {
        return Err(Error::data(format!(
            "round {}: {} observations cannot identify {} unpenalized coefficients",
            input.round, n, m_unpen
        )));
    }

    let mut names: Vec<String> = Vec::with_capacity(m_unpen);
    names.push("intercept".to_string());
    for q in 1..nq {
        names.push(format!("quarter_{q}"));
    }
    names.extend(input.char_names.iter().cloned());
    names.push("coord_x".to_string());
    names.push("coord_y".to_string());

    let mut m = DMatrix::zeros(n, p);
    for r in 0..n {
        m[(r, 0)] = 1.0;
        let q = input.quarter[r];
        if q > 0 {
            m[(r, q)] = 1.0;
        }
        for (c, v) in input.chars[r].iter().enumerate() {
            m[(r, nq + c)] = *v;
        }
        m[(r, nq + nc)] = input.locations[r][0];
        m[(r, nq + nc + 1)] = input.locations[r][1];
    }
    rank_check(&m.columns(0, m_unpen).into_owned(), &names)?;
    let z = basis.design(&input.locations);
    m.columns_mut(m_unpen, k).copy_from(&z);

    let gram = m.tr_mul(&m);
    let yv = DVector::from_column_slice(&input.y);
    let mty = m.tr_mul(&yv);
    let yty = yv.dot(&yv);
    let spline_trace: f64 = (m_unpen..p).map(|d| gram[(d, d)]).sum();
    let lambda_unit = spline_trace / k as f64;
    if !(lambda_unit > 0.0) {
        return Err(Error::numeric("spline block has zero energy".to_string()));
    }

    let nf = n as f64;
    let mut best: Option<(f64, usize, f64, f64)> = None; // (gcv, grid idx, edf, rss)
    let mut trace = Vec::with_capacity(cfg.lambda_grid.len());
    for (gi, &lam_rel) in cfg.lambda_grid.iter().enumerate() {
        let mut a = gram.clone();
        let lam = lam_rel * lambda_unit;
        for d in m_unpen..p {
            a[(d, d)] += lam;
        }
        let Some(chol) = Cholesky::new(a) else {
            continue;
        };
        let theta = chol.solve(&mty);
        let rss = (yty - 2.0 * theta.dot(&mty) + theta.dot(&(&gram * &theta))).max(0.0);
        let inv_gram = chol.solve(&gram);
        let edf: f64 = (0..p).map(|d| inv_gram[(d, d)]).sum();
        if edf >= nf {
            continue;
        }
        let gcv = nf * rss / ((nf - edf) * (nf - edf));
        trace.push(GcvPoint {
            lambda_rel: lam_rel,
            edf,
            gcv,
        });
        match best {
            Some((bg, _, _, _)) if gcv > bg => {}
            _ => best = Some((gcv, gi, edf, rss)),
        }
    }
    let Some((gcv, gi, edf, rss)) = best else {
        return Err(Error::numeric("no penalty produced a usable fit".to_string()));
    };
    if gi == 0 || gi == cfg.lambda_grid.len() - 1 {
        log::warn!(
            "round {}: GCV minimum sits on the penalty grid edge (lambda_rel = {:e})",
            input.round,
            cfg.lambda_grid[gi]
        );
    }

    let lambda_rel = cfg.lambda_grid[gi];
    let lambda_eff = lambda_rel * lambda_unit;
    let mut a = gram.clone();
    for d in m_unpen..p {
        a[(d, d)] += lambda_eff;
    }
    let chol = Cholesky::new(a)
        .ok_or_else(|| Error::numeric("normal equations are not positive definite".to_string()))?;
    let theta = chol.solve(&mty);
    let fitted_v = &m * &theta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = input.y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    let mut quarter_effects = vec![0.0; nq];
    for q in 1..nq {
        quarter_effects[q] = theta[q];
    }
    let char_effects: Vec<(String, f64)> = input
        .char_names
        .iter()
        .enumerate()
        .map(|(c, name)| (name.clone(), theta[nq + c]))
        .collect();
    Ok(HedonicFit {
        round: input.round,
        n,
        intercept: theta[0],
        quarter_effects,
        char_effects,
        coord_effects: [theta[nq + nc], theta[nq + nc + 1]],
        spline_coefficients: theta.as_slice()[m_unpen..].to_vec(),
        lambda_rel,
        lambda_eff,
        edf,
        gcv,
        sigma2: rss / (nf - edf),
        fitted,
        residuals,
        gcv_trace: trace,
        basis,
        m,
        chol,
    })
}

/// Which scale level-enhanced values live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualScale {
    /// `exp(index level + residual)`, a real price.
    Price,
    /// `index level + residual`, stays in logs.
    Log,
}

/// A round's level-enhanced distribution: the quarter index level each
/// transaction belongs to, plus its regression residual. `values` is their
/// sum by construction, exponentiated on the price scale.
#[derive(Clone, Debug, Serialize)]
pub struct LevelEnhanced {
    pub round: usize,
    pub scale: ResidualScale,
    pub quarter_level: Vec<f64>,
    pub residual: Vec<f64>,
    pub values: Vec<f64>,
}

impl LevelEnhanced {
    pub fn sample(&self) -> WeightedSample {
        let kind = match self.scale {
            ResidualScale::Price => SampleKind::Price,
            ResidualScale::Log => SampleKind::LogLevel,
        };
        WeightedSample::new(self.round, kind, self.values.clone(), vec![1.0; self.values.len()])
    }
}

/// Combines per-observation index levels with fit residuals.
pub fn level_enhanced(fit: &HedonicFit, levels: &[f64], scale: ResidualScale) -> Result<LevelEnhanced> {
    if levels.len() != fit.n {
        return Err(Error::data(format!(
            "round {}: {} index levels for {} residuals",
            fit.round,
            levels.len(),
            fit.n
        )));
    }
    let values = combine(levels, &fit.residuals, scale);
    Ok(LevelEnhanced {
        round: fit.round,
        scale,
        quarter_level: levels.to_vec(),
        residual: fit.residuals.clone(),
        values,
    })
}

fn combine(levels: &[f64], residuals: &[f64], scale: ResidualScale) -> Vec<f64> {
    levels
        .iter()
        .zip(residuals)
        .map(|(l, r)| match scale {
            ResidualScale::Price => (l + r).exp(),
            ResidualScale::Log => l + r,
        })
        .collect()
}

/// Residual-bootstrap dominance test between two rounds' level-enhanced
/// distributions. Replication `b` draws residuals with replacement within
/// each round, rebuilds responses as fitted plus drawn residual, refits both
/// models at their chosen penalties, recombines levels with the fresh
/// residuals, and re-centres the pair curve at the original one. No survey
/// weights enter; both samples are treated as unweighted draws from the
/// fitted laws.
pub fn residual_sd_test(
    target: &HedonicFit,
    target_levels: &[f64],
    base: &HedonicFit,
    base_levels: &[f64],
    s: u8,
    b_reps: usize,
    seed: u64,
    scale: ResidualScale,
    cfg: &GridConfig,
) -> Result<SdTestReport> {
    if !(1..=3).contains(&s) {
        return Err(Error::config(format!("dominance order {s} outside 1..=3")));
    }
    if b_reps == 0 {
        return Err(Error::config("residual bootstrap needs at least one replication".to_string()));
    }
    let enhanced_j = level_enhanced(target, target_levels, scale)?;
    let enhanced_i = level_enhanced(base, base_levels, scale)?;
    let sample_j = enhanced_j.sample();
    let sample_i = enhanced_i.sample();
    let grid = grid_for(&sample_j, &sample_i, cfg)?;
    let d_hat = pair_sup(&grid, &enhanced_j.values, &enhanced_i.values, s);

    let mut draws: Vec<f64> = (0..b_reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_rng(seed, b as u64);
            let boot_j = resampled_values(target, target_levels, scale, &mut rng);
            let boot_i = resampled_values(base, base_levels, scale, &mut rng);
            recentered_pair_sup(
                &grid,
                &enhanced_j.values,
                &enhanced_i.values,
                boot_j,
                boot_i,
                s,
            )
        })
        .collect();
    let p_value = draws.iter().filter(|d| **d > d_hat).count() as f64 / b_reps as f64;
    sort_draws(&mut draws);
    Ok(SdTestReport {
        s,
        j: target.round,
        i: vec![base.round],
        d_hat,
        per_pair: vec![PairReport {
            i: base.round,
            sup: d_hat,
            grid_points: grid.len(),
        }],
        p_value,
        critical_values: CriticalValues {
            at_1pct: upper_critical(&draws, 0.01),
            at_5pct: upper_critical(&draws, 0.05),
            at_10pct: upper_critical(&draws, 0.10),
        },
        b: b_reps,
        seed,
        grid_size: grid.len(),
    })
}

/// One round's bootstrap pass: resample residuals, refit, recombine.
fn resampled_values(
    fit: &HedonicFit,
    levels: &[f64],
    scale: ResidualScale,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    let n = fit.n;
    let y_b: Vec<f64> = (0..n)
        .map(|k| fit.fitted[k] + fit.residuals[rng.random_range(0..n)])
        .collect();
    let resid_b = fit
        .refit_residuals(&y_b)
        .expect("refit length matches by construction");
    combine(levels, &resid_b, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic pseudo-noise in a fixed band, independent of any RNG
    /// crate so the fixtures never drift.
    fn wobble(k: usize) -> f64 {
        ((k as f64 * 12.9898).sin() * 43758.5453).fract()
    }

    fn linear_input(round: usize, n: usize, noise: f64) -> (HedonicInput, Vec<f64>) {
        let mut y = Vec::with_capacity(n);
        let mut quarter = Vec::with_capacity(n);
        let mut chars = Vec::with_capacity(n);
        let mut locations = Vec::with_capacity(n);
        for k in 0..n {
            let q = k % 3;
            let area = 1.0 + wobble(k);
            let storey = (k % 7) as f64;
            let x = wobble(k + 1000);
            let yy = wobble(k + 2000);
            let eps = noise * (wobble(k + 3000) - 0.5);
            y.push(1.5 + 0.4 * (q == 1) as u8 as f64 - 0.25 * (q == 2) as u8 as f64
                + 2.0 * area
                + 0.05 * storey
                - 0.8 * x
                + 0.3 * yy
                + eps);
            quarter.push(q);
            chars.push(vec![area, storey]);
            locations.push([x, yy]);
        }
        let input = HedonicInput {
            round,
            y,
            quarter,
            n_quarters: 3,
            chars,
            char_names: vec!["area".to_string(), "storey".to_string()],
            locations,
        };
        let truth = vec![1.5, 0.0, 0.4, -0.25];
        (input, truth)
    }

    #[test]
    fn noiseless_linear_model_is_recovered_exactly() {
        let (input, _) = linear_input(0, 150, 0.0);
        let fit = fit_partial_linear(&input, &HedonicConfig::default()).unwrap();
        assert!((fit.intercept - 1.5).abs() < 1e-6, "intercept {}", fit.intercept);
        assert!((fit.quarter_effects[1] - 0.4).abs() < 1e-6);
        assert!((fit.quarter_effects[2] + 0.25).abs() < 1e-6);
        assert_eq!(fit.quarter_effects[0], 0.0);
        assert!((fit.char_effects[0].1 - 2.0).abs() < 1e-6);
        assert!((fit.char_effects[1].1 - 0.05).abs() < 1e-6);
        assert!((fit.coord_effects[0] + 0.8).abs() < 1e-5);
        assert!((fit.coord_effects[1] - 0.3).abs() < 1e-5);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn collinear_column_is_named() {
        let (mut input, _) = linear_input(0, 80, 0.0);
        for row in &mut input.chars {
            let a = row[0];
            row.push(2.0 * a);
        }
        input.char_names.push("area_twice".to_string());
        let err = fit_partial_linear(&input, &HedonicConfig::default()).unwrap_err();
        assert!(err.to_string().contains("area_twice"), "{err}");
    }

    #[test]
    fn constant_characteristic_collides_with_the_intercept() {
        let (mut input, _) = linear_input(0, 80, 0.0);
        for row in &mut input.chars {
            row.push(1.0);
        }
        input.char_names.push("lease_flag".to_string());
        let err = fit_partial_linear(&input, &HedonicConfig::default()).unwrap_err();
        assert!(err.to_string().contains("lease_flag"), "{err}");
    }

    #[test]
    fn refitting_the_original_response_reproduces_residuals() {
        let (input, _) = linear_input(0, 120, 0.08);
        let fit = fit_partial_linear(&input, &HedonicConfig::default()).unwrap();
        let again = fit.refit_residuals(&input.y).unwrap();
        for (a, b) in fit.residuals.iter().zip(&again) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn smooth_surface_is_tracked_under_noise() {
        let n = 600;
        let mut input = HedonicInput {
            round: 0,
            y: Vec::new(),
            quarter: vec![0; n],
            n_quarters: 1,
            chars: vec![vec![]; n],
            char_names: vec![],
            locations: Vec::new(),
        };
        let surf = |x: f64, yy: f64| (2.0 * x - 1.0).powi(2) * 0.5 + 0.4 * (3.0 * yy).sin();
        for k in 0..n {
            let x = wobble(k + 11);
            let yy = wobble(k + 7777);
            input.locations.push([x, yy]);
            input.y.push(surf(x, yy) + 0.05 * (wobble(k + 31) - 0.5));
        }
        let fit = fit_partial_linear(&input, &HedonicConfig::default()).unwrap();
        let g_hat = fit.surface(&input.locations);
        let truth: Vec<f64> = input.locations.iter().map(|l| surf(l[0], l[1])).collect();
        let mean_hat = g_hat.iter().sum::<f64>() / n as f64 + fit.intercept;
        let mean_true = truth.iter().sum::<f64>() / n as f64;
        let rmse = (input
            .locations
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let d = (g_hat[k] + fit.intercept - mean_hat) - (truth[k] - mean_true);
                d * d
            })
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rmse < 0.05, "surface rmse {rmse}");
        assert!(fit.edf > 3.0 && fit.edf < n as f64 / 2.0, "edf {}", fit.edf);
    }

    #[test]
    fn gcv_trace_covers_the_grid_and_picks_its_minimum() {
        let (input, _) = linear_input(0, 200, 0.1);
        let cfg = HedonicConfig::default();
        let fit = fit_partial_linear(&input, &cfg).unwrap();
        assert_eq!(fit.gcv_trace.len(), cfg.lambda_grid.len());
        let min = fit
            .gcv_trace
            .iter()
            .map(|p| p.gcv)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(fit.gcv, min);
        assert!(cfg.lambda_grid.contains(&fit.lambda_rel));
    }

    #[test]
    fn level_enhanced_values_are_the_sum_by_construction() {
        let (input, _) = linear_input(2, 90, 0.05);
        let fit = fit_partial_linear(&input, &HedonicConfig::default()).unwrap();
        let levels: Vec<f64> = (0..fit.n).map(|k| 0.01 * (k % 5) as f64).collect();
        let price = level_enhanced(&fit, &levels, ResidualScale::Price).unwrap();
        let log = level_enhanced(&fit, &levels, ResidualScale::Log).unwrap();
        for k in 0..fit.n {
            assert_eq!(price.values[k], (levels[k] + fit.residuals[k]).exp());
            assert_eq!(log.values[k], levels[k] + fit.residuals[k]);
        }
        assert_eq!(price.sample().kind, SampleKind::Price);
        assert_eq!(log.sample().kind, SampleKind::LogLevel);
    }

    #[test]
    fn residual_test_rejects_a_level_shift_and_repeats_exactly() {
        let (input_a, _) = linear_input(0, 150, 0.08);
        let (input_b, _) = linear_input(1, 150, 0.08);
        let fit_a = fit_partial_linear(&input_a, &HedonicConfig::default()).unwrap();
        let fit_b = fit_partial_linear(&input_b, &HedonicConfig::default()).unwrap();
        let levels_a = vec![0.0; fit_a.n];
        // Round b sits a full log point above round a, so b dominates a and
        // the claim that a dominates b is plainly false.
        let levels_b = vec![1.0; fit_b.n];
        let cfg = GridConfig::default();
        let rep = residual_sd_test(
            &fit_a, &levels_a, &fit_b, &levels_b, 1, 200, 5, ResidualScale::Log, &cfg,
        )
        .unwrap();
        assert!(rep.d_hat > 0.0);
        assert!(rep.p_value <= 0.01, "p = {}", rep.p_value);
        let rep2 = residual_sd_test(
            &fit_a, &levels_a, &fit_b, &levels_b, 1, 200, 5, ResidualScale::Log, &cfg,
        )
        .unwrap();
        assert_eq!(rep.d_hat, rep2.d_hat);
        assert_eq!(rep.p_value, rep2.p_value);

        let accept = residual_sd_test(
            &fit_b, &levels_b, &fit_a, &levels_a, 1, 200, 5, ResidualScale::Log, &cfg,
        )
        .unwrap();
        assert!(accept.d_hat <= 0.0);
        assert!(accept.p_value > 0.10, "p = {}", accept.p_value);
    }
}

//! Stochastic-dominance curves and the bootstrap sup test.
//!
//! For a weighted sample with values `p_k`, order-`s` integrated weight at a
//! point `p` is
//!
//! ```text
//! D[s](p) = (1 / (N (s-1)!)) * sum_k (p - p_k)^(s-1) * 1(p_k <= p) * w_k
//! ```
//!
//! so `s = 1` is the weighted CDF and each higher order integrates the one
//! below. A pair curve is `D[s]_j - D[s]_i`; round `j` dominates round `i` at
//! order `s` when the curve is nowhere positive. The test statistic scales
//! each pair's sup by `sqrt(N_j N_i / (N_j + N_i))` and takes the max over
//! pairs; significance comes from a re-centred pairs bootstrap.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::WeightedSample;
use crate::resample::{replication_rng, resample_counts, sort_draws, upper_critical};
use crate::welfare::CriticalValues;

/// Bounds on the per-pair evaluation grid size.
#[derive(Clone, Copy, Debug)]
pub struct GridConfig {
    pub min_points: usize,
    pub max_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            min_points: 100,
            max_points: 10_000,
        }
    }
}

/// Pair curve evaluated on an ascending grid.
#[derive(Clone, Debug, Serialize)]
pub struct DominanceCurve {
    pub order: u8,
    pub j: usize,
    pub i: usize,
    pub n_j: usize,
    pub n_i: usize,
    pub grid: Vec<f64>,
    /// `D[s]_j - D[s]_i` at each grid point.
    pub values: Vec<f64>,
}

impl DominanceCurve {
    /// Effective pair size `N_j N_i / (N_j + N_i)`.
    pub fn pair_size(&self) -> f64 {
        let nj = self.n_j as f64;
        let ni = self.n_i as f64;
        nj * ni / (nj + ni)
    }

    /// Largest scaled ordinate, `sqrt(pair size) * max values`.
    pub fn scaled_sup(&self) -> f64 {
        let root = self.pair_size().sqrt();
        self.values
            .iter()
            .fold(f64::NEG_INFINITY, |acc, v| acc.max(root * v))
    }
}

/// A sample sorted by value, ready for sweep evaluation.
#[derive(Clone, Debug)]
struct SortedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl SortedSample {
    fn build(sample: &WeightedSample) -> SortedSample {
        let mut idx: Vec<usize> = (0..sample.n()).collect();
        idx.sort_unstable_by(|&a, &b| sample.values[a].total_cmp(&sample.values[b]));
        SortedSample {
            values: idx.iter().map(|&k| sample.values[k]).collect(),
            weights: idx.iter().map(|&k| sample.weights[k]).collect(),
        }
    }

    fn from_unsorted(mut values: Vec<f64>) -> SortedSample {
        values.sort_unstable_by(|a, b| a.total_cmp(b));
        let weights = vec![1.0; values.len()];
        SortedSample { values, weights }
    }

    fn n(&self) -> usize {
        self.values.len()
    }

    /// Evaluates `D[s]` at ascending `points`, writing into `out`. Weights
    /// are taken as `weights[k] * counts[k] * weight_scale`; pass `None` to
    /// use the original weights. `shift` recentres values to curb
    /// cancellation in the higher-order moments and must be shared by both
    /// samples of a pair.
    fn eval_into(
        &self,
        s: u8,
        shift: f64,
        counted: Option<(&[u32], f64)>,
        points: &[f64],
        out: &mut Vec<f64>,
    ) {
        out.clear();
        out.reserve(points.len());
        let n = self.n() as f64;
        let mut k = 0usize;
        let len = self.n();
        let (mut w0, mut w1, mut w2) = (0.0f64, 0.0f64, 0.0f64);
        let weight_at = |k: usize| -> f64 {
            match counted {
                Some((counts, scale)) => self.weights[k] * counts[k] as f64 * scale,
                None => self.weights[k],
            }
        };
        match s {
            1 => {
                for &p in points {
                    while k < len && self.values[k] <= p {
                        w0 += weight_at(k);
                        k += 1;
                    }
                    out.push(w0 / n);
                }
            }
            2 => {
                for &p in points {
                    while k < len && self.values[k] <= p {
                        let w = weight_at(k);
                        let v = self.values[k] - shift;
                        w0 += w;
                        w1 += w * v;
                        k += 1;
                    }
                    let ps = p - shift;
                    out.push((ps * w0 - w1) / n);
                }
            }
            3 => {
                for &p in points {
                    while k < len && self.values[k] <= p {
                        let w = weight_at(k);
                        let v = self.values[k] - shift;
                        w0 += w;
                        w1 += w * v;
                        w2 += w * v * v;
                        k += 1;
                    }
                    let ps = p - shift;
                    out.push((ps * ps * w0 - 2.0 * ps * w1 + w2) / (2.0 * n));
                }
            }
            _ => unreachable!("order validated by callers"),
        }
    }
}

fn check_order(s: u8) -> Result<()> {
    if (1..=3).contains(&s) {
        Ok(())
    } else {
        Err(Error::config(format!("dominance order {s} outside 1..=3")))
    }
}

fn check_sample(sample: &WeightedSample, role: &str) -> Result<()> {
    if sample.n() == 0 {
        return Err(Error::data(format!("{role} sample is empty")));
    }
    Ok(())
}

/// Equally spaced evaluation grid over the pooled value range of a pair. The
/// point count is the rounded effective pair size clamped to the configured
/// bounds.
pub fn grid_for(a: &WeightedSample, b: &WeightedSample, cfg: &GridConfig) -> Result<Vec<f64>> {
    check_sample(a, "first")?;
    check_sample(b, "second")?;
    let na = a.n() as f64;
    let nb = b.n() as f64;
    let pair = na * nb / (na + nb);
    let g = (pair.round() as usize).clamp(cfg.min_points, cfg.max_points);
    let lo = a
        .values
        .iter()
        .chain(&b.values)
        .fold(f64::INFINITY, |m, v| m.min(*v));
    let hi = a
        .values
        .iter()
        .chain(&b.values)
        .fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    Ok(linspace(lo, hi, g))
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    let last = (points - 1) as f64;
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / last)
        .collect()
}

/// Merges ascending lists into one ascending, deduplicated list.
fn merge_sorted(lists: &[&[f64]]) -> Vec<f64> {
    let total: usize = lists.iter().map(|l| l.len()).sum();
    let mut out = Vec::with_capacity(total);
    let mut cursors = vec![0usize; lists.len()];
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (li, &c) in cursors.iter().enumerate() {
            if c < lists[li].len() {
                let v = lists[li][c];
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((li, v));
                }
            }
        }
        match best {
            Some((li, v)) => {
                cursors[li] += 1;
                if out.last() != Some(&v) {
                    out.push(v);
                }
            }
            None => break,
        }
    }
    out
}

/// Pair curve `D[s]_j - D[s]_i` on the given ascending grid.
pub fn dominance_functional(
    j: &WeightedSample,
    i: &WeightedSample,
    s: u8,
    grid: &[f64],
) -> Result<DominanceCurve> {
    check_order(s)?;
    check_sample(j, "target")?;
    check_sample(i, "comparison")?;
    if grid.is_empty() {
        return Err(Error::config("dominance grid is empty".to_string()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::config("dominance grid is not ascending".to_string()));
    }
    let sj = SortedSample::build(j);
    let si = SortedSample::build(i);
    let shift = sj.values[0].min(si.values[0]);
    let mut dj = Vec::new();
    let mut di = Vec::new();
    sj.eval_into(s, shift, None, grid, &mut dj);
    si.eval_into(s, shift, None, grid, &mut di);
    let values: Vec<f64> = dj.iter().zip(&di).map(|(a, b)| a - b).collect();
    Ok(DominanceCurve {
        order: s,
        j: j.round,
        i: i.round,
        n_j: j.n(),
        n_i: i.n(),
        grid: grid.to_vec(),
        values,
    })
}

/// Max-over-pairs sup statistic.
#[derive(Clone, Debug, Serialize)]
pub struct SupStatistic {
    pub d_hat: f64,
    /// Scaled sup per pair, in input order.
    pub per_pair: Vec<f64>,
}

pub fn sup_statistic(curves: &[DominanceCurve]) -> Result<SupStatistic> {
    if curves.is_empty() {
        return Err(Error::config("sup statistic needs at least one curve".to_string()));
    }
    let per_pair: Vec<f64> = curves.iter().map(|c| c.scaled_sup()).collect();
    let d_hat = per_pair.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    Ok(SupStatistic { d_hat, per_pair })
}

/// Per-pair slice of the test report.
#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub i: usize,
    pub sup: f64,
    pub grid_points: usize,
}

/// Outcome of the dominance sup test. H0 is "round j dominates every
/// comparison round at order s" (statistic at most zero); small `p_value`
/// rejects dominance.
#[derive(Clone, Debug, Serialize)]
pub struct SdTestReport {
    pub s: u8,
    pub j: usize,
    #[serde(rename = "I")]
    pub i: Vec<usize>,
    pub d_hat: f64,
    pub per_pair: Vec<PairReport>,
    pub p_value: f64,
    pub critical_values: CriticalValues,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub grid_size: usize,
}

struct PairContext {
    i_round: usize,
    root_pair_size: f64,
    shift: f64,
    /// Evaluation points: the equally spaced grid, with both samples' values
    /// merged in at order one where the curves are step functions.
    eval_points: Vec<f64>,
    orig: Vec<f64>,
    sorted_i: SortedSample,
}

fn pair_context(
    sorted_j: &SortedSample,
    j: &WeightedSample,
    i: &WeightedSample,
    s: u8,
    cfg: &GridConfig,
) -> Result<PairContext> {
    let grid = grid_for(j, i, cfg)?;
    let sorted_i = SortedSample::build(i);
    let eval_points = if s == 1 {
        merge_sorted(&[&grid, &sorted_j.values, &sorted_i.values])
    } else {
        grid
    };
    let shift = sorted_j.values[0].min(sorted_i.values[0]);
    let mut dj = Vec::new();
    let mut di = Vec::new();
    sorted_j.eval_into(s, shift, None, &eval_points, &mut dj);
    sorted_i.eval_into(s, shift, None, &eval_points, &mut di);
    let orig: Vec<f64> = dj.iter().zip(&di).map(|(a, b)| a - b).collect();
    let nj = sorted_j.n() as f64;
    let ni = sorted_i.n() as f64;
    Ok(PairContext {
        i_round: i.round,
        root_pair_size: (nj * ni / (nj + ni)).sqrt(),
        shift,
        eval_points,
        orig,
        sorted_i,
    })
}

/// One bootstrap replication's re-centred max statistic.
fn replication_sup(
    sorted_j: &SortedSample,
    pairs: &[PairContext],
    s: u8,
    rng: &mut rand_chacha::ChaCha8Rng,
    scratch: &mut ReplicationScratch,
) -> f64 {
    let ReplicationScratch {
        counts_j,
        counts_i,
        dj,
        di,
    } = scratch;
    resample_counts(rng, sorted_j.n(), counts_j);
    let scale_j = renorm_scale(&sorted_j.weights, counts_j, sorted_j.n());
    let mut d_b = f64::NEG_INFINITY;
    for pair in pairs {
        resample_counts(rng, pair.sorted_i.n(), counts_i);
        let scale_i = renorm_scale(&pair.sorted_i.weights, counts_i, pair.sorted_i.n());
        sorted_j.eval_into(s, pair.shift, Some((counts_j, scale_j)), &pair.eval_points, dj);
        pair.sorted_i
            .eval_into(s, pair.shift, Some((counts_i, scale_i)), &pair.eval_points, di);
        let mut sup = f64::NEG_INFINITY;
        for ((bj, bi), orig) in dj.iter().zip(di.iter()).zip(&pair.orig) {
            sup = sup.max(bj - bi - orig);
        }
        d_b = d_b.max(pair.root_pair_size * sup);
    }
    d_b
}

struct ReplicationScratch {
    counts_j: Vec<u32>,
    counts_i: Vec<u32>,
    dj: Vec<f64>,
    di: Vec<f64>,
}

impl ReplicationScratch {
    fn new() -> Self {
        ReplicationScratch {
            counts_j: Vec::new(),
            counts_i: Vec::new(),
            dj: Vec::new(),
            di: Vec::new(),
        }
    }
}

/// Renormalizes a counted resample's weights to sum back to `n`.
fn renorm_scale(weights: &[f64], counts: &[u32], n: usize) -> f64 {
    let mut sum = 0.0;
    for (w, &c) in weights.iter().zip(counts) {
        if c > 0 {
            sum += w * c as f64;
        }
    }
    n as f64 / sum
}

/// Bootstrap sup test of "round j dominates every round in `comparisons` at
/// order `s`". Replication `b` resamples (value, weight) pairs of each round
/// independently from stream `(seed, b)`, drawing the target round once and
/// sharing it across pairs, renormalizes weights, and re-centres each pair
/// curve at the original one.
pub fn sd_test(
    target: &WeightedSample,
    comparisons: &[&WeightedSample],
    s: u8,
    b_reps: usize,
    seed: u64,
    cfg: &GridConfig,
) -> Result<SdTestReport> {
    check_order(s)?;
    check_sample(target, "target")?;
    if comparisons.is_empty() {
        return Err(Error::config("dominance test needs at least one comparison round".to_string()));
    }
    if b_reps == 0 {
        return Err(Error::config("dominance test needs at least one replication".to_string()));
    }
    let sorted_j = SortedSample::build(target);
    let pairs: Vec<PairContext> = comparisons
        .iter()
        .map(|i| pair_context(&sorted_j, target, i, s, cfg))
        .collect::<Result<_>>()?;

    let per_pair: Vec<PairReport> = pairs
        .iter()
        .map(|p| {
            let sup = p
                .orig
                .iter()
                .fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            PairReport {
                i: p.i_round,
                sup: p.root_pair_size * sup,
                grid_points: p.eval_points.len(),
            }
        })
        .collect();
    let d_hat = per_pair
        .iter()
        .fold(f64::NEG_INFINITY, |a, p| a.max(p.sup));

    let mut draws: Vec<f64> = (0..b_reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_rng(seed, b as u64);
            let mut scratch = ReplicationScratch::new();
            replication_sup(&sorted_j, &pairs, s, &mut rng, &mut scratch)
        })
        .collect();

    let p_value = draws.iter().filter(|d| **d > d_hat).count() as f64 / b_reps as f64;
    sort_draws(&mut draws);
    Ok(SdTestReport {
        s,
        j: target.round,
        i: comparisons.iter().map(|c| c.round).collect(),
        d_hat,
        grid_size: per_pair.iter().map(|p| p.grid_points).max().unwrap_or(0),
        per_pair,
        p_value,
        critical_values: CriticalValues {
            at_1pct: upper_critical(&draws, 0.01),
            at_5pct: upper_critical(&draws, 0.05),
            at_10pct: upper_critical(&draws, 0.10),
        },
        b: b_reps,
        seed,
    })
}

/// Scaled sup of the original pair curve for externally built value vectors,
/// with the order-one grid refined by both samples' jump points.
pub(crate) fn pair_sup(grid: &[f64], vals_j: &[f64], vals_i: &[f64], s: u8) -> f64 {
    let sj = SortedSample::from_unsorted(vals_j.to_vec());
    let si = SortedSample::from_unsorted(vals_i.to_vec());
    let points = if s == 1 {
        merge_sorted(&[grid, &sj.values, &si.values])
    } else {
        grid.to_vec()
    };
    let shift = sj.values[0].min(si.values[0]);
    let mut dj = Vec::new();
    let mut di = Vec::new();
    sj.eval_into(s, shift, None, &points, &mut dj);
    si.eval_into(s, shift, None, &points, &mut di);
    let sup = dj
        .iter()
        .zip(&di)
        .fold(f64::NEG_INFINITY, |a, (x, y)| a.max(x - y));
    let nj = sj.n() as f64;
    let ni = si.n() as f64;
    (nj * ni / (nj + ni)).sqrt() * sup
}

/// Re-centred sup for one externally resampled pair, used by the hedonic
/// residual bootstrap where replication samples carry fresh values. Original
/// and bootstrap curves are compared on the pair grid; at order one the
/// current values of all four samples are merged in, where the step curves
/// place their jumps.
pub(crate) fn recentered_pair_sup(
    grid: &[f64],
    orig_j: &[f64],
    orig_i: &[f64],
    boot_j: Vec<f64>,
    boot_i: Vec<f64>,
    s: u8,
) -> f64 {
    let so_j = SortedSample::from_unsorted(orig_j.to_vec());
    let so_i = SortedSample::from_unsorted(orig_i.to_vec());
    let sb_j = SortedSample::from_unsorted(boot_j);
    let sb_i = SortedSample::from_unsorted(boot_i);
    let points = if s == 1 {
        merge_sorted(&[grid, &so_j.values, &so_i.values, &sb_j.values, &sb_i.values])
    } else {
        grid.to_vec()
    };
    let shift = so_j.values[0]
        .min(so_i.values[0])
        .min(sb_j.values[0])
        .min(sb_i.values[0]);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut sup = f64::NEG_INFINITY;
    sb_j.eval_into(s, shift, None, &points, &mut a);
    sb_i.eval_into(s, shift, None, &points, &mut b);
    let mut boot: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    so_j.eval_into(s, shift, None, &points, &mut a);
    so_i.eval_into(s, shift, None, &points, &mut b);
    for (k, orig) in a.iter().zip(&b).map(|(x, y)| x - y).enumerate() {
        boot[k] -= orig;
        sup = sup.max(boot[k]);
    }
    let nj = so_j.n() as f64;
    let ni = so_i.n() as f64;
    (nj * ni / (nj + ni)).sqrt() * sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SampleKind;

    fn unweighted(round: usize, values: Vec<f64>) -> WeightedSample {
        WeightedSample::unweighted(round, values)
    }

    /// Midpoint-rule integral of the order-`s` pair curve over merged cells;
    /// exact for the step (s=1) and piecewise-linear (s=2) integrands, so it
    /// reproduces the closed-form next-order curve independently.
    fn integrate_lower_order(
        j: &WeightedSample,
        i: &WeightedSample,
        s_lower: u8,
        points: &[f64],
    ) -> Vec<f64> {
        let mut knots: Vec<f64> = j
            .values
            .iter()
            .chain(&i.values)
            .chain(points)
            .copied()
            .collect();
        knots.sort_unstable_by(|a, b| a.total_cmp(b));
        knots.dedup();
        let mids: Vec<f64> = knots.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let curve = dominance_functional(j, i, s_lower, &mids).unwrap();
        let mut acc = 0.0;
        let mut cell = 0usize;
        let mut out = Vec::with_capacity(points.len());
        for &p in points {
            while cell + 1 < knots.len() && knots[cell + 1] <= p {
                acc += curve.values[cell] * (knots[cell + 1] - knots[cell]);
                cell += 1;
            }
            out.push(acc);
        }
        out
    }

    #[test]
    fn grid_size_clamps_to_bounds() {
        let cfg = GridConfig::default();
        let a = unweighted(0, (1..=200).map(|v| v as f64).collect());
        let b = unweighted(1, (1..=200).map(|v| v as f64 + 0.5).collect());
        assert_eq!(grid_for(&a, &b, &cfg).unwrap().len(), 100);

        let a = unweighted(0, vec![1.0, 2.0]);
        let b = unweighted(1, vec![1.5, 2.5]);
        assert_eq!(grid_for(&a, &b, &cfg).unwrap().len(), 100);

        let a = unweighted(0, (1..=40_000).map(|v| v as f64).collect());
        let b = unweighted(1, (1..=40_000).map(|v| v as f64).collect());
        assert_eq!(grid_for(&a, &b, &cfg).unwrap().len(), 10_000);
    }

    #[test]
    fn grid_spans_the_union_range() {
        let a = unweighted(0, vec![3.0, 9.0]);
        let b = unweighted(1, vec![1.0, 4.0]);
        let grid = grid_for(&a, &b, &GridConfig::default()).unwrap();
        assert_eq!(grid[0], 1.0);
        assert_eq!(*grid.last().unwrap(), 9.0);
    }

    #[test]
    fn cdf_difference_on_two_point_samples() {
        let j = unweighted(1, vec![1.0, 4.0]);
        let i = unweighted(0, vec![2.0, 3.0]);
        let grid = grid_for(&j, &i, &GridConfig::default()).unwrap();
        let curve = dominance_functional(&j, &i, 1, &grid).unwrap();
        // On [1, 2) the target CDF leads by one half.
        assert_eq!(curve.values[0], 0.5);
        assert!(curve.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(*curve.values.last().unwrap(), 0.0);

        let stat = sup_statistic(std::slice::from_ref(&curve)).unwrap();
        // Pair size 2*2/4 = 1, so the scaled sup equals the raw sup.
        assert_eq!(stat.d_hat, 0.5);
    }

    #[test]
    fn curve_is_zero_below_both_minima() {
        let j = unweighted(1, vec![5.0, 6.0]);
        let i = unweighted(0, vec![4.0, 8.0]);
        let grid = vec![0.0, 1.0, 3.9999, 4.0, 5.0];
        let curve = dominance_functional(&j, &i, 2, &grid).unwrap();
        assert_eq!(curve.values[0], 0.0);
        assert_eq!(curve.values[1], 0.0);
        assert_eq!(curve.values[2], 0.0);
        assert!(curve.values[3] <= 0.0);
    }

    #[test]
    fn higher_orders_match_the_integration_oracle() {
        let j = WeightedSample::new(
            1,
            SampleKind::Price,
            vec![1.0, 3.0, 3.5, 7.0, 9.0],
            vec![0.5, 1.5, 1.0, 1.2, 0.8],
        );
        let i = WeightedSample::new(
            0,
            SampleKind::Price,
            vec![2.0, 2.5, 6.0, 6.5, 10.0],
            vec![1.1, 0.9, 1.3, 0.7, 1.0],
        );
        let grid = grid_for(&j, &i, &GridConfig::default()).unwrap();
        let range = grid.last().unwrap() - grid[0];
        for s in [2u8, 3] {
            let direct = dominance_functional(&j, &i, s, &grid).unwrap();
            let integrated = integrate_lower_order(&j, &i, s - 1, &grid);
            let scale = range.powi(s as i32 - 1);
            for (d, o) in direct.values.iter().zip(&integrated) {
                assert!((d - o).abs() <= 1e-9 * scale, "s={s}: {d} vs {o}");
            }
        }
    }

    #[test]
    fn order_two_terminal_value_is_the_mean_gap() {
        let j = WeightedSample::new(
            1,
            SampleKind::Price,
            vec![11.0, 13.0, 17.0, 19.0],
            vec![0.5, 1.5, 0.75, 1.25],
        );
        let i = WeightedSample::new(
            0,
            SampleKind::Price,
            vec![10.0, 14.0, 20.0],
            vec![1.2, 0.9, 0.9],
        );
        let grid = grid_for(&j, &i, &GridConfig::default()).unwrap();
        let curve = dominance_functional(&j, &i, 2, &grid).unwrap();
        let gap = i.mean() - j.mean();
        let scale = grid.last().unwrap().abs().max(1.0);
        assert!(
            (curve.values.last().unwrap() - gap).abs() <= 1e-9 * scale,
            "{} vs {gap}",
            curve.values.last().unwrap()
        );
    }

    #[test]
    fn scaling_values_scales_curves_by_the_order_power() {
        let j = unweighted(1, vec![1.0, 2.0, 4.0, 8.0]);
        let i = unweighted(0, vec![1.5, 3.0, 5.0, 7.0]);
        let c = 3.0;
        let js = unweighted(1, j.values.iter().map(|v| v * c).collect());
        let is_ = unweighted(0, i.values.iter().map(|v| v * c).collect());
        let grid = grid_for(&j, &i, &GridConfig::default()).unwrap();
        let grid_s: Vec<f64> = grid.iter().map(|p| p * c).collect();
        for s in [1u8, 2, 3] {
            let base = dominance_functional(&j, &i, s, &grid).unwrap();
            let scaled = dominance_functional(&js, &is_, s, &grid_s).unwrap();
            let factor = c.powi(s as i32 - 1);
            for (a, b) in base.values.iter().zip(&scaled.values) {
                assert!((a * factor - b).abs() < 1e-12 * factor.max(1.0), "s={s}");
            }
        }
    }

    #[test]
    fn first_order_implies_second_implies_third() {
        // i sits uniformly right of j, so i strictly dominates j at first
        // order and therefore at every higher order.
        let j = unweighted(1, (0..50).map(|k| 1.0 + k as f64 / 25.0).collect());
        let i = unweighted(0, (0..60).map(|k| 3.5 + k as f64 / 30.0).collect());
        let grid = grid_for(&j, &i, &GridConfig::default()).unwrap();
        for s in [1u8, 2, 3] {
            let held = dominance_functional(&i, &j, s, &grid).unwrap();
            assert!(held.scaled_sup() <= 0.0, "s={s}");
            let violated = dominance_functional(&j, &i, s, &grid).unwrap();
            assert!(violated.scaled_sup() > 0.0, "s={s}");
        }
    }

    #[test]
    fn sd_test_is_deterministic_and_accepts_self_comparison() {
        let values: Vec<f64> = (0..300).map(|k| 1.0 + ((k * 37) % 100) as f64 / 20.0).collect();
        // j sits slightly right of i, so its CDF lies below and dominance of
        // j over i holds; the test should not reject.
        let j = unweighted(1, values.iter().map(|v| v + 0.01).collect());
        let i = unweighted(0, values);
        let cfg = GridConfig::default();
        let a = sd_test(&j, &[&i], 1, 200, 9, &cfg).unwrap();
        let b = sd_test(&j, &[&i], 1, 200, 9, &cfg).unwrap();
        assert_eq!(a.d_hat, b.d_hat);
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.per_pair.len(), 1);
        assert!(a.critical_values.at_1pct >= a.critical_values.at_5pct);
        assert!(a.d_hat <= 0.0);
        assert!(a.p_value > 0.10, "p = {}", a.p_value);
    }

    #[test]
    fn sd_test_rejects_a_clear_violation() {
        // The target round sits a full unit below the comparison, so claiming
        // it dominates is plainly false.
        let j = unweighted(1, (0..400).map(|k| 1.0 + k as f64 / 400.0).collect());
        let i = unweighted(0, (0..400).map(|k| 2.0 + k as f64 / 400.0).collect());
        let rep = sd_test(&j, &[&i], 1, 300, 3, &GridConfig::default()).unwrap();
        assert!(rep.d_hat > 0.0);
        assert!(rep.p_value <= 0.01, "p = {}", rep.p_value);
        assert!(rep.d_hat >= rep.critical_values.at_1pct);
    }

    #[test]
    fn max_over_pairs_takes_the_worst_comparison() {
        let j = unweighted(2, (0..200).map(|k| 2.0 + k as f64 / 200.0).collect());
        let below = unweighted(0, (0..200).map(|k| 1.0 + k as f64 / 200.0).collect());
        let above = unweighted(1, (0..200).map(|k| 3.0 + k as f64 / 200.0).collect());
        let rep = sd_test(&j, &[&below, &above], 1, 100, 17, &GridConfig::default()).unwrap();
        assert_eq!(rep.i, vec![0, 1]);
        // j dominates the round below it but not the one above it.
        assert!(rep.per_pair[0].sup <= 0.0);
        assert!(rep.per_pair[1].sup > 0.0);
        assert_eq!(rep.d_hat, rep.per_pair[1].sup);
    }

    #[test]
    fn rejects_bad_orders_and_empty_grids() {
        let j = unweighted(1, vec![1.0]);
        let i = unweighted(0, vec![2.0]);
        assert!(dominance_functional(&j, &i, 0, &[1.0]).is_err());
        assert!(dominance_functional(&j, &i, 4, &[1.0]).is_err());
        assert!(dominance_functional(&j, &i, 1, &[]).is_err());
        assert!(dominance_functional(&j, &i, 1, &[2.0, 1.0]).is_err());
        assert!(sd_test(&j, &[], 1, 10, 0, &GridConfig::default()).is_err());
    }
}

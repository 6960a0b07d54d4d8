//! Spatial smoothing support: knot selection and the low-rank thin-plate
//! basis used by the hedonic model.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Thin-plate radial function `eta(r) = r^2 ln r`, written in terms of the
/// squared radius; zero at the origin by continuity.
fn tps_sq(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Picks `k` knot locations by k-means with a deterministic start: seeds are
/// quantile-spaced through the lexicographically sorted points, then 25 Lloyd
/// iterations refine them. No randomness anywhere, so a given point set
/// always yields the same knots. Requests larger than the number of distinct
/// locations are reduced to it.
pub fn select_knots(locations: &[[f64; 2]], k: usize) -> Result<Vec<[f64; 2]>> {
    if locations.is_empty() {
        return Err(Error::data("knot selection on an empty location set".to_string()));
    }
    if k == 0 {
        return Err(Error::config("knot count must be positive".to_string()));
    }
    let mut sorted: Vec<[f64; 2]> = locations.to_vec();
    sorted.sort_unstable_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut distinct = sorted.clone();
    distinct.dedup();
    let k = k.min(distinct.len());
    if k == distinct.len() {
        return Ok(distinct);
    }

    let mut centers: Vec<[f64; 2]> = (0..k)
        .map(|c| distinct[c * (distinct.len() - 1) / (k - 1).max(1)])
        .collect();
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for _ in 0..25 {
        sums.iter_mut().for_each(|s| *s = [0.0, 0.0]);
        counts.iter_mut().for_each(|c| *c = 0);
        for &p in &sorted {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist_sq(p, *center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            sums[best][0] += p[0];
            sums[best][1] += p[1];
            counts[best] += 1;
        }
        for c in 0..k {
            // An empty cluster keeps its previous center.
            if counts[c] > 0 {
                centers[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
    }
    centers.sort_unstable_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    centers.dedup();
    Ok(centers)
}

/// Low-rank thin-plate basis: columns are `E * Omega^(-1/2)` where
/// `E[i][k] = eta(|l_i - knot_k|)` and `Omega[k][m] = eta(|knot_k - knot_m|)`.
/// The inverse square root comes from the SVD of the symmetric `Omega`, with
/// singular values below a relative floor dropped.
#[derive(Clone, Debug)]
pub struct SpatialBasis {
    knots: Vec<[f64; 2]>,
    omega_inv_sqrt: DMatrix<f64>,
}

impl SpatialBasis {
    pub fn new(knots: Vec<[f64; 2]>) -> Result<SpatialBasis> {
        if knots.is_empty() {
            return Err(Error::data("spatial basis needs at least one knot".to_string()));
        }
        let k = knots.len();
        let omega = DMatrix::from_fn(k, k, |r, c| tps_sq(dist_sq(knots[r], knots[c])));
        let svd = omega.svd(true, true);
        let u = svd.u.as_ref().expect("svd with u requested");
        let vt = svd.v_t.as_ref().expect("svd with v_t requested");
        let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
        if smax <= 0.0 {
            return Err(Error::numeric("spatial basis: knot penalty matrix is zero".to_string()));
        }
        let floor = 1e-12 * smax;
        let inv_sqrt = DMatrix::from_fn(k, k, |r, c| {
            if r == c && svd.singular_values[r] > floor {
                1.0 / svd.singular_values[r].sqrt()
            } else {
                0.0
            }
        });
        let mut omega_inv_sqrt = vt.transpose() * inv_sqrt * u.transpose();
        // Symmetrize to shed the SVD's rounding skew.
        let t = omega_inv_sqrt.transpose();
        omega_inv_sqrt = (omega_inv_sqrt + t) * 0.5;
        Ok(SpatialBasis {
            knots,
            omega_inv_sqrt,
        })
    }

    pub fn k(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self) -> &[[f64; 2]] {
        &self.knots
    }

    /// Design block for a set of locations, one row per location.
    pub fn design(&self, locations: &[[f64; 2]]) -> DMatrix<f64> {
        let e = DMatrix::from_fn(locations.len(), self.k(), |r, c| {
            tps_sq(dist_sq(locations[r], self.knots[c]))
        });
        e * &self.omega_inv_sqrt
    }
}

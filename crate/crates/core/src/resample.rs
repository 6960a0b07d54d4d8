//! Deterministic bootstrap plumbing: per-replication RNG streams, counted
//! resampling, and order-statistic critical values.
//!
//! Every replication draws from its own ChaCha stream keyed by the run seed
//! and the replication id, so results do not depend on how replications are
//! scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for one bootstrap replication. `stream` is the replication id, or a
/// derived id for redraws; streams with distinct ids never overlap.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` indices in `0..n` with replacement and tallies them, so a
/// resample of a sorted sample stays sorted when expanded in index order.
pub fn resample_counts(rng: &mut ChaCha8Rng, n: usize, counts: &mut Vec<u32>) {
    counts.clear();
    counts.resize(n, 0);
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
}

/// Ascending `k`-th order statistic, 1-indexed, of an already sorted slice.
/// `k` is clamped to the valid range.
pub fn order_statistic(sorted: &[f64], k: usize) -> f64 {
    debug_assert!(!sorted.is_empty());
    let k = k.clamp(1, sorted.len());
    sorted[k - 1]
}

/// Upper-tail bootstrap critical value at level `gamma`: the
/// `floor((1-gamma)*B)`-th ascending order statistic.
pub fn upper_critical(sorted: &[f64], gamma: f64) -> f64 {
    let b = sorted.len() as f64;
    order_statistic(sorted, ((1.0 - gamma) * b).floor() as usize)
}

/// Lower-tail bootstrap critical value at level `gamma`: the
/// `floor(gamma*B)`-th ascending order statistic.
pub fn lower_critical(sorted: &[f64], gamma: f64) -> f64 {
    let b = sorted.len() as f64;
    order_statistic(sorted, (gamma * b).floor() as usize)
}

/// Sorts draws ascending, treating any NaN as an error upstream; callers
/// validate finiteness before this point.
pub fn sort_draws(draws: &mut [f64]) {
    draws.sort_unstable_by(|a, b| a.total_cmp(b));
}

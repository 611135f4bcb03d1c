use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Linear-interpolation percentile of sorted data, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap 95% interval of an arbitrary statistic.
pub fn bootstrap_ci_with(
    samples: &[f64],
    statistic: impl Fn(&[f64]) -> f64,
    n_resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Param("bootstrap needs at least one sample".into()));
    }
    if n_resamples < 100 {
        return Err(Error::Param(format!(
            "bootstrap needs at least 100 resamples, got {n_resamples}"
        )));
    }
    let mut rng = seed::rng(seed);
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..n_resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok((percentile(&stats, 0.025), percentile(&stats, 0.975)))
}

/// Percentile bootstrap 95% interval of the mean.
pub fn bootstrap_ci(samples: &[f64], n_resamples: usize, seed: u64) -> Result<(f64, f64)> {
    bootstrap_ci_with(
        samples,
        |s| s.iter().sum::<f64>() / s.len() as f64,
        n_resamples,
        seed,
    )
}

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Pooled sizes up to this use the exact permutation distribution.
const EXACT_MAX_POOLED: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// `U` statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
    /// Every pooled value was identical; the test carries no evidence.
    pub degenerate: bool,
}

/// Mid-ranks (1-based) of the pooled values, doubled so they are integers.
fn doubled_ranks(pooled: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        // positions i..=j share rank (i+1 + j+1)/2
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &idx[i..=j] {
            ranks[k] = r2;
        }
        i = j + 1;
    }
    ranks
}

/// Exact `P(R ≥ r_obs)` where `R` is the doubled rank sum of `n1` items drawn
/// without replacement from `ranks`.
fn exact_upper_tail(ranks: &[u64], n1: usize, r_obs: u64) -> f64 {
    let max_sum: usize = ranks.iter().map(|&r| r as usize).sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for k in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    let upper: f64 = ways[n1][r_obs as usize..].iter().sum();
    (upper / total).clamp(0.0, 1.0)
}

/// One-sided Mann–Whitney U test that `x` is stochastically greater than
/// `y`. Small pooled samples use the exact permutation distribution (ties
/// included); larger ones the normal approximation with tie correction and
/// continuity correction.
pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Param("rank test needs two non-empty samples".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("rank test input is not finite".into()));
    }
    let n1 = x.len();
    let n2 = y.len();
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let r2: u64 = ranks[..n1].iter().sum();
    let u = r2 as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    if pooled.iter().all(|v| *v == pooled[0]) {
        return Ok(MannWhitney {
            u,
            p_value: 1.0,
            exact: false,
            degenerate: true,
        });
    }
    let n = n1 + n2;
    if n <= EXACT_MAX_POOLED {
        return Ok(MannWhitney {
            u,
            p_value: exact_upper_tail(&ranks, n1, r2),
            exact: true,
            degenerate: false,
        });
    }
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let z = (u - n1f * n2f / 2.0 - 0.5) / var.sqrt();
    let normal = Normal::standard();
    Ok(MannWhitney {
        u,
        p_value: (1.0 - normal.cdf(z)).clamp(0.0, 1.0),
        exact: false,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_singletons_are_degenerate() {
        let r = mann_whitney_greater(&[1.0], &[1.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn exact_small_case() {
        // x all above y with n1 = n2 = 3: P = 1 / C(6,3) = 0.05
        let r = mann_whitney_greater(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.exact);
        assert_eq!(r.u, 9.0);
        assert!((r.p_value - 0.05).abs() < 1e-12);
        let r = mann_whitney_greater(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_large_samples() {
        let y: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let x: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let r = mann_whitney_greater(&x, &y).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn empty_rejected() {
        assert!(mann_whitney_greater(&[], &[1.0]).is_err());
    }
}

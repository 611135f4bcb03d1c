use super::check_pair;
use super::sdtw::cost_matrix;
use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Monotone, contiguous warping path from `(0, 0)` to `(ta−1, tb−1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath {
    pub steps: Vec<(usize, usize)>,
}

impl AlignmentPath {
    pub fn validate(&self, ta: usize, tb: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Invariant(format!("alignment path: {m}")));
        match (self.steps.first(), self.steps.last()) {
            (Some(&(0, 0)), Some(&end)) if end == (ta - 1, tb - 1) => {}
            _ => return bad("wrong endpoints"),
        }
        for w in self.steps.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return bad("non-unit step");
            }
        }
        Ok(())
    }

    pub fn diagonal_steps(&self) -> usize {
        self.steps
            .windows(2)
            .filter(|w| w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)
            .count()
    }
}

/// Exact DTW (squared Euclidean frame cost) with backtracking. On ties the
/// diagonal predecessor wins, then the one that advances `a`.
pub fn dtw_align(a: &Tensor2, b: &Tensor2) -> Result<(f64, AlignmentPath)> {
    check_pair(a, b)?;
    let cost = cost_matrix(a, b)?;
    let (ta, tb) = cost.shape();
    let mut d = Tensor2::zeros(ta, tb);
    for i in 0..ta {
        for j in 0..tb {
            let prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => d.get(0, j - 1),
                (_, 0) => d.get(i - 1, 0),
                _ => d.get(i - 1, j - 1).min(d.get(i - 1, j)).min(d.get(i, j - 1)),
            };
            d.set(i, j, cost.get(i, j) + prev);
        }
    }

    let mut steps = vec![(ta - 1, tb - 1)];
    let (mut i, mut j) = (ta - 1, tb - 1);
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = d.get(i - 1, j - 1);
            let up = d.get(i - 1, j);
            let left = d.get(i, j - 1);
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        steps.push((i, j));
    }
    steps.reverse();
    Ok((d.get(ta - 1, tb - 1), AlignmentPath { steps }))
}

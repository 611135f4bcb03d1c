use super::check_pair;
use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Pairwise squared Euclidean frame costs, `a.rows() × b.rows()`.
pub fn cost_matrix(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_pair(a, b)?;
    let mut c = Tensor2::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ai = a.row(i);
        for j in 0..b.rows() {
            let d: f64 = ai.iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
            c.set(i, j, d);
        }
    }
    Ok(c)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Param(format!("soft-DTW gamma must be positive, got {gamma}")))
    }
}

#[inline]
fn softmin3(a: f64, b: f64, c: f64, gamma: f64) -> f64 {
    let m = a.min(b).min(c);
    if m == f64::INFINITY {
        return m;
    }
    let s = (-(a - m) / gamma).exp() + (-(b - m) / gamma).exp() + (-(c - m) / gamma).exp();
    m - gamma * s.ln()
}

/// Forward table, `(ta+1) × (tb+1)`, with the `+∞` border in row/column 0.
fn forward_table(cost: &Tensor2, gamma: f64) -> Tensor2 {
    let (ta, tb) = cost.shape();
    let mut r = Tensor2::zeros(ta + 1, tb + 1);
    r.fill(f64::INFINITY);
    r.set(0, 0, 0.0);
    for i in 1..=ta {
        for j in 1..=tb {
            let soft = softmin3(r.get(i - 1, j - 1), r.get(i - 1, j), r.get(i, j - 1), gamma);
            r.set(i, j, cost.get(i - 1, j - 1) + soft);
        }
    }
    r
}

/// Soft-DTW discrepancy with squared Euclidean frame cost.
pub fn sdtw(a: &Tensor2, b: &Tensor2, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let cost = cost_matrix(a, b)?;
    let r = forward_table(&cost, gamma);
    Ok(r.get(a.rows(), b.rows()))
}

/// Soft-DTW value and its gradient with respect to every frame of `a`.
pub fn sdtw_grad(a: &Tensor2, b: &Tensor2, gamma: f64) -> Result<(f64, Tensor2)> {
    check_gamma(gamma)?;
    let cost = cost_matrix(a, b)?;
    let (ta, tb) = cost.shape();
    let r = forward_table(&cost, gamma);
    let value = r.get(ta, tb);

    // Expected alignment E = ∂value/∂cost, by the backward recursion over a
    // (ta+2)×(tb+2) frame whose outer border is −∞ except the corner.
    let rr = |i: usize, j: usize| -> f64 {
        if i == ta + 1 && j == tb + 1 {
            value
        } else if i == ta + 1 || j == tb + 1 {
            f64::NEG_INFINITY
        } else {
            r.get(i, j)
        }
    };
    let dd = |i: usize, j: usize| -> f64 {
        if i > ta || j > tb {
            0.0
        } else {
            cost.get(i - 1, j - 1)
        }
    };
    let w = tb + 2;
    let mut e = vec![0.0; (ta + 2) * w];
    e[(ta + 1) * w + tb + 1] = 1.0;
    for j in (1..=tb).rev() {
        for i in (1..=ta).rev() {
            let rij = r.get(i, j);
            let wa = ((rr(i + 1, j) - rij - dd(i + 1, j)) / gamma).exp();
            let wb = ((rr(i, j + 1) - rij - dd(i, j + 1)) / gamma).exp();
            let wc = ((rr(i + 1, j + 1) - rij - dd(i + 1, j + 1)) / gamma).exp();
            e[i * w + j] = e[(i + 1) * w + j] * wa + e[i * w + j + 1] * wb + e[(i + 1) * w + j + 1] * wc;
        }
    }

    let mut grad = Tensor2::zeros(ta, a.cols());
    for i in 0..ta {
        let ai = a.row(i);
        let gi = grad.row_mut(i);
        for j in 0..tb {
            let eij = e[(i + 1) * w + j + 1];
            if eij == 0.0 {
                continue;
            }
            for ((g, x), y) in gi.iter_mut().zip(ai).zip(b.row(j)) {
                *g += 2.0 * eij * (x - y);
            }
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor2 {
        Tensor2::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_cell_is_cost() {
        let a = t(&[&[1.0, 2.0]]);
        let b = t(&[&[4.0, -2.0]]);
        assert_eq!(sdtw(&a, &b, 1.0).unwrap(), 25.0);
    }

    #[test]
    fn identical_single_frames_have_zero_gradient() {
        let a = t(&[&[0.3, -1.2, 2.0]]);
        let (_, g) = sdtw_grad(&a, &a, 1.0).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_inputs() {
        let a = t(&[&[1.0]]);
        assert!(matches!(sdtw(&a, &a, 0.0), Err(Error::Param(_))));
        assert!(matches!(sdtw(&a, &a, -1.0), Err(Error::Param(_))));
        assert!(matches!(sdtw(&a, &t(&[&[1.0, 2.0]]), 1.0), Err(Error::Shape(_))));
        assert!(sdtw(&a, &Tensor2::zeros(0, 1), 1.0).is_err());
    }

    #[test]
    fn softmin_of_equal_values() {
        let v = softmin3(2.0, 2.0, 2.0, 1.0);
        assert!((v - (2.0 - 3f64.ln())).abs() < 1e-15);
        assert_eq!(softmin3(f64::INFINITY, f64::INFINITY, 1.5, 1.0), 1.5);
    }
}

use rand::Rng;

use super::{init_uniform, join, ParamSet, Tensor2};
use crate::error::{Error, Result};

/// Affine map `y = W·x + b` applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Tensor2,
    pub b: Tensor2,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            w: Tensor2::zeros(output, input),
            b: Tensor2::zeros(1, output),
        }
    }

    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let mut l = Linear::zeros(input, output);
        init_uniform(&mut l.w, rng);
        l
    }

    pub fn identity(n: usize) -> Self {
        Linear {
            w: Tensor2::identity(n),
            b: Tensor2::zeros(1, n),
        }
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    pub fn output(&self) -> usize {
        self.w.rows()
    }

    /// Applies the map to every row of `x`.
    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.input() {
            return Err(Error::Shape(format!(
                "linear layer expects width {}, got {}",
                self.input(),
                x.cols()
            )));
        }
        let mut y = Tensor2::zeros(x.rows(), self.output());
        for r in 0..x.rows() {
            let out = y.row_mut(r);
            out.copy_from_slice(self.b.data());
            self.w.matvec_acc(x.row(r), out);
        }
        Ok(y)
    }

    /// Accumulates parameter gradients into `grads` and returns `∂L/∂x`.
    pub fn backward(&self, x: &Tensor2, dy: &Tensor2, grads: &mut Linear) -> Tensor2 {
        let mut dx = Tensor2::zeros(x.rows(), self.input());
        for r in 0..x.rows() {
            let g = dy.row(r);
            grads.w.outer_acc(g, x.row(r));
            for (gb, v) in grads.b.data_mut().iter_mut().zip(g) {
                *gb += v;
            }
            self.w.matvec_t_acc(g, dx.row_mut(r));
        }
        dx
    }
}

impl ParamSet for Linear {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        vec![("w".into(), &mut self.w), ("b".into(), &mut self.b)]
    }
}

pub(crate) fn prefixed<'a>(
    prefix: &str,
    items: Vec<(String, &'a Tensor2)>,
) -> impl Iterator<Item = (String, &'a Tensor2)> + 'a {
    let prefix = prefix.to_string();
    items.into_iter().map(move |(n, t)| (join(&prefix, &n), t))
}

pub(crate) fn prefixed_mut<'a>(
    prefix: &str,
    items: Vec<(String, &'a mut Tensor2)>,
) -> impl Iterator<Item = (String, &'a mut Tensor2)> + 'a {
    let prefix = prefix.to_string();
    items.into_iter().map(move |(n, t)| (join(&prefix, &n), t))
}

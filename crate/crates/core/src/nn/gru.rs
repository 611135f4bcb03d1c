use rand::Rng;

use super::linear::{prefixed, prefixed_mut};
use super::tensor::{sigmoid, Tensor2};
use super::{init_uniform, ParamSet};
use crate::error::{Error, Result};

/// GRU cell with the reset gate applied to the state before the recurrent
/// candidate matrix:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_z: Tensor2,
    pub w_r: Tensor2,
    pub w_n: Tensor2,
    pub u_z: Tensor2,
    pub u_r: Tensor2,
    pub u_n: Tensor2,
    pub b_z: Tensor2,
    pub b_r: Tensor2,
    pub b_n: Tensor2,
}

#[derive(Debug, Clone)]
struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

impl GruCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruCell {
            w_z: Tensor2::zeros(hidden, input),
            w_r: Tensor2::zeros(hidden, input),
            w_n: Tensor2::zeros(hidden, input),
            u_z: Tensor2::zeros(hidden, hidden),
            u_r: Tensor2::zeros(hidden, hidden),
            u_n: Tensor2::zeros(hidden, hidden),
            b_z: Tensor2::zeros(1, hidden),
            b_r: Tensor2::zeros(1, hidden),
            b_n: Tensor2::zeros(1, hidden),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut cell = GruCell::zeros(input, hidden);
        for m in [
            &mut cell.w_z,
            &mut cell.w_r,
            &mut cell.w_n,
            &mut cell.u_z,
            &mut cell.u_r,
            &mut cell.u_n,
        ] {
            init_uniform(m, rng);
        }
        cell
    }

    pub fn input(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w_z.rows()
    }

    fn step(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, StepCache) {
        let hd = self.hidden();
        let mut z = self.b_z.data().to_vec();
        let mut r = self.b_r.data().to_vec();
        let mut n = self.b_n.data().to_vec();
        self.w_z.matvec_acc(x, &mut z);
        self.u_z.matvec_acc(h, &mut z);
        self.w_r.matvec_acc(x, &mut r);
        self.u_r.matvec_acc(h, &mut r);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        self.w_n.matvec_acc(x, &mut n);
        self.u_n.matvec_acc(&rh, &mut n);
        n.iter_mut().for_each(|v| *v = v.tanh());
        let mut h_new = vec![0.0; hd];
        for k in 0..hd {
            h_new[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
        }
        let cache = StepCache {
            h_prev: h.to_vec(),
            z,
            r,
            n,
        };
        (h_new, cache)
    }

    /// Backpropagates one step. Accumulates parameter gradients and `∂L/∂x`
    /// into `grads` and `dx`; returns `∂L/∂h_prev`.
    fn step_backward(
        &self,
        x: &[f64],
        cache: &StepCache,
        dh: &[f64],
        grads: &mut GruCell,
        dx: &mut [f64],
    ) -> Vec<f64> {
        let hd = self.hidden();
        let StepCache { h_prev, z, r, n } = cache;
        let mut dh_prev = vec![0.0; hd];
        let mut da_z = vec![0.0; hd];
        let mut da_n = vec![0.0; hd];
        for k in 0..hd {
            let dn = dh[k] * (1.0 - z[k]);
            let dz = dh[k] * (h_prev[k] - n[k]);
            dh_prev[k] = dh[k] * z[k];
            da_n[k] = dn * (1.0 - n[k] * n[k]);
            da_z[k] = dz * z[k] * (1.0 - z[k]);
        }

        // candidate
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        grads.w_n.outer_acc(&da_n, x);
        grads.u_n.outer_acc(&da_n, &rh);
        add(grads.b_n.data_mut(), &da_n);
        self.w_n.matvec_t_acc(&da_n, dx);
        let mut d_rh = vec![0.0; hd];
        self.u_n.matvec_t_acc(&da_n, &mut d_rh);
        let mut da_r = vec![0.0; hd];
        for k in 0..hd {
            dh_prev[k] += d_rh[k] * r[k];
            da_r[k] = d_rh[k] * h_prev[k] * r[k] * (1.0 - r[k]);
        }

        // update gate
        grads.w_z.outer_acc(&da_z, x);
        grads.u_z.outer_acc(&da_z, h_prev);
        add(grads.b_z.data_mut(), &da_z);
        self.w_z.matvec_t_acc(&da_z, dx);
        self.u_z.matvec_t_acc(&da_z, &mut dh_prev);

        // reset gate
        grads.w_r.outer_acc(&da_r, x);
        grads.u_r.outer_acc(&da_r, h_prev);
        add(grads.b_r.data_mut(), &da_r);
        self.w_r.matvec_t_acc(&da_r, dx);
        self.u_r.matvec_t_acc(&da_r, &mut dh_prev);

        dh_prev
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

impl ParamSet for GruCell {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![
            ("w_z".into(), &self.w_z),
            ("w_r".into(), &self.w_r),
            ("w_n".into(), &self.w_n),
            ("u_z".into(), &self.u_z),
            ("u_r".into(), &self.u_r),
            ("u_n".into(), &self.u_n),
            ("b_z".into(), &self.b_z),
            ("b_r".into(), &self.b_r),
            ("b_n".into(), &self.b_n),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        vec![
            ("w_z".into(), &mut self.w_z),
            ("w_r".into(), &mut self.w_r),
            ("w_n".into(), &mut self.w_n),
            ("u_z".into(), &mut self.u_z),
            ("u_r".into(), &mut self.u_r),
            ("u_n".into(), &mut self.u_n),
            ("b_z".into(), &mut self.b_z),
            ("b_r".into(), &mut self.b_r),
            ("b_n".into(), &mut self.b_n),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLayer {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

/// Stack of bidirectional GRU layers. Each layer emits the concatenation of
/// its forward and backward states; layers above the first consume that
/// `2·hidden` output.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGruStack {
    pub layers: Vec<BiLayer>,
}

struct LayerTrace {
    input: Tensor2,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
}

/// Everything the backward pass needs from a recorded forward pass.
pub struct StackTrace {
    layers: Vec<LayerTrace>,
}

impl BiGruStack {
    pub fn zeros(input: usize, hidden: usize, layers: usize) -> Self {
        let layers = (0..layers)
            .map(|l| {
                let width = if l == 0 { input } else { 2 * hidden };
                BiLayer {
                    fwd: GruCell::zeros(width, hidden),
                    bwd: GruCell::zeros(width, hidden),
                }
            })
            .collect();
        BiGruStack { layers }
    }

    pub fn init(input: usize, hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..layers)
            .map(|l| {
                let width = if l == 0 { input } else { 2 * hidden };
                BiLayer {
                    fwd: GruCell::init(width, hidden, rng),
                    bwd: GruCell::init(width, hidden, rng),
                }
            })
            .collect();
        BiGruStack { layers }
    }

    pub fn input(&self) -> usize {
        self.layers[0].fwd.input()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].fwd.hidden()
    }

    pub fn output(&self) -> usize {
        2 * self.hidden()
    }

    fn check_input(&self, x: &Tensor2) -> Result<()> {
        if x.cols() != self.input() {
            return Err(Error::Shape(format!(
                "GRU stack expects input width {}, got {}",
                self.input(),
                x.cols()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::Shape("GRU input sequence is empty".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        self.forward_trace(x).map(|(y, _)| y)
    }

    pub fn forward_trace(&self, x: &Tensor2) -> Result<(Tensor2, StackTrace)> {
        self.check_input(x)?;
        let len = x.rows();
        let hd = self.hidden();
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut input = x.clone();
        for layer in &self.layers {
            let mut out = Tensor2::zeros(len, 2 * hd);
            let mut fwd = Vec::with_capacity(len);
            let mut h = vec![0.0; hd];
            for t in 0..len {
                let (h_new, cache) = layer.fwd.step(input.row(t), &h);
                out.row_mut(t)[..hd].copy_from_slice(&h_new);
                fwd.push(cache);
                h = h_new;
            }
            let mut bwd = Vec::with_capacity(len);
            let mut h = vec![0.0; hd];
            for t in (0..len).rev() {
                let (h_new, cache) = layer.bwd.step(input.row(t), &h);
                out.row_mut(t)[hd..].copy_from_slice(&h_new);
                bwd.push(cache);
                h = h_new;
            }
            bwd.reverse();
            traces.push(LayerTrace { input, fwd, bwd });
            input = out;
        }
        Ok((input, StackTrace { layers: traces }))
    }

    /// Accumulates parameter gradients into `grads`; returns `∂L/∂x`.
    pub fn backward(&self, trace: &StackTrace, d_out: &Tensor2, grads: &mut BiGruStack) -> Tensor2 {
        let hd = self.hidden();
        let mut d_y = d_out.clone();
        for (li, (layer, lt)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            let len = lt.input.rows();
            let mut dx = Tensor2::zeros(len, lt.input.cols());
            let g = &mut grads.layers[li];

            let mut carry = vec![0.0; hd];
            for t in (0..len).rev() {
                let dh: Vec<f64> = d_y.row(t)[..hd].iter().zip(&carry).map(|(a, b)| a + b).collect();
                carry = layer
                    .fwd
                    .step_backward(lt.input.row(t), &lt.fwd[t], &dh, &mut g.fwd, dx.row_mut(t));
            }
            let mut carry = vec![0.0; hd];
            for t in 0..len {
                let dh: Vec<f64> = d_y.row(t)[hd..].iter().zip(&carry).map(|(a, b)| a + b).collect();
                carry = layer
                    .bwd
                    .step_backward(lt.input.row(t), &lt.bwd[t], &dh, &mut g.bwd, dx.row_mut(t));
            }
            d_y = dx;
        }
        d_y
    }

    /// Runs several sequences together, padded to the longest one. Padded
    /// steps are masked: they leave the recurrent state untouched and emit
    /// zeros, so each sequence's output matches a standalone run.
    pub fn forward_padded(&self, batch: &[Tensor2]) -> Result<Vec<Tensor2>> {
        for x in batch {
            self.check_input(x)?;
        }
        let max_len = batch.iter().map(Tensor2::rows).max().unwrap_or(0);
        let hd = self.hidden();
        let mut inputs: Vec<Tensor2> = batch
            .iter()
            .map(|x| {
                let mut p = Tensor2::zeros(max_len, x.cols());
                p.data_mut()[..x.data().len()].copy_from_slice(x.data());
                p
            })
            .collect();
        let lens: Vec<usize> = batch.iter().map(Tensor2::rows).collect();
        for layer in &self.layers {
            let mut outs: Vec<Tensor2> = (0..batch.len()).map(|_| Tensor2::zeros(max_len, 2 * hd)).collect();
            for (cell, offset, reverse) in [(&layer.fwd, 0, false), (&layer.bwd, hd, true)] {
                let mut states = vec![vec![0.0; hd]; batch.len()];
                for step in 0..max_len {
                    let t = if reverse { max_len - 1 - step } else { step };
                    for b in 0..batch.len() {
                        if t >= lens[b] {
                            continue;
                        }
                        let (h_new, _) = cell.step(inputs[b].row(t), &states[b]);
                        outs[b].row_mut(t)[offset..offset + hd].copy_from_slice(&h_new);
                        states[b] = h_new;
                    }
                }
            }
            inputs = outs;
        }
        Ok(inputs
            .into_iter()
            .zip(&lens)
            .map(|(o, &len)| {
                Tensor2::from_vec(len, o.cols(), o.data()[..len * o.cols()].to_vec())
                    .expect("prefix of padded output")
            })
            .collect())
    }
}

impl ParamSet for BiGruStack {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.extend(prefixed(&format!("l{i}.fwd"), l.fwd.tensors()));
            out.extend(prefixed(&format!("l{i}.bwd"), l.bwd.tensors()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.extend(prefixed_mut(&format!("l{i}.fwd"), l.fwd.tensors_mut()));
            out.extend(prefixed_mut(&format!("l{i}.bwd"), l.bwd.tensors_mut()));
        }
        out
    }
}

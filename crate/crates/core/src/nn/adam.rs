use std::collections::HashMap;

use super::{ParamSet, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Gradients whose global L2 norm exceeds this are rescaled to it.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 4e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam with bias correction. Moment buffers are keyed by parameter name.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    steps: u64,
    state: HashMap<String, Moments>,
}

/// Global L2 norm over every gradient tensor.
pub fn global_norm<P: ParamSet>(grads: &P) -> f64 {
    let mut tensors = grads.tensors();
    tensors.sort_by(|a, b| a.0.cmp(&b.0));
    tensors.iter().map(|(_, t)| t.sq_norm()).sum::<f64>().sqrt()
}

/// Rescales `grads` in place so their global norm is at most `clip_norm`.
/// Returns the norm before scaling.
pub fn clip_global_norm<P: ParamSet>(grads: &mut P, clip_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > clip_norm {
        grads.scale(clip_norm / norm);
    }
    norm
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            steps: 0,
            state: HashMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One clipped Adam update. Returns the gradient norm before clipping.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<f64> {
        let items = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .map(|((name, p), (gname, g))| {
                debug_assert_eq!(name, gname);
                (name, p, g)
            })
            .collect();
        self.step_tensors(items)
    }

    /// Like [`Adam::step`] over explicit `(name, param, grad)` triples; the
    /// result does not depend on their order.
    pub fn step_tensors(&mut self, mut items: Vec<(String, &mut Tensor2, &Tensor2)>) -> Result<f64> {
        items.sort_by(|a, b| a.0.cmp(&b.0));
        for (name, p, g) in &items {
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!(
                    "gradient for `{name}` is {:?}, parameter is {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::Numeric(format!("gradient of `{name}`")));
            }
        }
        let norm = items.iter().map(|(_, _, g)| g.sq_norm()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numeric("global gradient norm".into()));
        }
        let scale = if norm > self.config.clip_norm {
            self.config.clip_norm / norm
        } else {
            1.0
        };

        self.steps += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.steps as i32);
        let bc2 = 1.0 - beta2.powi(self.steps as i32);
        for (name, p, g) in items {
            let st = self.state.entry(name).or_insert_with(|| Moments {
                m: vec![0.0; g.data().len()],
                v: vec![0.0; g.data().len()],
            });
            for (((w, &gi), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(st.m.iter_mut())
                .zip(st.v.iter_mut())
            {
                let gi = gi * scale;
                *m = beta1 * *m + (1.0 - beta1) * gi;
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(norm)
    }
}

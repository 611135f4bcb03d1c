//! Small hand-differentiated neural toolkit: dense layers, bidirectional GRU
//! stacks, Adam with global-norm gradient scaling, and a weight file format.

mod adam;
mod gru;
mod linear;
mod params;
mod tensor;

pub use adam::{clip_global_norm, global_norm, Adam, AdamConfig};
pub use gru::{BiGruStack, GruCell, StackTrace};
pub use linear::Linear;
pub(crate) use linear::{prefixed, prefixed_mut};
pub use params::{read_weight_file, write_weight_file, WeightFile, WEIGHT_FILE_VERSION};
pub use tensor::{axpy, dot, sigmoid, softplus, Tensor2};

use rand::Rng;

/// A structure of named parameter matrices.
///
/// The same type doubles as its own gradient container: `zeros_like` gives a
/// gradient buffer whose tensors line up name-for-name with the parameters.
pub trait ParamSet {
    fn tensors(&self) -> Vec<(String, &Tensor2)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)>;

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.scale(k);
        }
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data().len()).sum()
    }
}

/// Uniform `±sqrt(1/fan_in)` initialisation for a weight matrix (fan-in is
/// the column count).
pub fn init_uniform(t: &mut Tensor2, rng: &mut impl Rng) {
    let bound = (1.0 / t.cols().max(1) as f64).sqrt();
    for v in t.data_mut() {
        *v = rng.random_range(-bound..=bound);
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

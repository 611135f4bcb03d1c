//! Soft-DTW loss, hard DTW alignment and alignment-aware fit metrics.

mod bootstrap;
mod dtw;
mod metrics;
mod sdtw;

pub use bootstrap::{bootstrap_ci, bootstrap_ci_with, percentile};
pub use dtw::{dtw_align, AlignmentPath};
pub use metrics::{fit_metrics, warp_to_reference, FitMetrics};
pub use sdtw::{cost_matrix, sdtw, sdtw_grad};

use crate::error::{Error, Result};
use crate::nn::Tensor2;

fn check_pair(a: &Tensor2, b: &Tensor2) -> Result<()> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Shape("alignment inputs must have at least one frame".into()));
    }
    if a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "channel mismatch: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    Ok(())
}

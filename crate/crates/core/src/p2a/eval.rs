use std::fmt::Write as _;

use rayon::prelude::*;

use super::{Articulator, TrainItem};
use crate::alignment::{bootstrap_ci, fit_metrics, FitMetrics};
use crate::error::{Error, Result};
use crate::nn::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFit {
    pub id: String,
    pub metrics: FitMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub pcc: f64,
    pub rmse: f64,
    pub pcc_ci: (f64, f64),
    pub rmse_ci: (f64, f64),
}

fn positions(t: &Tensor2, channels: usize) -> Tensor2 {
    let mut out = Tensor2::zeros(t.rows(), channels);
    for r in 0..t.rows() {
        out.row_mut(r).copy_from_slice(&t.row(r)[..channels]);
    }
    out
}

/// DTW-aligned PCC and RMSE on position channels, per utterance. With
/// `bypass` the ground truth is scored against itself.
pub fn evaluate(model: &impl Articulator, items: &[TrainItem], bypass: bool) -> Result<Vec<UtteranceFit>> {
    let p = model.layout().position_channels();
    items
        .par_iter()
        .map(|item| {
            let truth = positions(&item.target, p);
            let pred = if bypass {
                truth.clone()
            } else {
                model.generate(&item.phonemes, &item.speaker)?.ema.position_view()
            };
            Ok(UtteranceFit {
                id: item.id.clone(),
                metrics: fit_metrics(&pred, &truth)?,
            })
        })
        .collect()
}

pub fn summarize(fits: &[UtteranceFit], n_resamples: usize, seed: u64) -> Result<EvalSummary> {
    if fits.is_empty() {
        return Err(Error::Param("nothing to summarise".into()));
    }
    let pcc: Vec<f64> = fits.iter().map(|f| f.metrics.pcc).collect();
    let rmse: Vec<f64> = fits.iter().map(|f| f.metrics.rmse).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(EvalSummary {
        pcc: mean(&pcc),
        rmse: mean(&rmse),
        pcc_ci: bootstrap_ci(&pcc, n_resamples, crate::seed::substream(seed, "bootstrap.pcc"))?,
        rmse_ci: bootstrap_ci(&rmse, n_resamples, crate::seed::substream(seed, "bootstrap.rmse"))?,
    })
}

/// `utterance_id,pcc,rmse` rows followed by `mean`, `ci_lo` and `ci_hi`
/// summary rows.
pub fn metrics_csv(fits: &[UtteranceFit], n_resamples: usize, seed: u64) -> Result<(String, EvalSummary)> {
    let summary = summarize(fits, n_resamples, seed)?;
    let mut out = String::from("utterance_id,pcc,rmse\n");
    for f in fits {
        writeln!(out, "{},{},{}", f.id, f.metrics.pcc, f.metrics.rmse).unwrap();
    }
    writeln!(out, "mean,{},{}", summary.pcc, summary.rmse).unwrap();
    writeln!(out, "ci_lo,{},{}", summary.pcc_ci.0, summary.rmse_ci.0).unwrap();
    writeln!(out, "ci_hi,{},{}", summary.pcc_ci.1, summary.rmse_ci.1).unwrap();
    Ok((out, summary))
}

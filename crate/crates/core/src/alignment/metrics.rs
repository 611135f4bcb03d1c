use super::dtw::dtw_align;
use crate::error::Result;
use crate::nn::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub struct FitMetrics {
    /// Per-channel Pearson correlation, averaged over channels.
    pub pcc: f64,
    /// Per-channel RMSE, averaged over channels.
    pub rmse: f64,
    /// Channels with zero variance; their correlation counts as 0.
    pub degenerate_channels: Vec<usize>,
}

/// Warps `pred` onto the time axis of `reference` along the DTW path. Each
/// reference frame receives the mean of the `pred` frames aligned to it.
pub fn warp_to_reference(pred: &Tensor2, reference: &Tensor2) -> Result<Tensor2> {
    let (_, path) = dtw_align(pred, reference)?;
    let mut warped = Tensor2::zeros(reference.rows(), pred.cols());
    let mut counts = vec![0usize; reference.rows()];
    for &(i, j) in &path.steps {
        counts[j] += 1;
        for (w, p) in warped.row_mut(j).iter_mut().zip(pred.row(i)) {
            *w += p;
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        warped.row_mut(j).iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(warped)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// PCC and RMSE of a prediction against the truth after DTW warping.
pub fn fit_metrics(pred: &Tensor2, truth: &Tensor2) -> Result<FitMetrics> {
    let warped = warp_to_reference(pred, truth)?;
    let channels = truth.cols();
    let mut pcc = 0.0;
    let mut rmse = 0.0;
    let mut degenerate_channels = Vec::new();
    for c in 0..channels {
        let w: Vec<f64> = (0..truth.rows()).map(|j| warped.get(j, c)).collect();
        let t: Vec<f64> = (0..truth.rows()).map(|j| truth.get(j, c)).collect();
        match pearson(&w, &t) {
            Some(r) => pcc += r,
            None => degenerate_channels.push(c),
        }
        let mse = w.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t.len() as f64;
        rmse += mse.sqrt();
    }
    if !degenerate_channels.is_empty() {
        log::warn!("zero-variance channels {degenerate_channels:?}; their PCC is reported as 0");
    }
    Ok(FitMetrics {
        pcc: pcc / channels as f64,
        rmse: rmse / channels as f64,
        degenerate_channels,
    })
}

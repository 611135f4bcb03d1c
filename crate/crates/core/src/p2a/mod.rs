//! The phoneme-to-articulatory model: timing encoder, Gaussian influence,
//! influence-weighted phoneme embeddings into a recurrent decoder, and a
//! per-speaker affine head. Trained end to end on a soft-DTW loss.

mod eval;
mod model;
mod train;
mod vcv;

pub use eval::{evaluate, metrics_csv, summarize, EvalSummary, UtteranceFit};
pub use model::{ForwardTrace, ModelConfig, ModelParams, P2aModel, EXPLOSION_LIMIT};
pub use train::{
    batch_loss_grad, item_loss, item_loss_grad, mean_loss, prepare_items, train, train_with, EpochRecord,
    TrainConfig, TrainHistory, TrainItem,
};
pub use vcv::{demo_vcv, VcvDemo};

use crate::ema::{ChannelLayout, EmaTrajectory};
use crate::error::Result;
use crate::lexicon::PhonemeSequence;
use crate::timing::TimingParams;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    /// Generated features in the articulator's output space (normalised for
    /// a trained model).
    pub ema: EmaTrajectory,
    pub timing: TimingParams,
    pub speaker: String,
}

/// Anything that maps a phoneme sequence to an expected trajectory with
/// per-phoneme timing.
pub trait Articulator: Sync {
    fn layout(&self) -> &ChannelLayout;

    fn speakers(&self) -> Vec<String>;

    fn generate(&self, seq: &PhonemeSequence, speaker: &str) -> Result<GenerationResult>;

    /// The result in physical units.
    fn physical(&self, result: &GenerationResult) -> Result<EmaTrajectory> {
        Ok(result.ema.clone())
    }
}

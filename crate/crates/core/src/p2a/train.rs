use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::model::{ModelParams, P2aModel};
use crate::alignment::sdtw_grad;
use crate::ema::{normalize, Dataset, SpeakerStats, Stage};
use crate::error::{Error, Result};
use crate::lexicon::PhonemeSequence;
use crate::nn::{Adam, AdamConfig, ParamSet, Tensor2};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of `(Σ durations − t_true)²` in the loss.
    pub length_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 4e-4,
            batch_size: 64,
            gamma: 1.0,
            clip_norm: 10.0,
            epochs: 100,
            seed: 0,
            length_penalty: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.gamma > 0.0 && self.clip_norm > 0.0) {
            return Err(Error::Param("learning_rate, gamma and clip_norm must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Param("batch_size and epochs must be at least 1".into()));
        }
        if !(self.length_penalty >= 0.0) {
            return Err(Error::Param("length_penalty must be non-negative".into()));
        }
        Ok(())
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("learning_rate".into(), self.learning_rate.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("clip_norm".into(), self.clip_norm.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("length_penalty".into(), self.length_penalty.to_string()),
        ]
    }
}

/// One training or validation example in normalised feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub id: String,
    pub speaker: String,
    pub phonemes: PhonemeSequence,
    pub target: Tensor2,
}

/// Brings utterances to normalised features: velocities are added to raw
/// positions first, then per-speaker statistics are applied.
pub fn prepare_items(
    dataset: &Dataset,
    ids: &[String],
    stats: &BTreeMap<String, SpeakerStats>,
) -> Result<Vec<TrainItem>> {
    dataset
        .select(ids)
        .map(|u| {
            let target = match u.ema.stage() {
                Stage::Normalized => u.ema.values().clone(),
                stage => {
                    let feats = if stage == Stage::Positions {
                        u.ema.clone().with_velocities()?
                    } else {
                        u.ema.clone()
                    };
                    let st = stats.get(&u.speaker).ok_or_else(|| Error::MissingSpeaker {
                        speaker: u.speaker.clone(),
                        what: "normalisation stats",
                        known: stats.keys().cloned().collect::<Vec<_>>().join(", "),
                    })?;
                    normalize(&feats, st)?.into_values()
                }
            };
            Ok(TrainItem {
                id: u.id.clone(),
                speaker: u.speaker.clone(),
                phonemes: u.phonemes.clone(),
                target,
            })
        })
        .collect()
}

/// SDTW loss (plus length penalty) of one item and its gradient.
pub fn item_loss_grad(model: &P2aModel, item: &TrainItem, cfg: &TrainConfig) -> Result<(f64, ModelParams)> {
    let trace = model.forward(&item.phonemes, &item.speaker, None)?;
    let (mut loss, d_out) = sdtw_grad(&trace.output, &item.target, cfg.gamma)?;
    let total: f64 = trace.timing.durations.iter().sum();
    let gap = total - item.target.rows() as f64;
    loss += cfg.length_penalty * gap * gap;
    let d_total = 2.0 * cfg.length_penalty * gap;
    let mut grads = model.params.zeros_like();
    model.backward(&item.phonemes, &item.speaker, &trace, &d_out, d_total, &mut grads)?;
    Ok((loss, grads))
}

/// Loss without gradients.
pub fn item_loss(model: &P2aModel, item: &TrainItem, cfg: &TrainConfig) -> Result<f64> {
    let trace = model.forward(&item.phonemes, &item.speaker, None)?;
    let loss = crate::alignment::sdtw(&trace.output, &item.target, cfg.gamma)?;
    let gap = trace.timing.durations.iter().sum::<f64>() - item.target.rows() as f64;
    Ok(loss + cfg.length_penalty * gap * gap)
}

/// Mean loss and gradient over a batch. Items are evaluated in parallel and
/// summed in id order, so the result depends neither on scheduling nor on
/// the order of the batch.
pub fn batch_loss_grad(model: &P2aModel, batch: &[&TrainItem], cfg: &TrainConfig) -> Result<(f64, ModelParams)> {
    let mut per_item: Vec<(&str, f64, ModelParams)> = batch
        .par_iter()
        .map(|item| item_loss_grad(model, item, cfg).map(|(l, g)| (item.id.as_str(), l, g)))
        .collect::<Result<_>>()?;
    per_item.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
    let mut total = 0.0;
    let mut grads = model.params.zeros_like();
    for (_, loss, g) in &per_item {
        total += loss;
        grads.add_assign(g);
    }
    let k = 1.0 / batch.len() as f64;
    grads.scale(k);
    Ok((total * k, grads))
}

pub fn mean_loss(model: &P2aModel, items: &[TrainItem], cfg: &TrainConfig) -> Result<f64> {
    if items.is_empty() {
        return Ok(f64::NAN);
    }
    let losses: Vec<f64> = items
        .par_iter()
        .map(|it| item_loss(model, it, cfg))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / items.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// NaN when there is no validation data.
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            let val = if r.val_loss.is_nan() { String::new() } else { r.val_loss.to_string() };
            writeln!(out, "{},{},{}", r.epoch, r.train_loss, val).unwrap();
        }
        out
    }
}

/// Trains `model` in place. `on_epoch` sees each finished epoch and may
/// stop training early by returning `false`.
pub fn train_with(
    model: &mut P2aModel,
    train: &[TrainItem],
    validation: &[TrainItem],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &P2aModel) -> bool,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Param("training split is empty".into()));
    }
    let mut adam = Adam::new(AdamConfig {
        learning_rate: cfg.learning_rate,
        clip_norm: cfg.clip_norm,
        ..AdamConfig::default()
    });
    let mut rng = seed::stream(cfg.seed, "train.shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&TrainItem> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = batch_loss_grad(model, &batch, cfg)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss {loss} at epoch {epoch}, batch {}", b + 1)));
            }
            adam.step(&mut model.params, &grads)
                .map_err(|e| Error::Numeric(format!("{e} at epoch {epoch}, batch {}", b + 1)))?;
            sum += loss * batch.len() as f64;
        }
        let record = EpochRecord {
            epoch,
            train_loss: sum / train.len() as f64,
            val_loss: mean_loss(model, validation, cfg)?,
        };
        log::info!(
            "epoch {epoch}: train {:.4}, validation {:.4}",
            record.train_loss,
            record.val_loss
        );
        history.epochs.push(record);
        if !on_epoch(&record, model) {
            break;
        }
    }
    Ok(history)
}

pub fn train(model: &mut P2aModel, train: &[TrainItem], validation: &[TrainItem], cfg: &TrainConfig) -> Result<TrainHistory> {
    train_with(model, train, validation, cfg, |_, _| true)
}

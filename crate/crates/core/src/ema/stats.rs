use std::collections::BTreeMap;

use super::{Dataset, DatasetSplit, EmaTrajectory, Stage};
use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Lower bound on a channel's standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerStats {
    pub speaker: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl SpeakerStats {
    /// Population mean and standard deviation over all given frames.
    pub fn from_frames<'a>(
        speaker: impl Into<String>,
        frames: impl IntoIterator<Item = &'a Tensor2> + Clone,
    ) -> Result<Self> {
        let speaker = speaker.into();
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        for t in frames.clone() {
            if sum.is_empty() {
                sum = vec![0.0; t.cols()];
            } else if sum.len() != t.cols() {
                return Err(Error::Layout(format!("speaker {speaker}: inconsistent channel counts")));
            }
            for row in t.iter_rows() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::MissingSpeaker {
                speaker,
                what: "training frames",
                known: String::new(),
            });
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; mean.len()];
        for t in frames {
            for row in t.iter_rows() {
                for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let std = var
            .iter()
            .map(|v| (v / count as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(SpeakerStats { speaker, mean, std })
    }
}

/// Per-speaker statistics of the feature channels (positions followed by
/// velocities) over the training split. Every speaker of the dataset must
/// have training frames.
pub fn fit_stats(dataset: &Dataset, split: &DatasetSplit) -> Result<BTreeMap<String, SpeakerStats>> {
    let mut out = BTreeMap::new();
    for speaker in dataset.speakers() {
        let frames: Vec<Tensor2> = dataset
            .select(&split.train)
            .filter(|u| u.speaker == speaker)
            .map(|u| match u.ema.stage() {
                Stage::Positions => Ok(u.ema.clone().with_velocities()?.into_values()),
                Stage::Features => Ok(u.ema.values().clone()),
                Stage::Normalized => Err(Error::Invariant(format!("utterance {} is already normalized", u.id))),
            })
            .collect::<Result<_>>()?;
        let stats = SpeakerStats::from_frames(speaker.clone(), frames.iter()).map_err(|e| match e {
            Error::MissingSpeaker { speaker, what, .. } => Error::MissingSpeaker {
                speaker,
                what,
                known: out.keys().cloned().collect::<Vec<_>>().join(", "),
            },
            e => e,
        })?;
        out.insert(speaker, stats);
    }
    Ok(out)
}

fn check(traj: &EmaTrajectory, stats: &SpeakerStats) -> Result<()> {
    if traj.channels() != stats.mean.len() || stats.std.len() != stats.mean.len() {
        return Err(Error::Layout(format!(
            "trajectory has {} channels, stats for {} have {}",
            traj.channels(),
            stats.speaker,
            stats.mean.len()
        )));
    }
    Ok(())
}

/// `(x − mean) / std` per channel.
pub fn normalize(traj: &EmaTrajectory, stats: &SpeakerStats) -> Result<EmaTrajectory> {
    check(traj, stats)?;
    if traj.stage() == Stage::Normalized {
        return Err(Error::Invariant("trajectory is already normalized".into()));
    }
    let mut v = traj.values().clone();
    for r in 0..v.rows() {
        for ((x, m), s) in v.row_mut(r).iter_mut().zip(&stats.mean).zip(&stats.std) {
            *x = (*x - m) / s;
        }
    }
    Ok(EmaTrajectory::with_stage(v, traj.rate(), Stage::Normalized))
}

/// Exact inverse of [`normalize`].
pub fn denormalize(traj: &EmaTrajectory, stats: &SpeakerStats) -> Result<EmaTrajectory> {
    check(traj, stats)?;
    let mut v = traj.values().clone();
    for r in 0..v.rows() {
        for ((x, m), s) in v.row_mut(r).iter_mut().zip(&stats.mean).zip(&stats.std) {
            *x = *x * s + m;
        }
    }
    Ok(EmaTrajectory::with_stage(v, traj.rate(), Stage::Features))
}

//! EMA trajectory data: channel layout, feature preparation, per-speaker
//! normalisation, dataset splits, on-disk formats and a synthetic corpus.

mod io;
mod oracle;
mod stats;
mod trajectory;

pub use io::{
    load_dataset, read_alignment, read_ema_csv, read_manifest, write_alignment, write_ema_csv,
    write_manifest, ManifestRow, SplitTag,
};
pub use oracle::{synth_oracle, OracleArticulator, OracleConfig};
pub use stats::{denormalize, fit_stats, normalize, SpeakerStats, STD_FLOOR};
pub use trajectory::{compute_velocities, ChannelLayout, EmaTrajectory, Stage};

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::lexicon::PhonemeSequence;
use crate::seed;

/// Frame rate of every corpus this toolkit handles.
pub const DEFAULT_RATE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub phonemes: PhonemeSequence,
    pub ema: EmaTrajectory,
    /// Half-open `[start, end)` frame interval per phoneme.
    pub alignment: Option<Vec<(usize, usize)>>,
}

impl Utterance {
    pub fn validate(&self) -> Result<()> {
        if let Some(al) = &self.alignment {
            if al.len() != self.phonemes.len() {
                return Err(Error::Invariant(format!(
                    "utterance {}: {} alignment intervals for {} phonemes",
                    self.id,
                    al.len(),
                    self.phonemes.len()
                )));
            }
            let mut prev_end = 0;
            for &(s, e) in al {
                if s < prev_end || e <= s || e > self.ema.frames() {
                    return Err(Error::Invariant(format!(
                        "utterance {}: alignment interval [{s}, {e}) out of order or range",
                        self.id
                    )));
                }
                prev_end = e;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub utterances: Vec<Utterance>,
}

impl Dataset {
    pub fn speakers(&self) -> Vec<String> {
        self.utterances
            .iter()
            .map(|u| u.speaker.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    pub fn select<'a>(&'a self, ids: &'a [String]) -> impl Iterator<Item = &'a Utterance> + 'a {
        ids.iter().filter_map(move |id| self.get(id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub fraction: f64,
}

impl DatasetSplit {
    /// Seeded per-speaker split: each speaker keeps `round(fraction · n)`
    /// utterances for training, and always at least one.
    pub fn new(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Param(format!("split fraction must be in (0, 1], got {fraction}")));
        }
        let mut rng = seed::rng(seed);
        let mut train = Vec::new();
        let mut validation = Vec::new();
        for speaker in dataset.speakers() {
            let mut ids: Vec<String> = dataset
                .utterances
                .iter()
                .filter(|u| u.speaker == speaker)
                .map(|u| u.id.clone())
                .collect();
            ids.sort();
            ids.shuffle(&mut rng);
            let n_train = ((fraction * ids.len() as f64).round() as usize).clamp(1, ids.len());
            let val = ids.split_off(n_train);
            train.extend(ids);
            validation.extend(val);
        }
        train.sort();
        validation.sort();
        Ok(DatasetSplit {
            train,
            validation,
            fraction,
        })
    }

    pub fn from_lists(train: Vec<String>, validation: Vec<String>) -> Result<Self> {
        let t: BTreeSet<_> = train.iter().collect();
        if validation.iter().any(|v| t.contains(v)) {
            return Err(Error::Param("train and validation overlap".into()));
        }
        let total = (train.len() + validation.len()).max(1);
        let fraction = train.len() as f64 / total as f64;
        Ok(DatasetSplit {
            train,
            validation,
            fraction,
        })
    }
}

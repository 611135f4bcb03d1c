//! Coarticulation measurement on generated trajectories: per-phoneme
//! representations, minimal-pair distances by offset from the trigger, a
//! far-distance baseline, rank-test significance, grouping by place of
//! articulation, and tract variables.

mod baseline;
mod extent;
mod repr;
mod resistance;
mod significance;
mod tract;

pub use baseline::baseline_distances;
pub use extent::{
    aggregate, extent_csv, extent_profile, offset_counts, pair_records, records_csv, ExtentProfile, OffsetStats,
    PairDistanceRecord, RecordSet,
};
pub use repr::{
    davg_from_centroids, mean_interphoneme_distance, pair_distance, phoneme_repr, representations, PhonemeRepr,
};
pub use resistance::{resistance_by_place, resistance_csv, PlaceStats};
pub use significance::{mann_whitney_greater, MannWhitney};
pub use tract::{raw_tract_variables, tract_variables, TractVariables};

use crate::error::{Error, Result};
use crate::p2a::Articulator;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Half-width, in frames, of the window averaged around each `μ`.
    pub tau: usize,
    pub max_offset: usize,
    pub baseline_samples: usize,
    /// Words sampled to estimate the mean inter-phoneme distance.
    pub davg_words: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    /// Speaker whose head generates every word; the first speaker if unset.
    pub speaker: Option<String>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            tau: 1,
            max_offset: 8,
            baseline_samples: 1000,
            davg_words: 2000,
            bootstrap_resamples: 1000,
            seed: 0,
            speaker: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_offset == 0 {
            return Err(Error::Param("max_offset must be at least 1".into()));
        }
        if self.bootstrap_resamples < 100 {
            return Err(Error::Param("bootstrap_resamples must be at least 100".into()));
        }
        Ok(())
    }

    pub fn speaker_for(&self, model: &impl Articulator) -> Result<String> {
        match &self.speaker {
            Some(s) => Ok(s.clone()),
            None => model
                .speakers()
                .into_iter()
                .next()
                .ok_or_else(|| Error::Param("model has no speakers".into())),
        }
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("tau".into(), self.tau.to_string()),
            ("max_offset".into(), self.max_offset.to_string()),
            ("baseline_samples".into(), self.baseline_samples.to_string()),
            ("davg_words".into(), self.davg_words.to_string()),
            ("bootstrap_resamples".into(), self.bootstrap_resamples.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("speaker".into(), self.speaker.clone().unwrap_or_default()),
        ]
    }
}

/// `d / D_avg × 100`.
pub fn normalized_pct(d: f64, d_avg: f64) -> Result<f64> {
    if !(d_avg > 0.0 && d_avg.is_finite()) {
        return Err(Error::DegenerateScale);
    }
    Ok(d / d_avg * 100.0)
}

//! Synthetic EMA corpus with known coarticulation.
//!
//! Every phoneme type has a fixed target per position channel. A phoneme's
//! realised value mixes in its neighbours' targets with weights that decay
//! geometrically with phonemic distance (factor 2 per `half_life`
//! positions), scaled by a per-place susceptibility multiplier of the
//! receiving phoneme. Each phoneme then holds its value for its duration,
//! a 3-tap box filter smooths the segment boundaries, and a per-speaker
//! affine map and Gaussian noise are applied.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{ChannelLayout, Dataset, EmaTrajectory, Utterance, DEFAULT_RATE};
use crate::error::{Error, Result};
use crate::lexicon::{Inventory, Phoneme, PhonemeSequence};
use crate::nn::Tensor2;
use crate::p2a::{Articulator, GenerationResult};
use crate::seed::{self, Rng};
use crate::timing::TimingParams;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub min_phonemes: usize,
    pub max_phonemes: usize,
    /// Phoneme durations in frames, drawn uniformly from this range.
    pub min_duration: usize,
    pub max_duration: usize,
    /// Positions over which a neighbour's influence halves.
    pub half_life: f64,
    /// Neighbour influence scale. The weight of a neighbour at distance `d`
    /// is `multiplier · mixing · rᵈ · (1 − r) / (1 + r)` with `r = 2^(−1/half_life)`;
    /// the phoneme's own target takes the remainder.
    pub mixing: f64,
    /// Standard deviation of additive noise, in position units.
    pub noise: f64,
    /// Susceptibility to neighbours by place of the receiving consonant,
    /// indexed like [`crate::lexicon::Place::ALL`]. Vowels and silence use 1.
    pub place_multipliers: [f64; 8],
    /// Half-width of the uniform spread of phoneme targets around each
    /// sensor's rest position.
    pub target_spread: f64,
    pub layout: ChannelLayout,
    pub rate: f64,
    /// Fixed phoneme duration used when acting as an [`Articulator`].
    pub analysis_duration: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            speakers: 8,
            utterances_per_speaker: 25,
            min_phonemes: 3,
            max_phonemes: 10,
            min_duration: 3,
            max_duration: 8,
            half_life: 1.0,
            mixing: 0.9,
            noise: 0.1,
            place_multipliers: [1.0; 8],
            target_spread: 8.0,
            layout: ChannelLayout::default(),
            rate: DEFAULT_RATE,
            analysis_duration: 3,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(format!("oracle config: {m}")));
        if self.speakers == 0 || self.utterances_per_speaker == 0 {
            return bad("speaker and utterance counts must be at least 1");
        }
        if self.min_phonemes == 0 || self.min_phonemes > self.max_phonemes {
            return bad("need 1 <= min_phonemes <= max_phonemes");
        }
        if self.min_duration == 0 || self.min_duration > self.max_duration || self.analysis_duration == 0 {
            return bad("durations must be at least 1 frame and min <= max");
        }
        if !(self.half_life > 0.0) || !(0.0..=1.0).contains(&self.mixing) || !(self.noise >= 0.0) {
            return bad("need half_life > 0, mixing in [0, 1], noise >= 0");
        }
        if self.place_multipliers.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return bad("place multipliers must be finite and non-negative");
        }
        if self.layout.sensors.is_empty() || !(self.rate > 0.0) {
            return bad("layout must have sensors and rate must be positive");
        }
        Ok(())
    }

    pub fn speaker_name(i: usize) -> String {
        format!("spk{i:02}")
    }

    pub fn speaker_names(&self) -> Vec<String> {
        (0..self.speakers).map(Self::speaker_name).collect()
    }
}

/// Rest position of a sensor, roughly in millimetres.
fn sensor_base(name: &str) -> (f64, f64) {
    match name {
        "TT" => (10.0, 0.0),
        "TB" => (-10.0, 5.0),
        "TD" => (-25.0, 0.0),
        "UL" => (25.0, 15.0),
        "LL" => (25.0, -15.0),
        "LI" => (20.0, -25.0),
        _ => (0.0, 0.0),
    }
}

/// The generator itself. Used both to synthesise corpora and, noise-free,
/// as a reference articulator for the analysis pipeline.
#[derive(Debug, Clone)]
pub struct OracleArticulator {
    config: OracleConfig,
    /// `40 × 2S`: target position per phoneme type.
    targets: Tensor2,
    speakers: Vec<String>,
    scale: Vec<Vec<f64>>,
    offset: Vec<Vec<f64>>,
}

impl OracleArticulator {
    pub fn new(config: OracleConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let p = config.layout.position_channels();
        let mut rng = seed::stream(seed, "oracle.targets");
        let mut targets = Tensor2::zeros(Inventory::SIZE, p);
        for ph in Inventory.phonemes() {
            for (s, name) in config.layout.sensors.iter().enumerate() {
                let (bx, by) = sensor_base(name);
                let (dx, dy) = if ph == Phoneme::SIL {
                    (0.0, 0.0)
                } else {
                    let w = config.target_spread;
                    (rng.random_range(-w..=w), rng.random_range(-w..=w))
                };
                targets.set(ph.index(), 2 * s, bx + dx);
                targets.set(ph.index(), 2 * s + 1, by + dy);
            }
        }
        let mut rng = seed::stream(seed, "oracle.speakers");
        let mut scale = Vec::new();
        let mut offset = Vec::new();
        for _ in 0..config.speakers {
            scale.push((0..p).map(|_| rng.random_range(0.8..=1.2)).collect());
            offset.push((0..p).map(|_| rng.random_range(-3.0..=3.0)).collect());
        }
        Ok(OracleArticulator {
            speakers: config.speaker_names(),
            config,
            targets,
            scale,
            offset,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    fn speaker_index(&self, speaker: &str) -> Result<usize> {
        self.speakers
            .iter()
            .position(|s| s == speaker)
            .ok_or_else(|| Error::MissingSpeaker {
                speaker: speaker.to_string(),
                what: "oracle speaker",
                known: self.speakers.join(", "),
            })
    }

    /// The speaker-transformed target of a phoneme type.
    pub fn target(&self, p: Phoneme, speaker: &str) -> Result<Vec<f64>> {
        let s = self.speaker_index(speaker)?;
        Ok(self
            .targets
            .row(p.index())
            .iter()
            .enumerate()
            .map(|(c, v)| v * self.scale[s][c] + self.offset[s][c])
            .collect())
    }

    fn susceptibility(&self, p: Phoneme) -> f64 {
        match p.place() {
            Some(place) => self.config.place_multipliers[place.index()],
            None => 1.0,
        }
    }

    /// Mixed value per phoneme, before speaker transform.
    fn mixed(&self, tokens: &[Phoneme]) -> Vec<Vec<f64>> {
        let r = 0.5f64.powf(1.0 / self.config.half_life);
        let z = (1.0 + r) / (1.0 - r);
        let n = tokens.len();
        (0..n)
            .map(|i| {
                let m = self.susceptibility(tokens[i]) * self.config.mixing / z;
                let mut w: Vec<f64> = (0..n)
                    .map(|j| if j == i { 0.0 } else { m * r.powi((i as i32 - j as i32).abs()) })
                    .collect();
                w[i] = (1.0 - w.iter().sum::<f64>()).max(0.0);
                let mut v = vec![0.0; self.targets.cols()];
                for (j, wj) in w.iter().enumerate() {
                    crate::nn::axpy(*wj, self.targets.row(tokens[j].index()), &mut v);
                }
                v
            })
            .collect()
    }

    /// Renders position frames; returns them with the alignment intervals.
    fn render(
        &self,
        tokens: &[Phoneme],
        durations: &[usize],
        speaker: usize,
        noise: Option<(&mut Rng, f64)>,
    ) -> Result<(Tensor2, Vec<(usize, usize)>)> {
        let values = self.mixed(tokens);
        let t: usize = durations.iter().sum();
        let p = self.targets.cols();
        let mut raw = Tensor2::zeros(t, p);
        let mut intervals = Vec::with_capacity(tokens.len());
        let mut start = 0;
        for (v, &d) in values.iter().zip(durations) {
            for k in start..start + d {
                raw.row_mut(k).copy_from_slice(v);
            }
            intervals.push((start, start + d));
            start += d;
        }
        let mut out = Tensor2::zeros(t, p);
        for k in 0..t {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(t - 1);
            let span = (hi - lo + 1) as f64;
            for c in 0..p {
                let mean = (lo..=hi).map(|j| raw.get(j, c)).sum::<f64>() / span;
                out.set(k, c, mean * self.scale[speaker][c] + self.offset[speaker][c]);
            }
        }
        if let Some((rng, sd)) = noise {
            if sd > 0.0 {
                let normal = Normal::new(0.0, sd).map_err(|e| Error::Param(e.to_string()))?;
                for v in out.data_mut() {
                    *v += normal.sample(rng);
                }
            }
        }
        Ok((out, intervals))
    }

    /// Noise-free positions with explicit per-phoneme durations.
    pub fn positions(
        &self,
        seq: &PhonemeSequence,
        durations: &[usize],
        speaker: &str,
    ) -> Result<(Tensor2, Vec<(usize, usize)>)> {
        if durations.len() != seq.len() || durations.contains(&0) {
            return Err(Error::Param(format!(
                "need {} positive durations, got {durations:?}",
                seq.len()
            )));
        }
        self.render(seq.tokens(), durations, self.speaker_index(speaker)?, None)
    }

    /// Timing matching the rendered segments: peak at each segment's centre
    /// frame, width half the duration.
    pub fn timing(durations: &[usize]) -> Result<TimingParams> {
        let mut mu = Vec::with_capacity(durations.len());
        let mut start = 0.0;
        for &d in durations {
            mu.push(start + (d as f64 - 1.0) / 2.0);
            start += d as f64;
        }
        TimingParams::new(
            mu,
            durations.iter().map(|&d| d as f64 / 2.0).collect(),
            durations.iter().map(|&d| d as f64).collect(),
        )
    }
}

impl Articulator for OracleArticulator {
    fn layout(&self) -> &ChannelLayout {
        &self.config.layout
    }

    fn speakers(&self) -> Vec<String> {
        self.speakers.clone()
    }

    fn generate(&self, seq: &PhonemeSequence, speaker: &str) -> Result<GenerationResult> {
        let durations = vec![self.config.analysis_duration; seq.len()];
        let (pos, _) = self.positions(seq, &durations, speaker)?;
        let ema = if pos.rows() >= 2 {
            EmaTrajectory::positions(pos, self.config.rate)?.with_velocities()?
        } else {
            EmaTrajectory::positions(pos, self.config.rate)?
        };
        Ok(GenerationResult {
            ema,
            timing: Self::timing(&durations)?,
            speaker: speaker.to_string(),
        })
    }
}

/// Random speech-phoneme utterances from every oracle speaker, with exact
/// alignments. Identical `(config, seed)` gives an identical dataset.
pub fn synth_oracle(config: &OracleConfig, seed: u64) -> Result<Dataset> {
    let art = OracleArticulator::new(config.clone(), seed)?;
    let speech: Vec<Phoneme> = Inventory.speech().collect();
    let mut utterances = Vec::with_capacity(config.speakers * config.utterances_per_speaker);
    for (s, speaker) in art.speakers.iter().enumerate() {
        let mut rng = seed::stream(seed, &format!("oracle.utterances.{speaker}"));
        for u in 0..config.utterances_per_speaker {
            let n = rng.random_range(config.min_phonemes..=config.max_phonemes);
            let tokens: Vec<Phoneme> = (0..n).map(|_| speech[rng.random_range(0..speech.len())]).collect();
            let durations: Vec<usize> = (0..n)
                .map(|_| rng.random_range(config.min_duration..=config.max_duration))
                .collect();
            let (pos, alignment) = art.render(&tokens, &durations, s, Some((&mut rng, config.noise)))?;
            let id = format!("{speaker}_u{u:03}");
            utterances.push(Utterance {
                phonemes: PhonemeSequence::new(tokens)?.with_word(id.clone()),
                id,
                speaker: speaker.clone(),
                ema: EmaTrajectory::positions(pos, config.rate)?,
                alignment: Some(alignment),
            });
        }
    }
    Ok(Dataset { utterances })
}

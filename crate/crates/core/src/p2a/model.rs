use std::collections::BTreeMap;

use rand::Rng;

use super::{Articulator, GenerationResult};
use crate::ema::{denormalize, ChannelLayout, EmaTrajectory, SpeakerStats, Stage, DEFAULT_RATE};
use crate::error::{Error, Result};
use crate::lexicon::{Inventory, PhonemeSequence};
use crate::nn::{
    init_uniform, prefixed, prefixed_mut, read_weight_file, write_weight_file, BiGruStack, Linear, ParamSet,
    StackTrace, Tensor2, WeightFile,
};
use crate::seed;
use crate::timing::{gaussian_expand, gaussian_expand_backward, EncoderTrace, InfluenceMatrix, TimingEncoder, TimingParams};

/// Generated values beyond this magnitude (normalised units) mean the model
/// has diverged.
pub const EXPLOSION_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    pub embedding: usize,
    pub layout: ChannelLayout,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 128,
            layers: 2,
            embedding: 64,
            layout: ChannelLayout::default(),
        }
    }
}

impl ModelConfig {
    pub fn channels(&self) -> usize {
        self.layout.feature_channels()
    }
}

/// Every learnable weight. Also serves as its own gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub timing: TimingEncoder,
    /// `40 × embedding`: row `i` is the embedding of inventory entry `i`.
    pub embedding: Tensor2,
    pub decoder: BiGruStack,
    pub head: Linear,
    pub speaker_heads: BTreeMap<String, Linear>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig, speakers: &[String]) -> Self {
        let s = config.channels();
        ModelParams {
            timing: TimingEncoder::zeros(config.hidden, config.layers),
            embedding: Tensor2::zeros(Inventory::SIZE, config.embedding),
            decoder: BiGruStack::zeros(config.embedding, config.hidden, config.layers),
            head: Linear::zeros(2 * config.hidden, s),
            speaker_heads: speakers.iter().map(|sp| (sp.clone(), Linear::zeros(s, s))).collect(),
        }
    }

    /// Uniform `±sqrt(1/fan_in)` weights and zero biases; speaker heads
    /// start as the identity.
    pub fn init(config: &ModelConfig, speakers: &[String], rng: &mut impl Rng) -> Self {
        let s = config.channels();
        let mut embedding = Tensor2::zeros(Inventory::SIZE, config.embedding);
        init_uniform(&mut embedding, rng);
        ModelParams {
            timing: TimingEncoder::init(config.hidden, config.layers, rng),
            embedding,
            decoder: BiGruStack::init(config.embedding, config.hidden, config.layers, rng),
            head: Linear::init(2 * config.hidden, s, rng),
            speaker_heads: speakers.iter().map(|sp| (sp.clone(), Linear::identity(s))).collect(),
        }
    }
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out: Vec<_> = prefixed("timing", self.timing.tensors()).collect();
        out.push(("embedding".into(), &self.embedding));
        out.extend(prefixed("decoder", self.decoder.tensors()));
        out.extend(prefixed("head", self.head.tensors()));
        for (sp, h) in &self.speaker_heads {
            out.extend(prefixed(&format!("speaker.{sp}"), h.tensors()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut out: Vec<_> = prefixed_mut("timing", self.timing.tensors_mut()).collect();
        out.push(("embedding".into(), &mut self.embedding));
        out.extend(prefixed_mut("decoder", self.decoder.tensors_mut()));
        out.extend(prefixed_mut("head", self.head.tensors_mut()));
        for (sp, h) in self.speaker_heads.iter_mut() {
            out.extend(prefixed_mut(&format!("speaker.{sp}"), h.tensors_mut()));
        }
        out
    }
}

/// Recorded forward pass of one utterance.
pub struct ForwardTrace {
    encoder: EncoderTrace,
    pub timing: TimingParams,
    influence: InfluenceMatrix,
    embedded: Tensor2,
    decoder_input: Tensor2,
    decoder: StackTrace,
    decoder_out: Tensor2,
    head_out: Tensor2,
    pub output: Tensor2,
}

impl ForwardTrace {
    /// Output of the shared head, before the speaker head.
    pub fn shared_output(&self) -> &Tensor2 {
        &self.head_out
    }
}

/// A model together with the normalisation statistics it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct P2aModel {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub stats: BTreeMap<String, SpeakerStats>,
}

impl P2aModel {
    pub fn new(config: ModelConfig, stats: BTreeMap<String, SpeakerStats>, seed: u64) -> Result<Self> {
        let s = config.channels();
        for st in stats.values() {
            if st.mean.len() != s {
                return Err(Error::Layout(format!(
                    "stats for {} have {} channels, model has {s}",
                    st.speaker,
                    st.mean.len()
                )));
            }
        }
        let speakers: Vec<String> = stats.keys().cloned().collect();
        let mut rng = seed::stream(seed, "init");
        let params = ModelParams::init(&config, &speakers, &mut rng);
        Ok(P2aModel { config, params, stats })
    }

    fn speaker_head(&self, speaker: &str) -> Result<&Linear> {
        self.params.speaker_heads.get(speaker).ok_or_else(|| Error::MissingSpeaker {
            speaker: speaker.to_string(),
            what: "speaker head",
            known: self.params.speaker_heads.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    /// Full forward pass. `frames` overrides the predicted length.
    pub fn forward(&self, seq: &PhonemeSequence, speaker: &str, frames: Option<usize>) -> Result<ForwardTrace> {
        let spk = self.speaker_head(speaker)?;
        let encoder = self.params.timing.forward_trace(seq)?;
        let timing = TimingParams::from_raw(&encoder.raw)?;
        let t = frames.unwrap_or(timing.total_frames);
        let influence = gaussian_expand(&timing, t)?;

        let e = self.config.embedding;
        let mut embedded = Tensor2::zeros(seq.len(), e);
        for (i, p) in seq.tokens().iter().enumerate() {
            embedded.row_mut(i).copy_from_slice(self.params.embedding.row(p.index()));
        }
        let mut decoder_input = Tensor2::zeros(t, e);
        for k in 0..t {
            let out = decoder_input.row_mut(k);
            for i in 0..seq.len() {
                crate::nn::axpy(influence.values.get(k, i), embedded.row(i), out);
            }
        }
        let (decoder_out, decoder) = self.params.decoder.forward_trace(&decoder_input)?;
        let head_out = self.params.head.forward(&decoder_out)?;
        let output = spk.forward(&head_out)?;
        Ok(ForwardTrace {
            encoder,
            timing,
            influence,
            embedded,
            decoder_input,
            decoder,
            decoder_out,
            head_out,
            output,
        })
    }

    /// Accumulates `∂L/∂params` into `grads` given `∂L/∂output` and
    /// `∂L/∂(Σ durations)`.
    pub fn backward(
        &self,
        seq: &PhonemeSequence,
        speaker: &str,
        trace: &ForwardTrace,
        d_output: &Tensor2,
        d_total: f64,
        grads: &mut ModelParams,
    ) -> Result<()> {
        let spk = self.speaker_head(speaker)?;
        let g_spk = grads
            .speaker_heads
            .get_mut(speaker)
            .ok_or_else(|| Error::Invariant(format!("gradient buffer lacks speaker {speaker}")))?;
        let d_head_out = spk.backward(&trace.head_out, d_output, g_spk);
        let d_dec_out = self.params.head.backward(&trace.decoder_out, &d_head_out, &mut grads.head);
        let d_input = self.params.decoder.backward(&trace.decoder, &d_dec_out, &mut grads.decoder);

        let t = trace.decoder_input.rows();
        let n = seq.len();
        let mut d_m = Tensor2::zeros(t, n);
        for k in 0..t {
            let dk = d_input.row(k);
            for i in 0..n {
                d_m.set(k, i, crate::nn::dot(dk, trace.embedded.row(i)));
                let w = trace.influence.values.get(k, i);
                let idx = seq.tokens()[i].index();
                crate::nn::axpy(w, dk, grads.embedding.row_mut(idx));
            }
        }
        let (d_mu, d_sigma) = gaussian_expand_backward(&trace.timing, &trace.influence, &d_m);
        let d_raw = TimingParams::backward_raw(&trace.encoder.raw, &d_mu, &d_sigma, d_total);
        self.params.timing.backward(&trace.encoder, &d_raw, &mut grads.timing);
        Ok(())
    }

    /// Serialises weights, statistics and configuration. `extra` is echoed
    /// into the header after the model's own keys.
    pub fn to_bytes(&self, extra: &[(String, String)]) -> Vec<u8> {
        let mut config = vec![
            ("hidden".to_string(), self.config.hidden.to_string()),
            ("layers".to_string(), self.config.layers.to_string()),
            ("embedding".to_string(), self.config.embedding.to_string()),
            ("sensors".to_string(), self.config.layout.sensors.join(",")),
            (
                "speakers".to_string(),
                self.params.speaker_heads.keys().cloned().collect::<Vec<_>>().join(","),
            ),
        ];
        config.extend(extra.iter().cloned());
        let mut arrays: Vec<(String, Tensor2)> = self
            .params
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("param.{n}"), t.clone()))
            .collect();
        for (sp, st) in &self.stats {
            let row = |v: &Vec<f64>| Tensor2::from_vec(1, v.len(), v.clone()).expect("row vector");
            arrays.push((format!("stats.{sp}.mean"), row(&st.mean)));
            arrays.push((format!("stats.{sp}.std"), row(&st.std)));
        }
        write_weight_file(&WeightFile { config, arrays })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, WeightFile)> {
        let file = read_weight_file(bytes)?;
        let get = |k: &str| {
            file.config_value(k)
                .ok_or_else(|| Error::Format(format!("weight file lacks `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("weight file `{k}` is not a count")))
        };
        let split = |v: &str| -> Vec<String> {
            v.split(',').filter(|s| !s.is_empty()).map(String::from).collect()
        };
        let config = ModelConfig {
            hidden: num("hidden")?,
            layers: num("layers")?,
            embedding: num("embedding")?,
            layout: ChannelLayout::new(split(get("sensors")?)),
        };
        let speakers = split(get("speakers")?);
        let mut params = ModelParams::zeros(&config, &speakers);
        for (name, t) in params.tensors_mut() {
            let stored = file
                .array(&format!("param.{name}"))
                .ok_or_else(|| Error::Format(format!("weight file lacks parameter `{name}`")))?;
            if stored.shape() != t.shape() {
                return Err(Error::Format(format!(
                    "parameter `{name}` is {:?}, expected {:?}",
                    stored.shape(),
                    t.shape()
                )));
            }
            *t = stored.clone();
        }
        let mut stats = BTreeMap::new();
        for sp in &speakers {
            let arr = |what: &str| {
                file.array(&format!("stats.{sp}.{what}"))
                    .map(|t| t.data().to_vec())
                    .ok_or_else(|| Error::Format(format!("weight file lacks {what} stats for {sp}")))
            };
            stats.insert(
                sp.clone(),
                SpeakerStats {
                    speaker: sp.clone(),
                    mean: arr("mean")?,
                    std: arr("std")?,
                },
            );
        }
        Ok((P2aModel { config, params, stats }, file))
    }
}

impl Articulator for P2aModel {
    fn layout(&self) -> &ChannelLayout {
        &self.config.layout
    }

    fn speakers(&self) -> Vec<String> {
        self.params.speaker_heads.keys().cloned().collect()
    }

    fn generate(&self, seq: &PhonemeSequence, speaker: &str) -> Result<GenerationResult> {
        let trace = self.forward(seq, speaker, None)?;
        if let Some(v) = trace.output.data().iter().find(|v| !(v.abs() < EXPLOSION_LIMIT)) {
            return Err(Error::Numeric(format!(
                "generated value {v} for `{seq}` exceeds ±{EXPLOSION_LIMIT}"
            )));
        }
        Ok(GenerationResult {
            ema: EmaTrajectory::new(trace.output, DEFAULT_RATE, Stage::Normalized)?,
            timing: trace.timing,
            speaker: speaker.to_string(),
        })
    }

    fn physical(&self, result: &GenerationResult) -> Result<EmaTrajectory> {
        let stats = self.stats.get(&result.speaker).ok_or_else(|| Error::MissingSpeaker {
            speaker: result.speaker.clone(),
            what: "normalisation stats",
            known: self.stats.keys().cloned().collect::<Vec<_>>().join(", "),
        })?;
        denormalize(&result.ema, stats)
    }
}

//! Run configuration: one TOML file plus `--set section.key=value`
//! overrides. Unset fields take the library defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use coartic::analysis::AnalysisConfig;
use coartic::ema::{ChannelLayout, OracleConfig};
use coartic::lexicon::Place;
use coartic::p2a::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every seeded operation.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataSection,
    pub lexicon: LexiconSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub analysis: AnalysisSection,
    pub oracle: OracleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data: DataSection::default(),
            lexicon: LexiconSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            analysis: AnalysisSection::default(),
            oracle: OracleSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Where `prepare` writes and `train`/`evaluate` read.
    pub cache: PathBuf,
    pub split_fraction: f64,
    pub sensors: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            manifest: None,
            cache: PathBuf::from("cache"),
            split_fraction: 0.8,
            sensors: ChannelLayout::default().sensors,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dict: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wordlist: Option<PathBuf>,
    pub top_n: usize,
}

impl Default for LexiconSection {
    fn default() -> Self {
        LexiconSection {
            dict: None,
            wordlist: None,
            top_n: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: usize,
    pub layers: usize,
    pub embedding: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            hidden: m.hidden,
            layers: m.layers,
            embedding: m.embedding,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub length_penalty: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            gamma: t.gamma,
            clip_norm: t.clip_norm,
            epochs: t.epochs,
            length_penalty: t.length_penalty,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub tau: usize,
    pub max_offset: usize,
    pub baseline_samples: usize,
    pub davg_words: usize,
    pub bootstrap_resamples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let a = AnalysisConfig::default();
        AnalysisSection {
            tau: a.tau,
            max_offset: a.max_offset,
            baseline_samples: a.baseline_samples,
            davg_words: a.davg_words,
            bootstrap_resamples: a.bootstrap_resamples,
            speaker: a.speaker,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub min_phonemes: usize,
    pub max_phonemes: usize,
    pub min_duration: usize,
    pub max_duration: usize,
    pub half_life: f64,
    pub mixing: f64,
    pub noise: f64,
    pub target_spread: f64,
    pub analysis_duration: usize,
    /// Place name to susceptibility; unlisted places use 1.
    pub place_multipliers: BTreeMap<String, f64>,
}

impl Default for OracleSection {
    fn default() -> Self {
        let o = OracleConfig::default();
        OracleSection {
            speakers: o.speakers,
            utterances_per_speaker: o.utterances_per_speaker,
            min_phonemes: o.min_phonemes,
            max_phonemes: o.max_phonemes,
            min_duration: o.min_duration,
            max_duration: o.max_duration,
            half_life: o.half_life,
            mixing: o.mixing,
            noise: o.noise,
            target_spread: o.target_spread,
            analysis_duration: o.analysis_duration,
            place_multipliers: BTreeMap::new(),
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` is malformed");
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{p}` is not a section"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.analysis_config().validate()?;
        self.oracle_config()?.validate()?;
        if self.data.sensors.is_empty() {
            bail!("data.sensors must name at least one sensor");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn layout(&self) -> ChannelLayout {
        ChannelLayout::new(self.data.sensors.clone())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.model.hidden,
            layers: self.model.layers,
            embedding: self.model.embedding,
            layout: self.layout(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            gamma: t.gamma,
            clip_norm: t.clip_norm,
            epochs: t.epochs,
            seed: self.seed,
            length_penalty: t.length_penalty,
        }
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        let a = &self.analysis;
        AnalysisConfig {
            tau: a.tau,
            max_offset: a.max_offset,
            baseline_samples: a.baseline_samples,
            davg_words: a.davg_words,
            bootstrap_resamples: a.bootstrap_resamples,
            seed: self.seed,
            speaker: a.speaker.clone(),
        }
    }

    pub fn oracle_config(&self) -> Result<OracleConfig> {
        let o = &self.oracle;
        let mut place_multipliers = [1.0; 8];
        for (name, m) in &o.place_multipliers {
            let place: Place = name
                .parse()
                .map_err(|_| anyhow!("oracle.place_multipliers: unknown place `{name}`"))?;
            place_multipliers[place.index()] = *m;
        }
        Ok(OracleConfig {
            speakers: o.speakers,
            utterances_per_speaker: o.utterances_per_speaker,
            min_phonemes: o.min_phonemes,
            max_phonemes: o.max_phonemes,
            min_duration: o.min_duration,
            max_duration: o.max_duration,
            half_life: o.half_life,
            mixing: o.mixing,
            noise: o.noise,
            place_multipliers,
            target_spread: o.target_spread,
            layout: self.layout(),
            analysis_duration: o.analysis_duration,
            ..OracleConfig::default()
        })
    }
}

/// A required path from the configuration, checked to exist.
pub fn existing(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    let p = path
        .as_ref()
        .ok_or_else(|| anyhow!("`{key}` is not set; add it to the config file or pass --set {key}=PATH"))?;
    if !p.exists() {
        bail!("`{key}` points to {}, which does not exist", p.display());
    }
    Ok(p.clone())
}

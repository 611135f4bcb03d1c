//! `coartic`: seeded batch pipelines from corpus preparation through
//! coarticulation analysis. Every command reads one TOML config (plus
//! `--set` overrides) and writes its outputs and a resolved-config echo
//! into a directory.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{Input, Source};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "coartic", version, about = "Phoneme-to-articulatory modelling and coarticulation analysis")]
struct Cli {
    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set train.epochs=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides `out_dir`).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    /// Root seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// Trained weight file.
    #[arg(short, long)]
    weights: Option<PathBuf>,

    /// Use the noise-free synthetic oracle instead of a trained model.
    #[arg(long)]
    oracle: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic oracle corpus (trajectories, alignments, manifest).
    Synth,
    /// Validate a corpus, fit speaker statistics and write the normalised cache.
    Prepare {
        /// Dataset manifest (overrides `data.manifest`).
        #[arg(short, long)]
        manifest: Option<PathBuf>,
    },
    /// Train a model on the prepared cache.
    Train,
    /// Generate a trajectory and timing for one phoneme string or word.
    Generate {
        #[command(flatten)]
        source: SourceArgs,
        /// Space-separated phoneme symbols, e.g. "P AE T".
        #[arg(short, long, conflicts_with = "word", required_unless_present = "word")]
        phonemes: Option<String>,
        /// A word looked up in `lexicon.dict`.
        #[arg(long)]
        word: Option<String>,
        #[arg(short, long)]
        speaker: Option<String>,
        /// Write position units instead of normalised features.
        #[arg(long)]
        physical: bool,
    },
    /// Score a model on the prepared validation split.
    Evaluate {
        #[command(flatten)]
        source: SourceArgs,
        /// Score the ground truth against itself.
        #[arg(long)]
        bypass: bool,
        /// Use the training split instead of validation.
        #[arg(long)]
        train_split: bool,
    },
    /// Enumerate minimal word pairs of the configured lexicon.
    Pairs,
    /// Measure how far phoneme changes spread, by offset.
    Extent {
        #[command(flatten)]
        source: SourceArgs,
        /// Pair list written by `pairs`.
        #[arg(short, long)]
        pairs: PathBuf,
    },
    /// Mean change of a consonant next to a trigger, by place of articulation.
    Resistance {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(short, long)]
        pairs: PathBuf,
    },
    /// Compare tract variables of two VCV sequences.
    DemoVcv {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value = "AH V IY")]
        a: String,
        #[arg(long, default_value = "AH V AH")]
        b: String,
        #[arg(short, long)]
        speaker: Option<String>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli.overrides.clone();
    if let Some(o) = &cli.out {
        overrides.push(format!("out_dir={}", toml::Value::String(o.display().to_string())));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Command::Prepare { manifest: Some(m) } = &cli.command {
        overrides.push(format!("data.manifest={}", toml::Value::String(m.display().to_string())));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let load = |s: &SourceArgs| Source::load(&cfg, s.weights.as_deref(), s.oracle);
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Prepare { .. } => commands::prepare(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Generate {
            source,
            phonemes,
            word,
            speaker,
            physical,
        } => {
            let input = match (phonemes, word) {
                (Some(p), _) => Input::Phonemes(p),
                (None, Some(w)) => Input::Word(w),
                (None, None) => unreachable!("clap requires one of them"),
            };
            commands::generate(&cfg, &load(&source)?, input, speaker.as_deref(), physical)
        }
        Command::Evaluate {
            source,
            bypass,
            train_split,
        } => commands::evaluate_cmd(&cfg, &load(&source)?, train_split, bypass),
        Command::Pairs => commands::pairs(&cfg),
        Command::Extent { source, pairs } => commands::extent(&cfg, &load(&source)?, &pairs),
        Command::Resistance { source, pairs } => commands::resistance(&cfg, &load(&source)?, &pairs),
        Command::DemoVcv { source, a, b, speaker } => commands::vcv(&cfg, &load(&source)?, &a, &b, speaker.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

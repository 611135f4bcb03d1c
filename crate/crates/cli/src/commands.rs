use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use coartic::analysis::{
    extent_csv, extent_profile, mean_interphoneme_distance, pair_records, records_csv, resistance_by_place,
    resistance_csv,
};
use coartic::ema::{
    fit_stats, load_dataset, read_ema_csv, synth_oracle, write_alignment, write_ema_csv, write_manifest,
    ChannelLayout, DatasetSplit, EmaTrajectory, ManifestRow, OracleArticulator, SpeakerStats, SplitTag, Stage,
};
use coartic::lexicon::{enumerate_minimal_pairs, parse_lexicon, read_pairs, write_pairs, Lexicon, PhonemeSequence};
use coartic::p2a::{
    demo_vcv, evaluate, metrics_csv, prepare_items, train_with, Articulator, GenerationResult, P2aModel, TrainItem,
};
use coartic::seed;
use log::info;

use crate::config::{existing, RunConfig};
use crate::output::Staged;

const RESOLVED: &str = "config.resolved.toml";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn echo(pairs: &[(String, String)]) {
    for (k, v) in pairs {
        info!("  {k} = {v}");
    }
}

fn finish(staged: Staged) -> Result<()> {
    for p in staged.commit()? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

/// Either a trained model or the noise-free oracle.
pub enum Source {
    Model(Box<P2aModel>),
    Oracle(OracleArticulator),
}

impl Source {
    pub fn load(cfg: &RunConfig, weights: Option<&Path>, oracle: bool) -> Result<Self> {
        match (weights, oracle) {
            (Some(_), true) => bail!("pass either --weights or --oracle, not both"),
            (None, false) => bail!("no articulator given; pass --weights FILE or --oracle"),
            (None, true) => Ok(Source::Oracle(OracleArticulator::new(cfg.oracle_config()?, cfg.seed)?)),
            (Some(w), false) => {
                let bytes = fs::read(w).with_context(|| format!("reading weights {}", w.display()))?;
                let (model, _) = P2aModel::from_bytes(&bytes).with_context(|| format!("loading weights {}", w.display()))?;
                Ok(Source::Model(Box::new(model)))
            }
        }
    }
}

impl Articulator for Source {
    fn layout(&self) -> &ChannelLayout {
        match self {
            Source::Model(m) => m.layout(),
            Source::Oracle(o) => o.layout(),
        }
    }

    fn speakers(&self) -> Vec<String> {
        match self {
            Source::Model(m) => m.speakers(),
            Source::Oracle(o) => o.speakers(),
        }
    }

    fn generate(&self, seq: &PhonemeSequence, speaker: &str) -> coartic::Result<GenerationResult> {
        match self {
            Source::Model(m) => m.generate(seq, speaker),
            Source::Oracle(o) => o.generate(seq, speaker),
        }
    }

    fn physical(&self, result: &GenerationResult) -> coartic::Result<EmaTrajectory> {
        match self {
            Source::Model(m) => m.physical(result),
            Source::Oracle(o) => o.physical(result),
        }
    }
}

fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon> {
    let dict = existing(&cfg.lexicon.dict, "lexicon.dict")?;
    let words = existing(&cfg.lexicon.wordlist, "lexicon.wordlist")?;
    let lex = parse_lexicon(&read_text(&dict)?, &read_text(&words)?, cfg.lexicon.top_n)?;
    info!("lexicon: {} words", lex.len());
    Ok(lex)
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let oracle = cfg.oracle_config()?;
    let ds = synth_oracle(&oracle, cfg.seed)?;
    let names = oracle.layout.position_names();
    let mut out = Staged::new(&cfg.out_dir)?;
    let mut rows = Vec::new();
    for u in &ds.utterances {
        let traj = format!("traj/{}.csv", u.id);
        let align = format!("align/{}.csv", u.id);
        out.write(&traj, write_ema_csv(&u.ema, &names)?)?;
        if let Some(al) = &u.alignment {
            out.write(&align, write_alignment(al, &u.phonemes, u.ema.rate()))?;
        }
        rows.push(ManifestRow {
            id: u.id.clone(),
            speaker: u.speaker.clone(),
            trajectory: PathBuf::from(traj),
            alignment: u.alignment.as_ref().map(|_| PathBuf::from(align)),
            phonemes: u.phonemes.to_string(),
            split: SplitTag::Auto,
        });
    }
    out.write("manifest.tsv", write_manifest(&rows))?;
    out.write(RESOLVED, cfg.to_toml())?;
    info!("{} utterances from {} speakers", ds.utterances.len(), oracle.speakers);
    finish(out)
}

fn stats_csv(stats: &BTreeMap<String, SpeakerStats>, names: &[String]) -> String {
    let mut out = String::from("speaker,channel,mean,std\n");
    for (sp, st) in stats {
        for ((n, m), s) in names.iter().zip(&st.mean).zip(&st.std) {
            writeln!(out, "{sp},{n},{m},{s}").unwrap();
        }
    }
    out
}

fn read_stats_csv(text: &str, path: &Path, names: &[String]) -> Result<BTreeMap<String, SpeakerStats>> {
    let mut out: BTreeMap<String, SpeakerStats> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || anyhow!("{}:{}: malformed statistics row", path.display(), i + 1);
        if f.len() != 4 {
            return Err(bad());
        }
        let st = out.entry(f[0].to_string()).or_insert_with(|| SpeakerStats {
            speaker: f[0].to_string(),
            mean: Vec::new(),
            std: Vec::new(),
        });
        if names.get(st.mean.len()).map(String::as_str) != Some(f[1]) {
            bail!("{}:{}: channel `{}` out of order for the configured layout", path.display(), i + 1, f[1]);
        }
        st.mean.push(f[2].parse().map_err(|_| bad())?);
        st.std.push(f[3].parse().map_err(|_| bad())?);
    }
    for st in out.values() {
        if st.mean.len() != names.len() {
            bail!("{}: speaker {} has {} channels, expected {}", path.display(), st.speaker, st.mean.len(), names.len());
        }
    }
    Ok(out)
}

pub fn prepare(cfg: &RunConfig) -> Result<()> {
    let manifest = existing(&cfg.data.manifest, "data.manifest")?;
    let layout = cfg.layout();
    let (ds, rows) = load_dataset(&manifest, &layout)?;
    let tagged = rows.iter().filter(|r| r.split != SplitTag::Auto).count();
    let split = if tagged == 0 {
        DatasetSplit::new(&ds, cfg.data.split_fraction, seed::substream(cfg.seed, "split"))?
    } else if tagged == rows.len() {
        let pick = |t: SplitTag| rows.iter().filter(|r| r.split == t).map(|r| r.id.clone()).collect();
        DatasetSplit::from_lists(pick(SplitTag::Train), pick(SplitTag::Validation))?
    } else {
        bail!("{}: either every row or no row must name its split", manifest.display());
    };
    info!(
        "{} utterances: {} train, {} validation",
        ds.utterances.len(),
        split.train.len(),
        split.validation.len()
    );
    let stats = fit_stats(&ds, &split)?;
    let names = layout.feature_names();
    let mut out = Staged::new(&cfg.data.cache)?;
    let mut index = String::from("id\tspeaker\tsplit\tphonemes\n");
    for (tag, ids) in [("train", &split.train), ("val", &split.validation)] {
        for item in prepare_items(&ds, ids, &stats)? {
            let rate = ds.get(&item.id).map_or(coartic::ema::DEFAULT_RATE, |u| u.ema.rate());
            let traj = EmaTrajectory::new(item.target.clone(), rate, Stage::Normalized)?;
            out.write(&format!("items/{}.csv", item.id), write_ema_csv(&traj, &names)?)?;
            writeln!(index, "{}\t{}\t{tag}\t{}", item.id, item.speaker, item.phonemes).unwrap();
        }
    }
    out.write("split.tsv", index)?;
    out.write("stats.csv", stats_csv(&stats, &names))?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

pub struct Cache {
    pub stats: BTreeMap<String, SpeakerStats>,
    pub train: Vec<TrainItem>,
    pub validation: Vec<TrainItem>,
}

pub fn load_cache(cfg: &RunConfig) -> Result<Cache> {
    let dir = &cfg.data.cache;
    let index_path = dir.join("split.tsv");
    if !index_path.exists() {
        bail!(
            "no prepared data cache at {}; run `coartic prepare` first (or set data.cache)",
            dir.display()
        );
    }
    let names = cfg.layout().feature_names();
    let stats_path = dir.join("stats.csv");
    let stats = read_stats_csv(&read_text(&stats_path)?, &stats_path, &names)?;
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (i, line) in read_text(&index_path)?.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            bail!("{}:{}: expected 4 tab-separated fields", index_path.display(), i + 1);
        }
        let item_path = dir.join("items").join(format!("{}.csv", f[0]));
        let (cols, target, _) = read_ema_csv(&read_text(&item_path)?, &item_path)?;
        if cols != names {
            bail!("{}: channels do not match the configured layout", item_path.display());
        }
        let item = TrainItem {
            id: f[0].to_string(),
            speaker: f[1].to_string(),
            phonemes: PhonemeSequence::parse(f[3])
                .with_context(|| format!("{}:{}", index_path.display(), i + 1))?
                .with_word(f[0]),
            target,
        };
        match f[2] {
            "train" => train.push(item),
            "val" => validation.push(item),
            other => bail!("{}:{}: unknown split `{other}`", index_path.display(), i + 1),
        }
    }
    Ok(Cache {
        stats,
        train,
        validation,
    })
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let tc = cfg.train_config();
    let mc = cfg.model_config();
    info!("training configuration:");
    echo(&tc.echo());
    echo(&[
        ("hidden".into(), mc.hidden.to_string()),
        ("layers".into(), mc.layers.to_string()),
        ("embedding".into(), mc.embedding.to_string()),
    ]);
    let cache = load_cache(cfg)?;
    info!("{} training and {} validation items", cache.train.len(), cache.validation.len());
    let mut model = P2aModel::new(mc, cache.stats, cfg.seed)?;
    let history = train_with(&mut model, &cache.train, &cache.validation, &tc, |_, _| true)?;
    let mut out = Staged::new(&cfg.out_dir)?;
    out.write("weights.bin", model.to_bytes(&tc.echo()))?;
    out.write("history.csv", history.to_csv())?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

pub enum Input {
    Phonemes(String),
    Word(String),
}

fn resolve_speaker(source: &impl Articulator, requested: Option<&str>) -> Result<String> {
    let known = source.speakers();
    match requested {
        None => known.first().cloned().ok_or_else(|| anyhow!("articulator has no speakers")),
        Some(s) if known.iter().any(|k| k == s) => Ok(s.to_string()),
        Some(s) => bail!("unknown speaker `{s}`; known speakers: {}", known.join(", ")),
    }
}

pub fn generate(cfg: &RunConfig, source: &Source, input: Input, speaker: Option<&str>, physical: bool) -> Result<()> {
    let seq = match input {
        Input::Phonemes(p) => PhonemeSequence::parse(&p)?,
        Input::Word(w) => {
            let dict = existing(&cfg.lexicon.dict, "lexicon.dict")?;
            let lex = parse_lexicon(&read_text(&dict)?, &w, 1)
                .map_err(|_| anyhow!("word `{w}` has no usable entry in {}", dict.display()))?;
            lex.entries()[0].seq.clone()
        }
    };
    let speaker = resolve_speaker(source, speaker)?;
    let g = source.generate(&seq, &speaker)?;
    let layout = source.layout();
    let (traj, names) = if physical {
        (source.physical(&g)?, layout.feature_names())
    } else {
        (g.ema.clone(), layout.feature_names())
    };
    let names = &names[..traj.channels()];
    info!("{} phonemes, {} frames, speaker {speaker}", seq.len(), traj.frames());
    let mut out = Staged::new(&cfg.out_dir)?;
    out.write("ema.csv", write_ema_csv(&traj, names)?)?;
    out.write("timing.csv", g.timing.to_csv(&seq)?)?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

pub fn evaluate_cmd(cfg: &RunConfig, source: &Source, on_train: bool, bypass: bool) -> Result<()> {
    let cache = load_cache(cfg)?;
    let items = if on_train { &cache.train } else { &cache.validation };
    if items.is_empty() {
        bail!("the selected split is empty");
    }
    let fits = evaluate(source, items, bypass)?;
    let (csv, s) = metrics_csv(&fits, cfg.analysis.bootstrap_resamples, seed::substream(cfg.seed, "evaluate"))?;
    info!(
        "PCC {:.3} [{:.3}, {:.3}], RMSE {:.3} [{:.3}, {:.3}] over {} utterances",
        s.pcc,
        s.pcc_ci.0,
        s.pcc_ci.1,
        s.rmse,
        s.rmse_ci.0,
        s.rmse_ci.1,
        fits.len()
    );
    let mut out = Staged::new(&cfg.out_dir)?;
    out.write("metrics.csv", csv)?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

pub fn pairs(cfg: &RunConfig) -> Result<()> {
    let lex = load_lexicon(cfg)?;
    let pairs = enumerate_minimal_pairs(&lex);
    info!("{} minimal pairs", pairs.len());
    let mut out = Staged::new(&cfg.out_dir)?;
    out.write("pairs.tsv", write_pairs(&pairs))?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

fn load_pairs(path: &Path) -> Result<Vec<coartic::lexicon::MinimalPair>> {
    read_pairs(&read_text(path)?).with_context(|| format!("reading pairs {}", path.display()))
}

pub fn extent(cfg: &RunConfig, source: &Source, pairs_path: &Path) -> Result<()> {
    let pairs = load_pairs(pairs_path)?;
    let lex = load_lexicon(cfg)?;
    let ac = cfg.analysis_config();
    info!("analysis configuration:");
    echo(&ac.echo());
    let d_avg = mean_interphoneme_distance(source, &lex, &ac)?;
    info!("mean inter-phoneme distance {d_avg:.4}");
    let (profile, recs) = extent_profile(source, &pairs, &lex, &ac, d_avg)?;
    if !recs.skipped.is_empty() {
        info!("{} pairs skipped", recs.skipped.len());
    }
    for s in &profile.pooled {
        info!("|offset| {}: {:.2}% (n = {})", s.label.trim_start_matches("abs:"), s.mean_pct, s.n);
    }
    let mut out = Staged::new(&cfg.out_dir)?;
    out.write("extent.csv", extent_csv(&profile))?;
    out.write("records.csv", records_csv(&recs.records))?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

pub fn resistance(cfg: &RunConfig, source: &Source, pairs_path: &Path) -> Result<()> {
    let pairs = load_pairs(pairs_path)?;
    let lex = load_lexicon(cfg)?;
    let ac = cfg.analysis_config();
    let d_avg = mean_interphoneme_distance(source, &lex, &ac)?;
    let recs = pair_records(source, &pairs, &ac, d_avg)?;
    let stats = resistance_by_place(&recs.records, &ac)?;
    for s in stats.iter().filter(|s| s.n > 0) {
        info!("{}: {:.2}% (n = {})", s.place, s.mean_pct, s.n);
    }
    let mut out = Staged::new(&cfg.out_dir)?;
    out.write("resistance.csv", resistance_csv(&stats))?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

pub fn vcv(cfg: &RunConfig, source: &Source, a: &str, b: &str, speaker: Option<&str>) -> Result<()> {
    let (sa, sb) = (PhonemeSequence::parse(a)?, PhonemeSequence::parse(b)?);
    let speaker = resolve_speaker(source, speaker)?;
    let demo = demo_vcv(source, &sa, &sb, &speaker)?;
    match demo.onset(0.1) {
        Some(k) => info!("divergence onset at frame {k}"),
        None => info!("the two sequences do not diverge"),
    }
    let mut out = Staged::new(&cfg.out_dir)?;
    out.write("vcv.csv", demo.to_csv())?;
    out.write("timing_a.csv", demo.a.timing.to_csv(&sa)?)?;
    out.write("timing_b.csv", demo.b.timing.to_csv(&sb)?)?;
    out.write(RESOLVED, cfg.to_toml())?;
    finish(out)
}

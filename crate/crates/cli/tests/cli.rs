use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coartic"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(out.status.success(), "{args:?} failed:\n{stderr}");
    stderr
}

fn fail(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// A small oracle corpus with a config that points at it and at the pinned
/// lexicon.
fn workspace(extra: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = data_dir();
    fs::write(
        dir.path().join("run.toml"),
        format!(
            r#"seed = 5
[data]
manifest = "corpus/manifest.tsv"
cache = "cache"
[lexicon]
dict = "{}"
wordlist = "{}"
top_n = 300
[oracle]
speakers = 2
utterances_per_speaker = 6
[model]
hidden = 8
[train]
epochs = 2
batch_size = 4
[analysis]
baseline_samples = 100
davg_words = 100
bootstrap_resamples = 200
{extra}
"#,
            d.join("cmudict-top10k.dict").display(),
            d.join("google-10000-english.txt").display()
        ),
    )
    .unwrap();
    ok(dir.path(), &["-c", "run.toml", "-o", "corpus", "synth"]);
    dir
}

fn prepared(extra: &str) -> TempDir {
    let dir = workspace(extra);
    ok(dir.path(), &["-c", "run.toml", "prepare"]);
    dir
}

fn trained() -> TempDir {
    let dir = prepared("");
    ok(dir.path(), &["-c", "run.toml", "-o", "model", "train"]);
    dir
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn prepare_standardises_training_channels() {
    let dir = prepared("");
    let p = dir.path();
    let index = String::from_utf8(read(p.join("cache/split.tsv"))).unwrap();
    let mut per_speaker: std::collections::BTreeMap<String, Vec<Vec<f64>>> = Default::default();
    for line in index.lines().skip(1).filter(|l| l.split('\t').nth(2) == Some("train")) {
        let f: Vec<&str> = line.split('\t').collect();
        let text = String::from_utf8(read(p.join(format!("cache/items/{}.csv", f[0])))).unwrap();
        per_speaker.entry(f[1].into()).or_default().extend(csv_rows(&text));
    }
    assert_eq!(per_speaker.len(), 2);
    for rows in per_speaker.values() {
        for c in 0..rows[0].len() {
            let mean = rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
            assert!(mean.abs() < 1e-6, "channel {c} mean {mean}");
        }
    }
}

#[test]
fn prepare_is_byte_identical_on_rerun() {
    let dir = prepared("");
    let p = dir.path();
    let first: Vec<(PathBuf, Vec<u8>)> = walk(&p.join("cache"));
    ok(p, &["-c", "run.toml", "prepare"]);
    let second = walk(&p.join("cache"));
    assert!(first.len() > 10);
    assert_eq!(first, second);
}

fn walk(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), read(&path)));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn corrupt_row_names_file_and_line() {
    let dir = workspace("");
    let p = dir.path();
    let target = p.join("corpus/traj/spk01_u002.csv");
    let text = String::from_utf8(read(&target)).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen(',', ",x", 2);
    fs::write(&target, lines.join("\n")).unwrap();
    let err = fail(p, &["-c", "run.toml", "prepare"]);
    assert!(err.contains("spk01_u002.csv:4"), "{err}");
    assert!(!p.join("cache/split.tsv").exists());
}

#[test]
fn train_echoes_default_hyperparameters() {
    let dir = prepared("");
    let p = dir.path();
    fs::write(p.join("defaults.toml"), "[data]\ncache = \"cache\"\n[train]\nepochs = 1\n").unwrap();
    let log = ok(p, &["-c", "defaults.toml", "-o", "model", "train"]);
    for want in [
        "learning_rate = 0.0004",
        "batch_size = 64",
        "gamma = 1",
        "clip_norm = 10",
        "hidden = 128",
        "layers = 2",
    ] {
        assert!(log.contains(want), "missing `{want}` in:\n{log}");
    }
    let resolved = String::from_utf8(read(p.join("model/config.resolved.toml"))).unwrap();
    assert!(resolved.contains("learning_rate = 0.0004"));
}

#[test]
fn train_without_cache_points_at_prepare() {
    let dir = workspace("");
    let err = fail(dir.path(), &["-c", "run.toml", "-o", "model", "train"]);
    assert!(err.contains("coartic prepare"), "{err}");
}

#[test]
fn training_is_reproducible() {
    let dir = trained();
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "model2", "train"]);
    assert_eq!(read(p.join("model/weights.bin")), read(p.join("model2/weights.bin")));
    assert_eq!(read(p.join("model/history.csv")), read(p.join("model2/history.csv")));
    ok(p, &["-c", "run.toml", "--seed", "6", "-o", "model3", "train"]);
    assert_ne!(read(p.join("model/weights.bin")), read(p.join("model3/weights.bin")));
}

#[test]
fn generate_word_gives_three_timing_rows() {
    let dir = trained();
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "gen", "generate", "-w", "model/weights.bin", "--word", "pat"]);
    let timing = String::from_utf8(read(p.join("gen/timing.csv"))).unwrap();
    let rows: Vec<&str> = timing.lines().collect();
    assert_eq!(rows[0], "phoneme,mu_frames,sigma_frames");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("P,") && rows[2].starts_with("AE,") && rows[3].starts_with("T,"));
    ok(p, &["-c", "run.toml", "-o", "gen2", "generate", "-w", "model/weights.bin", "-p", "P AE T"]);
    assert_eq!(read(p.join("gen/ema.csv")), read(p.join("gen2/ema.csv")));
    assert_eq!(read(p.join("gen/timing.csv")), read(p.join("gen2/timing.csv")));
}

#[test]
fn generate_physical_differs_from_normalised() {
    let dir = trained();
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "n", "generate", "-w", "model/weights.bin", "-p", "S AA"]);
    ok(p, &["-c", "run.toml", "-o", "f", "generate", "-w", "model/weights.bin", "-p", "S AA", "--physical"]);
    let n = String::from_utf8(read(p.join("n/ema.csv"))).unwrap();
    let f = String::from_utf8(read(p.join("f/ema.csv"))).unwrap();
    assert_eq!(n.lines().next(), f.lines().next());
    assert_ne!(n, f);
}

#[test]
fn generate_unknown_speaker_lists_known() {
    let dir = trained();
    let err = fail(
        dir.path(),
        &["-c", "run.toml", "-o", "gen", "generate", "-w", "model/weights.bin", "-p", "P AE T", "-s", "nobody"],
    );
    assert!(err.contains("nobody") && err.contains("spk00") && err.contains("spk01"), "{err}");
}

#[test]
fn evaluate_bypass_is_perfect() {
    let dir = trained();
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "ev", "evaluate", "-w", "model/weights.bin", "--bypass"]);
    let text = String::from_utf8(read(p.join("ev/metrics.csv"))).unwrap();
    assert_eq!(text.lines().next(), Some("utterance_id,pcc,rmse"));
    let mean: Vec<&str> = text.lines().find(|l| l.starts_with("mean,")).unwrap().split(',').collect();
    assert!((mean[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!(mean[2].parse::<f64>().unwrap().abs() < 1e-12);
}

#[test]
fn evaluate_is_seeded() {
    let dir = trained();
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "a", "evaluate", "-w", "model/weights.bin", "--train-split"]);
    ok(p, &["-c", "run.toml", "-o", "b", "evaluate", "-w", "model/weights.bin", "--train-split"]);
    assert_eq!(read(p.join("a/metrics.csv")), read(p.join("b/metrics.csv")));
}

fn tiny_pairs_config(dir: &Path, words: &str) {
    let f = fixtures();
    fs::write(
        dir.join("tiny.toml"),
        format!(
            "[lexicon]\ndict = \"{}\"\nwordlist = \"{}\"\n",
            f.join("tiny.dict").display(),
            f.join(words).display()
        ),
    )
    .unwrap();
}

#[test]
fn pairs_match_checked_in_fixture() {
    let dir = tempfile::tempdir().unwrap();
    tiny_pairs_config(dir.path(), "tiny.words");
    ok(dir.path(), &["-c", "tiny.toml", "-o", "out", "pairs"]);
    assert_eq!(
        String::from_utf8(read(dir.path().join("out/pairs.tsv"))).unwrap(),
        String::from_utf8(read(fixtures().join("tiny_pairs.tsv"))).unwrap()
    );
}

#[test]
fn pairs_empty_lexicon_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("none.words"), "the\nof\n").unwrap();
    let f = fixtures();
    fs::write(
        dir.path().join("tiny.toml"),
        format!(
            "[lexicon]\ndict = \"{}\"\nwordlist = \"none.words\"\n",
            f.join("tiny.dict").display()
        ),
    )
    .unwrap();
    let err = fail(dir.path(), &["-c", "tiny.toml", "-o", "out", "pairs"]);
    assert!(err.contains("empty lexicon"), "{err}");
    assert!(!dir.path().join("out/pairs.tsv").exists());
}

#[test]
fn pinned_pair_count_near_published() {
    let dir = workspace("");
    let p = dir.path();
    ok(p, &["-c", "run.toml", "--set", "lexicon.top_n=10000", "-o", "pairs", "pairs"]);
    let first = read(p.join("pairs/pairs.tsv"));
    ok(p, &["-c", "run.toml", "--set", "lexicon.top_n=10000", "-o", "pairs2", "pairs"]);
    assert_eq!(first, read(p.join("pairs2/pairs.tsv")));
    let n = first.iter().filter(|b| **b == b'\n').count() as f64;
    assert!((n - 9291.0).abs() / 9291.0 <= 0.05, "{n} pairs");
}

#[test]
fn oracle_analysis_end_to_end() {
    let dir = workspace("");
    let p = dir.path();
    let start = Instant::now();
    let full = ["-c", "run.toml", "--set", "lexicon.top_n=10000", "--set", "analysis.baseline_samples=1000"];
    ok(p, &[&full[..], &["-o", "pairs", "pairs"]].concat());
    ok(p, &[&full[..], &["-o", "ext", "extent", "--oracle", "-p", "pairs/pairs.tsv"]].concat());
    ok(p, &[&full[..], &["-o", "res", "resistance", "--oracle", "-p", "pairs/pairs.tsv"]].concat());
    assert!(start.elapsed().as_secs() < 600);
    let extent = String::from_utf8(read(p.join("ext/extent.csv"))).unwrap();
    assert_eq!(extent.lines().next(), Some("offset,n,mean_pct,std_pct,q1,median,q3,p_value"));
    assert!(extent.lines().any(|l| l.starts_with("abs:1,")));
    assert!(extent.lines().last().unwrap().starts_with("baseline,"));
    let res = String::from_utf8(read(p.join("res/resistance.csv"))).unwrap();
    assert_eq!(res.lines().count(), 9);

    ok(p, &[&full[..], &["-o", "ext2", "extent", "--oracle", "-p", "pairs/pairs.tsv"]].concat());
    assert_eq!(read(p.join("ext/extent.csv")), read(p.join("ext2/extent.csv")));
    assert_eq!(read(p.join("ext/records.csv")), read(p.join("ext2/records.csv")));
}

#[test]
fn model_analysis_is_reproducible() {
    let dir = trained();
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "pairs", "pairs"]);
    for out in ["r1", "r2"] {
        ok(p, &["-c", "run.toml", "-o", out, "resistance", "-w", "model/weights.bin", "-p", "pairs/pairs.tsv"]);
    }
    assert_eq!(read(p.join("r1/resistance.csv")), read(p.join("r2/resistance.csv")));
}

#[test]
fn missing_weights_fail() {
    let dir = workspace("");
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "pairs", "pairs"]);
    let err = fail(p, &["-c", "run.toml", "-o", "ext", "extent", "-w", "nope.bin", "-p", "pairs/pairs.tsv"]);
    assert!(err.contains("nope.bin"), "{err}");
    assert!(!p.join("ext/extent.csv").exists());
    let err = fail(p, &["-c", "run.toml", "-o", "ext", "extent", "-p", "pairs/pairs.tsv"]);
    assert!(err.contains("--weights"), "{err}");
}

#[test]
fn demo_vcv_writes_tract_variables() {
    let dir = workspace("[oracle.place_multipliers]\nbilabial = 1.0\n");
    let p = dir.path();
    ok(p, &["-c", "run.toml", "-o", "v", "demo-vcv", "--oracle", "--set", "oracle.analysis_duration=6"]);
    let text = String::from_utf8(read(p.join("v/vcv.csv"))).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("frame,LA_a,LP_a,TTCL_a,TBCL_a,LA_b,LP_b,TTCL_b,TBCL_b,divergence")
    );
    assert_eq!(text.lines().count(), 19);
}

#[test]
fn bad_overrides_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = fail(dir.path(), &["--set", "train.lr=1", "pairs"]);
    assert!(err.contains("lr"), "{err}");
    let err = fail(dir.path(), &["-o", "out", "pairs"]);
    assert!(err.contains("lexicon.dict"), "{err}");
}

//! Text formats: EMA-CSV trajectories, alignment CSVs and the dataset
//! manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{ChannelLayout, Dataset, EmaTrajectory, Utterance, DEFAULT_RATE};
use crate::error::{Error, Result};
use crate::lexicon::PhonemeSequence;
use crate::nn::Tensor2;

fn file_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::FileParse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses an EMA-CSV file: a `time_s,<channel>,...` header and one frame per
/// row. Returns the channel names, the values and the frame rate implied by
/// the time column (100 Hz when there is a single frame).
pub fn read_ema_csv(text: &str, path: &Path) -> Result<(Vec<String>, Tensor2, f64)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| file_err(path, 1, "empty file"))?;
    let mut cols = header.split(',').map(str::trim);
    if cols.next() != Some("time_s") {
        return Err(file_err(path, 1, "header must start with `time_s`"));
    }
    let names: Vec<String> = cols.map(String::from).collect();
    if names.is_empty() {
        return Err(file_err(path, 1, "no channels in header"));
    }
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() + 1 {
            return Err(file_err(
                path,
                i + 1,
                format!("expected {} fields, found {}", names.len() + 1, fields.len()),
            ));
        }
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| file_err(path, i + 1, format!("bad number `{f}`")))?;
            if !v.is_finite() {
                return Err(file_err(path, i + 1, format!("non-finite value `{f}`")));
            }
            if k == 0 {
                times.push(v);
            } else {
                data.push(v);
            }
        }
    }
    if times.is_empty() {
        return Err(file_err(path, 2, "no frames"));
    }
    let rate = if times.len() >= 2 {
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(file_err(path, 2, "time column is not increasing"));
        }
        // Snap to a whole number of frames per second.
        (1.0 / dt).round()
    } else {
        DEFAULT_RATE
    };
    let values = Tensor2::from_vec(times.len(), names.len(), data)?;
    Ok((names, values, rate))
}

pub fn write_ema_csv(traj: &EmaTrajectory, names: &[String]) -> Result<String> {
    if names.len() != traj.channels() {
        return Err(Error::Layout(format!(
            "{} channel names for {} channels",
            names.len(),
            traj.channels()
        )));
    }
    let mut out = String::from("time_s");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (j, row) in traj.values().iter_rows().enumerate() {
        write!(out, "{}", j as f64 / traj.rate()).unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reads `start_s,end_s,phoneme` rows into half-open frame intervals.
pub fn read_alignment(text: &str, path: &Path, rate: f64) -> Result<Vec<(usize, usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("start_s")) {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(file_err(path, i + 1, "expected `start_s,end_s,phoneme`"));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| file_err(path, i + 1, format!("bad time `{s}`")))
        };
        let start = (parse(f[0])? * rate).round() as usize;
        let end = (parse(f[1])? * rate).round() as usize;
        out.push((start, end, f[2].to_string()));
    }
    Ok(out)
}

pub fn write_alignment(intervals: &[(usize, usize)], phonemes: &PhonemeSequence, rate: f64) -> String {
    let mut out = String::from("start_s,end_s,phoneme\n");
    for (&(s, e), p) in intervals.iter().zip(phonemes.tokens()) {
        writeln!(out, "{},{},{}", s as f64 / rate, e as f64 / rate, p).unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Validation,
    Auto,
}

impl SplitTag {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitTag::Train),
            "val" | "validation" => Some(SplitTag::Validation),
            "" | "-" | "auto" => Some(SplitTag::Auto),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "val",
            SplitTag::Auto => "-",
        }
    }
}

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub speaker: String,
    pub trajectory: PathBuf,
    pub alignment: Option<PathBuf>,
    pub phonemes: String,
    pub split: SplitTag,
}

const MANIFEST_HEADER: &str = "id\tspeaker\ttrajectory\talignment\tphonemes\tsplit";

pub fn read_manifest(text: &str, path: &Path) -> Result<Vec<ManifestRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim_end() == MANIFEST_HEADER => {}
        _ => return Err(file_err(path, 1, format!("manifest header must be `{MANIFEST_HEADER}`"))),
    }
    lines
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(file_err(path, i + 1, "expected 6 tab-separated fields"));
            }
            let split = SplitTag::parse(f[5].trim())
                .ok_or_else(|| file_err(path, i + 1, format!("bad split `{}`", f[5])))?;
            Ok(ManifestRow {
                id: f[0].to_string(),
                speaker: f[1].to_string(),
                trajectory: PathBuf::from(f[2]),
                alignment: match f[3] {
                    "" | "-" => None,
                    p => Some(PathBuf::from(p)),
                },
                phonemes: f[4].to_string(),
                split,
            })
        })
        .collect()
}

pub fn write_manifest(rows: &[ManifestRow]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for r in rows {
        let al = r
            .alignment
            .as_ref()
            .map_or("-".to_string(), |p| p.display().to_string());
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            r.speaker,
            r.trajectory.display(),
            al,
            r.phonemes,
            r.split.as_str()
        )
        .unwrap();
    }
    out
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_row(row: &ManifestRow, base: &Path, layout: &ChannelLayout, manifest: &Path, line: usize) -> Result<Utterance> {
    let traj_path = base.join(&row.trajectory);
    let (names, values, rate) = read_ema_csv(&read(&traj_path)?, &traj_path)?;
    if names != layout.position_names() {
        return Err(file_err(
            &traj_path,
            1,
            format!("channels {names:?} do not match layout {:?}", layout.position_names()),
        ));
    }
    let phonemes = PhonemeSequence::parse(&row.phonemes)
        .map_err(|e| file_err(manifest, line, e.to_string()))?;
    let alignment = match &row.alignment {
        None => None,
        Some(p) => {
            let al_path = base.join(p);
            let rows = read_alignment(&read(&al_path)?, &al_path, rate)?;
            for (k, (_, _, ph)) in rows.iter().enumerate() {
                if phonemes.tokens().get(k).map(|p| p.symbol()) != Some(ph.as_str()) {
                    return Err(file_err(&al_path, k + 2, format!("phoneme `{ph}` does not match the manifest")));
                }
            }
            Some(rows.into_iter().map(|(s, e, _)| (s, e)).collect())
        }
    };
    let utt = Utterance {
        id: row.id.clone(),
        speaker: row.speaker.clone(),
        phonemes: phonemes.with_word(row.id.clone()),
        ema: EmaTrajectory::positions(values, rate)
            .map_err(|e| file_err(&traj_path, 2, e.to_string()))?,
        alignment,
    };
    utt.validate().map_err(|e| file_err(manifest, line, e.to_string()))?;
    Ok(utt)
}

/// Loads every utterance listed in a manifest. Trajectory files are read in
/// parallel; the result keeps manifest order.
pub fn load_dataset(manifest: &Path, layout: &ChannelLayout) -> Result<(Dataset, Vec<ManifestRow>)> {
    let rows = read_manifest(&read(manifest)?, manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let utterances = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| load_row(row, base, layout, manifest, i + 2))
        .collect::<Result<Vec<_>>>()?;
    Ok((Dataset { utterances }, rows))
}

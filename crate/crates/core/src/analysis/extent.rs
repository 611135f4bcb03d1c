use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::repr::{euclid, representations};
use super::{mann_whitney_greater, normalized_pct, AnalysisConfig};
use crate::alignment::percentile;
use crate::error::Result;
use crate::lexicon::{MinimalPair, Phoneme, PhonemeSequence};
use crate::p2a::Articulator;

/// Distance between the two members of a minimal pair at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistanceRecord {
    pub word_a: String,
    pub word_b: String,
    pub trigger_pos: usize,
    /// Position minus trigger position; 0 is the trigger itself.
    pub offset: i64,
    /// The phoneme at this position (shared by both words unless this is
    /// the trigger, where it is word A's).
    pub target: Phoneme,
    pub distance: f64,
    pub normalized_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordSet {
    pub records: Vec<PairDistanceRecord>,
    /// Pairs left out because a member could not be generated, with the
    /// reason.
    pub skipped: Vec<(String, String, String)>,
}

/// Representations for every distinct word, generated in parallel.
fn word_reprs(
    model: &impl Articulator,
    words: &BTreeMap<&str, &PhonemeSequence>,
    speaker: &str,
    tau: usize,
) -> BTreeMap<String, std::result::Result<Vec<Vec<f64>>, String>> {
    let items: Vec<(&str, &PhonemeSequence)> = words.iter().map(|(w, s)| (*w, *s)).collect();
    items
        .par_iter()
        .map(|(w, seq)| {
            let r = model
                .generate(seq, speaker)
                .map(|g| representations(&g, tau))
                .map_err(|e| e.to_string());
            (w.to_string(), r)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Distance records at every offset within `±max_offset`, including the
/// trigger (offset 0).
pub fn pair_records(
    model: &impl Articulator,
    pairs: &[MinimalPair],
    config: &AnalysisConfig,
    d_avg: f64,
) -> Result<RecordSet> {
    config.validate()?;
    normalized_pct(0.0, d_avg)?;
    let speaker = config.speaker_for(model)?;
    let mut words: BTreeMap<&str, &PhonemeSequence> = BTreeMap::new();
    for p in pairs {
        words.insert(&p.word_a, &p.seq_a);
        words.insert(&p.word_b, &p.seq_b);
    }
    let reprs = word_reprs(model, &words, &speaker, config.tau);
    let mut out = RecordSet::default();
    for p in pairs {
        let (ra, rb) = match (&reprs[&p.word_a], &reprs[&p.word_b]) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("skipping pair {}/{}: {e}", p.word_a, p.word_b);
                out.skipped.push((p.word_a.clone(), p.word_b.clone(), e.clone()));
                continue;
            }
        };
        let max = config.max_offset as i64;
        for pos in 0..p.seq_a.len() {
            let offset = pos as i64 - p.trigger_pos as i64;
            if offset.abs() > max {
                continue;
            }
            let distance = euclid(&ra[pos], &rb[pos])?;
            out.records.push(PairDistanceRecord {
                word_a: p.word_a.clone(),
                word_b: p.word_b.clone(),
                trigger_pos: p.trigger_pos,
                offset,
                target: p.seq_a.tokens()[pos],
                distance,
                normalized_pct: normalized_pct(distance, d_avg)?,
            });
        }
    }
    Ok(out)
}

/// Summary of the normalised distances at one offset (or of the baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetStats {
    /// `"3"`, `"-2"`, `"abs:1"` or `"baseline"`.
    pub label: String,
    pub n: usize,
    pub mean_pct: f64,
    /// Sample standard deviation (0 for a single value).
    pub std_pct: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// One-sided rank test against the baseline; `None` for the baseline.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtentProfile {
    /// Signed offsets `−max..−1, 1..max` that have data.
    pub signed: Vec<OffsetStats>,
    /// `|offset| = 1..max` with both sides pooled.
    pub pooled: Vec<OffsetStats>,
    pub baseline: OffsetStats,
    pub baseline_distribution: Vec<f64>,
}

impl ExtentProfile {
    pub fn pooled_mean(&self, k: usize) -> Option<f64> {
        let label = format!("abs:{k}");
        self.pooled.iter().find(|s| s.label == label).map(|s| s.mean_pct)
    }

    pub fn signed_mean(&self, k: i64) -> Option<f64> {
        let label = k.to_string();
        self.signed.iter().find(|s| s.label == label).map(|s| s.mean_pct)
    }
}

fn describe(label: String, values: &[f64], baseline: Option<&[f64]>) -> Result<OffsetStats> {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let p_value = match baseline {
        Some(b) => Some(mann_whitney_greater(values, b)?.p_value),
        None => None,
    };
    Ok(OffsetStats {
        label,
        n,
        mean_pct: mean,
        std_pct: std,
        q1: percentile(&sorted, 0.25),
        median: percentile(&sorted, 0.5),
        q3: percentile(&sorted, 0.75),
        p_value,
    })
}

/// Aggregates records by offset (trigger excluded) and tests each offset
/// against the baseline distribution.
pub fn aggregate(records: &[PairDistanceRecord], baseline: &[f64], max_offset: usize) -> Result<ExtentProfile> {
    if baseline.is_empty() {
        return Err(crate::error::Error::Param("baseline distribution is empty".into()));
    }
    let mut signed: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut pooled: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.offset == 0 || r.offset.unsigned_abs() > max_offset as u64 {
            continue;
        }
        signed.entry(r.offset).or_default().push(r.normalized_pct);
        pooled.entry(r.offset.unsigned_abs()).or_default().push(r.normalized_pct);
    }
    Ok(ExtentProfile {
        signed: signed
            .iter()
            .map(|(k, v)| describe(k.to_string(), v, Some(baseline)))
            .collect::<Result<_>>()?,
        pooled: pooled
            .iter()
            .map(|(k, v)| describe(format!("abs:{k}"), v, Some(baseline)))
            .collect::<Result<_>>()?,
        baseline: describe("baseline".into(), baseline, None)?,
        baseline_distribution: baseline.to_vec(),
    })
}

/// Records, baseline and profile in one go. `d_avg` normalises every
/// distance.
pub fn extent_profile(
    model: &impl Articulator,
    pairs: &[MinimalPair],
    lexicon: &crate::lexicon::Lexicon,
    config: &AnalysisConfig,
    d_avg: f64,
) -> Result<(ExtentProfile, RecordSet)> {
    let records = pair_records(model, pairs, config, d_avg)?;
    let baseline = super::baseline_distances(model, lexicon, config, d_avg)?;
    let profile = aggregate(&records.records, &baseline, config.max_offset)?;
    Ok((profile, records))
}

fn stats_row(out: &mut String, s: &OffsetStats) {
    let p = s.p_value.map_or(String::new(), |p| p.to_string());
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        s.label, s.n, s.mean_pct, s.std_pct, s.q1, s.median, s.q3, p
    )
    .unwrap();
}

/// `offset,n,mean_pct,std_pct,q1,median,q3,p_value`: signed offsets, then
/// pooled `abs:k` rows, then the baseline.
pub fn extent_csv(profile: &ExtentProfile) -> String {
    let mut out = String::from("offset,n,mean_pct,std_pct,q1,median,q3,p_value\n");
    for s in profile.signed.iter().chain(&profile.pooled) {
        stats_row(&mut out, s);
    }
    stats_row(&mut out, &profile.baseline);
    out
}

pub fn records_csv(records: &[PairDistanceRecord]) -> String {
    let mut out = String::from("word_a,word_b,trigger_pos,offset,distance,normalized_pct\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.word_a, r.word_b, r.trigger_pos, r.offset, r.distance, r.normalized_pct
        )
        .unwrap();
    }
    out
}

/// Offsets that exist for a pair list, by direct count.
pub fn offset_counts(pairs: &[MinimalPair], max_offset: usize) -> BTreeMap<i64, usize> {
    let mut out = BTreeMap::new();
    for p in pairs {
        let n = p.seq_a.len() as i64;
        let t = p.trigger_pos as i64;
        for off in -(max_offset as i64)..=max_offset as i64 {
            if off != 0 && (0..n).contains(&(t + off)) {
                *out.entry(off).or_insert(0) += 1;
            }
        }
    }
    out
}


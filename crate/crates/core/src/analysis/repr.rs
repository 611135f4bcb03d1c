use rand::seq::index::sample;
use rayon::prelude::*;

use super::AnalysisConfig;
use crate::error::{Error, Result};
use crate::lexicon::{Inventory, Lexicon, Phoneme, PhonemeSequence};
use crate::nn::Tensor2;
use crate::p2a::{Articulator, GenerationResult};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeRepr {
    /// Mean position-channel frame around the phoneme's peak influence.
    pub values: Vec<f64>,
    pub phoneme: Phoneme,
    pub word: Option<String>,
    pub position: usize,
}

/// Mean of rows `round(μ) − τ ..= round(μ) + τ`, clipped to the trajectory.
fn window_mean(positions: &Tensor2, mu: f64, tau: usize) -> Vec<f64> {
    let t = positions.rows();
    let centre = (mu.round().max(0.0) as usize).min(t - 1);
    let lo = centre.saturating_sub(tau);
    let hi = (centre + tau).min(t - 1);
    let mut out = vec![0.0; positions.cols()];
    for r in lo..=hi {
        crate::nn::axpy(1.0, positions.row(r), &mut out);
    }
    let n = (hi - lo + 1) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

pub fn phoneme_repr(result: &GenerationResult, seq: &PhonemeSequence, k: usize, tau: usize) -> Result<PhonemeRepr> {
    if k >= seq.len() || k >= result.timing.len() {
        return Err(Error::Index {
            index: k,
            len: seq.len().min(result.timing.len()),
        });
    }
    Ok(PhonemeRepr {
        values: window_mean(&result.ema.position_view(), result.timing.mu[k], tau),
        phoneme: seq.tokens()[k],
        word: seq.source_word().map(String::from),
        position: k,
    })
}

/// Representations of every phoneme of a generated sequence.
pub fn representations(result: &GenerationResult, tau: usize) -> Vec<Vec<f64>> {
    let pos = result.ema.position_view();
    result.timing.mu.iter().map(|&m| window_mean(&pos, m, tau)).collect()
}

pub fn pair_distance(a: &PhonemeRepr, b: &PhonemeRepr) -> Result<f64> {
    euclid(&a.values, &b.values)
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("representation lengths {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Mean Euclidean distance over all unordered pairs of centroids.
pub fn davg_from_centroids(centroids: &[Vec<f64>]) -> Result<f64> {
    if centroids.len() < 2 {
        return Err(Error::DegenerateScale);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            sum += euclid(&centroids[i], &centroids[j])?;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Average distance between phoneme-type centroids, each centroid being
/// the mean representation of that type over a seeded sample of words.
pub fn mean_interphoneme_distance(model: &impl Articulator, lexicon: &Lexicon, config: &AnalysisConfig) -> Result<f64> {
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    let speaker = config.speaker_for(model)?;
    let mut rng = seed::stream(config.seed, "analysis.davg");
    let n = config.davg_words.min(lexicon.len());
    let mut picks = sample(&mut rng, lexicon.len(), n).into_vec();
    picks.sort_unstable();
    let per_word: Vec<Option<(Vec<Phoneme>, Vec<Vec<f64>>)>> = picks
        .par_iter()
        .map(|&i| {
            let e = &lexicon.entries()[i];
            match model.generate(&e.seq, &speaker) {
                Ok(r) => Some((e.seq.tokens().to_vec(), representations(&r, config.tau))),
                Err(err) => {
                    log::warn!("skipping `{}` in inter-phoneme distance: {err}", e.word);
                    None
                }
            }
        })
        .collect();
    let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; Inventory::SIZE];
    for (tokens, reps) in per_word.into_iter().flatten() {
        for (p, r) in tokens.iter().zip(reps) {
            let slot = sums[p.index()].get_or_insert_with(|| (vec![0.0; r.len()], 0));
            crate::nn::axpy(1.0, &r, &mut slot.0);
            slot.1 += 1;
        }
    }
    let missing: Vec<&str> = Inventory
        .speech()
        .filter(|p| sums[p.index()].is_none())
        .map(|p| p.symbol())
        .collect();
    if !missing.is_empty() {
        log::warn!("phoneme types absent from the sample and excluded: {}", missing.join(" "));
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .flatten()
        .map(|(s, c)| s.into_iter().map(|v| v / c as f64).collect())
        .collect();
    davg_from_centroids(&centroids)
}

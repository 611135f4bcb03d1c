use rand::Rng as _;
use rayon::prelude::*;

use super::repr::{euclid, representations};
use super::{normalized_pct, AnalysisConfig};
use crate::error::{Error, Result};
use crate::lexicon::{Inventory, Kind, Lexicon, Phoneme, PhonemeSequence};
use crate::p2a::Articulator;
use crate::seed;

/// Normalised distances far from a single-phoneme change.
///
/// Each sample concatenates random lexicon words until the sequence has at
/// least `max_offset + 2` phonemes, replaces the first phoneme (even
/// samples) or the last phoneme (odd samples) by a different phoneme of the
/// same kind, and measures the distance at the opposite end.
pub fn baseline_distances(
    model: &impl Articulator,
    lexicon: &Lexicon,
    config: &AnalysisConfig,
    d_avg: f64,
) -> Result<Vec<f64>> {
    config.validate()?;
    normalized_pct(0.0, d_avg)?;
    if lexicon.is_empty() {
        return Err(Error::Param("baseline needs a non-empty lexicon".into()));
    }
    let speaker = config.speaker_for(model)?;
    let min_len = config.max_offset + 2;
    let vowels: Vec<Phoneme> = Inventory.speech().filter(|p| p.is_vowel()).collect();
    let consonants: Vec<Phoneme> = Inventory.speech().filter(|p| p.kind() == Kind::Consonant).collect();

    let mut rng = seed::stream(config.seed, "analysis.baseline");
    let mut jobs = Vec::with_capacity(config.baseline_samples);
    for s in 0..config.baseline_samples {
        let mut tokens: Vec<Phoneme> = Vec::new();
        while tokens.len() < min_len {
            let e = &lexicon.entries()[rng.random_range(0..lexicon.len())];
            tokens.extend_from_slice(e.seq.tokens());
        }
        let pos = if s % 2 == 0 { 0 } else { tokens.len() - 1 };
        let pool = if tokens[pos].is_vowel() { &vowels } else { &consonants };
        let mut mutated = tokens.clone();
        while mutated[pos] == tokens[pos] {
            mutated[pos] = pool[rng.random_range(0..pool.len())];
        }
        let far = tokens.len() - 1 - pos;
        jobs.push((PhonemeSequence::new(tokens)?, PhonemeSequence::new(mutated)?, far));
    }
    jobs.par_iter()
        .map(|(a, b, far)| {
            let ra = representations(&model.generate(a, &speaker)?, config.tau);
            let rb = representations(&model.generate(b, &speaker)?, config.tau);
            normalized_pct(euclid(&ra[*far], &rb[*far])?, d_avg)
        })
        .collect()
}

use std::fmt::Write as _;

use super::{AnalysisConfig, PairDistanceRecord};
use crate::alignment::bootstrap_ci;
use crate::error::Result;
use crate::lexicon::Place;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceStats {
    pub place: Place,
    pub n: usize,
    /// NaN when `n = 0`.
    pub mean_pct: f64,
    pub ci: Option<(f64, f64)>,
}

/// Records at `|offset| = 1` grouped by the place of the target consonant
/// (vowel targets excluded). Groups with data come first, by decreasing
/// mean; empty groups follow in table order.
pub fn resistance_by_place(records: &[PairDistanceRecord], config: &AnalysisConfig) -> Result<Vec<PlaceStats>> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); Place::ALL.len()];
    for r in records.iter().filter(|r| r.offset.abs() == 1) {
        if let Some(place) = r.target.place() {
            groups[place.index()].push(r.normalized_pct);
        }
    }
    let mut filled = Vec::new();
    let mut empty = Vec::new();
    for place in Place::ALL {
        let v = &groups[place.index()];
        if v.is_empty() {
            empty.push(PlaceStats {
                place,
                n: 0,
                mean_pct: f64::NAN,
                ci: None,
            });
            continue;
        }
        let ci = bootstrap_ci(
            v,
            config.bootstrap_resamples,
            seed::substream(config.seed, &format!("bootstrap.{}", place.as_str())),
        )?;
        filled.push(PlaceStats {
            place,
            n: v.len(),
            mean_pct: v.iter().sum::<f64>() / v.len() as f64,
            ci: Some(ci),
        });
    }
    filled.sort_by(|a, b| b.mean_pct.total_cmp(&a.mean_pct));
    filled.extend(empty);
    Ok(filled)
}

/// `place,n,mean_pct,ci_lo,ci_hi`; empty cells for groups without data.
pub fn resistance_csv(stats: &[PlaceStats]) -> String {
    let mut out = String::from("place,n,mean_pct,ci_lo,ci_hi\n");
    for s in stats {
        match s.ci {
            Some((lo, hi)) => writeln!(out, "{},{},{},{},{}", s.place.as_str(), s.n, s.mean_pct, lo, hi),
            None => writeln!(out, "{},0,,,", s.place.as_str()),
        }
        .unwrap();
    }
    out
}

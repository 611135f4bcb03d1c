use std::fmt::Write as _;

use super::{Articulator, GenerationResult};
use crate::analysis::{raw_tract_variables, tract_variables, TractVariables};
use crate::error::Result;
use crate::lexicon::PhonemeSequence;

/// Two generated members of a VCV-style pair with their tract variables.
#[derive(Debug, Clone, PartialEq)]
pub struct VcvDemo {
    pub a: GenerationResult,
    pub b: GenerationResult,
    /// Utterance-normalised tract variables of each member.
    pub tv_a: TractVariables,
    pub tv_b: TractVariables,
    /// Per-frame Euclidean distance between the members' tract variables
    /// before normalisation, over the frames both share.
    pub divergence: Vec<f64>,
}

impl VcvDemo {
    /// First frame where the divergence exceeds `fraction` of its maximum.
    pub fn onset(&self, fraction: f64) -> Option<usize> {
        let max = self.divergence.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return None;
        }
        self.divergence.iter().position(|d| *d > fraction * max)
    }

    /// `frame,LA_a,LP_a,TTCL_a,TBCL_a,LA_b,LP_b,TTCL_b,TBCL_b,divergence`,
    /// with empty cells past the end of the shorter member.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,LA_a,LP_a,TTCL_a,TBCL_a,LA_b,LP_b,TTCL_b,TBCL_b,divergence\n");
        let t = self.tv_a.len().max(self.tv_b.len());
        let cell = |tv: &TractVariables, k: usize| -> String {
            if k < tv.len() {
                format!("{},{},{},{}", tv.la[k], tv.lp[k], tv.ttcl[k], tv.tbcl[k])
            } else {
                ",,,".to_string()
            }
        };
        for k in 0..t {
            let div = self.divergence.get(k).map_or(String::new(), |d| d.to_string());
            writeln!(out, "{k},{},{},{div}", cell(&self.tv_a, k), cell(&self.tv_b, k)).unwrap();
        }
        out
    }
}

pub fn demo_vcv(model: &impl Articulator, a: &PhonemeSequence, b: &PhonemeSequence, speaker: &str) -> Result<VcvDemo> {
    let ga = model.generate(a, speaker)?;
    let gb = model.generate(b, speaker)?;
    let pa = model.physical(&ga)?;
    let pb = model.physical(&gb)?;
    let layout = model.layout();
    let ra = raw_tract_variables(&pa, layout)?;
    let rb = raw_tract_variables(&pb, layout)?;
    let t = ra.len().min(rb.len());
    let divergence = (0..t)
        .map(|k| {
            let d = [
                ra.la[k] - rb.la[k],
                ra.lp[k] - rb.lp[k],
                ra.ttcl[k] - rb.ttcl[k],
                ra.tbcl[k] - rb.tbcl[k],
            ];
            d.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    Ok(VcvDemo {
        tv_a: tract_variables(&pa, layout)?,
        tv_b: tract_variables(&pb, layout)?,
        a: ga,
        b: gb,
        divergence,
    })
}

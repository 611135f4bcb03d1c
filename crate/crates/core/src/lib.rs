//! Phoneme-to-articulatory modelling and coarticulation measurement.
//!
//! A recurrent model maps phoneme sequences to EMA-style sensor
//! trajectories through predicted per-phoneme Gaussian influence, trained
//! with a soft-DTW loss. Generated trajectories of minimal word pairs are
//! then compared phoneme by phoneme to measure how far, and how strongly,
//! a single phoneme change spreads to its neighbours.

pub mod alignment;
pub mod analysis;
pub mod ema;
pub mod error;
pub mod lexicon;
pub mod nn;
pub mod p2a;
pub mod seed;
pub mod timing;

pub use error::{Error, Result};

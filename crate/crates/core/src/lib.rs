//! Remaining-useful-life prediction for rotating machinery.
//!
//! Phase I turns each vibration snapshot into a 64×64 spectrogram ([`tfa`])
//! and regresses a RUL estimate from it with a compact SqueezeNet variant
//! ([`prosqn`], built on [`ndnn`]). Phase II smooths and extrapolates the
//! resulting RUL trajectory with a nonstationary Gaussian process
//! ([`nsgpr`]), yielding a point estimate with confidence intervals.

pub mod cli;
pub mod dataio;
pub mod error;
mod kv;
pub mod ndnn;
pub mod nsgpr;
pub mod par;
pub mod pipeline;
pub mod prosqn;
pub mod scoring;
pub mod tfa;

pub use error::{Error, Result};
pub use par::Execution;

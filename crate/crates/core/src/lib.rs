//! Diagnostics and recalibration of conditional predictive distributions.
//!
//! The central object is the PIT-CDF `r(γ; x) = P(F̂(Y|x) ≤ γ | x)`, learned by
//! a regression that is monotone in `γ`. Used as a probability-probability map,
//! it turns an initial conditional CDF `F̂(y|x)` into a recalibrated one,
//! `F̃(y|x) = r(F̂(y|x); x)`, from which prediction intervals, HPD sets and an
//! estimated transport map follow. The same regression yields local
//! diagnostics (ALP curves and Monte Carlo local coverage tests).
//!
//! Module map:
//!
//! - [`grid`]: grid-based densities and CDFs, monotone splines, initial models.
//! - [`calibrate`]: augmentation, PIT-CDF backends, recalibration and prediction sets.
//! - [`diagnose`]: ALP curves, local coverage tests, confidence bands, CDE loss.
//! - [`synth`]: synthetic data-generating processes with oracle access.
//! - [`baselines`]: split-conformal and distributional-conformal intervals.
//! - [`bench`]: Monte Carlo conditional-coverage evaluation.

pub mod baselines;
pub mod bench;
pub mod calibrate;
pub mod diagnose;
pub mod error;
pub mod grid;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

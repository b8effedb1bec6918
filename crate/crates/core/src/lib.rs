//! Semi-parametric multi-type Markov point processes.
//!
//! The conditional intensity of a type-`i` point at `u` given the rest of
//! the pattern `y` is
//!
//! ```text
//! λ{(u,i), y} = φ₀(u) · exp(γᵀ v{(u,i), y})
//! ```
//!
//! where `φ₀` is an unspecified nonnegative surface shared by all types.
//! Conditioning on the location of each observed point cancels `φ₀`, leaving
//! a multinomial-logit pseudo likelihood for `γ` over the points of the
//! eroded window. This crate provides
//!
//! * [`pattern`]: marked point patterns, windows, erosion, neighbor queries;
//! * [`covariates`]: raster covariates and Gaussian random field simulation;
//! * [`interaction`]: multi-type Strauss hard-core and Geyer saturation statistics;
//! * [`model`]: parameter stacking, identifiability maps, type probabilities;
//! * [`fit`]: the conditional pseudo likelihood, Newton fitting and range profiling;
//! * [`inference`]: sandwich covariance and Wald intervals;
//! * [`simulate`]: Poisson and birth–death Metropolis–Hastings samplers plus the coverage-study harness;
//! * [`baseline`]: kernel estimation of `φ₀`;
//! * [`cli`]: JSON run configurations and the command runners behind the `mtgibbs` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cli;
pub mod covariates;
pub mod error;
pub mod fit;
pub mod inference;
pub mod geometry;
pub mod interaction;
pub mod model;
pub mod pattern;
pub mod simulate;

pub use error::{Error, Result};
pub use geometry::{Point, Rect};

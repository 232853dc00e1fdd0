//! Maximum-likelihood fits of binned data to composite models built from
//! finite Monte-Carlo templates.
//!
//! Three likelihoods are provided, all transformed so that the minimum is
//! asymptotically chi-square distributed:
//!
//! * [`Method::Exact`]: the full Barlow-Beeston likelihood with one nuisance
//!   parameter per bin and component, fitted numerically.
//! * [`Method::Conway`]: a single scale factor per bin with a Gaussian
//!   constraint, profiled analytically.
//! * [`Method::Approx`]: a single scale factor per bin constrained by Poisson
//!   statistics of the pooled template, profiled analytically.
//!
//! The two profiled likelihoods also accept weighted data and weighted
//! templates through effective counts.
//!
//! ```
//! use templatefit_core::{fit, gof, BinnedSample, CostFunction, Method, TemplateModel};
//!
//! let counts = |c: &[f64]| BinnedSample::from_counts(c).unwrap();
//! let model = TemplateModel::new(
//!     TemplateModel::uniform_edges(4, 0.0, 2.0),
//!     counts(&[14.0, 31.0, 26.0, 9.0]),
//!     vec![
//!         ("signal".into(), counts(&[1.0, 12.0, 10.0, 2.0])),
//!         ("background".into(), counts(&[20.0, 14.0, 9.0, 6.0])),
//!     ],
//! )
//! .unwrap();
//! let result = fit(&CostFunction::new(&model, Method::Approx, false).unwrap()).unwrap();
//! assert!(result.converged);
//! let p_value = gof(&result).unwrap();
//! assert!(p_value > 0.0 && p_value <= 1.0);
//! ```
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the toy-study
//! runner and the command line live in the `templatefit` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
mod error;
pub mod likelihood;
pub mod linalg;
pub mod math;
pub mod optimizer;
pub mod toy;

pub use data::{BinnedSample, EffectiveCount, TemplateModel};
pub use error::{Error, Result};
pub use likelihood::{BetaDiagnostics, CostFunction, Method};
pub use linalg::Matrix;
pub use optimizer::{
    fit, fit_from, gof, hesse, FitResult, FnObjective, Minimizer, Minimum, Objective,
};
pub use toy::{bin_probabilities, draw, rng_stream, ToyConfig, ToyDraw, ToyStream};

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Anomaly detection by aggregating large families of parameterized binary
//! change indicators.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`signalgen`] simulates labeled univariate series with a variance,
//!    mean or trend shift at a random change point (or no shift at all).
//! 2. [`stattests`] provides the two-sample tests evaluated on sliding
//!    windows, together with the special functions behind their p-values.
//! 3. [`indicators`] expands test templates over a parameter grid
//!    (window size, level, confirmation rule, smoothing) and turns every
//!    signal into a bit vector.
//! 4. [`selection`] ranks indicator columns by minimum-redundancy
//!    maximum-relevance on mutual information.
//! 5. [`classifiers`] trains Bernoulli Naive Bayes and Random Forest models;
//!    [`evaluation`] runs the split / balanced-subset protocol on top.

#![forbid(unsafe_code)]

pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod indicators;
pub mod rng;
pub mod selection;
pub mod signalgen;
pub mod special;
pub mod stattests;

pub use error::{Error, Result};
pub use signalgen::{ShiftClass, SignalRecord};

//! Spectral super-resolution of line spectra.
//!
//! Classical estimators (periodogram, MUSIC, OMP with AIC/SORTE order
//! selection), real- and complex-valued shifted-window transformer models
//! built on a small reverse-mode autodiff engine, a training loop and Monte
//! Carlo evaluation drivers.

pub mod classical;
pub mod cli;
pub mod error;
pub mod eval;
mod fsutil;
pub mod graph;
pub mod model;
pub mod ops;
pub mod rng;
pub mod signal;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

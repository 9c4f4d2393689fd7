//! Sparse regression tools for discovering PDEs from data: candidate-term
//! libraries, (randomised, adaptive) Lasso estimators, irrepresentability
//! diagnostics and stability selection with false-positive control.

pub mod datasets;
pub mod error;
pub mod estimators;
pub mod irc;
pub mod jet;
pub mod library;
pub mod pipeline;
pub mod recipes;
pub mod regression;
pub mod rng;
pub mod special;
pub mod stability;
pub mod support;

pub use error::{Error, Result};
pub use support::SupportSet;

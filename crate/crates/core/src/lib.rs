//! Spatiotemporal attention forecasting models built on a small
//! reverse-mode differentiation core.
//!
//! The crate contains:
//! - [`autodiff`]: dense tensors and a define-by-run tape
//! - [`layers`]: LSTM cell, dense layer, dropout
//! - [`models`]: STAM, STAM-Lite and the Enc-Dec, LSTM-Att and DA-RNN
//!   baselines, plus parameter-count and inference-cost models
//! - [`training`]: MSE loss, Adam, the fit loop and metrics
//! - [`data`]: CSV ingestion, scaling, windowing, synthetic data
//! - [`interpret`]: dataset-level attention reports
//! - [`cli`]: the `stam` command-line front end

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod interpret;
pub mod layers;
pub mod models;
pub mod training;

pub use error::{Error, Result};

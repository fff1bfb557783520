//! Intrusion-detection engine for IoT botnet traffic.
//!
//! `nbids` trains and evaluates a hybrid 1D-convolution + ConvNeXt-block
//! classifier over the N-BaIoT feature set (115 traffic statistics per
//! sample, eight traffic classes). Everything in the numeric path is
//! implemented in this crate: layer forward passes, analytic gradients,
//! the Adam training loop, and the full multiclass metric family.
//!
//! The crate is organised around the pipeline stages:
//!
//! - [`data`]: CSV ingestion of the N-BaIoT on-disk layout, class mapping,
//!   deterministic stratified train/validation/test splits, and a binary
//!   row cache for fast reload.
//! - [`preprocess`]: per-feature standardization fitted on training data
//!   only, plus shaping into the model's `(seq_len, channels)` input.
//! - [`nn`]: the fixed network (Conv1D -> ConvNeXt blocks -> dense head),
//!   parameter initialization and counting, and model serialization.
//! - [`trainer`]: cross-entropy loss, Adam with bias correction, the
//!   epoch/validation loop, and batched inference with timing capture.
//! - [`metrics`]: confusion matrix, per-class precision/recall/F1/MCC,
//!   the TNR/NPV/FPR/FDR/FOR/FNR family, macro/micro/weighted averages,
//!   one-vs-rest ROC/AUC, and report serialization (JSON/CSV/SVG).
//! - [`cli`]: the batch subcommands (`prepare`, `train`, `eval`,
//!   `predict`) behind the `nbids` binary.
//!
//! Determinism is a design goal throughout: all randomness derives from
//! the caller's seed through [`rng::SplitMix64`], and two runs with the
//! same seed and flags produce byte-identical splits, model files, and
//! metric reports.

// index arithmetic in the convolution/backprop kernels reads better as
// explicit loops
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod preprocess;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};

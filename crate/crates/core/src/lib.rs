//! Numerical core for label-free distribution-shift auditing of embedding
//! datasets.
//!
//! Everything here is pure computation over `alloc` collections so the crate
//! builds with `#![no_std]`. File formats, the command line and the HTTP
//! service live in the `shiftaudit` companion crate.
//!
//! Module map:
//!
//! - [`dataset`]: records, cohorts, label schemas, seeded splits
//! - [`frechet`]: Gaussian summaries, squared Fréchet distance, bootstrap
//!   intervals and the bootstrap z-test
//! - [`tsne`]: exact t-SNE with perplexity calibration
//! - [`kernel_probe`]: RBF support vector classifier and regressor (SMO)
//! - [`audit`]: accuracy/Pearson reports, probe denoising, event-sourced
//!   relabeling and the three-scenario confidence prediction experiment
//! - [`synth`]: planted synthetic datasets and brute-force QP oracles
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod audit;
pub mod dataset;
mod error;
pub mod frechet;
pub mod kernel_probe;
pub mod linalg;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod synth;
pub mod tsne;

pub use error::{Error, Result};

//! Attention-based multiple-instance learning for slide-level prediction,
//! with the clinical evaluation statistics that go around it.
//!
//! Every capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example tiling
//! cargo run --release --example synthetic_bags
//! cargo run --release --example train_attention
//! cargo run --release --example eval_bootstrap
//! cargo run --release --example compare_models
//! cargo run --release --example dca_triage
//! cargo run --release --example survival
//! cargo run --release --example reader_study
//! ```

pub mod cli;
pub mod data;
pub mod decision;
pub mod error;
pub mod format;
pub mod metrics;
pub mod mil;
pub mod reader;
pub mod report;
pub mod resample;
pub mod rng;
pub mod survival;
pub mod synth;
pub mod tiling;

pub use error::{Error, Result};

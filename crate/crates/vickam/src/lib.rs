//! Weakly supervised group activity recognition from prototype-guided
//! action maps.
//!
//! The crate builds class-mean action prototypes from annotated samples,
//! correlates them against feature grids with an FFT backend (verified
//! against a naive spatial oracle), augments the resulting action maps
//! with activity-action spatial statistics, and trains a small two-stage
//! head on top. A deterministic synthetic generator provides datasets
//! with known ground truth for every mechanism.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --example action_maps
//! cargo run --example train_two_stage
//! ```
//!
//! or the `vickam` binary, which exposes the same workflow as subcommands
//! (`synth`, `stage1`, `stage2`, `eval`, `bench`, `export-maps`).

pub mod cli;
pub mod error;
pub mod fftcorr;
pub mod head;
pub mod heatmap;
pub mod pipeline;
pub mod prototypes;
pub mod relmaps;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{read_tensor, seeded_fill, write_tensor, Dist, Tensor};

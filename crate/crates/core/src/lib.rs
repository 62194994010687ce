//! Scene-text single-object tracking toolkit.
//!
//! * [`tensor`], [`ptr`], [`cec`]: the feature-calibration math (template-driven
//!   gating of search features and cross-expert spatial calibration).
//! * [`aie`]: training-free adaptive inference (confidence-gated multi-scale
//!   re-search and constant-velocity smoothing).
//! * [`curation`], [`convert`]: turning video-text-spotting annotations and
//!   outputs into single-object tracking samples and prediction files.
//! * [`metrics`]: success/precision evaluation.
//! * [`simulator`]: synthetic sequences that drive the whole loop without
//!   neural weights.

pub mod aie;
pub mod bbox;
pub mod cec;
pub mod cli;
pub mod config;
pub mod convert;
pub mod curation;
pub mod error;
pub mod metrics;
pub mod ptr;
pub mod simulator;
pub mod tensor;
pub mod weights;

pub use bbox::BBox;
pub use error::{Error, Result};
pub use tensor::Tensor;

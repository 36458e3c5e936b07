//! Synthetic multi-object tracking benchmark.
//!
//! Generates procedural sprite videos (frames plus pixel-exact instance label
//! maps) and scores segmentation-mask predictions with mask-based CLEAR-MOT
//! metrics: MOTA, MOTP, mostly-detected / mostly-tracked, and the
//! match / miss / ID-switch / false-positive fractions.
//!
//! The pipeline is:
//!
//! * [`trajectory`] samples centroid paths (Gaussian-process, linear, crossing).
//! * [`scene`] builds a symbolic [`scene::SceneSpec`] for each dataset variant.
//! * [`raster`] renders a scene into RGB frames and label maps.
//! * [`datasets`] assembles reproducible splits from a seed.
//! * [`matcher`] maps predicted masks to ground truth frame by frame.
//! * [`metrics`] accumulates match events into a [`metrics::MetricsReport`].
//! * [`storage`] reads and writes the on-disk formats.
//! * [`baselines`] provides non-learned reference trackers.

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod evaluate;
pub mod matcher;
pub mod metrics;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod storage;
pub mod trajectory;

pub use error::{Error, Result};

/// Name recorded in generated metadata.
pub const GENERATOR_NAME: &str = "objmot";
/// Version recorded in generated metadata.
pub const GENERATOR_VERSION: &str = env!("CARGO_PKG_VERSION");

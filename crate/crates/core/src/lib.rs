//! Box-supervised video instance segmentation toolkit.
//!
//! Losses with analytic gradients (projection, pairwise affinity, STPA,
//! total variation, pseudo-mask, classification), masked attention,
//! teacher-student utilities, dataset construction helpers and a desk-scale
//! training demonstration on synthetic clips.

pub mod attention;
pub mod boxes;
pub mod clip;
pub mod boxlosses;
pub mod cli;
pub mod color;
pub mod datasetkit;
pub mod dice;
pub mod error;
pub mod gradcheck;
pub mod hungarian;
pub mod reg;
pub mod rng;
pub mod stpa;
pub mod teacher;
pub mod tensor;
pub mod toytrain;

pub use boxes::{rasterize_box_mask, BoxEntry, BoxTrack, ClipDims, Pixel};
pub use boxlosses::{Edge, LossResult, SpatialPairConfig};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use stpa::StpaConfig;
pub use tensor::Tensor;

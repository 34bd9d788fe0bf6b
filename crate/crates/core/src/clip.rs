use serde::{Deserialize, Serialize};

use crate::boxes::BoxTrack;
use crate::error::Result;
use crate::tensor::Tensor;

/// A short video: per-frame `H×W×C` images, per-instance box tracks and,
/// for synthetic data, ground-truth masks (`N×T×H×W`, evaluation only).
///
/// Frames may differ in size (pseudo clips crop each frame independently).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSample {
    pub frames: Vec<Tensor>,
    pub tracks: Vec<BoxTrack>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_masks: Option<Tensor>,
}

impl ClipSample {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Frames stacked into one `T×H×W×C` tensor; all frames must share dims.
    pub fn stacked(&self) -> Result<Tensor> {
        Tensor::stack(&self.frames)
    }
}

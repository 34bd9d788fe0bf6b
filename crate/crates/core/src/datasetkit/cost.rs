use serde::Serialize;

use crate::error::{Error, Result};

pub const SECONDS_PER_WORKER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_BOX: f64 = 7.0;
pub const SECONDS_PER_MASK: f64 = 79.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnotationCost {
    pub box_days: f64,
    pub mask_days: f64,
}

/// Worker days (86 400 s each) needed to box-annotate and mask-annotate
/// `num_objects` objects.
pub fn annotation_cost(num_objects: u64, seconds_per_box: f64, seconds_per_mask: f64) -> Result<AnnotationCost> {
    if !(seconds_per_box >= 0.0 && seconds_per_mask >= 0.0) {
        return Err(Error::Argument("annotation times must be non-negative".into()));
    }
    let n = num_objects as f64;
    Ok(AnnotationCost {
        box_days: n * seconds_per_box / SECONDS_PER_WORKER_DAY,
        mask_days: n * seconds_per_mask / SECONDS_PER_WORKER_DAY,
    })
}

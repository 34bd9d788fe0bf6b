//! Teacher-student machinery: EMA teacher updates, the dynamic quality
//! threshold, projection-based quality scores and matching of teacher masks
//! to ground-truth boxes.

use serde::{Deserialize, Serialize};

use crate::boxes::{rasterize_box_mask, BoxTrack, ClipDims};
use crate::boxlosses::project;
use crate::dice::dice_loss;
use crate::error::{Error, Result};
use crate::hungarian::hungarian_assign;
use crate::tensor::Tensor;

/// Smallest class score used inside `−log(score)`.
const MIN_CLASS_SCORE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherState {
    pub params: Vec<f64>,
    pub momentum: f64,
    pub iters: u64,
    pub total_iters: u64,
}

impl TeacherState {
    pub fn new(params: Vec<f64>, momentum: f64, total_iters: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::Argument(format!("momentum {momentum} outside [0, 1]")));
        }
        if total_iters == 0 {
            return Err(Error::Argument("total_iters must be positive".into()));
        }
        Ok(Self {
            params,
            momentum,
            iters: 0,
            total_iters,
        })
    }

    /// `θ ← m·θ + (1 − m)·φ`, advancing the iteration counter (saturating at
    /// `total_iters`).
    pub fn ema_update(&self, student: &[f64]) -> Result<TeacherState> {
        if student.len() != self.params.len() {
            return Err(Error::Argument(format!(
                "student has {} parameters, teacher {}",
                student.len(),
                self.params.len()
            )));
        }
        let m = self.momentum;
        Ok(TeacherState {
            params: self
                .params
                .iter()
                .zip(student)
                .map(|(&t, &s)| m * t + (1.0 - m) * s)
                .collect(),
            momentum: m,
            iters: (self.iters + 1).min(self.total_iters),
            total_iters: self.total_iters,
        })
    }

    pub fn threshold(&self) -> Result<f64> {
        dynamic_threshold(self.iters, self.total_iters)
    }
}

/// `ε = 1 / (1 + e^{−2(1 − r)})` with `r = iters / total_iters`.
pub fn dynamic_threshold(iters: u64, total_iters: u64) -> Result<f64> {
    if total_iters == 0 {
        return Err(Error::Argument("total_iters must be positive".into()));
    }
    if iters > total_iters {
        return Err(Error::Argument(format!("iters {iters} beyond total {total_iters}")));
    }
    let r = iters as f64 / total_iters as f64;
    Ok(1.0 / (1.0 + (-2.0 * (1.0 - r)).exp()))
}

fn projection_dice_terms(mask_prob: &Tensor, box_mask: &Tensor) -> Result<(f64, f64)> {
    if !matches!(mask_prob.rank(), 2 | 3) {
        return Err(Error::Argument(format!(
            "mask must be H×W or T×H×W, got {:?}",
            mask_prob.dims()
        )));
    }
    box_mask.expect_dims(mask_prob.dims(), "box mask")?;
    if box_mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Argument("box mask must be binary".into()));
    }
    if box_mask.sum() == 0.0 {
        return Err(Error::Argument("box mask is empty".into()));
    }
    let dims = ClipDims::of(mask_prob)?;
    let mp = project(mask_prob.data(), dims);
    let bp = project(box_mask.data(), dims);
    Ok((
        dice_loss(&mp.along_x, &bp.along_x),
        dice_loss(&mp.along_y, &bp.along_y),
    ))
}

/// Mean of the x- and y-projection Dice coefficients of a soft mask against
/// a box mask, over the flattened clip.
pub fn projection_score(mask_prob: &Tensor, box_mask: &Tensor) -> Result<f64> {
    let (dx, dy) = projection_dice_terms(mask_prob, box_mask)?;
    Ok(1.0 - 0.5 * (dx + dy))
}

/// A teacher prediction considered as a pseudo mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoCandidate {
    pub mask_prob: Tensor,
    pub class_score: f64,
    pub projection_score: f64,
    pub quality: f64,
}

impl PseudoCandidate {
    pub fn new(mask_prob: Tensor, class_score: f64, projection_score: f64) -> Result<Self> {
        for (name, v) in [("class score", class_score), ("projection score", projection_score)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            mask_prob,
            class_score,
            projection_score,
            quality: class_score * projection_score,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoMatch {
    pub candidate: usize,
    pub box_index: usize,
    pub cost: f64,
    /// Whether the candidate's quality clears the threshold.
    pub kept: bool,
}

/// Assigns teacher candidates to ground-truth tracks by minimum
/// `−log(class_score) + projection loss`, flagging which assigned masks
/// clear `eps`. Returns matches sorted by candidate index.
pub fn match_teacher_to_boxes(
    candidates: &[PseudoCandidate],
    gt_boxes: &[BoxTrack],
    eps: f64,
) -> Result<Vec<PseudoMatch>> {
    if candidates.is_empty() || gt_boxes.is_empty() {
        return Ok(Vec::new());
    }
    let shape = candidates[0].mask_prob.dims().to_vec();
    let dims = ClipDims::of(&candidates[0].mask_prob)?;
    let box_masks = gt_boxes
        .iter()
        .map(|b| Ok(rasterize_box_mask(b, dims)?.reshape(&shape)?))
        .collect::<Result<Vec<_>>>()?;
    let mut cost = Tensor::zeros(&[candidates.len(), gt_boxes.len()]);
    for (i, cand) in candidates.iter().enumerate() {
        let cls = -cand.class_score.max(MIN_CLASS_SCORE).ln();
        for (j, bm) in box_masks.iter().enumerate() {
            let (dx, dy) = projection_dice_terms(&cand.mask_prob, bm)?;
            cost.set(&[i, j], cls + dx + dy);
        }
    }
    Ok(hungarian_assign(&cost)?
        .into_iter()
        .map(|(i, j)| PseudoMatch {
            candidate: i,
            box_index: j,
            cost: cost.get(&[i, j]),
            kept: candidates[i].quality >= eps,
        })
        .collect())
}

/// Pseudo mask per ground-truth box: the assigned candidate's mask when it
/// was kept, otherwise `None` (box-only supervision).
pub fn pseudo_masks_for_boxes<'a>(
    candidates: &'a [PseudoCandidate],
    matches: &[PseudoMatch],
    num_boxes: usize,
) -> Vec<Option<&'a Tensor>> {
    let mut out = vec![None; num_boxes];
    for m in matches.iter().filter(|m| m.kept) {
        out[m.box_index] = Some(&candidates[m.candidate].mask_prob);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::BoxEntry;

    #[test]
    fn ema_extremes() {
        let t = TeacherState::new(vec![1.0, -2.0], 1.0, 10).unwrap();
        assert_eq!(t.ema_update(&[5.0, 5.0]).unwrap().params, vec![1.0, -2.0]);
        let t = TeacherState::new(vec![1.0, -2.0], 0.0, 10).unwrap();
        assert_eq!(t.ema_update(&[5.0, 4.0]).unwrap().params, vec![5.0, 4.0]);
        let t = TeacherState::new(vec![1.0], 0.9, 10).unwrap();
        assert!((t.ema_update(&[0.0]).unwrap().params[0] - 0.9).abs() < 1e-15);
        assert!(t.ema_update(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn counter_saturates() {
        let mut t = TeacherState::new(vec![0.0], 0.5, 2).unwrap();
        for _ in 0..5 {
            t = t.ema_update(&[1.0]).unwrap();
        }
        assert_eq!(t.iters, 2);
        assert_eq!(t.threshold().unwrap(), 0.5);
    }

    #[test]
    fn threshold_values() {
        assert_eq!(dynamic_threshold(10, 10).unwrap(), 0.5);
        assert!((dynamic_threshold(0, 10).unwrap() - 0.880_797).abs() < 1e-6);
        assert!((dynamic_threshold(5, 10).unwrap() - 0.731_059).abs() < 1e-6);
        assert!(dynamic_threshold(1, 0).is_err());
        assert!(dynamic_threshold(11, 10).is_err());
    }

    fn box_mask() -> Tensor {
        let mut m = Tensor::zeros(&[1, 4, 4]);
        for y in 1..3 {
            for x in 0..3 {
                m.set(&[0, y, x], 1.0);
            }
        }
        m
    }

    #[test]
    fn projection_score_extremes() {
        let b = box_mask();
        assert!((projection_score(&b, &b).unwrap() - 1.0).abs() < 1e-12);
        let zero = projection_score(&Tensor::zeros(&[1, 4, 4]), &b).unwrap();
        assert!(zero < 1e-4 && zero >= 0.0);
        assert!(projection_score(&b, &Tensor::zeros(&[1, 4, 4])).is_err());
    }

    fn track() -> BoxTrack {
        BoxTrack::new(0, vec![BoxEntry { frame: 0, x0: 0, y0: 1, x1: 3, y1: 3 }]).unwrap()
    }

    #[test]
    fn perfect_prediction_is_kept() {
        let b = box_mask();
        let c = PseudoCandidate::new(b.clone(), 1.0, projection_score(&b, &b).unwrap()).unwrap();
        let m = match_teacher_to_boxes(&[c], &[track()], 0.5).unwrap();
        assert_eq!(m.len(), 1);
        assert!(m[0].kept);
        assert!(m[0].cost < 1e-9);
    }

    #[test]
    fn low_quality_is_assigned_but_dropped() {
        let b = box_mask();
        let c = PseudoCandidate::new(b, 0.4, 1.0).unwrap();
        assert!((c.quality - 0.4).abs() < 1e-15);
        let cands = [c];
        let m = match_teacher_to_boxes(&cands, &[track()], 0.5).unwrap();
        assert_eq!(m.len(), 1);
        assert!(!m[0].kept);
        assert_eq!(pseudo_masks_for_boxes(&cands, &m, 1), vec![None]);
    }

    #[test]
    fn empty_inputs() {
        assert!(match_teacher_to_boxes(&[], &[track()], 0.5).unwrap().is_empty());
    }
}

//! Auxiliary losses: anisotropic 3D total variation, 3D Gaussian blur, the
//! pseudo-mask BCE + Dice loss, softmax classification loss and the
//! γ-scheduled total loss.

use serde::{Deserialize, Serialize};

use crate::boxes::ClipDims;
use crate::boxlosses::LossResult;
use crate::dice::dice_loss_with_grad;
use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Classification weight.
    pub lambda1: f64,
    /// Box-mask weight.
    pub lambda2: f64,
    /// First epoch at which the affinity term replaces total variation.
    pub gamma_switch_epoch: usize,
    pub total_epochs: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda1: 2.0,
            lambda2: 5.0,
            gamma_switch_epoch: 12,
            total_epochs: 36,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Argument("loss weights must be non-negative".into()));
        }
        if self.gamma_switch_epoch > self.total_epochs {
            return Err(Error::Argument(format!(
                "gamma switch epoch {} beyond total epochs {}",
                self.gamma_switch_epoch, self.total_epochs
            )));
        }
        Ok(())
    }

    /// 1 before the switch epoch, 0 from it on.
    pub fn gamma(&self, epoch: usize) -> f64 {
        if epoch < self.gamma_switch_epoch {
            1.0
        } else {
            0.0
        }
    }
}

/// Scalar loss components combined by [`total_loss`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub cls: f64,
    pub proj: f64,
    pub tv3d: f64,
    pub affinity: f64,
}

/// `λ1·cls + λ2·(proj + γ·tv3d + (1 − γ)·affinity)`.
pub fn total_loss(parts: &LossParts, cfg: &LossConfig, epoch: usize) -> f64 {
    let gamma = cfg.gamma(epoch);
    cfg.lambda1 * parts.cls
        + cfg.lambda2 * (parts.proj + gamma * parts.tv3d + (1.0 - gamma) * parts.affinity)
}

/// Anisotropic total variation of `σ(logits)` over right, bottom and
/// next-frame differences, averaged over the number of differences.
pub fn tv3d_loss(mask_logits: &Tensor) -> Result<LossResult> {
    mask_logits.expect_rank(3, "mask logits")?;
    let dims = ClipDims::of(mask_logits)?;
    let (tn, h, w) = (dims.frames, dims.height, dims.width);
    let terms = tn * h * (w - 1) + tn * (h - 1) * w + (tn - 1) * h * w;
    if terms == 0 {
        return Ok(LossResult::zero(mask_logits.dims()));
    }
    let m: Vec<f64> = mask_logits.data().iter().map(|&z| sigmoid(z)).collect();
    let mut acc = vec![0.0; m.len()];
    let mut total = 0.0;
    let mut diff = |a: usize, b: usize| {
        let d = m[b] - m[a];
        total += d.abs();
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        acc[b] += s;
        acc[a] -= s;
    };
    for t in 0..tn {
        for y in 0..h {
            for x in 0..w {
                let i = (t * h + y) * w + x;
                if x + 1 < w {
                    diff(i, i + 1);
                }
                if y + 1 < h {
                    diff(i, i + w);
                }
                if t + 1 < tn {
                    diff(i, i + h * w);
                }
            }
        }
    }
    let scale = 1.0 / terms as f64;
    let grad = Tensor::from_fn(mask_logits.dims(), |i| acc[i] * m[i] * (1.0 - m[i]) * scale);
    Ok(LossResult {
        value: total * scale,
        grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlurSpec {
    pub sigma: f64,
    /// Kernel half-extent per axis; the kernel spans `(2r + 1)³` taps.
    pub radius: usize,
}

impl Default for BlurSpec {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            radius: 1,
        }
    }
}

impl BlurSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Argument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.radius == 0 {
            return Err(Error::Argument("blur radius must be at least 1".into()));
        }
        Ok(())
    }
}

/// How samples outside the clip are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// Replicate the nearest edge sample.
    Clamp,
    /// Wrap around each axis.
    Periodic,
}

/// Continuous density `exp(−(dx² + dy² + dt²)/(2σ²)) / (2πσ²)`.
pub fn gaussian_density_3d(dx: f64, dy: f64, dt: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (-(dx * dx + dy * dy + dt * dt) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
}

/// Discrete kernel over `[−r, r]³`, renormalized to unit sum, laid out
/// `[dt][dy][dx]`.
pub fn gaussian_kernel_3d(spec: &BlurSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let r = spec.radius as i64;
    let mut k = Vec::with_capacity((2 * spec.radius + 1).pow(3));
    for dt in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                k.push(gaussian_density_3d(dx as f64, dy as f64, dt as f64, spec.sigma));
            }
        }
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

fn resolve(v: i64, len: usize, border: Border) -> usize {
    let n = len as i64;
    match border {
        Border::Clamp => v.clamp(0, n - 1) as usize,
        Border::Periodic => v.rem_euclid(n) as usize,
    }
}

/// Blurs each trailing channel of a `T×H×W` or `T×H×W×C` tensor.
pub fn gaussian_blur_3d_with(input: &Tensor, spec: &BlurSpec, border: Border) -> Result<Tensor> {
    let channels = match input.rank() {
        3 => 1,
        4 => input.dims()[3],
        _ => {
            return Err(Error::Argument(format!(
                "blur input must be T×H×W or T×H×W×C, got {:?}",
                input.dims()
            )))
        }
    };
    let dims = ClipDims::of(input)?;
    let kernel = gaussian_kernel_3d(spec)?;
    let r = spec.radius as i64;
    let src = input.data();
    let mut out = Tensor::zeros(input.dims());
    let dst = out.data_mut();
    for p in dims.pixels() {
        let base = p.index(dims) * channels;
        let mut ki = 0;
        for dt in -r..=r {
            let t = resolve(p.t as i64 + dt, dims.frames, border);
            for dy in -r..=r {
                let y = resolve(p.y as i64 + dy, dims.height, border);
                for dx in -r..=r {
                    let x = resolve(p.x as i64 + dx, dims.width, border);
                    let weight = kernel[ki];
                    ki += 1;
                    let s = ((t * dims.height + y) * dims.width + x) * channels;
                    for c in 0..channels {
                        dst[base + c] += weight * src[s + c];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// 3D Gaussian blur with clamp-to-border sampling.
pub fn gaussian_blur_3d(input: &Tensor, spec: &BlurSpec) -> Result<Tensor> {
    gaussian_blur_3d_with(input, spec, Border::Clamp)
}

/// Mean binary cross-entropy of `σ(logits)` against soft targets plus the
/// smoothed Dice loss.
pub fn bce_dice_loss(mask_logits: &Tensor, pseudo_mask: &Tensor) -> Result<LossResult> {
    pseudo_mask.expect_dims(mask_logits.dims(), "pseudo mask")?;
    if pseudo_mask.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Range("pseudo mask values must lie in [0, 1]".into()));
    }
    let n = mask_logits.len() as f64;
    let z = mask_logits.data();
    let q = pseudo_mask.data();
    let p: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
    let bce: f64 = z
        .iter()
        .zip(q)
        .map(|(&zi, &qi)| zi.max(0.0) - zi * qi + (-zi.abs()).exp().ln_1p())
        .sum::<f64>()
        / n;
    let (dice, dgrad) = dice_loss_with_grad(&p, q);
    let grad = Tensor::from_fn(mask_logits.dims(), |i| {
        (p[i] - q[i]) / n + dgrad[i] * p[i] * (1.0 - p[i])
    });
    Ok(LossResult {
        value: bce + dice,
        grad,
    })
}

/// Mean softmax cross-entropy over `N` rows of `C + 1` class logits, the last
/// column being background.
pub fn classification_loss(logits: &Tensor, targets: &[usize]) -> Result<LossResult> {
    logits.expect_rank(2, "class logits")?;
    let (rows, classes) = (logits.dims()[0], logits.dims()[1]);
    if targets.len() != rows {
        return Err(Error::Argument(format!(
            "{} targets for {rows} rows",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::Argument(format!(
            "target {bad} outside [0, {}]",
            classes - 1
        )));
    }
    let mut grad = Tensor::zeros(logits.dims());
    let mut total = 0.0;
    for (r, &target) in targets.iter().enumerate() {
        let row = &logits.data()[r * classes..(r + 1) * classes];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[target];
        let g = &mut grad.data_mut()[r * classes..(r + 1) * classes];
        for (c, gc) in g.iter_mut().enumerate() {
            let soft = (row[c] - log_z).exp();
            *gc = (soft - if c == target { 1.0 } else { 0.0 }) / rows as f64;
        }
    }
    Ok(LossResult {
        value: total / rows as f64,
        grad,
    })
}

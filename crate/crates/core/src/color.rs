//! sRGB to CIE-LAB conversion (D65 white point).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

/// D65 reference white, taken as the image of sRGB white under the matrix so
/// that neutral grays land exactly on the L axis.
fn white_point() -> [f64; 3] {
    SRGB_TO_XYZ.map(|row| row.iter().sum())
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one sRGB triple in `[0, 1]` to `(L, a, b)`.
pub fn lab_from_rgb_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let white = white_point();
    let mut xyz = [0.0; 3];
    for (out, row) in xyz.iter_mut().zip(SRGB_TO_XYZ.iter()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Converts a tensor whose last axis holds sRGB triples in `[0, 1]` (typically
/// `T×H×W×3` or `H×W×3`) to CIE-LAB.
pub fn lab_from_srgb(rgb: &Tensor) -> Result<Tensor> {
    if rgb.dims().last() != Some(&3) {
        return Err(Error::Argument(format!(
            "color tensor must end in a channel axis of 3, got {:?}",
            rgb.dims()
        )));
    }
    if let Some(bad) = rgb.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Range(format!("sRGB value {bad} outside [0, 1]")));
    }
    let mut out = rgb.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let lab = lab_from_rgb_pixel([px[0], px[1], px[2]]);
        px.copy_from_slice(&lab);
    }
    Ok(out)
}

//! Smoothed Dice loss shared by the projection and pseudo-mask losses.

/// Smoothing constant added to numerator and denominator.
pub const DICE_SMOOTH: f64 = 1e-4;

/// `1 - (2Σpq + s) / (Σp² + Σq² + s)` and its derivative with respect to `p`.
pub fn dice_loss_with_grad(p: &[f64], q: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(p.len(), q.len());
    let inter: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let union: f64 = p.iter().map(|a| a * a).sum::<f64>() + q.iter().map(|b| b * b).sum::<f64>() + DICE_SMOOTH;
    let num = 2.0 * inter + DICE_SMOOTH;
    let value = 1.0 - num / union;
    let u2 = union * union;
    let grad = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| -(2.0 * qi * union - num * 2.0 * pi) / u2)
        .collect();
    (value, grad)
}

pub fn dice_loss(p: &[f64], q: &[f64]) -> f64 {
    let inter: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let union: f64 = p.iter().map(|a| a * a).sum::<f64>() + q.iter().map(|b| b * b).sum::<f64>() + DICE_SMOOTH;
    1.0 - (2.0 * inter + DICE_SMOOTH) / union
}

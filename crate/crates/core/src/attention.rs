//! Masked attention over flattened `T·H·W` locations and the equivalent
//! activated-set formulation, plus query-based mask generation.
//!
//! Masked-out logits use the finite sentinel [`MASKED`] instead of `−∞` so
//! that softmax shifts never see `−∞ − (−∞)`.

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Tensor};

/// Stand-in for `−∞` in attention masks.
pub const MASKED: f64 = -1e30;

/// Single-head attention operands with the projections already applied.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    /// Queries, `N×C`.
    pub q: Tensor,
    /// Keys, `L×C`.
    pub k: Tensor,
    /// Values, `L×C`.
    pub v: Tensor,
    /// Residual input, `N×C`.
    pub x_prev: Tensor,
}

impl AttentionParams {
    fn shape(&self) -> Result<(usize, usize, usize)> {
        for (t, name) in [(&self.q, "Q"), (&self.k, "K"), (&self.v, "V"), (&self.x_prev, "X_prev")] {
            t.expect_rank(2, name)?;
        }
        let (n, c) = (self.q.dims()[0], self.q.dims()[1]);
        let l = self.k.dims()[0];
        self.k.expect_dims(&[l, c], "K")?;
        self.v.expect_dims(&[l, c], "V")?;
        self.x_prev.expect_dims(&[n, c], "X_prev")?;
        Ok((n, l, c))
    }

    fn score(&self, query: usize, loc: usize, c: usize) -> f64 {
        let q = &self.q.data()[query * c..(query + 1) * c];
        let k = &self.k.data()[loc * c..(loc + 1) * c];
        q.iter().zip(k).map(|(a, b)| a * b).sum()
    }
}

fn flatten_queries(mask_prob: &Tensor) -> Result<(usize, usize)> {
    if mask_prob.rank() < 2 {
        return Err(Error::Argument(format!(
            "mask probabilities must be N×(locations), got {:?}",
            mask_prob.dims()
        )));
    }
    let n = mask_prob.dims()[0];
    Ok((n, mask_prob.len() / n))
}

/// `0` where the mask probability exceeds 0.5, [`MASKED`] elsewhere. Input
/// is `N×T×H×W` (any trailing shape); output is `N×L`.
pub fn attention_mask(mask_prob: &Tensor) -> Result<Tensor> {
    let (n, l) = flatten_queries(mask_prob)?;
    Tensor::new(
        vec![n, l],
        mask_prob
            .data()
            .iter()
            .map(|&p| if p > 0.5 { 0.0 } else { MASKED })
            .collect(),
    )
}

fn softmax_rows_into(out: &mut [f64], logits: &[f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// `softmax(mask + Q Kᵀ) V + X_prev`, row by row. A query whose mask hides
/// every location attends to all of them instead.
pub fn masked_attention(p: &AttentionParams, attn_mask: &Tensor) -> Result<Tensor> {
    let (n, l, c) = p.shape()?;
    attn_mask.expect_dims(&[n, l], "attention mask")?;
    let mut out = p.x_prev.clone();
    let mut logits = vec![0.0; l];
    let mut weights = vec![0.0; l];
    for qi in 0..n {
        let row_mask = &attn_mask.data()[qi * l..(qi + 1) * l];
        let all_hidden = row_mask.iter().all(|&m| m <= MASKED);
        for (li, z) in logits.iter_mut().enumerate() {
            let bias = if all_hidden { 0.0 } else { row_mask[li] };
            *z = bias + p.score(qi, li, c);
        }
        softmax_rows_into(&mut weights, &logits);
        let row = &mut out.data_mut()[qi * c..(qi + 1) * c];
        for (li, &w) in weights.iter().enumerate() {
            let v = &p.v.data()[li * c..(li + 1) * c];
            for (o, &vv) in row.iter_mut().zip(v) {
                *o += w * vv;
            }
        }
    }
    Ok(out)
}

/// Per-query lists of flattened locations whose probability exceeds 0.5.
pub fn activated_set(mask_prob: &Tensor) -> Result<Vec<Vec<usize>>> {
    let (n, l) = flatten_queries(mask_prob)?;
    Ok((0..n)
        .map(|qi| {
            mask_prob.data()[qi * l..(qi + 1) * l]
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.5)
                .map(|(i, _)| i)
                .collect()
        })
        .collect())
}

/// Output of [`masked_attention_sparse`].
#[derive(Debug, Clone)]
pub struct SparseAttention {
    pub output: Tensor,
    /// Per-query weights aligned with the query's location list.
    pub weights: Vec<Vec<f64>>,
}

/// `ΔX_q = Σ_{i∈Ω_q} exp(Q_q K_iᵀ)/σ_q · V_i` with `σ_q` the sum of the
/// exponentials over `Ω_q`; returns `ΔX + X_prev`. Empty `Ω_q` means all
/// locations, matching the dense fallback.
pub fn masked_attention_sparse(p: &AttentionParams, omega: &[Vec<usize>]) -> Result<SparseAttention> {
    let (n, l, c) = p.shape()?;
    if omega.len() != n {
        return Err(Error::Argument(format!(
            "{} activated sets for {n} queries",
            omega.len()
        )));
    }
    let all: Vec<usize> = (0..l).collect();
    let mut out = p.x_prev.clone();
    let mut all_weights = Vec::with_capacity(n);
    for (qi, set) in omega.iter().enumerate() {
        if let Some(&bad) = set.iter().find(|&&i| i >= l) {
            return Err(Error::Range(format!("location {bad} outside {l}")));
        }
        let set = if set.is_empty() { &all } else { set };
        let scores: Vec<f64> = set.iter().map(|&li| p.score(qi, li, c)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let sigma: f64 = exps.iter().sum();
        let weights: Vec<f64> = exps.iter().map(|e| e / sigma).collect();
        let row = &mut out.data_mut()[qi * c..(qi + 1) * c];
        for (&li, &w) in set.iter().zip(&weights) {
            let v = &p.v.data()[li * c..(li + 1) * c];
            for (o, &vv) in row.iter_mut().zip(v) {
                *o += w * vv;
            }
        }
        all_weights.push(weights);
    }
    Ok(SparseAttention {
        output: out,
        weights: all_weights,
    })
}

/// Mask features and per-query mask parameters.
#[derive(Debug, Clone)]
pub struct QueryMaskHead {
    /// `T×H×W×D` mask features.
    pub features: Tensor,
    /// `N×D` per-query parameters.
    pub params: Tensor,
}

/// `logits[n, t, y, x] = ⟨F(t, y, x), params_n⟩` and `binary = σ(logits) > 0.5`.
pub fn mask_logits(head: &QueryMaskHead) -> Result<(Tensor, Tensor)> {
    head.features.expect_rank(4, "mask features")?;
    head.params.expect_rank(2, "mask parameters")?;
    let fd = head.features.dims();
    let (locs, d) = (fd[0] * fd[1] * fd[2], fd[3]);
    let n = head.params.dims()[0];
    head.params.expect_dims(&[n, d], "mask parameters")?;
    let mut logits = Tensor::zeros(&[n, fd[0], fd[1], fd[2]]);
    for qi in 0..n {
        let w = &head.params.data()[qi * d..(qi + 1) * d];
        for li in 0..locs {
            let f = &head.features.data()[li * d..(li + 1) * d];
            logits.data_mut()[qi * locs + li] = f.iter().zip(w).map(|(a, b)| a * b).sum();
        }
    }
    let binary = logits.map(|z| if sigmoid(z) > 0.5 { 1.0 } else { 0.0 });
    Ok((logits, binary))
}

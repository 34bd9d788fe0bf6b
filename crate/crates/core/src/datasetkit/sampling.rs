use serde::Serialize;

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One sampled `(source, item)` pair, by index into the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Draw {
    pub source: usize,
    pub item: usize,
}

/// `n` i.i.d. draws: a source by weight, then an item uniformly within it.
/// Sources without items are never drawn.
pub fn weighted_sample(manifest: &DatasetManifest, rng: &mut RngStream, n: usize) -> Result<Vec<Draw>> {
    if manifest.sources.iter().all(|s| s.weight == 0.0) {
        return Err(Error::Argument("all source weights are zero".into()));
    }
    manifest.validate()?;
    let weights: Vec<f64> = manifest
        .sources
        .iter()
        .map(|s| if s.items.is_empty() { 0.0 } else { s.weight })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Argument("no source with positive weight and items".into()));
    }
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform(0.0, total)?;
        let mut acc = 0.0;
        let mut source = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if w > 0.0 && u < acc {
                source = i;
                break;
            }
        }
        let item = rng.index(manifest.sources[source].items.len())?;
        draws.push(Draw { source, item });
    }
    Ok(draws)
}

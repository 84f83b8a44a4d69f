use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SeededRng;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_BOOTSTRAP_SEED: u64 = 0xB007;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
    pub resamples: usize,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Percentile bootstrap interval at `level` for the mean of paired
/// differences, resampling items with replacement.
pub fn paired_bootstrap_ci(deltas: &[f64], resamples: usize, level: f64, seed: u64) -> Result<BootstrapCi> {
    if deltas.is_empty() {
        return Err(Error::param("bootstrap needs at least one paired difference"));
    }
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::param("bootstrap needs resamples >= 1 and 0 < level < 1"));
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired differences".into()));
    }
    let mut rng = SeededRng::new(seed);
    let n = deltas.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| deltas[rng.next_index(n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        mean: mean(deltas),
        low: quantile(&means, alpha),
        high: quantile(&means, 1.0 - alpha),
        resamples,
    })
}

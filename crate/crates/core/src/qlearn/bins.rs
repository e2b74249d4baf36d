use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of ICU counts into `G` half-open bins
/// `[THR_{g-1}, THR_g)` with `THR_0 = 0` and `THR_G = inf`.
///
/// Bins are indexed from zero: index `g - 1` holds bin `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinScheme {
    thresholds: Vec<f64>,
}

impl BinScheme {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.iter().any(|t| !t.is_finite() || *t <= 0.0) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("bin thresholds must be positive and strictly increasing".into()));
        }
        Ok(BinScheme { thresholds })
    }

    /// `g` bins whose `g - 1` inner thresholds are geometrically spaced on
    /// `[lo, hi]`.
    pub fn geometric(g: usize, lo: f64, hi: f64) -> Result<Self> {
        if g == 0 || !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidConfig(format!("bad bin scheme G={g} on [{lo}, {hi}]")));
        }
        BinScheme::new(geometric_points(g - 1, lo, hi))
    }

    pub fn n_bins(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Zero-based bin index of `y`.
    pub fn bin_of(&self, y: u64) -> usize {
        let y = y as f64;
        self.thresholds.partition_point(|&t| t <= y)
    }
}

/// `n` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geometric_points(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln() / (n - 1) as f64;
            let mut pts: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
            pts[n - 1] = hi;
            pts
        }
    }
}

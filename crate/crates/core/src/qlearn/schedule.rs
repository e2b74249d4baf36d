use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which counter drives the learning-rate sequence `alpha_k = C / (C + k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaIndex {
    /// `k` is the number of earlier updates of the same `(g, a)` cell.
    #[default]
    PerVisit,
    /// `k` is the zero-based episode index.
    Episode,
}

/// Exploration and learning-rate schedule for slice-level Q-learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnSchedule {
    pub episodes: usize,
    pub eps0: f64,
    pub eps_min: f64,
    /// Fraction of the episodes over which epsilon decays linearly.
    pub decay_fraction: f64,
    pub alpha_c: f64,
    pub alpha_index: AlphaIndex,
}

impl Default for LearnSchedule {
    fn default() -> Self {
        LearnSchedule {
            episodes: 2000,
            eps0: 0.20,
            eps_min: 0.05,
            decay_fraction: 0.8,
            alpha_c: 45.0,
            alpha_index: AlphaIndex::PerVisit,
        }
    }
}

impl LearnSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps0 && self.eps0 <= 1.0) {
            return Err(Error::InvalidConfig("need 0 <= eps_min <= eps0 <= 1".into()));
        }
        if self.alpha_c <= 0.0 {
            return Err(Error::InvalidConfig("alpha_c must be positive".into()));
        }
        Ok(())
    }

    /// Exploration probability for zero-based episode `e`.
    pub fn epsilon(&self, e: usize) -> f64 {
        let span = (self.decay_fraction * self.episodes as f64).max(1.0);
        let frac = (e as f64 / span).min(1.0);
        self.eps0 + (self.eps_min - self.eps0) * frac
    }

    /// `C / (C + k)`.
    pub fn alpha(&self, k: u64) -> f64 {
        self.alpha_c / (self.alpha_c + k as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_decays_then_flat() {
        let s = LearnSchedule { episodes: 100, ..Default::default() };
        assert_eq!(s.epsilon(0), 0.20);
        assert!((s.epsilon(40) - 0.125).abs() < 1e-12);
        assert!((s.epsilon(80) - 0.05).abs() < 1e-12);
        assert!((s.epsilon(99) - 0.05).abs() < 1e-12);
        for e in 0..100 {
            let eps = s.epsilon(e);
            assert!((0.05 - 1e-12..=0.20).contains(&eps));
        }
    }

    #[test]
    fn alpha_sequence_is_robbins_monro() {
        let s = LearnSchedule::default();
        assert_eq!(s.alpha(0), 1.0);
        assert!((s.alpha(45) - 0.5).abs() < 1e-15);
        // Partial sums of alpha grow like C ln(n): compare against the
        // integral bound C ln((C + n) / C) <= sum_{k<n} alpha_k.
        let n = 1_000_000u64;
        let sum: f64 = (0..n).map(|k| s.alpha(k)).sum();
        assert!(sum >= 45.0 * ((45.0 + n as f64) / 45.0).ln());
        // Squares: sum_k C^2 / (C + k)^2 <= 1 + C^2 / C = 1 + C, finite.
        let sum_sq: f64 = (0..n).map(|k| s.alpha(k).powi(2)).sum();
        let tail_bound = 45.0f64.powi(2) / (45.0 + n as f64 - 1.0);
        assert!(sum_sq + tail_bound <= 1.0 + 45.0);
    }
}

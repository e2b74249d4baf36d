//! Negative-Binomial observation model for reported ICU counts.
//!
//! `Y | X ~ NegBin(k, p)` with `p = k / (k + H)` and `H = ICU + ICU_V`, so
//! `E[Y] = H` and `Var[Y] = H (1 + H / k)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::params::ModelParams;
use super::state::CompartmentState;

/// Log-weight assigned to observations that are impossible under a state.
/// Finite so that particle weights stay comparable and degeneracy stays
/// detectable.
pub const LOG_WEIGHT_FLOOR: f64 = -1e30;

/// A reported ICU count on a given day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub day: u32,
    pub y: u64,
}

impl Observation {
    pub fn new(day: u32, y: u64) -> Self {
        Self { day, y }
    }
}

/// Draws a NegBin count with mean `mean` and overdispersion `k` via the
/// Gamma-Poisson mixture.
pub fn sample_negbin<R: Rng + ?Sized>(mean: f64, k: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let rate = Gamma::new(k, mean / k).expect("k and mean are positive").sample(rng);
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

/// Exact NegBin log-pmf at `y` for mean `mean` and overdispersion `k`.
/// Returns [`LOG_WEIGHT_FLOOR`] for `y > 0` when `mean == 0`.
pub fn negbin_log_pmf(y: u64, mean: f64, k: f64) -> f64 {
    if mean <= 0.0 {
        return if y == 0 { 0.0 } else { LOG_WEIGHT_FLOOR };
    }
    let yf = y as f64;
    let ratio = mean / k;
    // k ln p = -k ln(1 + H/k);  y ln(1-p) = y (ln H - ln(k + H))
    let tail = if y == 0 { 0.0 } else { yf * (mean.ln() - (k + mean).ln()) };
    ln_gamma(yf + k) - ln_gamma(k) - ln_gamma(yf + 1.0) - k * ratio.ln_1p() + tail
}

/// Samples a reported ICU count for `state`.
pub fn observe<R: Rng + ?Sized>(state: &CompartmentState, params: &ModelParams, rng: &mut R) -> Observation {
    let y = sample_negbin(state.icu_load() as f64, params.k_obs, rng);
    Observation::new(state.day, y)
}

/// Mean-field observation: the expected count `H(t)` itself.
pub fn observe_mean(state: &CompartmentState) -> Observation {
    Observation::new(state.day, state.icu_load())
}

/// Log-likelihood of `obs` given `state`.
pub fn log_likelihood(obs: &Observation, state: &CompartmentState, params: &ModelParams) -> f64 {
    negbin_log_pmf(obs.y, state.icu_load() as f64, params.k_obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// pmf by the ratio recursion p(y+1)/p(y) = (y+k)/(y+1) * (1-p),
    /// independent of the log-gamma route.
    fn pmf_by_recursion(k: f64, mean: f64, upto: usize) -> Vec<f64> {
        let p = k / (k + mean);
        let mut out = Vec::with_capacity(upto + 1);
        let mut cur = p.powf(k);
        for y in 0..=upto {
            out.push(cur);
            cur *= (y as f64 + k) / (y as f64 + 1.0) * (1.0 - p);
        }
        out
    }

    #[test]
    fn empty_icu_gives_certain_zero() {
        let s = CompartmentState { s: 100, ..Default::default() };
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(observe(&s, &p, &mut rng).y, 0);
        }
        assert_eq!(log_likelihood(&Observation::new(0, 0), &s, &p), 0.0);
        assert_eq!(log_likelihood(&Observation::new(0, 5), &s, &p), LOG_WEIGHT_FLOOR);
    }

    #[test]
    fn log_pmf_matches_recursive_pmf() {
        let pmf = pmf_by_recursion(10.0, 100.0, 1_000_000);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "total mass {total}");
        for y in [0usize, 1, 50, 100, 101, 250, 1000] {
            let lhs = negbin_log_pmf(y as u64, 100.0, 10.0);
            assert!((lhs - pmf[y].ln()).abs() < 1e-9, "y={y}: {lhs} vs {}", pmf[y].ln());
        }
    }

    #[test]
    fn log_pmf_is_finite_for_large_counts() {
        for y in [0u64, 10, 1_000_000, 100_000_000] {
            assert!(negbin_log_pmf(y, 3.0, 10.0).is_finite());
        }
    }
}

//! Nested SMC over the transmission rates: an outer weighted population of
//! `beta` vectors, each carrying a bootstrap filter over latent states.
//!
//! Each assimilated day multiplies the outer weights by the inner filters'
//! likelihood-increment estimates. When the outer ESS falls below
//! `ess_threshold * N_theta`, the population is resampled and every
//! particle is moved by a few particle-marginal Metropolis-Hastings steps
//! whose likelihood comes from a fresh inner filter run over the whole
//! assimilated history.

use log::{debug, warn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{advance, run_filter, sample_index, InnerParticleSet, SeirvuModel};
use super::prior::PriorSpec;
use super::resample::{ess, normalize_log_weights, systematic_resample, weighted_quantile};
use crate::error::{Error, Result};
use crate::model::{ActionLevel, Betas, CompartmentState, ModelParams, Observation, VaccinationStream, LOG_WEIGHT_FLOOR};
use crate::rng::Seeder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Smc2Config {
    pub n_theta: usize,
    pub n_x: usize,
    /// Outer resample-move trigger as a fraction of `n_theta`.
    pub ess_threshold: f64,
    /// Inner resampling trigger as a fraction of `n_x`.
    pub inner_ess_threshold: f64,
    pub pmmh_moves: usize,
    /// Random-walk covariance as a multiple of the weighted cloud covariance
    /// of `ln(beta)`.
    pub proposal_scale: f64,
    /// Variance added to the proposal diagonal so collapsed clouds can move.
    pub proposal_floor: f64,
    pub prior: PriorSpec,
}

impl Default for Smc2Config {
    fn default() -> Self {
        Smc2Config {
            n_theta: 500,
            n_x: 200,
            ess_threshold: 0.5,
            inner_ess_threshold: 0.5,
            pmmh_moves: 3,
            proposal_scale: 0.5,
            proposal_floor: 1e-4,
            prior: PriorSpec::default(),
        }
    }
}

impl Smc2Config {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 || self.n_x == 0 {
            return Err(Error::InvalidConfig("particle counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) || !(0.0..=1.0).contains(&self.inner_ess_threshold) {
            return Err(Error::InvalidConfig("ESS thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Smc2Diagnostics {
    pub rejuvenations: u32,
    /// Acceptance rate of the most recent resample-move.
    pub last_acceptance: Option<f64>,
    /// Outer ESS after each assimilated day, before any resampling.
    pub ess_trace: Vec<f64>,
}

/// Weighted posterior over `(beta, x_t)` after assimilating days up to `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorCloud {
    /// Fixed parameters shared by every particle; only `beta` varies.
    pub base: ModelParams,
    pub thetas: Vec<Betas>,
    pub weights: Vec<f64>,
    pub inner: Vec<InnerParticleSet<CompartmentState>>,
    /// Last assimilated day.
    pub t: u32,
    pub initial: CompartmentState,
    /// Every assimilated observation with the action in force on the
    /// preceding day.
    pub history: Vec<(Observation, ActionLevel)>,
    pub config: Smc2Config,
    pub diagnostics: Smc2Diagnostics,
}

impl PosteriorCloud {
    /// Draws `n_theta` parameter particles from the prior; every inner
    /// filter starts as a point mass at `initial`.
    pub fn from_prior<R: Rng + ?Sized>(
        base: &ModelParams,
        initial: CompartmentState,
        config: &Smc2Config,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        base.validate()?;
        let n = config.n_theta;
        let thetas = (0..n).map(|_| config.prior.sample(rng)).collect();
        Ok(PosteriorCloud {
            base: base.clone(),
            thetas,
            weights: vec![1.0 / n as f64; n],
            inner: vec![InnerParticleSet::from_point(initial, config.n_x); n],
            t: initial.day,
            initial,
            history: Vec::new(),
            config: config.clone(),
            diagnostics: Smc2Diagnostics::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn params(&self, i: usize) -> ModelParams {
        self.base.with_beta(self.thetas[i])
    }

    pub fn ess(&self) -> f64 {
        ess(&self.weights)
    }

    /// Weighted quantiles of each `beta_j`; `out[q][j]`.
    pub fn beta_quantiles(&self, qs: &[f64]) -> Vec<[f64; 4]> {
        let cols: Vec<Vec<f64>> = (0..4).map(|j| self.thetas.iter().map(|b| b.0[j]).collect()).collect();
        qs.iter()
            .map(|&q| {
                let mut row = [0.0; 4];
                for (j, col) in cols.iter().enumerate() {
                    row[j] = weighted_quantile(col, &self.weights, q);
                }
                row
            })
            .collect()
    }

    /// Weighted mean and standard deviation of each `beta_j`.
    pub fn beta_moments(&self) -> [(f64, f64); 4] {
        let mut out = [(0.0, 0.0); 4];
        for (j, slot) in out.iter_mut().enumerate() {
            let mean: f64 = self.thetas.iter().zip(&self.weights).map(|(b, w)| w * b.0[j]).sum();
            let var: f64 = self.thetas.iter().zip(&self.weights).map(|(b, w)| w * (b.0[j] - mean).powi(2)).sum();
            *slot = (mean, var.max(0.0).sqrt());
        }
        out
    }

    /// Assimilates the observation for day `t + 1`; `action` is the action
    /// in force during day `t`.
    pub fn assimilate<R: Rng + ?Sized>(
        &self,
        obs: Observation,
        action: ActionLevel,
        vax: &VaccinationStream,
        rng: &mut R,
    ) -> Result<PosteriorCloud> {
        if obs.day != self.t + 1 {
            return Err(Error::DateMisalignment(format!(
                "observation for day {} but cloud assimilated to day {}",
                obs.day, self.t
            )));
        }
        let seeder = Seeder::from_rng(rng);
        let inner_ess = self.config.inner_ess_threshold;
        let steps: Vec<_> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let params = self.params(i);
                let model = SeirvuModel { params: &params, vax };
                let mut stream = seeder.stream(&[0, i as u64]);
                advance(&self.inner[i], &model, action, &obs, inner_ess, &mut stream)
            })
            .collect::<Result<_>>()?;

        if steps.iter().all(|s| s.degenerate) {
            return Err(Error::Degenerate { day: obs.day });
        }
        let log_w: Vec<f64> = self.weights.iter().zip(&steps).map(|(w, s)| w.ln() + s.increment).collect();
        let mut weights = Vec::with_capacity(log_w.len());
        normalize_log_weights(&log_w, &mut weights);

        let mut history = self.history.clone();
        history.push((obs, action));
        let mut diagnostics = self.diagnostics.clone();
        diagnostics.ess_trace.push(ess(&weights));

        let mut next = PosteriorCloud {
            base: self.base.clone(),
            thetas: self.thetas.clone(),
            weights,
            inner: steps.into_iter().map(|s| s.set).collect(),
            t: obs.day,
            initial: self.initial,
            history,
            config: self.config.clone(),
            diagnostics,
        };
        if next.ess() < self.config.ess_threshold * next.len() as f64 {
            next.resample_move(vax, seeder.child(&[1]))?;
        }
        Ok(next)
    }

    fn resample_move(&mut self, vax: &VaccinationStream, seeder: Seeder) -> Result<()> {
        let n = self.len();
        let chol = proposal_cholesky(&self.thetas, &self.weights, self.config.proposal_scale, self.config.proposal_floor);

        let mut rng = seeder.stream(&[0]);
        let idx = systematic_resample(&self.weights, n, &mut rng);
        let thetas: Vec<Betas> = idx.iter().map(|&i| self.thetas[i]).collect();
        let inner: Vec<_> = idx.iter().map(|&i| self.inner[i].clone()).collect();

        let cfg = &self.config;
        let base = &self.base;
        let initial = self.initial;
        let history = &self.history;
        let moved: Vec<(Betas, InnerParticleSet<CompartmentState>, usize)> = thetas
            .into_par_iter()
            .zip(inner)
            .enumerate()
            .map(|(i, (mut theta, mut set))| {
                let mut rng = seeder.stream(&[1, i as u64]);
                let mut accepted = 0;
                let mut log_beta = theta.log();
                let mut log_prior = cfg.prior.log_density_log_space(&log_beta);
                let mut log_lik = set.log_likelihood();
                for _ in 0..cfg.pmmh_moves {
                    let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                    let mut prop = log_beta;
                    for r in 0..4 {
                        for c in 0..=r {
                            prop[r] += chol[r][c] * z[c];
                        }
                    }
                    let prop_prior = cfg.prior.log_density_log_space(&prop);
                    if !prop_prior.is_finite() {
                        // Outside the ordered support; consume the uniform
                        // anyway so streams stay aligned across outcomes.
                        let _: f64 = rng.random();
                        continue;
                    }
                    let prop_theta = Betas(prop.map(f64::exp));
                    let params = base.with_beta(prop_theta);
                    let model = SeirvuModel { params: &params, vax };
                    let prop_set = run_filter(&initial, &model, history, cfg.n_x, cfg.inner_ess_threshold, &mut rng)?;
                    let prop_lik = prop_set.log_likelihood();
                    let log_alpha = prop_lik + prop_prior - log_lik - log_prior;
                    let u: f64 = rng.random();
                    if u.ln() < log_alpha {
                        theta = prop_theta;
                        set = prop_set;
                        log_beta = prop;
                        log_prior = prop_prior;
                        log_lik = prop_lik;
                        accepted += 1;
                    }
                }
                Ok((theta, set, accepted))
            })
            .collect::<Result<_>>()?;

        let total_accepted: usize = moved.iter().map(|m| m.2).sum();
        let rate = total_accepted as f64 / (n * cfg.pmmh_moves).max(1) as f64;
        if cfg.pmmh_moves > 0 && total_accepted == 0 {
            warn!("resample-move at day {}: no PMMH proposal accepted", self.t);
        }
        debug!("resample-move at day {}: acceptance {:.3}", self.t, rate);
        self.thetas = moved.iter().map(|m| m.0).collect();
        self.inner = moved.into_iter().map(|m| m.1).collect();
        self.weights = vec![1.0 / n as f64; n];
        self.diagnostics.rejuvenations += 1;
        self.diagnostics.last_acceptance = Some(rate);
        Ok(())
    }

    /// `k` independent draws of `(params, x_t)`: a parameter particle by
    /// outer weight, then a latent state from its filter by inner weight.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<(ModelParams, CompartmentState)> {
        (0..k)
            .map(|_| {
                let i = sample_index(&self.weights, rng);
                (self.params(i), *self.inner[i].sample(rng))
            })
            .collect()
    }

    /// Log-likelihood estimate carried by particle `i`.
    pub fn log_likelihood(&self, i: usize) -> f64 {
        self.inner[i].log_likelihood()
    }

    /// True when every parameter particle's filter rejected the data.
    pub fn is_degenerate(&self) -> bool {
        (0..self.len()).all(|i| self.log_likelihood(i) <= LOG_WEIGHT_FLOOR / 2.0)
    }
}

/// Lower Cholesky factor of `scale * Cov_w[ln beta] + floor * I`.
fn proposal_cholesky(thetas: &[Betas], weights: &[f64], scale: f64, floor: f64) -> [[f64; 4]; 4] {
    let logs: Vec<[f64; 4]> = thetas.iter().map(|b| b.log()).collect();
    let mut mean = [0.0; 4];
    for (l, w) in logs.iter().zip(weights) {
        for j in 0..4 {
            mean[j] += w * l[j];
        }
    }
    let mut cov = [[0.0; 4]; 4];
    for (l, w) in logs.iter().zip(weights) {
        for r in 0..4 {
            for c in 0..4 {
                cov[r][c] += w * (l[r] - mean[r]) * (l[c] - mean[c]);
            }
        }
    }
    for (r, row) in cov.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v *= scale;
        }
        row[r] += floor;
    }
    cholesky4(&cov)
}

fn cholesky4(a: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut l = [[0.0; 4]; 4];
    for r in 0..4 {
        for c in 0..=r {
            let s: f64 = (0..c).map(|k| l[r][k] * l[c][k]).sum();
            if r == c {
                l[r][c] = (a[r][r] - s).max(1e-300).sqrt();
            } else {
                l[r][c] = (a[r][c] - s) / l[c][c];
            }
        }
    }
    l
}

/// Free-function form of [`PosteriorCloud::assimilate`].
pub fn smc2_assimilate<R: Rng + ?Sized>(
    cloud: &PosteriorCloud,
    obs: Observation,
    action: ActionLevel,
    vax: &VaccinationStream,
    rng: &mut R,
) -> Result<PosteriorCloud> {
    cloud.assimilate(obs, action, vax, rng)
}

/// Free-function form of [`PosteriorCloud::sample_posterior`].
pub fn sample_posterior<R: Rng + ?Sized>(
    cloud: &PosteriorCloud,
    k: usize,
    rng: &mut R,
) -> Vec<(ModelParams, CompartmentState)> {
    cloud.sample_posterior(k, rng)
}

/// Initial belief for the decision period: a prior cloud that has
/// assimilated the warm-up window under the historical actions.
pub fn warm_start<R: Rng + ?Sized>(
    base: &ModelParams,
    initial: CompartmentState,
    config: &Smc2Config,
    window: &[(Observation, ActionLevel)],
    vax: &VaccinationStream,
    rng: &mut R,
) -> Result<PosteriorCloud> {
    let mut cloud = PosteriorCloud::from_prior(base, initial, config, rng)?;
    for &(obs, action) in window {
        cloud = cloud.assimilate(obs, action, vax, rng)?;
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> Smc2Config {
        Smc2Config { n_theta: 16, n_x: 8, ..Default::default() }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = [[4.0, 2.0, 0.4, 0.0], [2.0, 5.0, 1.0, 0.0], [0.4, 1.0, 3.0, 0.2], [0.0, 0.0, 0.2, 1.0]];
        let l = cholesky4(&a);
        for r in 0..4 {
            for c in 0..4 {
                let v: f64 = (0..4).map(|k| l[r][k] * l[c][k]).sum();
                assert!((v - a[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equal_increments_leave_weights_unchanged() {
        // No infection anywhere: every particle predicts y = 0 with certainty.
        let base = ModelParams::default().with_population(1000);
        let x0 = CompartmentState { s: 1000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cloud = PosteriorCloud::from_prior(&base, x0, &small_config(), &mut rng).unwrap();
        cloud.weights = (1..=16).map(|i| i as f64 / 136.0).collect();
        let next = cloud.assimilate(Observation::new(1, 0), ActionLevel::NONE, &VaccinationStream::zeros(5), &mut rng).unwrap();
        for (a, b) in cloud.weights.iter().zip(&next.weights) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(next.t, 1);
    }

    #[test]
    fn wrong_day_rejected() {
        let base = ModelParams::default().with_population(1000);
        let x0 = CompartmentState { s: 1000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cloud = PosteriorCloud::from_prior(&base, x0, &small_config(), &mut rng).unwrap();
        let r = cloud.assimilate(Observation::new(2, 0), ActionLevel::NONE, &VaccinationStream::zeros(5), &mut rng);
        assert!(matches!(r, Err(Error::DateMisalignment(_))));
    }

    #[test]
    fn single_theta_keeps_unit_weight() {
        let base = ModelParams::default().with_population(10_000);
        let x0 = CompartmentState::seeded(10_000, 100, 100).unwrap();
        let cfg = Smc2Config { n_theta: 1, n_x: 16, ess_threshold: 1.0, ..Default::default() };
        let vax = VaccinationStream::zeros(20);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cloud = PosteriorCloud::from_prior(&base, x0, &cfg, &mut rng).unwrap();
        for d in 1..=5 {
            cloud = cloud.assimilate(Observation::new(d, 10 * d as u64), ActionLevel::NONE, &vax, &mut rng).unwrap();
            assert_eq!(cloud.weights, vec![1.0]);
            assert!(cloud.thetas[0].is_ordered());
        }
    }

    #[test]
    fn point_mass_cloud_gives_identical_draws() {
        let base = ModelParams::default().with_population(1000);
        let x0 = CompartmentState { s: 990, i: 10, ..Default::default() };
        let cfg = Smc2Config { n_theta: 1, n_x: 1, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = PosteriorCloud::from_prior(&base, x0, &cfg, &mut rng).unwrap();
        let draws = cloud.sample_posterior(25, &mut rng);
        assert_eq!(draws.len(), 25);
        assert!(draws.iter().all(|d| d == &draws[0]));
    }

    #[test]
    fn warm_start_with_empty_window_is_prior() {
        let base = ModelParams::default().with_population(1000);
        let x0 = CompartmentState { s: 990, i: 10, ..Default::default() };
        let cloud = warm_start(&base, x0, &small_config(), &[], &VaccinationStream::zeros(1), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let prior = PosteriorCloud::from_prior(&base, x0, &small_config(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(cloud, prior);
    }
}

//! Bootstrap particle filter over a generic state-space model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::resample::{ess, normalize_log_weights, systematic_resample};
use crate::error::{Error, Result};
use crate::model::{self, ActionLevel, CompartmentState, ModelParams, Observation, VaccinationStream, LOG_WEIGHT_FLOOR};

/// Latent dynamics and observation density of a hidden Markov model.
pub trait StateSpaceModel {
    type State: Clone + Send + Sync;
    type Control: Copy;
    type Obs;

    fn propagate<R: Rng + ?Sized>(&self, x: &Self::State, u: Self::Control, rng: &mut R) -> Result<Self::State>;

    fn log_likelihood(&self, obs: &Self::Obs, x: &Self::State) -> f64;
}

/// SEIR-VU dynamics under one parameter value.
#[derive(Clone, Copy)]
pub struct SeirvuModel<'a> {
    pub params: &'a ModelParams,
    pub vax: &'a VaccinationStream,
}

impl StateSpaceModel for SeirvuModel<'_> {
    type State = CompartmentState;
    type Control = ActionLevel;
    type Obs = Observation;

    fn propagate<R: Rng + ?Sized>(&self, x: &CompartmentState, u: ActionLevel, rng: &mut R) -> Result<CompartmentState> {
        model::step(x, self.params, u, self.vax, rng)
    }

    fn log_likelihood(&self, obs: &Observation, x: &CompartmentState) -> f64 {
        model::log_likelihood(obs, x, self.params)
    }
}

/// Weighted particle approximation of the filtering distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerParticleSet<S> {
    pub particles: Vec<S>,
    pub weights: Vec<f64>,
    /// Per-step log-likelihood increment estimates, in assimilation order.
    pub increments: Vec<f64>,
}

impl<S: Clone> InnerParticleSet<S> {
    /// `n` equally weighted copies of `x0`.
    pub fn from_point(x0: S, n: usize) -> Self {
        assert!(n >= 1, "particle count must be positive");
        InnerParticleSet { particles: vec![x0; n], weights: vec![1.0 / n as f64; n], increments: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Cumulative log-likelihood estimate.
    pub fn log_likelihood(&self) -> f64 {
        self.increments.iter().sum()
    }

    pub fn ess(&self) -> f64 {
        ess(&self.weights)
    }

    /// Draws one particle proportionally to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &S {
        &self.particles[sample_index(&self.weights, rng)]
    }
}

/// Inverse-CDF draw of an index from normalised weights.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Result of one filter step; `degenerate` is set when the observation is
/// impossible under every particle.
#[derive(Debug, Clone)]
pub struct FilterStep<S> {
    pub set: InnerParticleSet<S>,
    pub increment: f64,
    pub degenerate: bool,
}

/// Propagates, reweights and (when ESS drops below `ess_fraction * N`)
/// systematically resamples. Never fails on degeneracy; see [`pf_step`].
pub fn advance<M: StateSpaceModel, R: Rng + ?Sized>(
    inner: &InnerParticleSet<M::State>,
    model: &M,
    u: M::Control,
    obs: &M::Obs,
    ess_fraction: f64,
    rng: &mut R,
) -> Result<FilterStep<M::State>> {
    let n = inner.len();
    let mut particles = Vec::with_capacity(n);
    let mut log_w = Vec::with_capacity(n);
    let mut degenerate = true;
    for (x, &w) in inner.particles.iter().zip(inner.weights.iter()) {
        let next = model.propagate(x, u, rng)?;
        let ll = model.log_likelihood(obs, &next);
        if ll > LOG_WEIGHT_FLOOR / 2.0 {
            degenerate = false;
        }
        log_w.push(w.ln() + ll);
        particles.push(next);
    }
    let mut weights = Vec::with_capacity(n);
    let increment = if degenerate {
        // Keep the cloud alive with its prior weights.
        weights.extend_from_slice(&inner.weights);
        LOG_WEIGHT_FLOOR
    } else {
        normalize_log_weights(&log_w, &mut weights)
    };

    if ess(&weights) < ess_fraction * n as f64 {
        let idx = systematic_resample(&weights, n, rng);
        particles = idx.iter().map(|&i| particles[i].clone()).collect();
        weights = vec![1.0 / n as f64; n];
    }
    let mut increments = inner.increments.clone();
    increments.push(increment);
    Ok(FilterStep { set: InnerParticleSet { particles, weights, increments }, increment, degenerate })
}

/// One bootstrap filter step. Returns the updated set and the estimate of
/// `log p(y_t | y_{0:t-1})`, or [`Error::Degenerate`] when no particle can
/// explain `obs`.
pub fn pf_step<M: StateSpaceModel, R: Rng + ?Sized>(
    inner: &InnerParticleSet<M::State>,
    model: &M,
    u: M::Control,
    obs: &M::Obs,
    day: u32,
    ess_fraction: f64,
    rng: &mut R,
) -> Result<(InnerParticleSet<M::State>, f64)> {
    let out = advance(inner, model, u, obs, ess_fraction, rng)?;
    if out.degenerate {
        return Err(Error::Degenerate { day });
    }
    Ok((out.set, out.increment))
}

/// Runs a fresh filter from a point mass over a whole history.
pub fn run_filter<M: StateSpaceModel, R: Rng + ?Sized>(
    x0: &M::State,
    model: &M,
    history: &[(M::Obs, M::Control)],
    n: usize,
    ess_fraction: f64,
    rng: &mut R,
) -> Result<InnerParticleSet<M::State>> {
    let mut set = InnerParticleSet::from_point(x0.clone(), n);
    for (obs, u) in history {
        set = advance(&set, model, *u, obs, ess_fraction, rng)?.set;
    }
    Ok(set)
}

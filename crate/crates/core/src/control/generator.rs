use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{observe, step, ActionLevel, CompartmentState, ModelParams, Observation, VaccinationStream};
use crate::rng::Seeder;
use crate::smc::{run_filter, weighted_quantile, PosteriorCloud, SeirvuModel, Smc2Config};

/// One possible "true world": parameters and the latent state on the first
/// decision day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDraw {
    pub params: ModelParams,
    pub start_state: CompartmentState,
}

/// Counterfactual environment fitted to an observed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub draws: Vec<WorldDraw>,
    /// Day-0 latent state, used when replaying the whole series.
    pub initial: CompartmentState,
    pub start_day: u32,
    pub vax: VaccinationStream,
}

impl GeneratorSpec {
    /// A generator that knows the truth exactly.
    pub fn from_truth(
        params: ModelParams,
        initial: CompartmentState,
        start_state: CompartmentState,
        vax: VaccinationStream,
    ) -> Self {
        GeneratorSpec {
            draws: vec![WorldDraw { params, start_state }],
            initial,
            start_day: start_state.day,
            vax,
        }
    }

    /// A uniformly chosen world.
    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &WorldDraw {
        &self.draws[rng.random_range(0..self.draws.len())]
    }
}

/// Pairs `(y_t, a_{t-1})` for days `1..ys.len()`, ready for assimilation.
pub fn observation_window(ys: &[u64], actions: &[ActionLevel]) -> Result<Vec<(Observation, ActionLevel)>> {
    if ys.is_empty() || actions.len() + 1 < ys.len() {
        return Err(Error::LengthMismatch { expected: ys.len().saturating_sub(1), got: actions.len() });
    }
    Ok((1..ys.len()).map(|t| (Observation::new(t as u32, ys[t]), actions[t - 1])).collect())
}

/// Fits the counterfactual generator to a full series.
///
/// `ys[t]` is the report on day `t` and `actions[t]` the action in force
/// during day `t`. Runs SMC^2 over the whole series, then for each of
/// `n_draws` posterior parameter draws filters the series up to
/// `start_day` with that parameter fixed and samples the latent state there.
#[allow(clippy::too_many_arguments)]
pub fn fit_generator(
    ys: &[u64],
    actions: &[ActionLevel],
    vax: &VaccinationStream,
    base: &ModelParams,
    initial: CompartmentState,
    smc2: &Smc2Config,
    start_day: u32,
    n_draws: usize,
    seeder: &Seeder,
) -> Result<(GeneratorSpec, PosteriorCloud)> {
    if n_draws == 0 {
        return Err(Error::InvalidConfig("generator needs at least one draw".into()));
    }
    if start_day as usize >= ys.len() {
        return Err(Error::InvalidConfig(format!("start day {start_day} outside a {}-day series", ys.len())));
    }
    let window = observation_window(ys, actions)?;
    let mut rng = seeder.stream(&[0]);
    let mut cloud = PosteriorCloud::from_prior(base, initial, smc2, &mut rng)?;
    for &(obs, a) in &window {
        cloud = cloud.assimilate(obs, a, vax, &mut rng)?;
    }
    let thetas: Vec<ModelParams> = cloud.sample_posterior(n_draws, &mut seeder.stream(&[1])).into_iter().map(|(p, _)| p).collect();
    let prefix = &window[..start_day as usize];
    let draws = thetas
        .into_par_iter()
        .enumerate()
        .map(|(i, params)| {
            let mut rng = seeder.stream(&[2, i as u64]);
            let model = SeirvuModel { params: &params, vax };
            let set = run_filter(&initial, &model, prefix, smc2.n_x, smc2.inner_ess_threshold, &mut rng)?;
            let start_state = *set.sample(&mut rng);
            Ok(WorldDraw { params, start_state })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((GeneratorSpec { draws, initial, start_day, vax: vax.clone() }, cloud))
}

/// Pointwise summary of simulated ICU occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBands {
    /// `mean[t]` etc. refer to day `t + 1`.
    pub mean: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
    /// Standard error of `mean`.
    pub std_err: Vec<f64>,
    pub paths: usize,
}

/// Simulates `n_paths` trajectories from day 0 under the recorded actions,
/// each with a uniformly drawn generator world, and summarises ICU
/// occupancy day by day.
pub fn validation_replay(
    generator: &GeneratorSpec,
    actions: &[ActionLevel],
    n_paths: usize,
    seeder: &Seeder,
) -> Result<ReplayBands> {
    if n_paths == 0 || actions.is_empty() {
        return Err(Error::InvalidConfig("replay needs at least one path and one day".into()));
    }
    let paths: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = seeder.stream(&[p as u64]);
            let params = generator.pick(&mut rng).params.clone();
            let mut x = generator.initial;
            let mut icu = Vec::with_capacity(actions.len());
            for &a in actions {
                x = step(&x, &params, a, &generator.vax, &mut rng)?;
                // Keep the stream aligned with a full simulate() call.
                let _ = observe(&x, &params, &mut rng);
                icu.push(x.icu_load() as f64);
            }
            Ok(icu)
        })
        .collect::<Result<_>>()?;

    let days = actions.len();
    let n = n_paths as f64;
    let uniform = vec![1.0 / n; n_paths];
    let mut bands = ReplayBands {
        mean: Vec::with_capacity(days),
        q05: Vec::with_capacity(days),
        q95: Vec::with_capacity(days),
        std_err: Vec::with_capacity(days),
        paths: n_paths,
    };
    let mut column = vec![0.0; n_paths];
    for t in 0..days {
        for (c, p) in column.iter_mut().zip(&paths) {
            *c = p[t];
        }
        let mean = column.iter().sum::<f64>() / n;
        let var = if n_paths > 1 { column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        bands.mean.push(mean);
        bands.std_err.push((var / n).sqrt());
        bands.q05.push(weighted_quantile(&column, &uniform, 0.05));
        bands.q95.push(weighted_quantile(&column, &uniform, 0.95));
    }
    Ok(bands)
}

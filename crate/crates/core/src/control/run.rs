use super::config::RunConfig;
use super::decision::{run_decision_loop, DecisionContext};
use super::generator::{fit_generator, GeneratorSpec};
use super::ingest::{ingest, DataSet};
use super::scenario::Scenario;
use super::trace::DecisionTrace;
use crate::error::{Error, Result};
use crate::model::ActionLevel;
use crate::rng::{tag, Seeder};
use crate::smc::PosteriorCloud;

/// Inputs of a decision run: the world generator and what is known at the
/// start of the decision period.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub generator: GeneratorSpec,
    pub context: DecisionContext,
    /// The whole recorded series: reports for days `0..=n` and the actions
    /// in force during days `0..n`.
    pub reports: Vec<u64>,
    pub actions: Vec<ActionLevel>,
    /// Full-series posterior behind a fitted generator.
    pub posterior: Option<PosteriorCloud>,
    /// The synthetic world, when no data directory is configured.
    pub scenario: Option<Scenario>,
}

/// Builds the generator from the configured data directory, fitting it by
/// SMC^2, or from the synthetic scenario, whose true parameters then drive
/// the world.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    prepare_with(cfg, None)
}

/// Like [`prepare`], but a given generator replaces the fitted or true one.
pub fn prepare_with(cfg: &RunConfig, generator: Option<GeneratorSpec>) -> Result<Prepared> {
    cfg.validate()?;
    match &cfg.data {
        Some(paths) => {
            let data = ingest(&paths.dir)?;
            match generator {
                Some(g) => with_generator(cfg, &data, paths.warmup_days, g),
                None => prepare_from_data(cfg, &data, paths.warmup_days),
            }
        }
        None => {
            let scenario = Scenario::generate(&cfg.scenario, cfg.seed)?;
            Ok(Prepared {
                generator: generator.unwrap_or_else(|| scenario.true_generator()),
                context: scenario.context(),
                reports: scenario.reports.clone(),
                actions: scenario.actions.clone(),
                posterior: None,
                scenario: Some(scenario),
            })
        }
    }
}

/// Fits a generator to `data` with the decision period opening on day
/// `warmup_days`.
pub fn prepare_from_data(cfg: &RunConfig, data: &DataSet, warmup_days: usize) -> Result<Prepared> {
    check_length(cfg, data, warmup_days)?;
    let initial = cfg.initial.state(cfg.model.population)?;
    let actions = &data.actions[..data.len() - 1];
    let (generator, cloud) = fit_generator(
        &data.icu,
        actions,
        &data.vax,
        &cfg.model,
        initial,
        &cfg.smc2,
        warmup_days as u32,
        cfg.posterior_draws.max(cfg.replicates),
        &Seeder::new(cfg.seed).child(&[tag::GENERATOR]),
    )?;
    let mut prepared = with_generator(cfg, data, warmup_days, generator)?;
    prepared.posterior = Some(cloud);
    Ok(prepared)
}

fn check_length(cfg: &RunConfig, data: &DataSet, warmup_days: usize) -> Result<()> {
    let n = data.len();
    if warmup_days == 0 || warmup_days + cfg.horizon_days >= n {
        return Err(Error::InvalidConfig(format!(
            "{n} days of data cannot hold {warmup_days} warm-up days plus a {}-day horizon",
            cfg.horizon_days
        )));
    }
    Ok(())
}

fn with_generator(cfg: &RunConfig, data: &DataSet, warmup_days: usize, generator: GeneratorSpec) -> Result<Prepared> {
    check_length(cfg, data, warmup_days)?;
    let actions = &data.actions[..data.len() - 1];
    let context = DecisionContext {
        past_reports: data.icu[..=warmup_days].to_vec(),
        past_actions: actions[..warmup_days].to_vec(),
        historical: actions[warmup_days..].to_vec(),
        initial: generator.initial,
        vax: data.vax.clone(),
    };
    Ok(Prepared {
        generator,
        context,
        reports: data.icu.clone(),
        actions: actions.to_vec(),
        posterior: None,
        scenario: None,
    })
}

/// Runs `cfg.replicates` decision loops; replicate `r` uses seed
/// `cfg.seed + r`. The warm-start posterior depends only on the
/// pre-decision data and is computed once.
pub fn run_replicates(cfg: &RunConfig, prepared: &Prepared) -> Result<Vec<DecisionTrace>> {
    let warm = if cfg.planner.needs_posterior() || cfg.track_posterior {
        Some(prepared.context.warm_start(cfg, &Seeder::new(cfg.seed))?)
    } else {
        None
    };
    (0..cfg.replicates as u64)
        .map(|r| {
            let rep = RunConfig { seed: cfg.seed.wrapping_add(r), ..cfg.clone() };
            log::info!("{} replicate {}/{}", cfg.planner, r + 1, cfg.replicates);
            run_decision_loop(&rep, &prepared.generator, &prepared.context, warm.clone())
        })
        .collect()
}

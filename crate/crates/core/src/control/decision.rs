use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{PlannerKind, RunConfig};
use super::generator::{observation_window, GeneratorSpec};
use super::trace::{BlockRecord, DayRecord, DecisionTrace, PlanArtifact};
use crate::error::{Error, Result};
use crate::model::{observe, observe_mean, step, ActionLevel, CompartmentState, ModelParams, Observation, VaccinationStream};
use crate::qlearn::{
    convergence_check, select_block_action, train_posterior_averaged, warm_up_table, BinScheme, NaiveQ, QTable,
    SeirSliceEnv,
};
use crate::reward::{reward, StreakCounter};
use crate::rng::{tag, Seeder};
use crate::smc::{warm_start, PosteriorCloud};
use crate::threshold::{plan_block, threshold_policy, BlockDraws, ThresholdTriple};

/// What is known when the decision period opens on day `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionContext {
    /// Reports for days `0..=t0`.
    pub past_reports: Vec<u64>,
    /// Actions in force during days `0..t0`.
    pub past_actions: Vec<ActionLevel>,
    /// Recorded actions for the decision period, used by the historical
    /// planner.
    pub historical: Vec<ActionLevel>,
    /// Day-0 latent state assumed by the posterior.
    pub initial: CompartmentState,
    /// Vaccinations by absolute day.
    pub vax: VaccinationStream,
}

impl DecisionContext {
    pub fn start_day(&self) -> u32 {
        self.past_actions.len() as u32
    }

    fn validate(&self, cfg: &RunConfig) -> Result<()> {
        if self.past_reports.len() != self.past_actions.len() + 1 {
            return Err(Error::LengthMismatch { expected: self.past_actions.len() + 1, got: self.past_reports.len() });
        }
        if self.historical.len() < cfg.horizon_days {
            return Err(Error::LengthMismatch { expected: cfg.horizon_days, got: self.historical.len() });
        }
        if self.initial.total() != cfg.model.population {
            return Err(Error::InvalidConfig(format!(
                "initial state holds {} people but the population is {}",
                self.initial.total(),
                cfg.model.population
            )));
        }
        Ok(())
    }

    /// Posterior after the pre-decision reports.
    pub fn warm_start(&self, cfg: &RunConfig, seeder: &Seeder) -> Result<PosteriorCloud> {
        let window = observation_window(&self.past_reports, &self.past_actions)?;
        warm_start(&cfg.model, self.initial, &cfg.smc2, &window, &self.vax, &mut seeder.stream(&[tag::WARM_START]))
    }
}

/// The planner's proposal for the current block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub block: usize,
    pub day: u32,
    pub action: ActionLevel,
    pub artifact: PlanArtifact,
    pub beta_quantiles: Option<[[f64; 4]; 3]>,
    /// Planner state to adopt if this block is deployed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    commit: Option<Commit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Commit {
    Phi(ThresholdTriple),
    Table(QTable),
}

/// Block-by-block decision process against a counterfactual world.
///
/// [`recommend`](Self::recommend) plans the current block without changing
/// anything observable; [`advance`](Self::advance) deploys an action for one
/// block, assimilates the new reports and moves on. Every random quantity is
/// drawn from a stream keyed by the seed, a purpose tag and the block index,
/// so runs are reproducible whatever the planner or override pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLoop {
    cfg: RunConfig,
    generator: GeneratorSpec,
    vax: VaccinationStream,
    historical: Vec<ActionLevel>,
    bins: BinScheme,
    world_params: ModelParams,
    world_state: CompartmentState,
    y: u64,
    day: u32,
    start_day: u32,
    block: usize,
    streak: StreakCounter,
    cloud: Option<PosteriorCloud>,
    prev_phi: Option<ThresholdTriple>,
    q_bar: Option<QTable>,
    naive: Option<NaiveQ>,
    trace: DecisionTrace,
    pending: Option<Recommendation>,
}

impl DecisionLoop {
    /// Opens the decision period. `warm` may carry a posterior already
    /// warm-started from `ctx`; otherwise one is computed when needed.
    pub fn new(
        cfg: &RunConfig,
        generator: &GeneratorSpec,
        ctx: &DecisionContext,
        warm: Option<PosteriorCloud>,
    ) -> Result<Self> {
        cfg.validate()?;
        ctx.validate(cfg)?;
        let start_day = ctx.start_day();
        if generator.start_day != start_day {
            return Err(Error::DateMisalignment(format!(
                "generator starts on day {} but the decision period opens on day {start_day}",
                generator.start_day
            )));
        }
        if generator.draws.is_empty() {
            return Err(Error::InvalidConfig("generator has no worlds".into()));
        }
        let seeder = Seeder::new(cfg.seed);
        let bins = cfg.qlearn.bin_scheme()?;
        let cloud = if cfg.planner.needs_posterior() || cfg.track_posterior {
            let cloud = match warm {
                Some(c) => c,
                None => ctx.warm_start(cfg, &seeder)?,
            };
            if cloud.t != start_day {
                return Err(Error::DateMisalignment(format!(
                    "posterior assimilated to day {} but the decision period opens on day {start_day}",
                    cloud.t
                )));
            }
            Some(cloud)
        } else {
            None
        };
        let q_bar = match cfg.planner {
            PlannerKind::Qlearn => Some(warm_up_table(
                &ctx.past_reports,
                &ctx.past_actions,
                &bins,
                cfg.delta,
                &cfg.reward,
                &cfg.qlearn.schedule,
            )?),
            _ => None,
        };
        let naive = match cfg.planner {
            PlannerKind::NaiveQ => {
                let schedule = crate::qlearn::LearnSchedule { episodes: cfg.blocks(), ..cfg.qlearn.schedule.clone() };
                Some(NaiveQ::new(bins.clone(), schedule, cfg.reward.gamma))
            }
            _ => None,
        };
        let world = generator.pick(&mut seeder.stream(&[tag::GENERATOR])).clone();
        let needed = start_day as usize + cfg.horizon_days + cfg.lookahead + 1;
        Ok(DecisionLoop {
            cfg: cfg.clone(),
            generator: generator.clone(),
            vax: ctx.vax.padded_to(needed),
            historical: ctx.historical[..cfg.horizon_days].to_vec(),
            bins,
            world_params: world.params,
            world_state: world.start_state,
            y: *ctx.past_reports.last().expect("validated non-empty"),
            day: start_day,
            start_day,
            block: 0,
            streak: StreakCounter::from_history(&ctx.past_actions),
            cloud,
            prev_phi: None,
            q_bar,
            naive,
            trace: DecisionTrace { planner: cfg.planner, seed: cfg.seed, ..Default::default() },
            pending: None,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn trace(&self) -> &DecisionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> DecisionTrace {
        self.trace
    }

    pub fn cloud(&self) -> Option<&PosteriorCloud> {
        self.cloud.as_ref()
    }

    /// Averaged table carried into the next block (Q-learning planner).
    pub fn q_table(&self) -> Option<&QTable> {
        self.q_bar.as_ref()
    }

    /// Table of the naive single-trajectory learner.
    pub fn naive(&self) -> Option<&NaiveQ> {
        self.naive.as_ref()
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    /// Report on the current day.
    pub fn current_report(&self) -> u64 {
        self.y
    }

    pub fn streak(&self) -> StreakCounter {
        self.streak
    }

    pub fn vax(&self) -> &VaccinationStream {
        &self.vax
    }

    pub fn is_finished(&self) -> bool {
        self.block >= self.cfg.blocks()
    }

    pub fn pending(&self) -> Option<&Recommendation> {
        self.pending.as_ref()
    }

    fn seeder(&self) -> Seeder {
        Seeder::new(self.cfg.seed)
    }

    fn beta_quantiles(&self) -> Option<[[f64; 4]; 3]> {
        self.cloud.as_ref().map(|c| {
            let q = c.beta_quantiles(&[0.05, 0.5, 0.95]);
            [q[0], q[1], q[2]]
        })
    }

    fn posterior_draws(&self, seeder: &Seeder) -> Result<Vec<(ModelParams, CompartmentState)>> {
        let cloud = self.cloud.as_ref().ok_or_else(|| Error::InvalidConfig("planner needs a posterior".into()))?;
        Ok(cloud.sample_posterior(self.cfg.posterior_draws, &mut seeder.stream(&[0])))
    }

    /// Plans the current block (cached until the block is deployed).
    pub fn recommend(&mut self) -> Result<&Recommendation> {
        if self.is_finished() {
            return Err(Error::WrongStatus("decision period is over".into()));
        }
        if self.pending.is_none() {
            let rec = self.plan()?;
            self.pending = Some(rec);
        }
        Ok(self.pending.as_ref().expect("just set"))
    }

    fn plan(&self) -> Result<Recommendation> {
        let cfg = &self.cfg;
        let seeder = self.seeder().child(&[tag::PLAN, self.block as u64]);
        let (action, artifact, commit) = match cfg.planner {
            PlannerKind::Threshold => {
                let draws = self.posterior_draws(&seeder)?;
                let block = BlockDraws { draws: &draws, y0: self.y, streak: self.streak };
                let grid = cfg.threshold_planner.grid()?;
                let plan = plan_block(
                    &block,
                    &grid,
                    self.prev_phi.as_ref(),
                    cfg.lookahead,
                    &cfg.reward,
                    &self.vax,
                    cfg.threshold_planner.mode,
                    &seeder.child(&[1]),
                )?;
                let action = threshold_policy(self.y, &plan.phi);
                let artifact =
                    PlanArtifact::Threshold { phi: plan.phi, value: plan.value, candidates: plan.candidates_evaluated };
                (action, artifact, Some(Commit::Phi(plan.phi)))
            }
            PlannerKind::Qlearn => {
                let draws = self.posterior_draws(&seeder)?;
                let envs: Vec<SeirSliceEnv<'_>> = draws
                    .iter()
                    .map(|(params, x0)| SeirSliceEnv {
                        params: params.clone(),
                        x0: *x0,
                        y0: self.y,
                        streak0: self.streak,
                        delta: cfg.delta,
                        vax: &self.vax,
                        reward: &cfg.reward,
                        bins: &self.bins,
                    })
                    .collect();
                let mut q_start = self.q_bar.clone().expect("q-learning planner keeps a table");
                q_start.reset_visits();
                let out = train_posterior_averaged(
                    &envs,
                    &q_start,
                    &cfg.qlearn.schedule,
                    cfg.slices(),
                    cfg.reward.gamma,
                    &seeder.child(&[1]),
                )?;
                let y = Observation::new(self.day, self.y);
                let action = select_block_action(&out.average, &y, &self.bins);
                let artifact = PlanArtifact::Qlearn {
                    row: out.average.row(self.bins.bin_of(self.y)).to_vec(),
                    converged_at: convergence_check(&out.report, &cfg.qlearn.stopping),
                    max_delta_q: out.report.max_delta_q,
                };
                (action, artifact, Some(Commit::Table(out.average)))
            }
            PlannerKind::Random => {
                let mut rng = self.seeder().stream(&[tag::POLICY, self.block as u64]);
                (ActionLevel::from_index(rng.random_range(0..ActionLevel::COUNT)), PlanArtifact::Random, None)
            }
            PlannerKind::Historical => (self.historical[self.block * cfg.delta], PlanArtifact::Historical, None),
            PlannerKind::NaiveQ => {
                let naive = self.naive.as_ref().expect("naive planner keeps a table");
                let mut rng = self.seeder().stream(&[tag::POLICY, self.block as u64]);
                let action = naive.decide(self.y, &mut rng);
                let row = naive.table.row(self.bins.bin_of(self.y)).to_vec();
                (action, PlanArtifact::NaiveQ { row }, None)
            }
        };
        Ok(Recommendation {
            block: self.block,
            day: self.day,
            action,
            artifact,
            beta_quantiles: self.beta_quantiles(),
            commit,
        })
    }

    /// Deploys the recommendation (`None`) or an override for one block.
    /// Overriding with the recommended action counts as accepting it.
    pub fn advance(&mut self, choice: Option<ActionLevel>) -> Result<()> {
        let rec = self.recommend()?.clone();
        let overridden = choice.is_some_and(|a| a != rec.action);
        let deployed = choice.unwrap_or(rec.action);
        let cfg = self.cfg.clone();
        let seeder = self.seeder();

        if cfg.redraw_world_per_block && self.block > 0 {
            let mut rng = seeder.stream(&[tag::GENERATOR, self.block as u64]);
            self.world_params = self.generator.pick(&mut rng).params.clone();
        }
        let mut world_rng = seeder.stream(&[tag::WORLD, self.block as u64]);
        let y_start = self.y;
        let mut block_reward = 0.0;
        let mut new_obs = Vec::with_capacity(cfg.delta);
        for i in 0..cfg.delta {
            let a = if cfg.planner == PlannerKind::Historical && !overridden {
                self.historical[self.block * cfg.delta + i]
            } else {
                deployed
            };
            self.streak = self.streak.update(a);
            let ell = self.streak.ell();
            let r = reward(self.y, a, ell, &cfg.reward);
            block_reward += r;
            self.trace.days.push(DayRecord {
                day: self.day,
                y: self.y,
                bin: self.bins.bin_of(self.y),
                action: a,
                ell,
                reward: r,
                icu: self.world_state.icu_load(),
            });
            self.world_state = step(&self.world_state, &self.world_params, a, &self.vax, &mut world_rng)?;
            self.y = if cfg.observation_noise {
                observe(&self.world_state, &self.world_params, &mut world_rng).y
            } else {
                observe_mean(&self.world_state).y
            };
            self.day += 1;
            new_obs.push((Observation::new(self.day, self.y), a));
        }

        if let Some(cloud) = &self.cloud {
            let mut rng = seeder.stream(&[tag::ASSIMILATE, self.block as u64]);
            let mut next = cloud.clone();
            for &(obs, a) in &new_obs {
                next = next.assimilate(obs, a, &self.vax, &mut rng)?;
            }
            self.cloud = Some(next);
        }
        if let Some(naive) = &mut self.naive {
            naive.record_block(y_start, deployed, block_reward, self.y);
        }
        match rec.commit {
            Some(Commit::Phi(phi)) => self.prev_phi = Some(phi),
            Some(Commit::Table(q)) => self.q_bar = Some(q),
            None => {}
        }
        self.trace.blocks.push(BlockRecord {
            block: rec.block,
            start_day: rec.day,
            recommended: rec.action,
            deployed,
            overridden,
            artifact: rec.artifact,
            beta_quantiles: rec.beta_quantiles,
        });
        self.block += 1;
        self.pending = None;
        Ok(())
    }

    /// Accepts every recommendation until the horizon.
    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.advance(None)?;
        }
        Ok(())
    }
}

/// Runs one replicate of the decision loop with every recommendation
/// accepted.
pub fn run_decision_loop(
    cfg: &RunConfig,
    generator: &GeneratorSpec,
    ctx: &DecisionContext,
    warm: Option<PosteriorCloud>,
) -> Result<DecisionTrace> {
    let mut lp = DecisionLoop::new(cfg, generator, ctx, warm)?;
    lp.run_to_end()?;
    Ok(lp.into_trace())
}

use serde::{Deserialize, Serialize};

use chrono::NaiveDate;

use super::decision::DecisionContext;
use super::generator::GeneratorSpec;
use super::ingest::DataSet;
use crate::error::{Error, Result};
use crate::model::{observe, simulate, ActionLevel, Betas, CompartmentState, ModelParams, VaccinationStream};
use crate::rng::Seeder;

/// A synthetic world with known transmission rates: a warm-up period under
/// a fixed action schedule followed by a decision period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub population: u64,
    pub exposed: u64,
    pub infectious: u64,
    pub beta: [f64; 4],
    pub warmup_days: usize,
    pub horizon_days: usize,
    /// `(days, level)` phases covering the warm-up and then the decision
    /// period; the last phase is extended as needed.
    pub action_phases: Vec<(usize, u8)>,
    /// First day, relative to the decision start, of the vaccination
    /// campaign, and the daily first and second doses per 100k people.
    pub vaccination_start: usize,
    pub first_doses_per_100k: u64,
    pub second_doses_per_100k: u64,
    /// Days between first and second doses starting.
    pub second_dose_lag: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self::desk()
    }
}

impl ScenarioSpec {
    /// The laptop-scale benchmark world.
    pub fn desk() -> Self {
        ScenarioSpec {
            population: 100_000,
            exposed: 100,
            infectious: 100,
            beta: [0.45, 0.32, 0.2, 0.1],
            warmup_days: 60,
            horizon_days: 120,
            action_phases: vec![(30, 1), (30, 2), (30, 3), (30, 2), (30, 4), (30, 2)],
            vaccination_start: 40,
            first_doses_per_100k: 150,
            second_doses_per_100k: 150,
            second_dose_lag: 40,
        }
    }

    /// The same world at another population size and decision horizon;
    /// seeds and doses keep their per-capita rates.
    pub fn scaled(&self, population: u64, horizon_days: usize) -> Self {
        let f = population as f64 / self.population as f64;
        let scale = |n: u64| ((n as f64 * f).round() as u64).max(1);
        ScenarioSpec {
            population,
            exposed: scale(self.exposed),
            infectious: scale(self.infectious),
            horizon_days,
            ..self.clone()
        }
    }

    pub fn truth(&self) -> Result<ModelParams> {
        let params = ModelParams::default().with_population(self.population).with_beta(Betas::new(self.beta)?);
        params.validate()?;
        Ok(params)
    }

    fn actions(&self, days: usize) -> Result<Vec<ActionLevel>> {
        let mut out = Vec::with_capacity(days);
        for &(len, level) in &self.action_phases {
            let a = ActionLevel::new(level as i64)?;
            out.extend(std::iter::repeat_n(a, len));
        }
        let last = *out.last().ok_or_else(|| Error::InvalidConfig("scenario needs at least one action phase".into()))?;
        out.resize(days, last);
        Ok(out)
    }

    fn vaccination(&self, days: usize) -> VaccinationStream {
        let scale = |per: u64| (per as f64 * self.population as f64 / 1e5).round() as u64;
        let start = self.warmup_days + self.vaccination_start;
        let first = (0..days).map(|d| if d >= start { scale(self.first_doses_per_100k) } else { 0 }).collect();
        let second =
            (0..days).map(|d| if d >= start + self.second_dose_lag { scale(self.second_doses_per_100k) } else { 0 }).collect();
        VaccinationStream::new(first, second).expect("equal lengths")
    }
}

/// One realisation of a [`ScenarioSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub truth: ModelParams,
    pub initial: CompartmentState,
    /// Latent states for days `0..=warmup + horizon`.
    pub states: Vec<CompartmentState>,
    /// Reports for days `0..=warmup + horizon`.
    pub reports: Vec<u64>,
    /// Actions in force during days `0..warmup + horizon`.
    pub actions: Vec<ActionLevel>,
    pub vax: VaccinationStream,
}

impl Scenario {
    pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<Self> {
        let truth = spec.truth()?;
        let initial = CompartmentState::seeded(spec.population, spec.exposed, spec.infectious)?;
        let days = spec.warmup_days + spec.horizon_days;
        if spec.warmup_days == 0 || spec.horizon_days == 0 {
            return Err(Error::InvalidConfig("scenario needs warm-up and decision days".into()));
        }
        let actions = spec.actions(days)?;
        let vax = spec.vaccination(days + 1);
        let mut rng = Seeder::new(seed).stream(&[0]);
        let y0 = observe(&initial, &truth, &mut rng).y;
        let traj = simulate(&initial, &truth, &actions, &vax, days, &mut rng)?;
        let mut states = vec![initial];
        states.extend(traj.states);
        let mut reports = vec![y0];
        reports.extend(traj.observations.iter().map(|o| o.y));
        Ok(Scenario { spec: spec.clone(), truth, initial, states, reports, actions, vax })
    }

    pub fn start_day(&self) -> usize {
        self.spec.warmup_days
    }

    /// What a decision maker knows at the start of the decision period.
    pub fn context(&self) -> DecisionContext {
        let t0 = self.start_day();
        DecisionContext {
            past_reports: self.reports[..=t0].to_vec(),
            past_actions: self.actions[..t0].to_vec(),
            historical: self.actions[t0..].to_vec(),
            initial: self.initial,
            vax: self.vax.clone(),
        }
    }

    /// The series as it would arrive from surveillance files dated from
    /// `start`. The action on the last day repeats the one before it.
    pub fn dataset(&self, start: NaiveDate) -> DataSet {
        let mut actions = self.actions.clone();
        actions.push(*self.actions.last().expect("scenario has actions"));
        DataSet { start, icu: self.reports.clone(), vax: self.vax.clone(), actions }
    }

    /// Generator that replays the true parameters from the true state at
    /// the decision start.
    pub fn true_generator(&self) -> GeneratorSpec {
        GeneratorSpec::from_truth(self.truth.clone(), self.initial, self.states[self.start_day()], self.vax.clone())
    }
}

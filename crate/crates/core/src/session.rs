//! Interactive decision sessions: a [`DecisionLoop`] that advances one block
//! at a time on request, with what-if forecasts and checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::statistics::{Data, OrderStatistics};

use crate::control::{BlockRecord, DayRecord, DecisionContext, DecisionLoop, GeneratorSpec, PlanArtifact, RunConfig};
use crate::error::{Error, Result};
use crate::model::{observe, step, ActionLevel};
use crate::qlearn::QTable;
use crate::reward::reward;
use crate::rng::{tag, Seeder};
use crate::smc::PosteriorCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingDecision,
    Advancing,
    Finished,
}

/// What to deploy for the next block: the recommendation or an explicit
/// level. Serialises as `"recommended"` or a number `1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepChoice {
    Recommended,
    Override(ActionLevel),
}

impl StepChoice {
    fn as_option(self) -> Option<ActionLevel> {
        match self {
            StepChoice::Recommended => None,
            StepChoice::Override(a) => Some(a),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ChoiceRepr {
    Level(i64),
    Word(String),
}

impl Serialize for StepChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepChoice::Recommended => ChoiceRepr::Word("recommended".into()),
            StepChoice::Override(a) => ChoiceRepr::Level(a.level() as i64),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match ChoiceRepr::deserialize(d)? {
            ChoiceRepr::Word(w) if w == "recommended" => Ok(StepChoice::Recommended),
            ChoiceRepr::Word(w) => Err(D::Error::custom(format!("expected \"recommended\" or 1..=4, got \"{w}\""))),
            ChoiceRepr::Level(l) => ActionLevel::new(l).map(StepChoice::Override).map_err(D::Error::custom),
        }
    }
}

/// 5%, 50% and 95% posterior quantiles of each transmission rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBands {
    pub q05: [f64; 4],
    pub q50: [f64; 4],
    pub q95: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationView {
    pub block: usize,
    pub day: u32,
    pub action: ActionLevel,
    pub artifact: PlanArtifact,
}

/// Everything a client needs to render a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub status: SessionStatus,
    pub planner: String,
    pub seed: u64,
    pub day: u32,
    pub block: usize,
    pub blocks_total: usize,
    pub delta: usize,
    pub current_report: u64,
    pub total_reward: f64,
    pub days: Vec<DayRecord>,
    pub blocks: Vec<BlockRecord>,
    pub recommendation: Option<RecommendationView>,
    pub beta: Option<BetaBands>,
}

/// Forecast under one action held fixed over the look-ahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionForecast {
    pub action: ActionLevel,
    /// Daily ICU occupancy quantiles, day 0 being today.
    pub icu_q05: Vec<f64>,
    pub icu_q50: Vec<f64>,
    pub icu_q95: Vec<f64>,
    pub expected_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub day: u32,
    pub horizon: usize,
    pub draws: usize,
    pub forecasts: Vec<ActionForecast>,
}

/// A decision loop driven one block at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    status: SessionStatus,
    lp: DecisionLoop,
}

/// A step detached from its session so it can run without holding a lock.
#[derive(Debug, Clone)]
pub struct StepJob {
    lp: DecisionLoop,
    choice: StepChoice,
}

impl StepJob {
    /// Deploys the choice and plans the following block.
    pub fn run(mut self) -> Result<DecisionLoop> {
        self.lp.advance(self.choice.as_option())?;
        if !self.lp.is_finished() {
            self.lp.recommend()?;
        }
        Ok(self.lp)
    }
}

impl Session {
    /// Opens a session and plans its first block. The posterior is always
    /// tracked so the view can show it.
    pub fn create(
        id: impl Into<String>,
        cfg: &RunConfig,
        generator: &GeneratorSpec,
        ctx: &DecisionContext,
        warm: Option<PosteriorCloud>,
    ) -> Result<Self> {
        let cfg = RunConfig { track_posterior: true, ..cfg.clone() };
        let mut lp = DecisionLoop::new(&cfg, generator, ctx, warm)?;
        lp.recommend()?;
        Ok(Session { id: id.into(), status: SessionStatus::AwaitingDecision, lp })
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn decision_loop(&self) -> &DecisionLoop {
        &self.lp
    }

    pub fn config(&self) -> &RunConfig {
        self.lp.config()
    }

    pub fn view(&self) -> SessionView {
        let cfg = self.lp.config();
        let trace = self.lp.trace();
        SessionView {
            id: self.id.clone(),
            status: self.status,
            planner: cfg.planner.to_string(),
            seed: cfg.seed,
            day: self.lp.day(),
            block: self.lp.block(),
            blocks_total: cfg.blocks(),
            delta: cfg.delta,
            current_report: self.lp.current_report(),
            total_reward: trace.total_reward(),
            days: trace.days.clone(),
            blocks: trace.blocks.clone(),
            recommendation: self.lp.pending().map(|r| RecommendationView {
                block: r.block,
                day: r.day,
                action: r.action,
                artifact: r.artifact.clone(),
            }),
            beta: self.lp.cloud().map(|c| {
                let q = c.beta_quantiles(&[0.05, 0.5, 0.95]);
                BetaBands { q05: q[0], q50: q[1], q95: q[2] }
            }),
        }
    }

    /// The planner's current table: the averaged table for Q-learning, the
    /// single-trajectory table for the naive learner.
    pub fn q_table(&self) -> Option<&QTable> {
        self.lp.q_table().or_else(|| self.lp.naive().map(|n| &n.table))
    }

    /// Marks the session as advancing and hands out the work.
    pub fn begin_step(&mut self, choice: StepChoice) -> Result<StepJob> {
        match self.status {
            SessionStatus::AwaitingDecision => {}
            SessionStatus::Advancing => return Err(Error::WrongStatus("session is already advancing".into())),
            SessionStatus::Finished => return Err(Error::WrongStatus("session has finished".into())),
        }
        self.status = SessionStatus::Advancing;
        Ok(StepJob { lp: self.lp.clone(), choice })
    }

    /// Installs the result of a [`StepJob`]; on failure the session is left
    /// as it was before the step.
    pub fn finish_step(&mut self, outcome: Result<DecisionLoop>) -> Result<()> {
        match outcome {
            Ok(lp) => {
                self.status =
                    if lp.is_finished() { SessionStatus::Finished } else { SessionStatus::AwaitingDecision };
                self.lp = lp;
                Ok(())
            }
            Err(e) => {
                self.status = SessionStatus::AwaitingDecision;
                Err(e)
            }
        }
    }

    /// Deploys one block. Either the whole step happens or nothing does.
    pub fn step(&mut self, choice: StepChoice) -> Result<()> {
        let job = self.begin_step(choice)?;
        self.finish_step(job.run())
    }

    /// Forecasts each action held fixed over the look-ahead from `draws`
    /// posterior samples. The same samples and random streams serve every
    /// action, so differences between actions are not sampling noise.
    pub fn whatif(&self, draws: Option<usize>) -> Result<WhatIf> {
        if self.status != SessionStatus::AwaitingDecision {
            return Err(Error::WrongStatus("what-if needs a session awaiting a decision".into()));
        }
        let cfg = self.lp.config();
        let k = draws.unwrap_or(cfg.posterior_draws);
        if k == 0 {
            return Err(Error::InvalidConfig("what-if needs at least one draw".into()));
        }
        let cloud = self.lp.cloud().ok_or_else(|| Error::InvalidConfig("session keeps no posterior".into()))?;
        let seeder = Seeder::new(cfg.seed).child(&[tag::WHATIF, self.lp.block() as u64]);
        let samples = cloud.sample_posterior(k, &mut seeder.stream(&[0]));
        let horizon = cfg.lookahead;
        let vax = self.lp.vax();

        let forecasts = ActionLevel::ALL
            .iter()
            .map(|&a| {
                let mut icu = vec![Vec::with_capacity(k); horizon + 1];
                let mut returns = 0.0;
                for (j, (params, x0)) in samples.iter().enumerate() {
                    let mut rng = seeder.stream(&[1, j as u64]);
                    let mut x = *x0;
                    let mut y = self.lp.current_report();
                    let mut streak = self.lp.streak();
                    let mut discount = 1.0;
                    icu[0].push(x.icu_load() as f64);
                    for slot in icu.iter_mut().skip(1) {
                        streak = streak.update(a);
                        returns += discount * reward(y, a, streak.ell(), &cfg.reward);
                        discount *= cfg.reward.gamma;
                        x = step(&x, params, a, vax, &mut rng)?;
                        y = observe(&x, params, &mut rng).y;
                        slot.push(x.icu_load() as f64);
                    }
                }
                let mut q = [Vec::new(), Vec::new(), Vec::new()];
                for day in icu {
                    let mut data = Data::new(day);
                    for (out, tau) in q.iter_mut().zip([0.05, 0.5, 0.95]) {
                        out.push(data.quantile(tau));
                    }
                }
                let [icu_q05, icu_q50, icu_q95] = q;
                Ok(ActionForecast { action: a, icu_q05, icu_q50, icu_q95, expected_return: returns / k as f64 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WhatIf { day: self.lp.day(), horizon, draws: k, forecasts })
    }

    /// Writes the session as JSON, atomically replacing `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a saved session; one saved mid-step resumes awaiting a decision.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut s: Session = serde_json::from_slice(&bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if s.status == SessionStatus::Advancing {
            s.status = SessionStatus::AwaitingDecision;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{prepare, PlannerKind};

    fn small(planner: PlannerKind) -> RunConfig {
        let mut cfg = RunConfig::desk();
        cfg.planner = planner;
        cfg.horizon_days = 30;
        cfg.lookahead = 20;
        cfg.posterior_draws = 3;
        cfg.smc2.n_theta = 20;
        cfg.smc2.n_x = 16;
        cfg
    }

    fn open(cfg: &RunConfig) -> Session {
        let p = prepare(cfg).unwrap();
        Session::create("s", cfg, &p.generator, &p.context, None).unwrap()
    }

    #[test]
    fn choice_wire_format() {
        let r: StepChoice = serde_json::from_str("\"recommended\"").unwrap();
        assert_eq!(r, StepChoice::Recommended);
        let o: StepChoice = serde_json::from_str("3").unwrap();
        assert_eq!(o, StepChoice::Override(ActionLevel::new(3).unwrap()));
        assert!(serde_json::from_str::<StepChoice>("5").is_err());
        assert!(serde_json::from_str::<StepChoice>("\"lockdown\"").is_err());
        assert_eq!(serde_json::to_string(&o).unwrap(), "3");
    }

    #[test]
    fn stepping_to_the_end() {
        let mut s = open(&small(PlannerKind::Random));
        assert_eq!(s.status(), SessionStatus::AwaitingDecision);
        let v = s.view();
        assert!(v.recommendation.is_some() && v.beta.is_some());
        assert_eq!(v.blocks_total, 3);

        s.step(StepChoice::Override(ActionLevel::LOCKDOWN)).unwrap();
        s.step(StepChoice::Recommended).unwrap();
        s.step(StepChoice::Recommended).unwrap();
        assert_eq!(s.status(), SessionStatus::Finished);
        let v = s.view();
        assert_eq!(v.days.len(), 30);
        assert!(v.recommendation.is_none());
        assert_eq!(v.blocks[0].deployed, ActionLevel::LOCKDOWN);
        assert!(matches!(s.step(StepChoice::Recommended), Err(Error::WrongStatus(_))));
    }

    #[test]
    fn concurrent_step_is_refused_and_failure_rolls_back() {
        let mut s = open(&small(PlannerKind::Random));
        let before = s.clone();
        let _job = s.begin_step(StepChoice::Recommended).unwrap();
        assert!(matches!(s.begin_step(StepChoice::Recommended), Err(Error::WrongStatus(_))));
        assert!(s.finish_step(Err(Error::InvalidConfig("boom".into()))).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn whatif_is_a_pure_read_with_common_draws() {
        let s = open(&small(PlannerKind::Random));
        let before = s.clone();
        let w = s.whatif(None).unwrap();
        assert_eq!(s, before);
        assert_eq!(w, s.whatif(None).unwrap());
        assert_eq!(w.forecasts.len(), 4);
        for f in &w.forecasts {
            assert_eq!(f.icu_q50.len(), 21);
            assert!(f.icu_q05.iter().zip(&f.icu_q95).all(|(lo, hi)| lo <= hi));
        }
        // Same starting states for every action.
        assert!(w.forecasts.iter().all(|f| f.icu_q50[0] == w.forecasts[0].icu_q50[0]));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut s = open(&small(PlannerKind::Random));
        s.step(StepChoice::Recommended).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        s.save(&path).unwrap();
        let mut back = Session::load(&path).unwrap();
        assert_eq!(back, s);
        back.step(StepChoice::Recommended).unwrap();
        s.step(StepChoice::Recommended).unwrap();
        assert_eq!(back, s);
        assert!(matches!(Session::load(&dir.path().join("none.json")), Err(Error::MissingFile(_))));
    }
}

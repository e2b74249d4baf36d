use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioSpec;
use crate::error::{Error, Result};
use crate::model::{CompartmentState, ModelParams, DEFAULT_POPULATION};
use crate::qlearn::{BinScheme, LearnSchedule, StoppingRule};
use crate::reward::RewardConfig;
use crate::smc::checkpoint::CheckpointFormat;
use crate::smc::Smc2Config;
use crate::threshold::{RolloutMode, ThresholdGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Threshold,
    Qlearn,
    Random,
    Historical,
    NaiveQ,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] =
        [PlannerKind::Threshold, PlannerKind::Qlearn, PlannerKind::Random, PlannerKind::Historical, PlannerKind::NaiveQ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Threshold => "threshold",
            PlannerKind::Qlearn => "qlearn",
            PlannerKind::Random => "random",
            PlannerKind::Historical => "historical",
            PlannerKind::NaiveQ => "naive_q",
        }
    }

    /// Whether the planner consumes posterior draws.
    pub fn needs_posterior(self) -> bool {
        matches!(self, PlannerKind::Threshold | PlannerKind::Qlearn)
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown planner '{s}'")))
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdPlannerConfig {
    pub axis_points: usize,
    pub axis_lo: f64,
    pub axis_hi: f64,
    /// Index margin of the refinement search around the previous optimum.
    pub margin: usize,
    pub mode: RolloutMode,
}

impl Default for ThresholdPlannerConfig {
    fn default() -> Self {
        ThresholdPlannerConfig { axis_points: 30, axis_lo: 10.0, axis_hi: 8000.0, margin: 2, mode: RolloutMode::Stochastic }
    }
}

impl ThresholdPlannerConfig {
    pub fn grid(&self) -> Result<ThresholdGrid> {
        ThresholdGrid::geometric(self.axis_points, self.axis_lo, self.axis_hi, self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QlearnConfig {
    pub bins: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub schedule: LearnSchedule,
    pub stopping: StoppingRule,
}

impl Default for QlearnConfig {
    fn default() -> Self {
        QlearnConfig {
            bins: 200,
            bin_lo: 1.0,
            bin_hi: 6000.0,
            schedule: LearnSchedule { episodes: 80_000, ..Default::default() },
            stopping: StoppingRule::default(),
        }
    }
}

impl QlearnConfig {
    pub fn bin_scheme(&self) -> Result<BinScheme> {
        BinScheme::geometric(self.bins, self.bin_lo, self.bin_hi)
    }
}

/// Seeding of the day-0 latent state: `exposed` and `infectious`
/// individuals, everyone else susceptible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialSeed {
    pub exposed: u64,
    pub infectious: u64,
}

impl InitialSeed {
    /// 100 exposed and 100 infectious per 68 million, at least one each.
    pub fn scaled(population: u64) -> Self {
        let n = ((100.0 * population as f64 / DEFAULT_POPULATION as f64).round() as u64).max(1);
        InitialSeed { exposed: n, infectious: n }
    }

    pub fn state(&self, population: u64) -> Result<CompartmentState> {
        CompartmentState::seeded(population, self.exposed, self.infectious)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    /// Directory holding `icu.csv`, `vaccinations.csv` and `npi_timeline.csv`.
    pub dir: PathBuf,
    /// Number of leading days used to warm-start the posterior; the
    /// decision period starts on the last of them.
    pub warmup_days: usize,
}

/// Everything that defines a decision run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub horizon_days: usize,
    /// Days per decision block.
    pub delta: usize,
    /// Planning look-ahead in days.
    pub lookahead: usize,
    /// Posterior draws per plan.
    pub posterior_draws: usize,
    pub replicates: usize,
    pub planner: PlannerKind,
    pub seed: u64,
    pub model: ModelParams,
    pub initial: InitialSeed,
    pub reward: RewardConfig,
    pub smc2: Smc2Config,
    pub threshold_planner: ThresholdPlannerConfig,
    pub qlearn: QlearnConfig,
    /// Sample counterfactual reports from the observation model; when false
    /// the report equals ICU occupancy.
    pub observation_noise: bool,
    /// Redraw the generator parameters at every block instead of once per
    /// replicate.
    pub redraw_world_per_block: bool,
    /// Keep the posterior up to date even for planners that ignore it.
    pub track_posterior: bool,
    pub checkpoint_format: CheckpointFormat,
    /// Real surveillance data; when absent the synthetic `scenario` stands
    /// in for it.
    pub data: Option<DataPaths>,
    pub scenario: ScenarioSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl RunConfig {
    /// Full-scale settings.
    pub fn paper() -> Self {
        let model = ModelParams::default();
        let scenario = ScenarioSpec::desk().scaled(model.population, 300);
        RunConfig {
            horizon_days: 300,
            delta: 10,
            lookahead: 100,
            posterior_draws: 25,
            replicates: 10,
            planner: PlannerKind::Threshold,
            seed: 0,
            initial: InitialSeed::scaled(model.population),
            model,
            reward: RewardConfig::experiment(0.2),
            smc2: Smc2Config::default(),
            threshold_planner: ThresholdPlannerConfig::default(),
            qlearn: QlearnConfig::default(),
            observation_noise: true,
            redraw_world_per_block: false,
            track_posterior: false,
            checkpoint_format: CheckpointFormat::Json,
            data: None,
            scenario,
        }
    }

    /// Laptop-scale settings: 100k people, 120 days, short look-ahead.
    pub fn desk() -> Self {
        let model = ModelParams::default().with_population(100_000);
        let mut qlearn = QlearnConfig::default();
        qlearn.schedule.episodes = 2000;
        qlearn.bins = 40;
        RunConfig {
            horizon_days: 120,
            lookahead: 50,
            posterior_draws: 8,
            initial: InitialSeed::scaled(model.population),
            model,
            smc2: Smc2Config { n_theta: 100, n_x: 64, ..Default::default() },
            qlearn,
            scenario: ScenarioSpec::desk(),
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::InvalidConfig(format!("unknown preset '{other}' (expected desk or paper)"))),
        }
    }

    pub fn blocks(&self) -> usize {
        self.horizon_days / self.delta.max(1)
    }

    /// Slices per planning episode.
    pub fn slices(&self) -> usize {
        self.lookahead / self.delta.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 || self.horizon_days == 0 || !self.horizon_days.is_multiple_of(self.delta) {
            return Err(Error::InvalidConfig(format!(
                "horizon of {} days is not a positive multiple of the {}-day block",
                self.horizon_days, self.delta
            )));
        }
        if self.lookahead == 0 || !self.lookahead.is_multiple_of(self.delta) {
            return Err(Error::InvalidConfig(format!(
                "look-ahead of {} days is not a positive multiple of the {}-day block",
                self.lookahead, self.delta
            )));
        }
        if self.posterior_draws == 0 || self.replicates == 0 {
            return Err(Error::InvalidConfig("posterior_draws and replicates must be positive".into()));
        }
        self.model.validate()?;
        self.reward.validate()?;
        self.smc2.validate()?;
        self.qlearn.schedule.validate()?;
        self.qlearn.bin_scheme()?;
        let grid = self.threshold_planner.grid()?;
        if grid.axis().len() < 3 {
            return Err(Error::InvalidConfig("threshold axis needs at least three points".into()));
        }
        self.initial.state(self.model.population)?;
        if self.data.is_none() {
            if self.scenario.population != self.model.population {
                return Err(Error::InvalidConfig(format!(
                    "scenario population {} differs from model population {}",
                    self.scenario.population, self.model.population
                )));
            }
            if self.scenario.horizon_days < self.horizon_days {
                return Err(Error::InvalidConfig(format!(
                    "scenario covers {} decision days but the horizon is {}",
                    self.scenario.horizon_days, self.horizon_days
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON config; fields left out take their paper-preset values.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        RunConfig::paper().validate().unwrap();
        RunConfig::desk().validate().unwrap();
        assert_eq!(RunConfig::paper().blocks(), 30);
        assert_eq!(RunConfig::desk().blocks(), 12);
        assert_eq!(RunConfig::desk().slices(), 5);
    }

    #[test]
    fn uneven_blocks_rejected() {
        let cfg = RunConfig { delta: 7, ..RunConfig::desk() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let cfg = RunConfig { lookahead: 55, ..RunConfig::desk() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_partial_override() {
        let cfg = RunConfig::desk();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        let partial = RunConfig::from_json(r#"{"delta": 20, "planner": "qlearn", "reward": {"kappa_soec": 0.5}}"#).unwrap();
        assert_eq!(partial.delta, 20);
        assert_eq!(partial.planner, PlannerKind::Qlearn);
        assert_eq!(partial.reward.kappa_soec, 0.5);
        assert_eq!(partial.horizon_days, 300);
    }

    #[test]
    fn planner_names_parse() {
        for p in PlannerKind::ALL {
            assert_eq!(p.name().parse::<PlannerKind>().unwrap(), p);
        }
        assert!("greedy".parse::<PlannerKind>().is_err());
    }

    #[test]
    fn scaled_seed_never_vanishes() {
        assert_eq!(InitialSeed::scaled(68_000_000), InitialSeed { exposed: 100, infectious: 100 });
        assert_eq!(InitialSeed::scaled(100_000).exposed, 1);
    }
}

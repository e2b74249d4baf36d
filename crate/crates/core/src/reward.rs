//! Daily reward: ICU burden plus an intervention cost that grows with the
//! length of the current stringency streak, replaced by a flat penalty once
//! ICU occupancy crosses the crash threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ActionLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostLog {
    #[default]
    Natural,
    Base10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub kappa_icu: f64,
    pub kappa_soec: f64,
    /// ICU occupancy above which the crash penalty applies.
    pub t_crash: u64,
    /// Magnitude of the crash penalty; the reward is `-p_crash`.
    pub p_crash: f64,
    pub gamma: f64,
    pub cost_log: CostLog,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::model_defaults()
    }
}

impl RewardConfig {
    /// Crash constants from the model definition: `P = 1e5`, `T = 6000`.
    pub fn model_defaults() -> Self {
        RewardConfig {
            kappa_icu: 1.0,
            kappa_soec: 0.2,
            t_crash: 6000,
            p_crash: 1e5,
            gamma: 0.95,
            cost_log: CostLog::Natural,
        }
    }

    /// Constants used for the policy-comparison experiments: 5000 beds,
    /// `P = 1e6`, `kappa_icu = 1`, `gamma = 0.95`.
    pub fn experiment(kappa_soec: f64) -> Self {
        RewardConfig { kappa_soec, t_crash: 5000, p_crash: 1e6, ..Self::model_defaults() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_icu >= 0.0 && self.kappa_soec >= 0.0 && self.p_crash > 0.0) {
            return Err(Error::InvalidConfig("reward weights must be nonnegative and p_crash positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Socio-economic cost of holding action `a` for a streak of `ell` days.
pub fn intervention_cost(a: ActionLevel, ell: u32, log: CostLog) -> f64 {
    let ell = ell as f64;
    match a.level() {
        1 => 0.0,
        2 => {
            50.0 * match log {
                CostLog::Natural => ell.ln_1p(),
                CostLog::Base10 => (1.0 + ell).log10(),
            }
        }
        3 => 200.0 * ell,
        4 => 800.0 * ell,
        _ => unreachable!("ActionLevel is always 1..=4"),
    }
}

/// Reward for observing `y` ICU patients while holding `a` on day `ell` of
/// its streak.
pub fn reward(y: u64, a: ActionLevel, ell: u32, cfg: &RewardConfig) -> f64 {
    if y > cfg.t_crash {
        -cfg.p_crash
    } else {
        -cfg.kappa_icu * y as f64 - cfg.kappa_soec * intervention_cost(a, ell, cfg.cost_log)
    }
}

/// Tracks, for each level, how many consecutive days (including today) the
/// deployed action has been at least that strict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreakCounter {
    current: ActionLevel,
    /// `runs[a]`: consecutive days with deployed level `>= a + 1`.
    runs: [u32; 4],
}

impl Default for StreakCounter {
    fn default() -> Self {
        StreakCounter { current: ActionLevel::NONE, runs: [0; 4] }
    }
}

impl StreakCounter {
    /// Counter after replaying a history of daily actions.
    pub fn from_history(actions: &[ActionLevel]) -> Self {
        actions.iter().fold(Self::default(), |c, &a| c.update(a))
    }

    /// Registers that `action` is deployed for one more day.
    #[must_use]
    pub fn update(self, action: ActionLevel) -> Self {
        let mut runs = self.runs;
        for (idx, run) in runs.iter_mut().enumerate() {
            if idx <= action.index() {
                *run += 1;
            } else {
                *run = 0;
            }
        }
        StreakCounter { current: action, runs }
    }

    pub fn current_action(&self) -> ActionLevel {
        self.current
    }

    /// Streak length `ell` for the current action; zero for level 1.
    pub fn ell(&self) -> u32 {
        if self.current == ActionLevel::NONE {
            0
        } else {
            self.runs[self.current.index()]
        }
    }
}

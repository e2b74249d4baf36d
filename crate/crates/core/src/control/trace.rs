use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::PlannerKind;
use crate::error::Result;
use crate::model::ActionLevel;
use crate::threshold::ThresholdTriple;

/// One deployed day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: u32,
    /// Report available at the start of the day.
    pub y: u64,
    /// Q-learning bin of `y` (zero-based).
    pub bin: usize,
    pub action: ActionLevel,
    pub ell: u32,
    pub reward: f64,
    /// Latent ICU occupancy of the counterfactual world.
    pub icu: u64,
}

/// What a planner produced for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanArtifact {
    Threshold {
        phi: ThresholdTriple,
        value: f64,
        candidates: usize,
    },
    Qlearn {
        /// Averaged action values in the bin of the block's first report.
        row: Vec<f64>,
        converged_at: Option<usize>,
        /// Largest per-episode change of the averaged table.
        max_delta_q: Vec<f64>,
    },
    Random,
    Historical,
    NaiveQ {
        row: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block: usize,
    pub start_day: u32,
    pub recommended: ActionLevel,
    pub deployed: ActionLevel,
    pub overridden: bool,
    pub artifact: PlanArtifact,
    /// Weighted 5/50/95% quantiles of each beta at planning time.
    pub beta_quantiles: Option<[[f64; 4]; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub planner: PlannerKind,
    pub seed: u64,
    pub days: Vec<DayRecord>,
    pub blocks: Vec<BlockRecord>,
}

impl DecisionTrace {
    pub fn total_reward(&self) -> f64 {
        self.days.iter().map(|d| d.reward).sum()
    }

    pub fn actions(&self) -> Vec<ActionLevel> {
        self.days.iter().map(|d| d.action).collect()
    }

    /// Daily rows: `day,y,bin,action,ell,reward,icu`, bins one-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "y", "bin", "action", "ell", "reward", "icu"])?;
        for d in &self.days {
            w.write_record([
                d.day.to_string(),
                d.y.to_string(),
                (d.bin + 1).to_string(),
                d.action.to_string(),
                d.ell.to_string(),
                d.reward.to_string(),
                d.icu.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

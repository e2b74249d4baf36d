//! Command-line front end and HTTP session service for `epicontrol`.

pub mod api;
pub mod cli;

use epicontrol::control::{PlannerKind, RunConfig};
use serde::Deserialize;

/// Settings that may be changed on top of a loaded config.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub planner: Option<PlannerKind>,
    pub kappa_soec: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(planner) = self.planner {
            cfg.planner = planner;
        }
        if let Some(k) = self.kappa_soec {
            cfg.reward.kappa_soec = k;
        }
    }
}

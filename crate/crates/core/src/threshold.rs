//! Grid search over ICU-threshold policies scored by posterior rollouts.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    observe, observe_mean, step, step_mean_field, ActionLevel, CompartmentState, ModelParams, VaccinationStream,
};
use crate::qlearn::geometric_points;
use crate::reward::{reward, RewardConfig, StreakCounter};
use crate::rng::Seeder;

/// Thresholds `0 < tau1 < tau2 < tau3` on the reported ICU count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u64; 3]", into = "[u64; 3]")]
pub struct ThresholdTriple([u64; 3]);

impl ThresholdTriple {
    pub fn new(tau1: u64, tau2: u64, tau3: u64) -> Result<Self> {
        if 0 < tau1 && tau1 < tau2 && tau2 < tau3 {
            Ok(ThresholdTriple([tau1, tau2, tau3]))
        } else {
            Err(Error::InvalidConfig(format!("thresholds must satisfy 0 < t1 < t2 < t3, got ({tau1}, {tau2}, {tau3})")))
        }
    }

    pub fn taus(&self) -> [u64; 3] {
        self.0
    }
}

impl TryFrom<[u64; 3]> for ThresholdTriple {
    type Error = Error;
    fn try_from(t: [u64; 3]) -> Result<Self> {
        Self::new(t[0], t[1], t[2])
    }
}

impl From<ThresholdTriple> for [u64; 3] {
    fn from(t: ThresholdTriple) -> Self {
        t.0
    }
}

/// Action for report `y`: one level per threshold crossed (left-closed).
pub fn threshold_policy(y: u64, phi: &ThresholdTriple) -> ActionLevel {
    let crossed = phi.0.iter().filter(|&&t| y >= t).count();
    ActionLevel::from_index(crossed)
}

/// Candidate thresholds: strictly increasing index triples into an axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    axis: Vec<u64>,
    /// Index margin around the previous optimum for refinement searches.
    pub margin: usize,
}

impl ThresholdGrid {
    pub fn new(axis: Vec<u64>, margin: usize) -> Result<Self> {
        if axis.first().is_none_or(|&a| a == 0) || axis.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("threshold axis must be positive and strictly increasing".into()));
        }
        Ok(ThresholdGrid { axis, margin })
    }

    /// `n` geometric points on `[lo, hi]`, rounded to integers.
    pub fn geometric(n: usize, lo: f64, hi: f64, margin: usize) -> Result<Self> {
        let axis = geometric_points(n, lo, hi).into_iter().map(|x| x.round() as u64).collect();
        Self::new(axis, margin)
    }

    pub fn axis(&self) -> &[u64] {
        &self.axis
    }

    pub fn triple(&self, idx: [usize; 3]) -> ThresholdTriple {
        ThresholdTriple([self.axis[idx[0]], self.axis[idx[1]], self.axis[idx[2]]])
    }

    /// Axis indices of `phi`, if all three values lie on the axis.
    pub fn locate(&self, phi: &ThresholdTriple) -> Option<[usize; 3]> {
        let find = |v: u64| self.axis.binary_search(&v).ok();
        Some([find(phi.0[0])?, find(phi.0[1])?, find(phi.0[2])?])
    }

    /// All strictly increasing index triples, in lexicographic order.
    pub fn all_candidates(&self) -> Vec<[usize; 3]> {
        let n = self.axis.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    out.push([i, j, k]);
                }
            }
        }
        out
    }

    /// Increasing triples with every index within `margin` of `centre`.
    pub fn neighborhood(&self, centre: [usize; 3]) -> Vec<[usize; 3]> {
        let n = self.axis.len();
        let range = |c: usize| c.saturating_sub(self.margin)..=(c + self.margin).min(n - 1);
        let mut out = Vec::new();
        for i in range(centre[0]) {
            for j in range(centre[1]) {
                for k in range(centre[2]) {
                    if i < j && j < k {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    /// Full search without a previous optimum, local refinement otherwise.
    pub fn candidates(&self, previous: Option<&ThresholdTriple>) -> Vec<[usize; 3]> {
        match previous.and_then(|p| self.locate(p)) {
            Some(c) => self.neighborhood(c),
            None => self.all_candidates(),
        }
    }
}

/// How rollouts propagate the latent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    #[default]
    Stochastic,
    /// Expected transition counts and reports equal to ICU occupancy.
    MeanField,
}

/// Where a rollout starts: the latent state at the decision day, the real
/// report on that day and the streak carried in from deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutStart {
    pub x0: CompartmentState,
    pub y0: u64,
    pub streak: StreakCounter,
}

/// Discounted return over `horizon` days, re-evaluating the action every
/// day from the current report.
#[allow(clippy::too_many_arguments)]
pub fn rollout_return<R: Rng + ?Sized>(
    params: &ModelParams,
    start: &RolloutStart,
    mut policy: impl FnMut(u64) -> ActionLevel,
    horizon: usize,
    cfg: &RewardConfig,
    vax: &VaccinationStream,
    mode: RolloutMode,
    rng: &mut R,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("rollout horizon must be at least one day".into()));
    }
    let mut x = start.x0;
    let mut y = start.y0;
    let mut streak = start.streak;
    let mut total = 0.0;
    let mut discount = 1.0;
    for s in 0..horizon {
        let a = policy(y);
        streak = streak.update(a);
        total += discount * reward(y, a, streak.ell(), cfg);
        discount *= cfg.gamma;
        if s + 1 < horizon {
            match mode {
                RolloutMode::Stochastic => {
                    x = step(&x, params, a, vax, rng)?;
                    y = observe(&x, params, rng).y;
                }
                RolloutMode::MeanField => {
                    x = step_mean_field(&x, params, a, vax)?;
                    y = observe_mean(&x).y;
                }
            }
        }
    }
    Ok(total)
}

/// Discounted return of the threshold policy `phi`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_cost<R: Rng + ?Sized>(
    params: &ModelParams,
    start: &RolloutStart,
    phi: &ThresholdTriple,
    horizon: usize,
    cfg: &RewardConfig,
    vax: &VaccinationStream,
    mode: RolloutMode,
    rng: &mut R,
) -> Result<f64> {
    rollout_return(params, start, |y| threshold_policy(y, phi), horizon, cfg, vax, mode, rng)
}

/// Outcome of one block's search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPlan {
    pub phi: ThresholdTriple,
    pub indices: [usize; 3],
    /// Monte Carlo mean return of `phi`.
    pub value: f64,
    pub candidates_evaluated: usize,
}

/// Per-draw starting points for a block: the parameter draw and its latent
/// state. All draws share the observed report and streak.
#[derive(Debug, Clone)]
pub struct BlockDraws<'a> {
    pub draws: &'a [(ModelParams, CompartmentState)],
    pub y0: u64,
    pub streak: StreakCounter,
}

/// Returns `returns[c][k]` for candidate `c` under draw `k`. Draw `k` always
/// uses `seeder.stream(&[k])`, so every candidate sees the same random
/// numbers.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_candidates(
    block: &BlockDraws<'_>,
    grid: &ThresholdGrid,
    candidates: &[[usize; 3]],
    horizon: usize,
    cfg: &RewardConfig,
    vax: &VaccinationStream,
    mode: RolloutMode,
    seeder: &Seeder,
) -> Result<Vec<Vec<f64>>> {
    candidates
        .par_iter()
        .map(|&c| {
            let phi = grid.triple(c);
            block
                .draws
                .iter()
                .enumerate()
                .map(|(k, (params, x0))| {
                    let start = RolloutStart { x0: *x0, y0: block.y0, streak: block.streak };
                    let mut rng = seeder.stream(&[k as u64]);
                    rollout_cost(params, &start, &phi, horizon, cfg, vax, mode, &mut rng)
                })
                .collect()
        })
        .collect()
}

/// Index of the best mean; the earliest candidate wins ties.
pub fn best_candidate(returns: &[Vec<f64>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (c, r) in returns.iter().enumerate() {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((c, mean));
        }
    }
    best
}

/// Chooses the threshold triple with the best mean rollout return over the
/// posterior draws, searching the neighbourhood of `previous` when given.
#[allow(clippy::too_many_arguments)]
pub fn plan_block(
    block: &BlockDraws<'_>,
    grid: &ThresholdGrid,
    previous: Option<&ThresholdTriple>,
    horizon: usize,
    cfg: &RewardConfig,
    vax: &VaccinationStream,
    mode: RolloutMode,
    seeder: &Seeder,
) -> Result<ThresholdPlan> {
    if block.draws.is_empty() {
        return Err(Error::InvalidConfig("threshold planning needs at least one posterior draw".into()));
    }
    let candidates = grid.candidates(previous);
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("threshold axis needs at least three points".into()));
    }
    let returns = evaluate_candidates(block, grid, &candidates, horizon, cfg, vax, mode, seeder)?;
    let (c, value) = best_candidate(&returns).expect("non-empty candidates");
    let indices = candidates[c];
    Ok(ThresholdPlan { phi: grid.triple(indices), indices, value, candidates_evaluated: candidates.len() })
}

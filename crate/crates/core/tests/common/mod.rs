#![allow(dead_code)]

use epicontrol::control::{PlannerKind, RunConfig};
use epicontrol::smc::StateSpaceModel;
use epicontrol::Result;
use rand::Rng;

/// Two hidden states, two symbols.
pub struct ToyHmm {
    /// `trans[x][x']`
    pub trans: [[f64; 2]; 2],
    /// `emit[x][y]`
    pub emit: [[f64; 2]; 2],
}

impl ToyHmm {
    pub fn sticky() -> Self {
        ToyHmm { trans: [[0.9, 0.1], [0.2, 0.8]], emit: [[0.8, 0.2], [0.3, 0.7]] }
    }

    pub fn simulate<R: Rng + ?Sized>(&self, x0: usize, days: usize, rng: &mut R) -> Vec<(usize, ())> {
        let mut x = x0;
        (0..days)
            .map(|_| {
                x = if rng.random::<f64>() < self.trans[x][0] { 0 } else { 1 };
                let y = if rng.random::<f64>() < self.emit[x][0] { 0 } else { 1 };
                (y, ())
            })
            .collect()
    }

    /// Exact `log p(y_1..y_T | x_0)` by the forward recursion.
    pub fn forward_log_likelihood(&self, x0: usize, ys: &[(usize, ())]) -> f64 {
        let mut alpha = [0.0; 2];
        alpha[x0] = 1.0;
        let mut total = 0.0;
        for &(y, ()) in ys {
            let mut next = [0.0; 2];
            for (to, slot) in next.iter_mut().enumerate() {
                *slot = (0..2).map(|from| alpha[from] * self.trans[from][to]).sum::<f64>() * self.emit[to][y];
            }
            let z: f64 = next.iter().sum();
            total += z.ln();
            alpha = [next[0] / z, next[1] / z];
        }
        total
    }
}

impl StateSpaceModel for ToyHmm {
    type State = usize;
    type Control = ();
    type Obs = usize;

    fn propagate<R: Rng + ?Sized>(&self, x: &usize, _: (), rng: &mut R) -> Result<usize> {
        Ok(if rng.random::<f64>() < self.trans[*x][0] { 0 } else { 1 })
    }

    fn log_likelihood(&self, y: &usize, x: &usize) -> f64 {
        self.emit[*x][*y].ln()
    }
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// The desk preset shrunk to a 30-day horizon with small particle counts.
pub fn quick_config(planner: PlannerKind) -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.planner = planner;
    cfg.horizon_days = 30;
    cfg.lookahead = 20;
    cfg.posterior_draws = 3;
    cfg.smc2.n_theta = 24;
    cfg.smc2.n_x = 16;
    cfg.qlearn.schedule.episodes = 60;
    cfg
}

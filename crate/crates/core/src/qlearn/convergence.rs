use serde::{Deserialize, Serialize};

use super::table::QTable;

/// Episode-wise stability of the posterior-averaged table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `max_{g,a} |Qbar_e - Qbar_{e-1}|` for each episode `e`.
    pub max_delta_q: Vec<f64>,
    /// Fraction of bins whose greedy action changed versus episode `e - 1`.
    pub policy_change_fraction: Vec<f64>,
    /// Episode (zero-based) at which the stopping rule first held.
    pub converged_at: Option<usize>,
}

/// Parameters of the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingRule {
    /// Relative tolerance against the normaliser.
    pub tol_rel: f64,
    /// Consecutive qualifying episodes required.
    pub patience: usize,
    /// Maximum fraction of bins allowed to change greedy action.
    pub policy_tol: f64,
    /// Episodes over which the normaliser `max maxdQ` is taken.
    pub normalizer_window: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule { tol_rel: 1e-4, patience: 50, policy_tol: 0.01, normalizer_window: 2000 }
    }
}

impl ConvergenceReport {
    pub fn record(&mut self, prev: &QTable, next: &QTable) {
        self.max_delta_q.push(next.max_abs_diff(prev));
        let changed = (0..next.n_bins()).filter(|&g| next.greedy(g) != prev.greedy(g)).count();
        self.policy_change_fraction.push(changed as f64 / next.n_bins() as f64);
    }

    pub fn episodes(&self) -> usize {
        self.max_delta_q.len()
    }
}

/// First episode at which the last `patience` episodes all had
/// `maxdQ / normaliser < tol_rel` and a policy change fraction below
/// `policy_tol`. The normaliser is the largest `maxdQ` within the first
/// `normalizer_window` episodes; a zero normaliser counts as converged.
pub fn convergence_check(report: &ConvergenceReport, rule: &StoppingRule) -> Option<usize> {
    let window = report.max_delta_q.len().min(rule.normalizer_window);
    let norm = report.max_delta_q[..window].iter().copied().fold(0.0, f64::max);
    first_converged(report, rule, |_| norm)
}

/// Online variant: the normaliser at episode `e` is the running maximum
/// over the episodes seen so far (within the window), which is never larger
/// than the final one, so the rule is conservative.
pub fn convergence_check_online(report: &ConvergenceReport, rule: &StoppingRule) -> Option<usize> {
    let mut running = Vec::with_capacity(report.max_delta_q.len());
    let mut m: f64 = 0.0;
    for (e, &d) in report.max_delta_q.iter().enumerate() {
        if e < rule.normalizer_window {
            m = m.max(d);
        }
        running.push(m);
    }
    first_converged(report, rule, |e| running[e])
}

fn first_converged(report: &ConvergenceReport, rule: &StoppingRule, norm: impl Fn(usize) -> f64) -> Option<usize> {
    let patience = rule.patience.max(1);
    let mut streak = 0;
    for (e, (&d, &pc)) in report.max_delta_q.iter().zip(&report.policy_change_fraction).enumerate() {
        let n = norm(e);
        let small = if n > 0.0 { d / n < rule.tol_rel } else { true };
        if small && pc < rule.policy_tol {
            streak += 1;
            if streak >= patience {
                return Some(e);
            }
        } else {
            streak = 0;
        }
    }
    None
}

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::PlannerKind;
use super::trace::DecisionTrace;
use crate::error::{Error, Result};
use crate::model::ActionLevel;
use crate::reward::RewardConfig;

/// Aggregate performance of one planner over its replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub planner: PlannerKind,
    pub replicates: usize,
    pub total_reward_mean: f64,
    pub total_reward_sd: f64,
    /// Mean over replicates of summed daily ICU occupancy.
    pub icu_days_mean: f64,
    /// Largest daily ICU occupancy over all replicates.
    pub peak_icu: u64,
    /// Days with a report above the crash threshold, over all replicates.
    pub crash_days: usize,
    /// Fraction of days spent at each action level.
    pub action_occupancy: [f64; 4],
}

/// Per-planner metrics, ordered by planner.
pub fn summarize(traces: &[DecisionTrace], reward: &RewardConfig) -> Result<Vec<PolicyMetrics>> {
    if traces.is_empty() {
        return Err(Error::InvalidConfig("nothing to summarise".into()));
    }
    let mut groups: BTreeMap<&'static str, Vec<&DecisionTrace>> = BTreeMap::new();
    for t in traces {
        groups.entry(t.planner.name()).or_default().push(t);
    }
    Ok(groups
        .into_values()
        .map(|group| {
            let n = group.len() as f64;
            // Sorted sums keep the result independent of trace order.
            let mut totals: Vec<f64> = group.iter().map(|t| t.total_reward()).collect();
            totals.sort_by(f64::total_cmp);
            let mean = totals.iter().sum::<f64>() / n;
            let sd = if group.len() > 1 {
                (totals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let mut icu: Vec<f64> = group.iter().map(|t| t.days.iter().map(|d| d.icu as f64).sum()).collect();
            icu.sort_by(f64::total_cmp);
            let days = group.iter().flat_map(|t| &t.days);
            let mut counts = [0usize; ActionLevel::COUNT];
            let mut total_days = 0;
            let mut peak = 0;
            let mut crash_days = 0;
            for d in days {
                counts[d.action.index()] += 1;
                total_days += 1;
                peak = peak.max(d.icu);
                if d.y > reward.t_crash {
                    crash_days += 1;
                }
            }
            let occupancy = counts.map(|c| if total_days > 0 { c as f64 / total_days as f64 } else { 0.0 });
            PolicyMetrics {
                planner: group[0].planner,
                replicates: group.len(),
                total_reward_mean: mean,
                total_reward_sd: sd,
                icu_days_mean: icu.iter().sum::<f64>() / n,
                peak_icu: peak,
                crash_days,
                action_occupancy: occupancy,
            }
        })
        .collect())
}

pub fn write_metrics_csv<W: Write>(metrics: &[PolicyMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "planner",
        "replicates",
        "total_reward_mean",
        "total_reward_sd",
        "icu_days_mean",
        "peak_icu",
        "crash_days",
        "share_a1",
        "share_a2",
        "share_a3",
        "share_a4",
    ])?;
    for m in metrics {
        let mut row = vec![
            m.planner.name().to_string(),
            m.replicates.to_string(),
            m.total_reward_mean.to_string(),
            m.total_reward_sd.to_string(),
            m.icu_days_mean.to_string(),
            m.peak_icu.to_string(),
            m.crash_days.to_string(),
        ];
        row.extend(m.action_occupancy.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

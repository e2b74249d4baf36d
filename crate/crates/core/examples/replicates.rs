//! Runs every planner against the same synthetic worlds and prints the
//! summary metrics.

use epicontrol::control::{prepare, run_replicates, summarize, PlannerKind, RunConfig};

fn main() -> epicontrol::Result<()> {
    let mut cfg = RunConfig::desk();
    cfg.replicates = 2;
    cfg.horizon_days = 60;
    cfg.qlearn.schedule.episodes = 500;
    let prepared = prepare(&cfg)?;
    let mut traces = Vec::new();
    for planner in PlannerKind::ALL {
        traces.extend(run_replicates(&RunConfig { planner, ..cfg.clone() }, &prepared)?);
    }
    for m in summarize(&traces, &cfg.reward)? {
        println!(
            "{:<10} reward {:>12.1} (sd {:>10.1})  peak icu {:>5}  occupancy {:?}",
            m.planner.to_string(),
            m.total_reward_mean,
            m.total_reward_sd,
            m.peak_icu,
            m.action_occupancy.map(|f| (f * 100.0).round() / 100.0)
        );
    }
    Ok(())
}

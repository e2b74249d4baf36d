//! Trains one Q-table per posterior draw for a single block and prints the
//! averaged greedy policy per ICU bin.

use epicontrol::control::{RunConfig, Scenario, ScenarioSpec};
use epicontrol::qlearn::{train_posterior_averaged, QTable, SeirSliceEnv};
use epicontrol::reward::StreakCounter;
use epicontrol::rng::Seeder;

fn main() -> epicontrol::Result<()> {
    let s = Scenario::generate(&ScenarioSpec::desk(), 2)?;
    let cfg = RunConfig::desk();
    let day = s.start_day();
    let bins = cfg.qlearn.bin_scheme()?;
    let vax = s.vax.padded_to(day + cfg.lookahead + 1);
    let env = SeirSliceEnv {
        params: s.truth.clone(),
        x0: s.states[day],
        y0: s.reports[day],
        streak0: StreakCounter::from_history(&s.actions[..day]),
        delta: cfg.delta,
        vax: &vax,
        reward: &cfg.reward,
        bins: &bins,
    };
    let envs = vec![env; 4];
    let q0 = QTable::new(bins.n_bins(), 4);
    let out = train_posterior_averaged(&envs, &q0, &cfg.qlearn.schedule, cfg.slices(), cfg.reward.gamma, &Seeder::new(3))?;
    let last = out.report.max_delta_q.last().copied().unwrap_or(0.0);
    println!("{} episodes, final max |dQ| {last:.3e}", out.report.episodes());
    let mut lo = 0.0;
    for (g, &hi) in bins.thresholds().iter().chain([f64::INFINITY].iter()).enumerate() {
        if out.average.visits(g, 0) + out.average.visits(g, 1) + out.average.visits(g, 2) + out.average.visits(g, 3) > 0 {
            println!("icu [{lo:>7.0}, {hi:>7.0}) -> action {}", out.average.greedy(g) + 1);
        }
        lo = hi;
    }
    Ok(())
}

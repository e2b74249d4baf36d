//! Plans one block with the ICU-threshold grid search, using draws from the
//! true parameters and latent state of a synthetic series.

use epicontrol::control::{RunConfig, Scenario, ScenarioSpec};
use epicontrol::reward::StreakCounter;
use epicontrol::rng::Seeder;
use epicontrol::threshold::{plan_block, threshold_policy, BlockDraws};

fn main() -> epicontrol::Result<()> {
    let s = Scenario::generate(&ScenarioSpec::desk(), 2)?;
    let cfg = RunConfig::desk();
    let day = s.start_day();
    let draws = vec![(s.truth.clone(), s.states[day]); cfg.posterior_draws];
    let block = BlockDraws { draws: &draws, y0: s.reports[day], streak: StreakCounter::from_history(&s.actions[..day]) };
    let grid = cfg.threshold_planner.grid()?;
    let vax = s.vax.padded_to(day + cfg.lookahead + 1);
    let plan = plan_block(&block, &grid, None, cfg.lookahead, &cfg.reward, &vax, cfg.threshold_planner.mode, &Seeder::new(1))?;
    println!("report on day {day}: {}", block.y0);
    println!("best thresholds {:?} over {} candidates, value {:.1}", plan.phi.taus(), plan.candidates_evaluated, plan.value);
    println!("recommended action: {}", threshold_policy(block.y0, &plan.phi).level());
    Ok(())
}

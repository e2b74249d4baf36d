//! Drives an interactive session: inspects a recommendation, asks for a
//! what-if forecast, overrides one block and accepts the rest.

use epicontrol::control::{prepare, PlannerKind, RunConfig};
use epicontrol::model::ActionLevel;
use epicontrol::session::{Session, StepChoice};

fn main() -> epicontrol::Result<()> {
    let mut cfg = RunConfig::desk();
    cfg.planner = PlannerKind::Threshold;
    cfg.horizon_days = 40;
    let p = prepare(&cfg)?;
    let mut session = Session::create("demo", &cfg, &p.generator, &p.context, None)?;

    let whatif = session.whatif(Some(4))?;
    for f in &whatif.forecasts {
        let end = f.icu_q50.last().copied().unwrap_or(0.0);
        println!("action {}: median icu after {} days {end:.0}, expected return {:.1}", f.action, whatif.horizon, f.expected_return);
    }

    session.step(StepChoice::Override(ActionLevel::new(4)?))?;
    while let Some(rec) = session.view().recommendation {
        println!("block {} day {}: recommended {}", rec.block, rec.day, rec.action);
        session.step(StepChoice::Recommended)?;
    }
    let view = session.view();
    println!("finished on day {} with total reward {:.1}", view.day, view.total_reward);
    Ok(())
}

//! Simulates the synthetic benchmark epidemic and prints a weekly ICU
//! summary next to the action in force.

use epicontrol::control::{Scenario, ScenarioSpec};

fn main() -> epicontrol::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let s = Scenario::generate(&ScenarioSpec::desk(), seed)?;
    println!("{:>4} {:>6} {:>6} {:>7} {:>6}", "day", "action", "icu", "report", "vacc");
    for t in (0..s.actions.len()).step_by(7) {
        let x = &s.states[t];
        println!("{:>4} {:>6} {:>6} {:>7} {:>6}", t, s.actions[t].level(), x.icu_load(), s.reports[t], x.vaccinated());
    }
    let total = s.states.last().map(|x| x.total()).unwrap_or(0);
    println!("population at the end: {total}");
    Ok(())
}

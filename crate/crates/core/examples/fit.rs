//! Assimilates the warm-up reports of a synthetic series with SMC2 and
//! compares the posterior transmission rates with the truth.

use epicontrol::control::{observation_window, RunConfig, Scenario, ScenarioSpec};
use epicontrol::model::ModelParams;
use epicontrol::smc::warm_start;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> epicontrol::Result<()> {
    let spec = ScenarioSpec::desk();
    let s = Scenario::generate(&spec, 7)?;
    let cfg = RunConfig::desk();
    let days = 120;
    let window = observation_window(&s.reports[..=days], &s.actions[..days])?;
    let base = ModelParams::default().with_population(spec.population);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cloud = warm_start(&base, s.initial, &cfg.smc2, &window, &s.vax, &mut rng)?;
    let q = cloud.beta_quantiles(&[0.05, 0.5, 0.95]);
    println!("day {} ess {:.1}", cloud.t, cloud.ess());
    for j in 0..4 {
        println!("beta{}: true {:.3}  posterior {:.3} [{:.3}, {:.3}]", j + 1, spec.beta[j], q[1][j], q[0][j], q[2][j]);
    }
    Ok(())
}

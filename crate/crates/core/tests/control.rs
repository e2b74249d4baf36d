mod common;

use common::quick_config;
use epicontrol::control::{
    fit_generator, prepare, run_decision_loop, validation_replay, DecisionLoop, GeneratorSpec, PlannerKind, RunConfig,
    Scenario, ScenarioSpec,
};
use epicontrol::model::ActionLevel;
use epicontrol::rng::Seeder;
use epicontrol::session::{Session, StepChoice};
use epicontrol::smc::Smc2Config;

fn from_day_zero(s: &Scenario) -> GeneratorSpec {
    GeneratorSpec { start_day: 0, ..s.true_generator() }
}

#[test]
fn generator_recovers_known_rates() {
    let spec = ScenarioSpec::desk();
    let s = Scenario::generate(&spec, 4).unwrap();
    let days = 120;
    let smc2 = Smc2Config { n_theta: 100, n_x: 64, ..Default::default() };
    let (generator, cloud) = fit_generator(
        &s.reports[..=days],
        &s.actions[..days],
        &s.vax,
        &s.truth,
        s.initial,
        &smc2,
        60,
        20,
        &Seeder::new(1),
    )
    .unwrap();
    assert_eq!(generator.draws.len(), 20);
    assert!(generator.draws.iter().all(|d| d.params.beta.is_ordered() && d.start_state.day == 60));
    let q = cloud.beta_quantiles(&[0.05, 0.95]);
    // Actions 1 to 3 are in force during the first 120 days.
    for j in 0..3 {
        assert!(q[0][j] <= spec.beta[j] && spec.beta[j] <= q[1][j], "beta{}: [{}, {}]", j + 1, q[0][j], q[1][j]);
    }
}

#[test]
fn replay_bands_are_calibrated() {
    let (mut inside, mut total) = (0usize, 0usize);
    for seed in 0..10 {
        let s = Scenario::generate(&ScenarioSpec::desk(), seed).unwrap();
        let bands = validation_replay(&from_day_zero(&s), &s.actions, 400, &Seeder::new(100 + seed)).unwrap();
        for (t, x) in s.states[1..].iter().enumerate() {
            let h = x.icu_load() as f64;
            inside += usize::from(bands.q05[t] <= h && h <= bands.q95[t]);
            total += 1;
        }
    }
    let coverage = inside as f64 / total as f64;
    assert!(coverage >= 0.85, "pooled coverage {coverage}");
}

#[test]
fn doubling_paths_shrinks_standard_error_by_root_two() {
    let s = Scenario::generate(&ScenarioSpec::desk(), 1).unwrap();
    let g = from_day_zero(&s);
    let small = validation_replay(&g, &s.actions, 300, &Seeder::new(7)).unwrap();
    let large = validation_replay(&g, &s.actions, 600, &Seeder::new(8)).unwrap();
    let ratios: Vec<f64> = small
        .std_err
        .iter()
        .zip(&large.std_err)
        .skip(30)
        .filter(|(_, &l)| l > 0.0)
        .map(|(s, l)| s / l)
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 2f64.sqrt()).abs() < 0.1, "mean ratio {mean}");
}

#[test]
fn historical_planner_replays_the_record() {
    let cfg = quick_config(PlannerKind::Historical);
    let p = prepare(&cfg).unwrap();
    let trace = run_decision_loop(&cfg, &p.generator, &p.context, None).unwrap();
    assert_eq!(trace.actions(), p.context.historical[..30].to_vec());
    assert_eq!(trace.days.len(), 30);
}

#[test]
fn random_planner_is_reproducible_and_uniform() {
    let mut counts = [0usize; 4];
    let mut blocks = 0;
    for seed in 0..100 {
        let cfg = RunConfig { seed, ..quick_config(PlannerKind::Random) };
        let p = prepare(&cfg).unwrap();
        let a = run_decision_loop(&cfg, &p.generator, &p.context, None).unwrap();
        if seed < 3 {
            let b = run_decision_loop(&cfg, &p.generator, &p.context, None).unwrap();
            assert_eq!(a, b);
        }
        for block in &a.blocks {
            counts[block.deployed.index()] += 1;
            blocks += 1;
        }
    }
    let expected = blocks as f64 / 4.0;
    let sd = (blocks as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - expected).abs() < 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn actions_change_only_at_block_starts_and_plans_never_look_ahead() {
    for planner in [PlannerKind::Threshold, PlannerKind::Qlearn, PlannerKind::Random, PlannerKind::NaiveQ] {
        let cfg = RunConfig { track_posterior: true, ..quick_config(planner) };
        let p = prepare(&cfg).unwrap();
        let mut lp = DecisionLoop::new(&cfg, &p.generator, &p.context, None).unwrap();
        while !lp.is_finished() {
            assert_eq!(lp.cloud().unwrap().t, lp.day(), "{planner}");
            lp.advance(None).unwrap();
        }
        let trace = lp.into_trace();
        for (i, d) in trace.days.iter().enumerate() {
            if i % cfg.delta != 0 {
                assert_eq!(d.action, trace.days[i - 1].action, "{planner} day {i}");
            }
        }
    }
}

#[test]
fn overriding_with_the_recommendation_is_accepting() {
    let cfg = quick_config(PlannerKind::Threshold);
    let p = prepare(&cfg).unwrap();
    let mut a = DecisionLoop::new(&cfg, &p.generator, &p.context, None).unwrap();
    let mut b = a.clone();
    while !a.is_finished() {
        let rec = b.recommend().unwrap().action;
        a.advance(None).unwrap();
        b.advance(Some(rec)).unwrap();
    }
    assert_eq!(a.trace(), b.trace());
    assert!(b.trace().blocks.iter().all(|r| !r.overridden));
}

#[test]
fn accepting_session_matches_batch_run() {
    for planner in [PlannerKind::Threshold, PlannerKind::Random] {
        let cfg = quick_config(planner);
        let p = prepare(&cfg).unwrap();
        let mut s = Session::create("x", &cfg, &p.generator, &p.context, None).unwrap();
        while s.view().recommendation.is_some() {
            s.step(StepChoice::Recommended).unwrap();
        }
        let batch = run_decision_loop(&cfg, &p.generator, &p.context, None).unwrap();
        assert_eq!(s.decision_loop().trace().days, batch.days, "{planner}");
    }
}

#[test]
fn zero_epidemic_whatif_orders_actions_by_cost() {
    let mut cfg = quick_config(PlannerKind::Random);
    cfg.scenario = ScenarioSpec { exposed: 0, infectious: 0, ..ScenarioSpec::desk() };
    let p = prepare(&cfg).unwrap();
    let s = Session::create("zero", &cfg, &p.generator, &p.context, None).unwrap();
    let w = s.whatif(None).unwrap();
    for f in &w.forecasts {
        assert!(f.icu_q95.iter().all(|&h| h == 0.0), "action {}", f.action);
    }
    let returns: Vec<f64> = w.forecasts.iter().map(|f| f.expected_return).collect();
    assert_eq!(w.forecasts[0].action, ActionLevel::NONE);
    assert!(returns.windows(2).all(|r| r[0] > r[1]), "{returns:?}");
}

mod common;

use common::{mean_var, ToyHmm};
use epicontrol::control::{observation_window, Scenario, ScenarioSpec};
use epicontrol::model::{log_likelihood, observe, CompartmentState, ModelParams, Observation};
use epicontrol::smc::{run_filter, warm_start, PosteriorCloud, Smc2Config};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pf_estimates(hmm: &ToyHmm, ys: &[(usize, ())], n_x: usize, runs: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..runs).map(|_| run_filter(&0usize, hmm, ys, n_x, 0.5, &mut rng).unwrap().log_likelihood()).collect()
}

#[test]
fn toy_filter_matches_forward_algorithm() {
    let hmm = ToyHmm::sticky();
    let ys = hmm.simulate(0, 40, &mut ChaCha8Rng::seed_from_u64(1));
    let exact = hmm.forward_log_likelihood(0, &ys);
    let (mean, var) = mean_var(&pf_estimates(&hmm, &ys, 256, 100, 2));
    let se = (var / 100.0).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "pf {mean} exact {exact} se {se}");
}

#[test]
fn filter_variance_falls_with_particles() {
    let hmm = ToyHmm::sticky();
    let ys = hmm.simulate(0, 40, &mut ChaCha8Rng::seed_from_u64(3));
    let (_, v16) = mean_var(&pf_estimates(&hmm, &ys, 16, 100, 4));
    let (_, v64) = mean_var(&pf_estimates(&hmm, &ys, 64, 100, 5));
    let (_, v256) = mean_var(&pf_estimates(&hmm, &ys, 256, 100, 6));
    assert!(v16 > v64 && v64 > v256, "{v16} {v64} {v256}");
}

#[test]
fn observation_frequencies_match_likelihood() {
    let params = ModelParams::default().with_population(1_000_000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    for h in [0u64, 10, 1000] {
        let state = CompartmentState { s: 1_000_000 - h, icu: h, ..Default::default() };
        let mut counts = std::collections::HashMap::<u64, usize>::new();
        for _ in 0..n {
            *counts.entry(observe(&state, &params, &mut rng).y).or_default() += 1;
        }
        let hi = if h == 0 { 3 } else { 3 * h + 20 };
        let pmf: Vec<f64> = (0..hi).map(|y| log_likelihood(&Observation::new(0, y), &state, &params).exp()).collect();
        let freq: Vec<f64> = (0..hi).map(|y| counts.get(&y).copied().unwrap_or(0) as f64 / n as f64).collect();
        // Pointwise for small means; for large ones, over ~40 cells of equal
        // mass so the cells are not thousands of near-empty points.
        let cells: Vec<(u64, u64)> = if h <= 10 {
            (0..hi).map(|y| (y, y + 1)).collect()
        } else {
            let mut out = Vec::new();
            let (mut start, mut mass) = (0u64, 0.0);
            for y in 0..hi {
                mass += pmf[y as usize];
                if mass >= 0.025 || y + 1 == hi {
                    out.push((start, y + 1));
                    start = y + 1;
                    mass = 0.0;
                }
            }
            out
        };
        for (lo, up) in cells {
            let p: f64 = pmf[lo as usize..up as usize].iter().sum();
            let f: f64 = freq[lo as usize..up as usize].iter().sum();
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
            assert!((f - p).abs() <= 3.0 * se, "H={h} y in {lo}..{up}: freq {f} pmf {p}");
        }
    }
}

#[test]
fn posterior_draws_follow_weights() {
    let base = ModelParams::default().with_population(10_000);
    let initial = CompartmentState::seeded(10_000, 5, 5).unwrap();
    let cfg = Smc2Config { n_theta: 4, n_x: 2, ..Default::default() };
    let mut cloud = PosteriorCloud::from_prior(&base, initial, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    cloud.weights = vec![0.1, 0.2, 0.3, 0.4];
    let k = 40_000;
    let draws = cloud.sample_posterior(k, &mut ChaCha8Rng::seed_from_u64(1));
    let mut counts = [0usize; 4];
    for (p, _) in &draws {
        let i = cloud.thetas.iter().position(|b| *b == p.beta).unwrap();
        counts[i] += 1;
    }
    for (i, &w) in cloud.weights.iter().enumerate() {
        let freq = counts[i] as f64 / k as f64;
        let se = (w * (1.0 - w) / k as f64).sqrt();
        assert!((freq - w).abs() < 3.0 * se, "theta {i}: {freq} vs {w}");
    }
}

#[test]
fn warm_start_contracts_the_prior() {
    let spec = ScenarioSpec::desk();
    let scenario = Scenario::generate(&spec, 2).unwrap();
    let ctx = scenario.context();
    let window = observation_window(&ctx.past_reports, &ctx.past_actions).unwrap();
    let cfg = Smc2Config { n_theta: 100, n_x: 64, ..Default::default() };
    let base = ModelParams::default().with_population(spec.population);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let prior = PosteriorCloud::from_prior(&base, ctx.initial, &cfg, &mut rng).unwrap();
    let post = warm_start(&base, ctx.initial, &cfg, &window, &ctx.vax, &mut rng).unwrap();
    assert_eq!(post.t, 60);
    // Actions 1 and 2 were in force during the warm-up.
    for j in 0..2 {
        let (_, sd_prior) = prior.beta_moments()[j];
        let (mean, sd_post) = post.beta_moments()[j];
        assert!(sd_post < 0.5 * sd_prior, "beta{} sd {sd_post} vs prior {sd_prior}", j + 1);
        assert!((mean - spec.beta[j]).abs() < 3.0 * sd_post + 0.02, "beta{} mean {mean}", j + 1);
    }
}

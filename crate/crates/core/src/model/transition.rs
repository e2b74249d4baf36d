//! One-day SEIR-VU transition.
//!
//! All transition counts are drawn through the [`Draw`] trait, so the same
//! bookkeeping runs either stochastically (binomial draws) or in mean-field
//! mode (each draw replaced by its rounded mean). Competing outflows from a
//! compartment are split multinomially via sequential conditional binomials,
//! which keeps every outflow total at or below its source count.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::params::{ModelParams, VaccinatedExposure};
use super::state::{ActionLevel, CompartmentState};
use super::vaccination::VaccinationStream;
use crate::error::Result;

/// Source of transition counts.
pub trait Draw {
    /// A count in `0..=n` with mean `n * p`.
    fn binomial(&mut self, n: u64, p: f64) -> u64;

    /// Splits `n` among competing outflows with probabilities `probs`; the
    /// residual `1 - sum(probs)` stays put. Conditional probabilities that
    /// exceed one are clamped, so the outflows never exceed `n`.
    fn multinomial<const K: usize>(&mut self, n: u64, probs: [f64; K]) -> [u64; K] {
        let mut out = [0u64; K];
        let mut remaining = n;
        let mut mass = 1.0;
        for (slot, &p) in out.iter_mut().zip(probs.iter()) {
            if remaining == 0 {
                break;
            }
            let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
            let x = self.binomial(remaining, cond);
            *slot = x;
            remaining -= x;
            mass -= p;
        }
        out
    }
}

/// Binomial draws from a random stream.
pub struct Stochastic<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Draw for Stochastic<'_, R> {
    #[inline]
    fn binomial(&mut self, n: u64, p: f64) -> u64 {
        if n == 0 || p <= 0.0 {
            return 0;
        }
        if p >= 1.0 {
            return n;
        }
        Binomial::new(n, p).expect("probability checked above").sample(self.0)
    }
}

/// Deterministic mode: every draw is its mean rounded to the nearest count.
#[derive(Debug, Default, Clone, Copy)]
pub struct MeanField;

impl Draw for MeanField {
    #[inline]
    fn binomial(&mut self, n: u64, p: f64) -> u64 {
        ((n as f64) * p.clamp(0.0, 1.0)).round().min(n as f64) as u64
    }
}

/// Force of infection `beta_a * (I + I_V) / N` in 1/day.
pub fn force_of_infection(state: &CompartmentState, params: &ModelParams, action: ActionLevel) -> f64 {
    params.beta.get(action) * state.infectious() as f64 / params.population as f64
}

/// Second doses go to V4 first, then V3. Returns `(to_v3, to_v4)`; any
/// excess beyond `V3 + V4` is dropped.
pub fn second_dose_allocation(v3: u64, v4: u64, daily_second: u64) -> (u64, u64) {
    let d4 = daily_second.min(v4);
    let d3 = v3.min(daily_second - d4);
    (d3, d4)
}

/// ICU admission probability of vaccinated infectious individuals: `p_IU`
/// scaled by the stratum-weighted average of `1 - psi_j`. Zero when no one
/// is vaccinated.
pub fn icu_admission_prob_vaccinated(state: &CompartmentState, params: &ModelParams) -> f64 {
    let total = state.vaccinated();
    if total == 0 {
        return 0.0;
    }
    let weighted: f64 = state.v.iter().zip(params.psi.iter()).map(|(&v, &psi)| (1.0 - psi) * v as f64).sum();
    params.p_iu * weighted / total as f64
}

/// Daily exposure probability of a susceptible, `1 - exp(-lambda)`.
pub fn exposure_prob(lambda: f64) -> f64 {
    -(-lambda).exp_m1()
}

/// Daily exposure probability of vaccinated stratum `j` (0-based).
pub fn vaccinated_exposure_prob(lambda: f64, params: &ModelParams, j: usize) -> f64 {
    let reduced = lambda * (1.0 - params.eps[j]);
    match params.vaccinated_exposure {
        VaccinatedExposure::Linear => reduced.clamp(0.0, 1.0),
        VaccinatedExposure::Exponential => exposure_prob(reduced),
    }
}

/// Advances `state` by one day using `draw` for every transition count.
pub fn step_with<D: Draw>(
    state: &CompartmentState,
    params: &ModelParams,
    action: ActionLevel,
    vax: &VaccinationStream,
    draw: &mut D,
) -> Result<CompartmentState> {
    let (daily_first, daily_second) = vax.get(state.day)?;
    let lambda = force_of_infection(state, params, action);

    // Susceptibles: first doses take priority over infection.
    let sv = daily_first.min(state.s);
    let se = draw.binomial(state.s - sv, exposure_prob(lambda));

    // Unvaccinated disease progression.
    let ei = draw.binomial(state.e, params.p_ei);
    let [ir, iu] = draw.multinomial(state.i, [params.p_ir, params.p_iu]);
    let ur = draw.binomial(state.icu, params.p_ur);

    // Vaccinated strata.
    let (d3, d4) = second_dose_allocation(state.v[2], state.v[3], daily_second);
    let second = [0, 0, d3, d4, 0];
    let mut vv = [0u64; 5];
    let mut ve = [0u64; 5];
    for j in 0..5 {
        let pool = state.v[j] - second[j];
        let p_ve = vaccinated_exposure_prob(lambda, params, j);
        if j < 3 {
            let [exposed, waned] = draw.multinomial(pool, [p_ve, params.p_vv]);
            ve[j] = exposed;
            vv[j] = waned;
        } else {
            ve[j] = draw.binomial(pool, p_ve);
        }
    }
    let ei_v = draw.binomial(state.e_v, params.p_ei);
    let p_viu = icu_admission_prob_vaccinated(state, params);
    let [ir_v, iu_v] = draw.multinomial(state.i_v, [params.p_ir, p_viu]);
    let ur_v = draw.binomial(state.icu_v, params.p_ur);

    let v = state.v;
    Ok(CompartmentState {
        day: state.day + 1,
        s: state.s - se - sv,
        e: state.e + se - ei,
        i: state.i + ei - ir - iu,
        r: state.r + ir + ur,
        icu: state.icu + iu - ur,
        v: [
            v[0] + sv - vv[0] - ve[0],
            v[1] + vv[0] - vv[1] - ve[1],
            v[2] + vv[1] - vv[2] - d3 - ve[2],
            v[3] + vv[2] - d4 - ve[3],
            v[4] + d3 + d4 - ve[4],
        ],
        e_v: state.e_v + ve.iter().sum::<u64>() - ei_v,
        i_v: state.i_v + ei_v - ir_v - iu_v,
        r_v: state.r_v + ir_v + ur_v,
        icu_v: state.icu_v + iu_v - ur_v,
    })
}

/// Stochastic one-day transition.
pub fn step<R: Rng + ?Sized>(
    state: &CompartmentState,
    params: &ModelParams,
    action: ActionLevel,
    vax: &VaccinationStream,
    rng: &mut R,
) -> Result<CompartmentState> {
    step_with(state, params, action, vax, &mut Stochastic(rng))
}

/// Mean-field one-day transition.
pub fn step_mean_field(
    state: &CompartmentState,
    params: &ModelParams,
    action: ActionLevel,
    vax: &VaccinationStream,
) -> Result<CompartmentState> {
    step_with(state, params, action, vax, &mut MeanField)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: u64) -> ModelParams {
        ModelParams::default().with_population(n)
    }

    fn a(level: i64) -> ActionLevel {
        ActionLevel::new(level).unwrap()
    }

    #[test]
    fn force_of_infection_examples() {
        let mut p = params(100_000);
        let mut s = CompartmentState::seeded(100_000, 0, 0).unwrap();
        assert_eq!(force_of_infection(&s, &p, a(1)), 0.0);

        p.beta.0 = [0.3, 0.25, 0.2, 0.1];
        s.i = 500;
        s.i_v = 100;
        s.s -= 600;
        assert!((force_of_infection(&s, &p, a(2)) - 1.5e-3).abs() < 1e-15);

        let full = CompartmentState { i: 60_000, i_v: 40_000, ..Default::default() };
        assert!((force_of_infection(&full, &p, a(1)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn second_dose_examples() {
        assert_eq!(second_dose_allocation(70, 60, 0), (0, 0));
        assert_eq!(second_dose_allocation(70, 60, 100), (40, 60));
        assert_eq!(second_dose_allocation(10, 500, 100), (0, 100));
        assert_eq!(second_dose_allocation(5, 5, 100), (5, 5));
    }

    #[test]
    fn vaccinated_icu_probability() {
        let p = params(1000);
        let mut s = CompartmentState::default();
        assert_eq!(icu_admission_prob_vaccinated(&s, &p), 0.0);

        s.v = [0, 0, 0, 0, 400];
        assert!((icu_admission_prob_vaccinated(&s, &p) - p.p_iu * 0.11).abs() < 1e-15);

        s.v = [100; 5];
        let expected = p.p_iu * (1.0 - 0.688);
        assert!((icu_admission_prob_vaccinated(&s, &p) - expected).abs() < 1e-15);
    }

    #[test]
    fn no_infection_state_is_absorbing() {
        let p = params(10_000);
        let mut s = CompartmentState { s: 5000, r: 3000, r_v: 1000, v: [200; 5], ..Default::default() };
        s.day = 3;
        let vax = VaccinationStream::zeros(10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = step(&s, &p, a(1), &vax, &mut rng).unwrap();
        // Only V-stratum waning moves anyone.
        assert_eq!(next.s, s.s);
        assert_eq!(next.e + next.i + next.icu + next.e_v + next.i_v + next.icu_v, 0);
        assert_eq!(next.day, 4);

        let frozen = CompartmentState { s: 9000, r: 1000, ..Default::default() };
        let next = step(&frozen, &p, a(1), &vax, &mut rng).unwrap();
        assert_eq!(CompartmentState { day: 0, ..next }, frozen);
    }

    #[test]
    fn first_doses_clamp_to_susceptibles() {
        let p = params(1000);
        let s = CompartmentState { s: 50, i: 10, r: 940, ..Default::default() };
        let vax = VaccinationStream::new(vec![80], vec![0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let next = step(&s, &p, a(1), &vax, &mut rng).unwrap();
        assert_eq!(next.s, 0);
        assert_eq!(next.v[0] + next.v.iter().skip(1).sum::<u64>() + next.e_v, 50);
        assert_eq!(next.total(), 1000);
    }

    #[test]
    fn missing_vaccination_day_errors() {
        let p = params(1000);
        let s = CompartmentState { day: 5, s: 1000, ..Default::default() };
        let err = step(&s, &p, a(1), &VaccinationStream::zeros(5), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::MalformedStream { day: 5, .. }));
    }

    #[test]
    fn mean_exposure_matches_binomial_mean() {
        let mut p = params(10_000);
        p.beta.0 = [0.2, 0.15, 0.1, 0.05];
        let s = CompartmentState { s: 9000, i: 100, r: 900, ..Default::default() };
        let vax = VaccinationStream::zeros(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let next = step(&s, &p, a(1), &vax, &mut rng).unwrap();
            let se = (s.s - next.s) as f64;
            sum += se;
            sum_sq += se * se;
        }
        let mean = sum / n as f64;
        let sd = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        let expected = 9000.0 * (1.0 - (-0.2f64 * 100.0 / 10_000.0).exp());
        assert!((expected - 17.98).abs() < 0.01);
        assert!((mean - expected).abs() < 3.0 * sd, "mean {mean} expected {expected} se {sd}");
    }

    #[test]
    fn multinomial_never_exceeds_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = Stochastic(&mut rng);
        for n in [0u64, 1, 5, 1000] {
            for _ in 0..200 {
                let [x, y] = d.multinomial(n, [0.7, 0.9]);
                assert!(x + y <= n);
            }
        }
        let [x, y] = MeanField.multinomial(100, [0.25, 0.5]);
        assert_eq!((x, y), (25, 50));
    }

    #[test]
    fn waning_moves_between_strata_without_loss() {
        let mut p = params(1000);
        p.p_vv = 1.0;
        let s = CompartmentState { s: 0, r: 0, v: [200; 5], ..Default::default() };
        let next = step_mean_field(&s, &p, a(1), &VaccinationStream::zeros(1)).unwrap();
        assert_eq!(next.v, [0, 200, 200, 400, 200]);
        assert_eq!(next.total(), 1000);
    }

    fn arb_state() -> impl Strategy<Value = CompartmentState> {
        (proptest::collection::vec(0u64..5000, 14), 0u32..3).prop_map(|(c, day)| CompartmentState {
            day,
            s: c[0],
            e: c[1],
            i: c[2],
            r: c[3],
            icu: c[4],
            v: [c[5], c[6], c[7], c[8], c[9]],
            e_v: c[10],
            i_v: c[11],
            r_v: c[12],
            icu_v: c[13],
        })
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn population_is_conserved(
            state in arb_state(),
            level in 1i64..=4,
            first in 0u64..3000,
            second in 0u64..3000,
            p_vv in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let n = state.total().max(1);
            let mut p = params(n);
            p.beta.0 = [0.9, 0.6, 0.3, 0.1];
            p.p_vv = p_vv;
            let vax = VaccinationStream::new(vec![first; 3], vec![second; 3]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = state;
            for _ in 0..(3 - state.day) {
                let next = step(&x, &p, a(level), &vax, &mut rng).unwrap();
                prop_assert_eq!(next.total(), state.total());
                let mf = step_mean_field(&x, &p, a(level), &vax).unwrap();
                prop_assert_eq!(mf.total(), state.total());
                x = next;
            }
        }
    }
}

use rand::Rng;

use super::observation::{observe, observe_mean, Observation};
use super::params::ModelParams;
use super::state::{ActionLevel, CompartmentState};
use super::transition::{step, step_mean_field};
use super::vaccination::VaccinationStream;
use crate::error::{Error, Result};

/// A simulated path: `states[t]` and `observations[t]` are the state and
/// report after `t + 1` days.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<CompartmentState>,
    pub observations: Vec<Observation>,
}

/// Runs `days` stochastic steps, observing after each. `actions[t]` is the
/// action in force during day `t` of the run.
pub fn simulate<R: Rng + ?Sized>(
    initial: &CompartmentState,
    params: &ModelParams,
    actions: &[ActionLevel],
    vax: &VaccinationStream,
    days: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    run(initial, actions, days, |s, a| {
        let next = step(s, params, a, vax, rng)?;
        let y = observe(&next, params, rng);
        Ok((next, y))
    })
}

/// Mean-field counterpart of [`simulate`].
pub fn simulate_mean_field(
    initial: &CompartmentState,
    params: &ModelParams,
    actions: &[ActionLevel],
    vax: &VaccinationStream,
    days: usize,
) -> Result<Trajectory> {
    run(initial, actions, days, |s, a| {
        let next = step_mean_field(s, params, a, vax)?;
        Ok((next, observe_mean(&next)))
    })
}

fn run(
    initial: &CompartmentState,
    actions: &[ActionLevel],
    days: usize,
    mut advance: impl FnMut(&CompartmentState, ActionLevel) -> Result<(CompartmentState, Observation)>,
) -> Result<Trajectory> {
    if days == 0 {
        return Err(Error::InvalidConfig("simulate needs at least one day".into()));
    }
    if actions.len() < days {
        return Err(Error::LengthMismatch { expected: days, got: actions.len() });
    }
    let mut states = Vec::with_capacity(days);
    let mut observations = Vec::with_capacity(days);
    let mut cur = *initial;
    for &a in &actions[..days] {
        let (next, y) = advance(&cur, a)?;
        states.push(next);
        observations.push(y);
        cur = next;
    }
    Ok(Trajectory { states, observations })
}

//! The SEIR-VU compartmental model: state, parameters, the stochastic
//! one-day transition and the ICU observation model.

mod observation;
mod params;
mod simulate;
mod state;
mod transition;
mod vaccination;

pub use observation::{
    log_likelihood, negbin_log_pmf, observe, observe_mean, sample_negbin, Observation, LOG_WEIGHT_FLOOR,
};
pub use params::{Betas, ModelParams, VaccinatedExposure, DEFAULT_EPS, DEFAULT_K_OBS, DEFAULT_POPULATION, DEFAULT_PSI};
pub use simulate::{simulate, simulate_mean_field, Trajectory};
pub use state::{ActionLevel, CompartmentState};
pub use transition::{
    exposure_prob, force_of_infection, icu_admission_prob_vaccinated, second_dose_allocation, step, step_mean_field,
    step_with, vaccinated_exposure_prob, Draw, MeanField, Stochastic,
};
pub use vaccination::VaccinationStream;

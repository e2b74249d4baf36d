//! Sequential Monte Carlo: the bootstrap particle filter over latent
//! SEIR-VU states and the nested SMC sampler over transmission rates.

pub mod checkpoint;
mod filter;
mod prior;
mod resample;
mod smc2;

pub use filter::{advance, pf_step, run_filter, sample_index, FilterStep, InnerParticleSet, SeirvuModel, StateSpaceModel};
pub use prior::PriorSpec;
pub use resample::{ess, log_sum_exp, normalize_log_weights, systematic_resample, weighted_quantile};
pub use smc2::{sample_posterior, smc2_assimilate, warm_start, PosteriorCloud, Smc2Config, Smc2Diagnostics};

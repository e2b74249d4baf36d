//! Real-time epidemic decision support.
//!
//! A stochastic SEIR-VU simulator with a Negative-Binomial ICU observation
//! model ([`model`]), nested sequential Monte Carlo inference over
//! transmission rates and latent states ([`smc`]), an intervention reward
//! ([`reward`]), two receding-horizon planners ([`threshold`] and
//! [`qlearn`]), and the blockwise counterfactual decision loop with its
//! interactive session layer ([`control`], [`session`]).

pub mod control;
pub mod error;
pub mod model;
pub mod qlearn;
pub mod reward;
pub mod rng;
pub mod session;
pub mod smc;
pub mod threshold;

pub use error::{Error, Result};

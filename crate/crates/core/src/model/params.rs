use serde::{Deserialize, Serialize};

use super::state::ActionLevel;
use crate::error::{Error, Result};

/// Immunity against infection for vaccination strata V1..V5.
pub const DEFAULT_EPS: [f64; 5] = [0.50, 0.80, 0.70, 0.60, 0.95];
/// Protection against ICU admission for vaccination strata V1..V5.
pub const DEFAULT_PSI: [f64; 5] = [0.50, 0.75, 0.70, 0.60, 0.89];

/// Population of England.
pub const DEFAULT_POPULATION: u64 = 68_000_000;
pub const DEFAULT_K_OBS: f64 = 10.0;

/// How the per-stratum exposure probability of vaccinated individuals is
/// formed from the force of infection `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaccinatedExposure {
    /// `lambda * (1 - eps_j)`, clamped to `[0, 1]`.
    #[default]
    Linear,
    /// `1 - exp(-lambda * (1 - eps_j))`, matching the unvaccinated form.
    Exponential,
}

/// Transmission rates for the four action levels, strictly decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Betas(pub [f64; 4]);

impl Betas {
    pub fn new(b: [f64; 4]) -> Result<Self> {
        let betas = Betas(b);
        if betas.is_ordered() {
            Ok(betas)
        } else {
            Err(Error::InvalidParams(format!("betas must satisfy b1 > b2 > b3 > b4 > 0, got {b:?}")))
        }
    }

    pub fn is_ordered(&self) -> bool {
        let b = &self.0;
        b.iter().all(|x| x.is_finite()) && b[0] > b[1] && b[1] > b[2] && b[2] > b[3] && b[3] > 0.0
    }

    #[inline]
    pub fn get(&self, a: ActionLevel) -> f64 {
        self.0[a.index()]
    }

    pub fn log(&self) -> [f64; 4] {
        self.0.map(f64::ln)
    }
}

/// Full parameterisation of the SEIR-VU transition and observation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub beta: Betas,
    pub p_ei: f64,
    pub p_ir: f64,
    pub p_iu: f64,
    pub p_ur: f64,
    pub p_vv: f64,
    pub eps: [f64; 5],
    pub psi: [f64; 5],
    pub k_obs: f64,
    pub population: u64,
    pub vaccinated_exposure: VaccinatedExposure,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta: Betas([0.40, 0.30, 0.20, 0.10]),
            p_ei: 1.0 - (-1.0 / 9.86f64).exp(),
            p_ir: 1.0 - (-1.0 / 10.41f64).exp(),
            p_iu: 1.0 - (-1.0 / 10.0f64).exp(),
            p_ur: 1.0 / 10.0,
            p_vv: 1.0 / 20.0,
            eps: DEFAULT_EPS,
            psi: DEFAULT_PSI,
            k_obs: DEFAULT_K_OBS,
            population: DEFAULT_POPULATION,
            vaccinated_exposure: VaccinatedExposure::Linear,
        }
    }
}

impl ModelParams {
    pub fn with_population(mut self, population: u64) -> Self {
        self.population = population;
        self
    }

    pub fn with_beta(&self, beta: Betas) -> Self {
        ModelParams { beta, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParams(what));
        if !self.beta.is_ordered() {
            return bad(format!("betas must satisfy b1 > b2 > b3 > b4 > 0, got {:?}", self.beta.0));
        }
        for (name, p) in [("p_ei", self.p_ei), ("p_ir", self.p_ir), ("p_iu", self.p_iu), ("p_ur", self.p_ur), ("p_vv", self.p_vv)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name}={p} outside [0, 1]"));
            }
        }
        if self.p_ir + self.p_iu > 1.0 {
            return bad(format!("p_ir + p_iu = {} exceeds 1", self.p_ir + self.p_iu));
        }
        if self.eps.iter().chain(self.psi.iter()).any(|x| !(0.0..=1.0).contains(x)) {
            return bad("vaccine efficacies must lie in [0, 1]".into());
        }
        if !(self.k_obs.is_finite() && self.k_obs > 0.0) {
            return bad(format!("k_obs must be positive, got {}", self.k_obs));
        }
        if self.population == 0 {
            return bad("population must be positive".into());
        }
        Ok(())
    }
}

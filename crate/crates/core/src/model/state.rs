use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four ordinal intervention levels, 1 = no intervention,
/// 4 = full lockdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ActionLevel(u8);

impl ActionLevel {
    pub const COUNT: usize = 4;
    pub const NONE: ActionLevel = ActionLevel(1);
    pub const LOCKDOWN: ActionLevel = ActionLevel(4);
    pub const ALL: [ActionLevel; 4] = [ActionLevel(1), ActionLevel(2), ActionLevel(3), ActionLevel(4)];

    pub fn new(level: i64) -> Result<Self> {
        if (1..=4).contains(&level) {
            Ok(ActionLevel(level as u8))
        } else {
            Err(Error::InvalidAction(level))
        }
    }

    /// Zero-based index into per-action arrays.
    pub fn from_index(index: usize) -> Self {
        assert!(index < Self::COUNT, "action index {index} out of range");
        ActionLevel(index as u8 + 1)
    }

    #[inline]
    pub fn level(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u8> for ActionLevel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        ActionLevel::new(v as i64)
    }
}

impl From<ActionLevel> for u8 {
    fn from(a: ActionLevel) -> u8 {
        a.0
    }
}

impl std::fmt::Display for ActionLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Latent epidemic state on one day: the fourteen compartment counts.
///
/// `icu` and `icu_v` are the unvaccinated and vaccinated ICU occupancy; the
/// five `v` strata are increasing levels of vaccine-induced immunity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CompartmentState {
    pub day: u32,
    pub s: u64,
    pub e: u64,
    pub i: u64,
    pub r: u64,
    pub icu: u64,
    pub v: [u64; 5],
    pub e_v: u64,
    pub i_v: u64,
    pub r_v: u64,
    pub icu_v: u64,
}

impl CompartmentState {
    /// Everyone susceptible except the given exposed and infectious seeds.
    pub fn seeded(population: u64, exposed: u64, infectious: u64) -> Result<Self> {
        let seeded = exposed.checked_add(infectious).filter(|&n| n <= population).ok_or_else(|| {
            Error::InvalidParams(format!("seed {exposed}+{infectious} exceeds population {population}"))
        })?;
        Ok(CompartmentState { s: population - seeded, e: exposed, i: infectious, ..Default::default() })
    }

    /// Sum over all fourteen compartments.
    pub fn total(&self) -> u64 {
        self.s + self.e + self.i + self.r + self.icu + self.v.iter().sum::<u64>() + self.e_v + self.i_v + self.r_v + self.icu_v
    }

    /// Total ICU occupancy `H(t)`.
    #[inline]
    pub fn icu_load(&self) -> u64 {
        self.icu + self.icu_v
    }

    #[inline]
    pub fn infectious(&self) -> u64 {
        self.i + self.i_v
    }

    pub fn vaccinated(&self) -> u64 {
        self.v.iter().sum()
    }

    /// The compartments in canonical order, for tabular export.
    pub fn as_array(&self) -> [u64; 14] {
        let v = self.v;
        [self.s, self.e, self.i, self.r, self.icu, v[0], v[1], v[2], v[3], v[4], self.e_v, self.i_v, self.r_v, self.icu_v]
    }

    pub const COLUMN_NAMES: [&'static str; 14] =
        ["S", "E", "I", "R", "ICU", "V1", "V2", "V3", "V4", "V5", "E_V", "I_V", "R_V", "ICU_V"];
}

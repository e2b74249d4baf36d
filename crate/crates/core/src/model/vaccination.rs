use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daily first- and second-dose counts, indexed by simulation day.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaccinationStream {
    first: Vec<u64>,
    second: Vec<u64>,
}

impl VaccinationStream {
    pub fn new(first: Vec<u64>, second: Vec<u64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::LengthMismatch { expected: first.len(), got: second.len() });
        }
        Ok(Self { first, second })
    }

    /// No vaccinations over `days` days.
    pub fn zeros(days: usize) -> Self {
        Self { first: vec![0; days], second: vec![0; days] }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    /// `(daily_first, daily_second)` for `day`.
    pub fn get(&self, day: u32) -> Result<(u64, u64)> {
        let d = day as usize;
        match (self.first.get(d), self.second.get(d)) {
            (Some(&f), Some(&s)) => Ok((f, s)),
            _ => Err(Error::MalformedStream { day, len: self.len() }),
        }
    }

    /// Zero-pads the stream so it covers at least `days` days.
    pub fn padded_to(&self, days: usize) -> Self {
        let mut out = self.clone();
        if out.first.len() < days {
            out.first.resize(days, 0);
            out.second.resize(days, 0);
        }
        out
    }

    pub fn first(&self) -> &[u64] {
        &self.first
    }

    pub fn second(&self) -> &[u64] {
        &self.second
    }

    /// Sub-stream for days `start..start+len`, zero-filled past the end.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let take = |v: &[u64]| (start..start + len).map(|d| v.get(d).copied().unwrap_or(0)).collect::<Vec<_>>();
        Self { first: take(&self.first), second: take(&self.second) }
    }
}

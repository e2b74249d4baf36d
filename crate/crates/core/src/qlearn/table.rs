use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tabular action values `Q(g, a)` with per-cell update counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_bins: usize,
    n_actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(n_bins: usize, n_actions: usize) -> Self {
        Self::constant(n_bins, n_actions, 0.0)
    }

    pub fn constant(n_bins: usize, n_actions: usize, value: f64) -> Self {
        assert!(n_bins > 0 && n_actions > 0, "table must be non-empty");
        QTable { n_bins, n_actions, values: vec![value; n_bins * n_actions], visits: vec![0; n_bins * n_actions] }
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, g: usize, a: usize) -> f64 {
        self.values[g * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, g: usize, a: usize, v: f64) {
        self.values[g * self.n_actions + a] = v;
    }

    pub fn visits(&self, g: usize, a: usize) -> u64 {
        self.visits[g * self.n_actions + a]
    }

    pub fn row(&self, g: usize) -> &[f64] {
        &self.values[g * self.n_actions..(g + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self, g: usize) -> f64 {
        self.row(g).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action index in bin `g`; ties go to the lowest index.
    pub fn greedy(&self, g: usize) -> usize {
        let row = self.row(g);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_bins).map(|g| self.greedy(g)).collect()
    }

    /// `Q(g,a) += alpha (reward + gamma max_a' Q(g',a') - Q(g,a))`.
    pub fn q_update(&mut self, g: usize, a: usize, reward: f64, g_next: usize, alpha: f64, gamma: f64) {
        let target = reward + gamma * self.max(g_next);
        let i = g * self.n_actions + a;
        self.values[i] += alpha * (target - self.values[i]);
        self.visits[i] += 1;
    }

    /// Clears visit counts, keeping the values.
    pub fn reset_visits(&mut self) {
        self.visits.iter_mut().for_each(|v| *v = 0);
    }

    /// `max |self - other|` over all cells.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Writes `g,a,value,visits` rows with one-based bin and action labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["g", "a", "value", "visits"])?;
        for g in 0..self.n_bins {
            for a in 0..self.n_actions {
                let i = g * self.n_actions + a;
                w.write_record([(g + 1).to_string(), (a + 1).to_string(), self.values[i].to_string(), self.visits[i].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Pointwise mean of equally shaped tables. Visit counts are averaged too
/// (rounded down).
pub fn bayes_average(tables: &[QTable]) -> Result<QTable> {
    let first = tables.first().ok_or_else(|| Error::ShapeMismatch("no tables to average".into()))?;
    if let Some(t) = tables.iter().find(|t| t.n_bins != first.n_bins || t.n_actions != first.n_actions) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            first.n_bins, first.n_actions, t.n_bins, t.n_actions
        )));
    }
    let k = tables.len() as f64;
    let mut out = QTable::new(first.n_bins, first.n_actions);
    for (i, v) in out.values.iter_mut().enumerate() {
        *v = tables.iter().map(|t| t.values[i]).sum::<f64>() / k;
    }
    for (i, v) in out.visits.iter_mut().enumerate() {
        *v = tables.iter().map(|t| t.visits[i]).sum::<u64>() / tables.len() as u64;
    }
    Ok(out)
}

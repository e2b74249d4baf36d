use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bins::BinScheme;
use super::schedule::LearnSchedule;
use super::table::QTable;
use super::train::epsilon_greedy;
use crate::model::ActionLevel;

/// Model-free online Q-learning on the deployed trajectory only: one
/// epsilon-greedy choice and one TD update per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveQ {
    pub table: QTable,
    pub bins: BinScheme,
    pub schedule: LearnSchedule,
    pub gamma: f64,
    blocks_seen: usize,
    updates: usize,
}

impl NaiveQ {
    pub fn new(bins: BinScheme, schedule: LearnSchedule, gamma: f64) -> Self {
        let table = QTable::new(bins.n_bins(), ActionLevel::COUNT);
        NaiveQ { table, bins, schedule, gamma, blocks_seen: 0, updates: 0 }
    }

    /// Action for the block starting with report `y`. Epsilon follows the
    /// schedule with blocks in place of episodes.
    pub fn decide<R: Rng + ?Sized>(&self, y: u64, rng: &mut R) -> ActionLevel {
        let eps = self.schedule.epsilon(self.blocks_seen);
        ActionLevel::from_index(epsilon_greedy(&self.table, self.bins.bin_of(y), eps, rng))
    }

    /// TD update after a block: started at report `y`, held `a`, collected
    /// `block_reward`, and closed at report `y_next`.
    pub fn record_block(&mut self, y: u64, a: ActionLevel, block_reward: f64, y_next: u64) {
        let g = self.bins.bin_of(y);
        let g_next = self.bins.bin_of(y_next);
        let alpha = self.schedule.alpha(self.table.visits(g, a.index()));
        self.table.q_update(g, a.index(), block_reward, g_next, alpha, self.gamma);
        self.blocks_seen += 1;
        self.updates += 1;
    }

    pub fn updates(&self) -> usize {
        self.updates
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use rand::SeedableRng;

    #[test]
    fn greedy_zero_table_starts_with_no_intervention() {
        let bins = BinScheme::geometric(10, 1.0, 6000.0).unwrap();
        let s = LearnSchedule { eps0: 0.0, eps_min: 0.0, ..Default::default() };
        let q = NaiveQ::new(bins, s, 0.95);
        let mut rng = Stream::seed_from_u64(0);
        for y in [0, 50, 5000] {
            assert_eq!(q.decide(y, &mut rng), ActionLevel::NONE);
        }
    }

    #[test]
    fn one_update_per_block() {
        let bins = BinScheme::geometric(10, 1.0, 6000.0).unwrap();
        let mut q = NaiveQ::new(bins, LearnSchedule { episodes: 30, ..Default::default() }, 0.95);
        let mut rng = Stream::seed_from_u64(0);
        let mut y = 100;
        for _ in 0..30 {
            let a = q.decide(y, &mut rng);
            q.record_block(y, a, -10.0 * y as f64, y + 10);
            y += 10;
        }
        assert_eq!(q.updates(), 30);
        let total: u64 = (0..q.table.n_bins()).flat_map(|g| (0..4).map(move |a| (g, a))).map(|(g, a)| q.table.visits(g, a)).sum();
        assert_eq!(total, 30);
    }
}

use rand::Rng;
use rayon::prelude::*;

use super::bins::BinScheme;
use super::convergence::ConvergenceReport;
use super::schedule::{AlphaIndex, LearnSchedule};
use super::table::{bayes_average, QTable};
use crate::error::{Error, Result};
use crate::model::{observe, step, ActionLevel, CompartmentState, ModelParams, Observation, VaccinationStream};
use crate::reward::{reward, RewardConfig, StreakCounter};
use crate::rng::{Seeder, Stream};

/// An episodic environment observed at slice boundaries.
pub trait SliceEnvironment {
    type State: Clone;

    fn n_actions(&self) -> usize;

    /// State at the start of every episode.
    fn initial(&self) -> Self::State;

    fn bin(&self, state: &Self::State) -> usize;

    /// Holds action `a` for one slice, returning the summed reward.
    fn run_slice<R: Rng + ?Sized>(&self, state: &mut Self::State, a: usize, rng: &mut R) -> Result<f64>;
}

/// Sum of the daily rewards of one slice.
pub fn slice_reward(daily: &[f64], delta: usize) -> Result<f64> {
    if daily.len() != delta {
        return Err(Error::LengthMismatch { expected: delta, got: daily.len() });
    }
    Ok(daily.iter().sum())
}

/// SEIR-VU dynamics seen through ICU bins, starting from one posterior draw.
#[derive(Debug, Clone)]
pub struct SeirSliceEnv<'a> {
    pub params: ModelParams,
    pub x0: CompartmentState,
    /// Observation at the decision time.
    pub y0: u64,
    /// Streak state carried in from the deployed history.
    pub streak0: StreakCounter,
    pub delta: usize,
    pub vax: &'a VaccinationStream,
    pub reward: &'a RewardConfig,
    pub bins: &'a BinScheme,
}

#[derive(Debug, Clone)]
pub struct SeirSliceState {
    pub x: CompartmentState,
    pub y: u64,
    pub streak: StreakCounter,
}

impl SliceEnvironment for SeirSliceEnv<'_> {
    type State = SeirSliceState;

    fn n_actions(&self) -> usize {
        ActionLevel::COUNT
    }

    fn initial(&self) -> SeirSliceState {
        SeirSliceState { x: self.x0, y: self.y0, streak: self.streak0 }
    }

    fn bin(&self, s: &SeirSliceState) -> usize {
        self.bins.bin_of(s.y)
    }

    fn run_slice<R: Rng + ?Sized>(&self, s: &mut SeirSliceState, a: usize, rng: &mut R) -> Result<f64> {
        let action = ActionLevel::from_index(a);
        let mut total = 0.0;
        for _ in 0..self.delta {
            s.streak = s.streak.update(action);
            total += reward(s.y, action, s.streak.ell(), self.reward);
            s.x = step(&s.x, &self.params, action, self.vax, rng)?;
            s.y = observe(&s.x, &self.params, rng).y;
        }
        Ok(total)
    }
}

/// Epsilon-greedy choice; exploration is uniform over all actions.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &QTable, g: usize, eps: f64, rng: &mut R) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..q.n_actions())
    } else {
        q.greedy(g)
    }
}

/// One episode of `slices` slices, updating `q` in place at each slice end.
/// Returns the number of updates applied.
pub fn run_episode<E: SliceEnvironment, R: Rng + ?Sized>(
    env: &E,
    q: &mut QTable,
    slices: usize,
    episode: usize,
    schedule: &LearnSchedule,
    gamma: f64,
    rng: &mut R,
) -> Result<usize> {
    let eps = schedule.epsilon(episode);
    let mut s = env.initial();
    for _ in 0..slices {
        let g = env.bin(&s);
        let a = epsilon_greedy(q, g, eps, rng);
        let r = env.run_slice(&mut s, a, rng)?;
        let g_next = env.bin(&s);
        let k = match schedule.alpha_index {
            AlphaIndex::PerVisit => q.visits(g, a),
            AlphaIndex::Episode => episode as u64,
        };
        q.q_update(g, a, r, g_next, schedule.alpha(k), gamma);
    }
    Ok(slices)
}

/// Trains a single table for `schedule.episodes` episodes, each starting
/// from the table left by the previous one.
pub fn train_one_draw<E: SliceEnvironment, R: Rng + ?Sized>(
    env: &E,
    q_start: &QTable,
    schedule: &LearnSchedule,
    slices: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<QTable> {
    let mut q = q_start.clone();
    for e in 0..schedule.episodes {
        run_episode(env, &mut q, slices, e, schedule, gamma, rng)?;
    }
    Ok(q)
}

/// Result of training one table per posterior draw.
#[derive(Debug, Clone)]
pub struct AveragedTraining {
    pub average: QTable,
    pub tables: Vec<QTable>,
    pub report: ConvergenceReport,
}

/// Trains one table per environment in lockstep, recording how the
/// pointwise average moves from episode to episode. Draw `k` consumes the
/// stream `seeder.stream(&[k])`.
pub fn train_posterior_averaged<E>(
    envs: &[E],
    q_start: &QTable,
    schedule: &LearnSchedule,
    slices: usize,
    gamma: f64,
    seeder: &Seeder,
) -> Result<AveragedTraining>
where
    E: SliceEnvironment + Sync,
{
    if envs.is_empty() {
        return Err(Error::InvalidConfig("posterior-averaged training needs at least one draw".into()));
    }
    let mut workers: Vec<(QTable, Stream)> =
        (0..envs.len()).map(|k| (q_start.clone(), seeder.stream(&[k as u64]))).collect();
    let mut report = ConvergenceReport::default();
    let mut prev = q_start.clone();
    for e in 0..schedule.episodes {
        workers
            .par_iter_mut()
            .zip(envs.par_iter())
            .try_for_each(|((q, rng), env)| run_episode(env, q, slices, e, schedule, gamma, rng).map(|_| ()))?;
        let tables: Vec<QTable> = workers.iter().map(|(q, _)| q.clone()).collect();
        let avg = bayes_average(&tables)?;
        report.record(&prev, &avg);
        prev = avg;
    }
    let tables: Vec<QTable> = workers.into_iter().map(|(q, _)| q).collect();
    let average = bayes_average(&tables)?;
    Ok(AveragedTraining { average, tables, report })
}

/// Block decision: greedy action of the averaged table in the bin of
/// `y`; ties go to the least stringent action.
pub fn select_block_action(q_bar: &QTable, y: &Observation, bins: &BinScheme) -> ActionLevel {
    ActionLevel::from_index(q_bar.greedy(bins.bin_of(y.y)))
}

/// Table learned from a realised history before the first decision.
///
/// `ys[t]` is the report on day `t` for `t = 0..=n` and `actions[t]` the
/// action in force during day `t < n`. Consecutive `delta`-day slices from
/// day 0 each yield one update, keyed by the action in force on the slice's
/// first day; a trailing partial slice is ignored.
pub fn warm_up_table(
    ys: &[u64],
    actions: &[ActionLevel],
    bins: &BinScheme,
    delta: usize,
    cfg: &RewardConfig,
    schedule: &LearnSchedule,
) -> Result<QTable> {
    if ys.len() != actions.len() + 1 {
        return Err(Error::LengthMismatch { expected: ys.len().saturating_sub(1), got: actions.len() });
    }
    if delta == 0 {
        return Err(Error::InvalidConfig("slice length must be positive".into()));
    }
    let mut q = QTable::new(bins.n_bins(), ActionLevel::COUNT);
    let mut streak = StreakCounter::default();
    let mut daily = Vec::with_capacity(actions.len());
    for (&y, &a) in ys.iter().zip(actions) {
        streak = streak.update(a);
        daily.push(reward(y, a, streak.ell(), cfg));
    }
    let mut start = 0;
    while start + delta < ys.len() {
        let g = bins.bin_of(ys[start]);
        let a = actions[start].index();
        let r = slice_reward(&daily[start..start + delta], delta)?;
        let g_next = bins.bin_of(ys[start + delta]);
        let k = match schedule.alpha_index {
            AlphaIndex::PerVisit => q.visits(g, a),
            AlphaIndex::Episode => (start / delta) as u64,
        };
        q.q_update(g, a, r, g_next, schedule.alpha(k), cfg.gamma);
        start += delta;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlearn::convergence::{convergence_check, StoppingRule};
    use rand::SeedableRng;

    /// Deterministic two-bin, two-action environment.
    struct Toy {
        next: [[usize; 2]; 2],
        reward: [[f64; 2]; 2],
    }

    impl SliceEnvironment for Toy {
        type State = usize;
        fn n_actions(&self) -> usize {
            2
        }
        fn initial(&self) -> usize {
            0
        }
        fn bin(&self, s: &usize) -> usize {
            *s
        }
        fn run_slice<R: Rng + ?Sized>(&self, s: &mut usize, a: usize, _: &mut R) -> Result<f64> {
            let r = self.reward[*s][a];
            *s = self.next[*s][a];
            Ok(r)
        }
    }

    fn toy() -> Toy {
        // Action `a` moves to bin `a`. The optimum pays 1 in bin 0 to reach
        // bin 1, then cashes in with action 0, so the greedy policy differs
        // between bins and from the all-zero tie-break.
        Toy { next: [[0, 1], [0, 1]], reward: [[0.0, -1.0], [5.0, 1.0]] }
    }

    /// Independent value iteration on the slice-level MDP.
    fn value_iteration(env: &Toy, gamma: f64) -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..10_000 {
            let mut next = q;
            for g in 0..2 {
                for a in 0..2 {
                    let gn = env.next[g][a];
                    next[g][a] = env.reward[g][a] + gamma * q[gn][0].max(q[gn][1]);
                }
            }
            q = next;
        }
        q
    }

    fn argmax(row: [f64; 2]) -> usize {
        usize::from(row[1] > row[0])
    }

    #[test]
    fn slice_reward_sums_and_checks_length() {
        assert_eq!(slice_reward(&[0.0; 10], 10).unwrap(), 0.0);
        assert_eq!(slice_reward(&[-3.0; 10], 10).unwrap(), -30.0);
        let mut days = vec![-5.0; 10];
        days[4] = -1e6;
        assert_eq!(slice_reward(&days, 10).unwrap(), -1e6 - 45.0);
        assert!(matches!(slice_reward(&[1.0; 9], 10), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn zero_episodes_returns_start() {
        let env = toy();
        let mut q = QTable::new(2, 2);
        q.set(1, 1, 7.0);
        let s = LearnSchedule { episodes: 0, ..Default::default() };
        let out = train_one_draw(&env, &q, &s, 5, 0.9, &mut Stream::seed_from_u64(0)).unwrap();
        assert_eq!(out, q);
    }

    #[test]
    fn toy_training_matches_value_iteration() {
        let env = toy();
        let gamma = 0.9;
        let star = value_iteration(&env, gamma);
        let s = LearnSchedule { episodes: 4000, ..Default::default() };
        for seed in 0..5 {
            let q = train_one_draw(&env, &QTable::new(2, 2), &s, 5, gamma, &mut Stream::seed_from_u64(seed)).unwrap();
            for g in 0..2 {
                assert_eq!(q.greedy(g), argmax(star[g]), "seed {seed} bin {g}");
            }
            assert_eq!([argmax(star[0]), argmax(star[1])], [1, 0]);
        }
    }

    #[test]
    fn optimal_start_is_a_fixed_point_without_exploration() {
        let env = toy();
        let gamma = 0.9;
        let star = value_iteration(&env, gamma);
        let mut q = QTable::new(2, 2);
        for g in 0..2 {
            for a in 0..2 {
                q.set(g, a, star[g][a]);
            }
        }
        let s = LearnSchedule { episodes: 50, eps0: 0.0, eps_min: 0.0, ..Default::default() };
        let out = train_one_draw(&env, &q, &s, 5, gamma, &mut Stream::seed_from_u64(1)).unwrap();
        assert!(out.max_abs_diff(&q) < 1e-9);
    }

    #[test]
    fn toy_averaged_training_converges() {
        let envs = [toy(), toy(), toy()];
        let s = LearnSchedule { episodes: 4000, ..Default::default() };
        let out = train_posterior_averaged(&envs, &QTable::new(2, 2), &s, 5, 0.9, &Seeder::new(3)).unwrap();
        assert_eq!(out.report.episodes(), 4000);
        let rule = StoppingRule { tol_rel: 1e-4, patience: 50, ..Default::default() };
        assert!(convergence_check(&out.report, &rule).is_some());
    }

    #[test]
    fn block_action_examples() {
        let bins = BinScheme::new(vec![10.0]).unwrap();
        let mut q = QTable::new(2, 4);
        for (a, v) in [0.0, 5.0, 1.0, -2.0].into_iter().enumerate() {
            q.set(0, a, v);
        }
        let y = Observation::new(0, 3);
        assert_eq!(select_block_action(&q, &y, &bins).level(), 2);
        assert_eq!(select_block_action(&q, &Observation::new(0, 50), &bins).level(), 1);
        let mut scaled = q.clone();
        for a in 0..4 {
            scaled.set(0, a, 3.5 * q.get(0, a));
        }
        assert_eq!(select_block_action(&scaled, &y, &bins), select_block_action(&q, &y, &bins));
    }

    #[test]
    fn warm_up_uses_whole_slices() {
        let bins = BinScheme::new(vec![10.0]).unwrap();
        let ys = vec![0, 0, 20, 20, 20];
        let actions = vec![ActionLevel::NONE; 4];
        let cfg = RewardConfig::model_defaults();
        let q = warm_up_table(&ys, &actions, &bins, 2, &cfg, &LearnSchedule::default()).unwrap();
        // Slices [0,2) and [2,4); the first has reward 0 and lands in bin 1
        // (value 0 at that point), the second reward -40 and lands in bin 1.
        assert_eq!(q.get(0, 0), 0.0);
        assert_eq!(q.get(1, 0), -40.0);
        assert_eq!(q.visits(0, 0) + q.visits(1, 0), 2);
    }

    #[test]
    fn seir_slice_accumulates_daily_rewards() {
        let params = ModelParams::default().with_population(10_000);
        let vax = VaccinationStream::zeros(100);
        let cfg = RewardConfig::model_defaults();
        let bins = BinScheme::geometric(20, 1.0, 6000.0).unwrap();
        let x0 = CompartmentState::seeded(10_000, 0, 0).unwrap();
        let env = SeirSliceEnv {
            params,
            x0,
            y0: 0,
            streak0: StreakCounter::default(),
            delta: 10,
            vax: &vax,
            reward: &cfg,
            bins: &bins,
        };
        let mut s = env.initial();
        let r = env.run_slice(&mut s, 2, &mut Stream::seed_from_u64(0)).unwrap();
        // No epidemic: only the cost of action 3, ell = 1..10.
        let expected: f64 = (1..=10).map(|l| -0.2 * 200.0 * l as f64).sum();
        assert!((r - expected).abs() < 1e-9);
        assert_eq!(s.x.day, 10);
    }
}

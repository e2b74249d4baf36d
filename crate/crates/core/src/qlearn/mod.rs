//! Slice-level tabular Q-learning over binned ICU reports, trained per
//! posterior draw and averaged.

mod bins;
mod convergence;
mod naive;
mod schedule;
mod table;
mod train;

pub use bins::{geometric_points, BinScheme};
pub use convergence::{convergence_check, convergence_check_online, ConvergenceReport, StoppingRule};
pub use naive::NaiveQ;
pub use schedule::{AlphaIndex, LearnSchedule};
pub use table::{bayes_average, QTable};
pub use train::{
    epsilon_greedy, run_episode, select_block_action, slice_reward, train_one_draw, train_posterior_averaged,
    warm_up_table, AveragedTraining, SeirSliceEnv, SeirSliceState, SliceEnvironment,
};

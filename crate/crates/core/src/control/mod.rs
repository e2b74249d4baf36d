//! The blockwise decision loop against a counterfactual world, its inputs
//! (data ingestion, generator fitting, synthetic scenarios) and outputs
//! (traces, metrics).

mod config;
mod decision;
mod generator;
mod ingest;
mod metrics;
mod run;
mod scenario;
mod trace;

pub use config::{DataPaths, InitialSeed, PlannerKind, QlearnConfig, RunConfig, ThresholdPlannerConfig};
pub use decision::{run_decision_loop, DecisionContext, DecisionLoop, Recommendation};
pub use generator::{fit_generator, observation_window, validation_replay, GeneratorSpec, ReplayBands, WorldDraw};
pub use ingest::{ingest, write_canonical, DataSet, ICU_FILE, NPI_FILE, VACCINATION_FILE};
pub use metrics::{summarize, write_metrics_csv, PolicyMetrics};
pub use run::{prepare, prepare_from_data, prepare_with, run_replicates, Prepared};
pub use scenario::{Scenario, ScenarioSpec};
pub use trace::{BlockRecord, DayRecord, DecisionTrace, PlanArtifact};

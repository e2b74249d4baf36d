//! `epicontrol fit|validate|run|summarize|serve`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use epicontrol::control::{
    prepare_from_data, prepare_with, run_replicates, summarize, validation_replay, write_canonical, write_metrics_csv,
    DecisionTrace, GeneratorSpec, InitialSeed, PlanArtifact, PlannerKind, Prepared, RunConfig,
};
use epicontrol::rng::{tag, Seeder};
use epicontrol::smc::checkpoint;

use crate::api::{router, AppState};
use crate::Overrides;

#[derive(Debug, Parser)]
#[command(name = "epicontrol", version, about = "Epidemic intervention planning under posterior uncertainty")]
pub struct Cli {
    /// JSON run config; fields left out take their paper-preset values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named config used when no file is given.
    #[arg(long, global = true, value_parser = ["desk", "paper"], default_value = "desk")]
    pub preset: String,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Planner(s); `run` accepts a comma-separated list or `all`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub planner: Vec<String>,
    /// Weight of the socio-economic intervention cost.
    #[arg(long, global = true)]
    pub kappa_soec: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the world generator to the full series by SMC^2.
    Fit,
    /// Replay the recorded actions through the generator and compare with
    /// the observed ICU series.
    Validate {
        #[arg(long, default_value_t = 200)]
        paths: usize,
        /// Generator written by `fit`; fitted afresh when absent.
        #[arg(long)]
        generator: Option<PathBuf>,
    },
    /// Run the decision loop for each planner over all replicates.
    Run {
        #[arg(long)]
        replicates: Option<usize>,
        /// Generator written by `fit`; otherwise the configured source.
        #[arg(long)]
        generator: Option<PathBuf>,
    },
    /// Recompute metrics from the trace JSON files in a directory.
    Summarize {
        #[arg(long)]
        traces: PathBuf,
    },
    /// Serve the interactive session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        addr: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory where sessions are checkpointed after every step.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

impl Cli {
    fn planners(&self) -> anyhow::Result<Vec<PlannerKind>> {
        let mut out = Vec::new();
        for p in &self.planner {
            if p == "all" {
                out.extend(PlannerKind::ALL);
            } else {
                out.push(p.parse()?);
            }
        }
        Ok(out)
    }

    /// The config file or preset with the command-line overrides applied.
    pub fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => RunConfig::preset(&self.preset)?,
        };
        let planner = self.planners()?.first().copied();
        Overrides { seed: self.seed, planner, kappa_soec: self.kappa_soec }.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.config()?;
    match &cli.command {
        Command::Fit => fit(&cfg, &cli.out),
        Command::Validate { paths, generator } => validate(&cfg, &cli.out, *paths, generator.as_deref()),
        Command::Run { replicates, generator } => {
            let mut cfg = cfg;
            if let Some(r) = replicates {
                cfg.replicates = *r;
            }
            let planners = cli.planners()?;
            let planners = if planners.is_empty() { vec![cfg.planner] } else { planners };
            run_planners(&cfg, &planners, &cli.out, generator.as_deref())
        }
        Command::Summarize { traces } => summarize_dir(&cfg, traces, &cli.out),
        Command::Serve { addr, port, state_dir } => serve(cfg, SocketAddr::new(*addr, *port), state_dir.clone()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn load_generator(path: Option<&Path>) -> anyhow::Result<Option<GeneratorSpec>> {
    path.map(|p| {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        Ok(serde_json::from_str(&text)?)
    })
    .transpose()
}

/// Fits on the configured data, or on the synthetic series as if it had
/// come from files (which are written alongside for reuse).
fn fit(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    let prepared = match &cfg.data {
        Some(_) => epicontrol::control::prepare(cfg)?,
        None => {
            let scenario = epicontrol::control::Scenario::generate(&cfg.scenario, cfg.seed)?;
            let start = chrono_start();
            let data = scenario.dataset(start);
            write_canonical(&data, &out.join("data"))?;
            log::info!("synthetic series written to {}", out.join("data").display());
            let spec = &cfg.scenario;
            let cfg = RunConfig { initial: InitialSeed { exposed: spec.exposed, infectious: spec.infectious }, ..cfg.clone() };
            prepare_from_data(&cfg, &data, scenario.start_day())?
        }
    };
    let cloud = prepared.posterior.as_ref().context("fitting produced no posterior")?;
    write_json(&out.join("generator.json"), &prepared.generator)?;
    let ext = match cfg.checkpoint_format {
        checkpoint::CheckpointFormat::Json => "json",
        checkpoint::CheckpointFormat::Binary => "bin",
    };
    checkpoint::save(cloud, &out.join(format!("posterior.{ext}")), cfg.checkpoint_format)?;
    let q = cloud.beta_quantiles(&[0.05, 0.5, 0.95]);
    let summary = serde_json::json!({
        "day": cloud.t,
        "ess": cloud.ess(),
        "beta_q05": q[0],
        "beta_q50": q[1],
        "beta_q95": q[2],
        "generator_draws": prepared.generator.draws.len(),
    });
    write_json(&out.join("posterior_summary.json"), &summary)?;
    println!("beta 5%  {:?}\nbeta 50% {:?}\nbeta 95% {:?}", q[0], q[1], q[2]);
    Ok(())
}

fn chrono_start() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid date")
}

#[derive(Serialize)]
struct ValidationSeries<'a> {
    observed: &'a [u64],
    mean: &'a [f64],
    q05: &'a [f64],
    q95: &'a [f64],
    std_err: &'a [f64],
    paths: usize,
    coverage: f64,
}

fn validate(cfg: &RunConfig, out: &Path, paths: usize, generator: Option<&Path>) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    let prepared = prepare_with(cfg, load_generator(generator)?)?;
    let bands = validation_replay(&prepared.generator, &prepared.actions, paths, &Seeder::new(cfg.seed).child(&[tag::REPLAY]))?;
    let observed = &prepared.reports[1..];
    let inside = observed
        .iter()
        .zip(bands.q05.iter().zip(&bands.q95))
        .filter(|(&y, (&lo, &hi))| lo <= y as f64 && y as f64 <= hi)
        .count();
    let coverage = inside as f64 / observed.len() as f64;
    let series = ValidationSeries {
        observed,
        mean: &bands.mean,
        q05: &bands.q05,
        q95: &bands.q95,
        std_err: &bands.std_err,
        paths: bands.paths,
        coverage,
    };
    write_json(&out.join("validation.json"), &series)?;
    let mut w = csv::Writer::from_path(out.join("validation.csv"))?;
    w.write_record(["day", "observed", "mean", "q05", "q95"])?;
    for (t, y) in observed.iter().enumerate() {
        w.write_record([
            (t + 1).to_string(),
            y.to_string(),
            bands.mean[t].to_string(),
            bands.q05[t].to_string(),
            bands.q95[t].to_string(),
        ])?;
    }
    w.flush()?;
    println!("observed reports inside the 5-95% band on {:.1}% of days", 100.0 * coverage);
    Ok(())
}

#[derive(Serialize)]
struct ReplicateSeries {
    seed: u64,
    day: Vec<u32>,
    y: Vec<u64>,
    icu: Vec<u64>,
    action: Vec<u8>,
    cumulative_reward: Vec<f64>,
    /// Per block, the largest per-episode change of the averaged Q-table.
    max_delta_q: Vec<Vec<f64>>,
}

impl From<&DecisionTrace> for ReplicateSeries {
    fn from(t: &DecisionTrace) -> Self {
        let mut total = 0.0;
        ReplicateSeries {
            seed: t.seed,
            day: t.days.iter().map(|d| d.day).collect(),
            y: t.days.iter().map(|d| d.y).collect(),
            icu: t.days.iter().map(|d| d.icu).collect(),
            action: t.days.iter().map(|d| d.action.level()).collect(),
            cumulative_reward: t
                .days
                .iter()
                .map(|d| {
                    total += d.reward;
                    total
                })
                .collect(),
            max_delta_q: t
                .blocks
                .iter()
                .filter_map(|b| match &b.artifact {
                    PlanArtifact::Qlearn { max_delta_q, .. } => Some(max_delta_q.clone()),
                    _ => None,
                })
                .collect(),
        }
    }
}

fn write_outputs(cfg: &RunConfig, traces: &[DecisionTrace], out: &Path) -> anyhow::Result<()> {
    let metrics = summarize(traces, &cfg.reward)?;
    write_metrics_csv(&metrics, File::create(out.join("metrics.csv"))?)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    println!("{:<11} {:>4} {:>16} {:>12} {:>9} {:>6}", "planner", "reps", "total reward", "sd", "peak ICU", "crash");
    for m in &metrics {
        println!(
            "{:<11} {:>4} {:>16.1} {:>12.1} {:>9} {:>6}",
            m.planner.to_string(),
            m.replicates,
            m.total_reward_mean,
            m.total_reward_sd,
            m.peak_icu,
            m.crash_days
        );
    }
    Ok(())
}

fn run_planners(cfg: &RunConfig, planners: &[PlannerKind], out: &Path, generator: Option<&Path>) -> anyhow::Result<()> {
    let traces_dir = out.join("traces");
    fs::create_dir_all(&traces_dir)?;
    let prepared: Prepared = prepare_with(cfg, load_generator(generator)?)?;
    let mut all = Vec::new();
    let mut series: BTreeMap<String, Vec<ReplicateSeries>> = BTreeMap::new();
    for &planner in planners {
        let cfg = RunConfig { planner, ..cfg.clone() };
        let traces = run_replicates(&cfg, &prepared)?;
        for (r, t) in traces.iter().enumerate() {
            let stem = format!("{planner}_{r:02}");
            t.write_csv(File::create(traces_dir.join(format!("{stem}.csv")))?)?;
            write_json(&traces_dir.join(format!("{stem}.json")), t)?;
        }
        series.insert(planner.to_string(), traces.iter().map(ReplicateSeries::from).collect());
        all.extend(traces);
    }
    write_json(&out.join("series.json"), &series)?;
    write_outputs(cfg, &all, out)
}

fn summarize_dir(cfg: &RunConfig, dir: &Path, out: &Path) -> anyhow::Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    if paths.is_empty() {
        bail!("no trace JSON files in {}", dir.display());
    }
    let traces = paths
        .iter()
        .map(|p| -> anyhow::Result<DecisionTrace> {
            serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    fs::create_dir_all(out)?;
    write_outputs(cfg, &traces, out)
}

fn serve(cfg: RunConfig, addr: SocketAddr, state_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let state = AppState::new(cfg, state_dir)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

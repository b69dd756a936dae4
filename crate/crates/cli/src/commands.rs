//! Subcommand implementations. Each returns the rendered main output plus any
//! sidecar files; the caller owns all writing.

use allee_core::agent::{run_ensemble_runs, run_seed, EnsembleStats, SimError};
use allee_core::analysis::{fixed_points, AnalysisError};
use allee_core::ode::{integrate, OdeError};
use allee_core::sweep::{
    basin_grid, bifurcation_scan, compare_regions, region_map, SweepError, TerminalSolver,
};
use allee_core::{validate_params, Model, StrategyRule};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, TerminalMode};
use crate::output::{Csv, Metadata};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::InvalidConfig(_) => CliError::Config(e.to_string()),
            OdeError::NonFiniteState { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Unnormalized(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Cell {
                source: OdeError::InvalidConfig(_),
                ..
            } => CliError::Config(e.to_string()),
            SweepError::Cell { .. } | SweepError::Analysis { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Ensemble,
    FixedPoints,
    Basin,
    Region,
    Bifurcation,
    CompareRegions,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::FixedPoints => "fixed-points",
            Command::Basin => "basin",
            Command::Region => "region",
            Command::Bifurcation => "bifurcation",
            Command::CompareRegions => "compare-regions",
        }
    }
}

#[derive(Debug, Default)]
pub struct Output {
    pub main: String,
    /// `(path, contents)` pairs.
    pub sidecars: Vec<(String, String)>,
}

fn build_model(cfg: &RunConfig) -> Result<Model, CliError> {
    let params = validate_params(cfg.params).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Model::new(params, cfg.growth, cfg.rule))
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match command {
        Command::Simulate => simulate(cfg),
        Command::Ensemble => ensemble(cfg),
        Command::FixedPoints => fixed_points_json(cfg),
        Command::Basin => basin(cfg),
        Command::Region => region(cfg),
        Command::Bifurcation => bifurcation(cfg),
        Command::CompareRegions => compare(cfg),
    }
}

fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = build_model(cfg)?;
    let traj = integrate(&model, cfg.initial, &cfg.integrator)?;
    let mut csv = Csv::new("simulate", cfg, "t,R,x");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        csv.row(&[t, &s.r, &s.x]);
    }
    Ok(Output {
        main: csv.finish(),
        sidecars: Vec::new(),
    })
}

fn ensemble(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = build_model(cfg)?;
    let runs = run_ensemble_runs(&model, cfg.initial, &cfg.sim, cfg.n_runs)?;
    let stats = EnsembleStats::from_runs(&runs)?;
    let mut csv = Csv::new("ensemble", cfg, "t,mean_R,sem_R,mean_x,sem_x,n_runs");
    for i in 0..stats.len() {
        csv.row(&[
            &stats.times[i],
            &stats.mean_r[i],
            &stats.sem_r[i],
            &stats.mean_x[i],
            &stats.sem_x[i],
            &stats.n_runs,
        ]);
    }
    let mut out = Output {
        main: csv.finish(),
        sidecars: Vec::new(),
    };
    if !cfg.raw_out.is_empty() {
        let mut raw = Csv::new("ensemble", cfg, "run,seed,t,R,x");
        for (i, traj) in runs.iter().enumerate() {
            let seed = run_seed(cfg.sim.seed, i);
            for (t, s) in traj.times.iter().zip(&traj.states) {
                raw.row(&[&i, &seed, t, &s.r, &s.x]);
            }
        }
        out.sidecars.push((cfg.raw_out.clone(), raw.finish()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct FixedPointRecord {
    #[serde(rename = "R")]
    r: f64,
    x: f64,
    x_free: bool,
    label: &'static str,
    eigenvalues: [[f64; 2]; 2],
    classification: &'static str,
    residual: f64,
}

#[derive(Serialize)]
struct FixedPointDocument {
    metadata: Metadata,
    rule: String,
    fixed_points: Vec<FixedPointRecord>,
}

fn to_json<T: Serialize>(doc: &T) -> Result<String, CliError> {
    let mut s =
        serde_json::to_string_pretty(doc).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn fixed_points_json(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = build_model(cfg)?;
    let points = fixed_points(&model.params, cfg.rule)?;
    let doc = FixedPointDocument {
        metadata: Metadata::new("fixed-points", cfg),
        rule: cfg.rule.to_string(),
        fixed_points: points
            .iter()
            .map(|p| FixedPointRecord {
                r: p.r_star,
                x: p.x_star,
                x_free: p.x_free,
                label: p.label.as_str(),
                eigenvalues: p.eigenvalues.map(|z| [z.re, z.im]),
                classification: p.classification.as_str(),
                residual: p.residual,
            })
            .collect(),
    };
    Ok(Output {
        main: to_json(&doc)?,
        sidecars: Vec::new(),
    })
}

fn basin(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = build_model(cfg)?;
    let grid = basin_grid(&model, &cfg.grid, &cfg.integrator)?;
    let mut csv = Csv::new("basin", cfg, "R0,x0,R_star");
    for (r0, x0, r) in grid.cells() {
        csv.row(&[&r0, &x0, &r]);
    }
    let mut out = Output {
        main: csv.finish(),
        sidecars: Vec::new(),
    };
    if !cfg.line_out.is_empty() {
        let mut line = Csv::new("basin", cfg, "R0,x0");
        for (r0, x0) in grid.predicted_boundary.iter().flatten() {
            line.row(&[r0, x0]);
        }
        out.sidecars.push((cfg.line_out.clone(), line.finish()));
    }
    Ok(out)
}

fn region(cfg: &RunConfig) -> Result<Output, CliError> {
    let map = region_map(cfg.params.e_c_hat, &cfg.allee_axis, &cfg.e_d_axis, cfg.rule)?;
    let mut csv = Csv::new("region", cfg, "A,e_D_hat,bistable");
    for (a, e, b) in map.cells() {
        csv.row(&[&a, &e, &b]);
    }
    Ok(Output {
        main: csv.finish(),
        sidecars: Vec::new(),
    })
}

#[derive(Serialize)]
struct ComparisonDocument {
    metadata: Metadata,
    e_c_hat: f64,
    cells: usize,
    replicator_bistable: usize,
    knowledge_bistable: usize,
    /// Whether every replicator-bistable cell is also knowledge-feedback-bistable.
    contained: bool,
    /// `[A, e_D_hat]` cells bistable under the replicator rule only.
    replicator_only: Vec<[f64; 2]>,
    knowledge_only_count: usize,
}

fn compare(cfg: &RunConfig) -> Result<Output, CliError> {
    let e_c = cfg.params.e_c_hat;
    let rep = region_map(
        e_c,
        &cfg.allee_axis,
        &cfg.e_d_axis,
        StrategyRule::Replicator,
    )?;
    let kf = region_map(
        e_c,
        &cfg.allee_axis,
        &cfg.e_d_axis,
        StrategyRule::KnowledgeFeedback,
    )?;
    let cmp = compare_regions(&rep, &kf)?;
    let doc = ComparisonDocument {
        metadata: Metadata::new("compare-regions", cfg),
        e_c_hat: e_c,
        cells: cmp.cells,
        replicator_bistable: cmp.first_count,
        knowledge_bistable: cmp.second_count,
        contained: cmp.contained,
        replicator_only: cmp.first_only.iter().map(|&(a, e)| [a, e]).collect(),
        knowledge_only_count: cmp.second_only.len(),
    };
    Ok(Output {
        main: to_json(&doc)?,
        sidecars: Vec::new(),
    })
}

fn bifurcation(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = build_model(cfg)?;
    let values = cfg.sweep_values()?;
    let solver = match cfg.terminal {
        TerminalMode::Ode => TerminalSolver::Ode(cfg.integrator),
        TerminalMode::Agent => TerminalSolver::Agent(cfg.sim),
    };
    let scan = bifurcation_scan(
        &model,
        cfg.swept.0,
        &values,
        cfg.n_ics,
        cfg.sim.seed,
        &solver,
    )?;
    let mut csv = Csv::new("bifurcation", cfg, "param_value,branch_or_sim,R_star,seed");
    for slice in &scan.slices {
        for b in &slice.branches {
            csv.row(&[
                &slice.value,
                &format_args!("branch:{}", b.kind.as_str()),
                &b.r_star,
                &"",
            ]);
        }
        for p in &slice.simulated {
            csv.row(&[&slice.value, &"sim", &p.r_star, &p.seed]);
        }
    }
    Ok(Output {
        main: csv.finish(),
        sidecars: Vec::new(),
    })
}

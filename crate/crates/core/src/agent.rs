//! Finite-population stochastic simulation on a complete graph.
//!
//! Players are exchangeable, so a population is fully described by its
//! cooperator count. Each discrete step `k` performs one strategy micro-update
//! followed by one Euler update of the resource with step `1/N`, which puts
//! realizations on the macroscopic time axis `t = k/N`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    knowledge_defect_probability, resource_drift, GrowthKind, Model, ModelParams, State,
    StrategyRule,
};
use crate::ode::{enforce_bounds, Trajectory};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("population size must be at least 2, got {0}")]
    PopulationTooSmall(usize),
    #[error("record_stride must be at least 1")]
    ZeroStride,
    #[error("an ensemble needs at least 2 runs, got {0}")]
    TooFewRuns(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    pub size: usize,
    pub cooperators: usize,
}

impl Population {
    /// Rounds `x * size` to the nearest count, ties to even.
    pub fn from_fraction(size: usize, x: f64) -> Self {
        let c = (x.clamp(0.0, 1.0) * size as f64).round_ties_even() as usize;
        Self {
            size,
            cooperators: c.min(size),
        }
    }

    pub fn fraction(&self) -> f64 {
        self.cooperators as f64 / self.size as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub population: usize,
    /// Number of discrete steps `k`.
    pub steps: usize,
    pub seed: u64,
    pub record_stride: usize,
    pub extinct_eps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population: 200,
            steps: 200 * 50,
            seed: 1,
            record_stride: 200,
            extinct_eps: 1e-12,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.population < 2 {
            return Err(SimError::PopulationTooSmall(self.population));
        }
        if self.record_stride == 0 {
            return Err(SimError::ZeroStride);
        }
        Ok(())
    }
}

/// One replicator update: a random focal player imitates a random other player.
pub fn micro_step_replicator<R: Rng + ?Sized>(
    pop: Population,
    resource: f64,
    params: &ModelParams,
    rng: &mut R,
) -> Population {
    let n = pop.size;
    let focal_coop = rng.random_range(0..n) < pop.cooperators;
    let other_coops = pop.cooperators - usize::from(focal_coop);
    let neighbor_coop = rng.random_range(0..n - 1) < other_coops;
    if focal_coop == neighbor_coop {
        return pop;
    }
    // (U_j - U_i) / dU_max reduces to +R (neighbor defects) or -R (neighbor cooperates).
    let half_greed = 0.5 * params.greed * resource;
    let p = if neighbor_coop {
        0.5 - half_greed
    } else {
        0.5 + half_greed
    };
    if rng.random::<f64>() < p {
        Population {
            cooperators: if neighbor_coop {
                pop.cooperators + 1
            } else {
                pop.cooperators - 1
            },
            ..pop
        }
    } else {
        pop
    }
}

/// One knowledge-feedback update: a random focal player switches based on the resource level alone.
pub fn micro_step_knowledge<R: Rng + ?Sized>(
    pop: Population,
    resource: f64,
    params: &ModelParams,
    rng: &mut R,
) -> Population {
    let focal_coop = rng.random_range(0..pop.size) < pop.cooperators;
    let p_defect = knowledge_defect_probability(resource, params);
    let u = rng.random::<f64>();
    let cooperators = if focal_coop {
        if u < p_defect {
            pop.cooperators - 1
        } else {
            pop.cooperators
        }
    } else if u < 1.0 - p_defect {
        pop.cooperators + 1
    } else {
        pop.cooperators
    };
    Population { cooperators, ..pop }
}

pub fn micro_step<R: Rng + ?Sized>(
    pop: Population,
    resource: f64,
    params: &ModelParams,
    rule: StrategyRule,
    rng: &mut R,
) -> Population {
    match rule {
        StrategyRule::Replicator => micro_step_replicator(pop, resource, params, rng),
        StrategyRule::KnowledgeFeedback => micro_step_knowledge(pop, resource, params, rng),
    }
}

/// Euler step of size `1/N` on the resource equation.
pub fn resource_update_discrete(
    resource: f64,
    x: f64,
    params: &ModelParams,
    population: usize,
    kind: GrowthKind,
    extinct_eps: f64,
) -> f64 {
    if resource == 0.0 {
        return 0.0;
    }
    let drift = resource_drift(State::new(resource, x), params, kind);
    enforce_bounds(
        State::new(resource + drift / population as f64, x),
        extinct_eps,
    )
    .r
}

/// Single stochastic realization, recorded every `record_stride` steps and at the end.
pub fn run_realization(
    model: &Model,
    state0: State,
    config: &SimConfig,
) -> Result<Trajectory, SimError> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let n = config.population;
    let mut pop = Population::from_fraction(n, state0.x);
    let mut r = enforce_bounds(state0, config.extinct_eps).r;
    let mut traj = Trajectory::with_capacity(config.steps / config.record_stride + 2);
    traj.push(0.0, State::new(r, pop.fraction()));
    for k in 1..=config.steps {
        let x_prev = pop.fraction();
        pop = micro_step(pop, r, &model.params, model.rule, &mut rng);
        r = resource_update_discrete(
            r,
            x_prev,
            &model.params,
            n,
            model.growth,
            config.extinct_eps,
        );
        if k % config.record_stride == 0 || k == config.steps {
            traj.push(k as f64 / n as f64, State::new(r, pop.fraction()));
        }
    }
    Ok(traj)
}

/// Seed of realization `run` in an ensemble with the given base seed.
pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    derive_seed(base_seed, &[run as u64])
}

/// All realizations of an ensemble, in run-index order.
pub fn run_ensemble_runs(
    model: &Model,
    state0: State,
    config: &SimConfig,
    n_runs: usize,
) -> Result<Vec<Trajectory>, SimError> {
    config.validate()?;
    if n_runs < 2 {
        return Err(SimError::TooFewRuns(n_runs));
    }
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let cfg = SimConfig {
                seed: run_seed(config.seed, i),
                ..*config
            };
            run_realization(model, state0, &cfg)
        })
        .collect()
}

pub fn run_ensemble(
    model: &Model,
    state0: State,
    config: &SimConfig,
    n_runs: usize,
) -> Result<EnsembleStats, SimError> {
    let runs = run_ensemble_runs(model, state0, config, n_runs)?;
    EnsembleStats::from_runs(&runs)
}

/// Per-time mean and standard error across realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_r: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub sem_r: Vec<f64>,
    pub sem_x: Vec<f64>,
    pub n_runs: usize,
}

fn mean_sem(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

impl EnsembleStats {
    /// Reduces equally sampled realizations; the result does not depend on run order
    /// beyond floating-point summation, which is always done in slice order.
    pub fn from_runs(runs: &[Trajectory]) -> Result<Self, SimError> {
        let n = runs.len();
        if n < 2 {
            return Err(SimError::TooFewRuns(n));
        }
        let len = runs.iter().map(Trajectory::len).min().unwrap_or(0);
        let mut out = Self {
            times: runs[0].times[..len].to_vec(),
            mean_r: Vec::with_capacity(len),
            mean_x: Vec::with_capacity(len),
            sem_r: Vec::with_capacity(len),
            sem_x: Vec::with_capacity(len),
            n_runs: n,
        };
        for i in 0..len {
            let (mr, sr) = mean_sem(runs.iter().map(|t| t.states[i].r), n);
            let (mx, sx) = mean_sem(runs.iter().map(|t| t.states[i].x), n);
            out.mean_r.push(mr);
            out.sem_r.push(sr);
            out.mean_x.push(mx);
            out.sem_x.push(sx);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

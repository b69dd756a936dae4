//! Gridded computations: basins of attraction, bi-stability region maps and
//! bifurcation scans.
//!
//! Every cell's work and random stream depend only on its index, so results
//! are identical for any number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_realization, SimConfig, SimError};
use crate::analysis::{
    critical_line_r0, critical_line_x0, is_bistable, knowledge_fixed_points, pure_strategy_roots,
    refine_pure_root, replicator_threshold, AnalysisError, FixedPointLabel, Stability,
};
use crate::model::{
    validate_params, Model, ModelParams, ParamDomainError, State, StrategyRule, ValidatedParams,
};
use crate::ode::{run_to_steady_state, IntegratorConfig, OdeError};
use crate::seed::{derive_seed, rng_from_seed};

/// Terminal resource levels within this distance of a branch are attributed to it.
pub const BRANCH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("integration failed at R0 = {r0}, x0 = {x0}: {source}")]
    Cell {
        r0: f64,
        x0: f64,
        #[source]
        source: OdeError,
    },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("swept value {value} is outside the parameter domain: {source}")]
    Param {
        value: f64,
        #[source]
        source: ParamDomainError,
    },
    #[error("equilibrium analysis failed at swept value {value}: {source}")]
    Analysis {
        value: f64,
        #[source]
        source: AnalysisError,
    },
    #[error("region maps have different axes")]
    AxisMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Evenly spaced values on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Excludes `min`: values are `min + (max - min) * (i + 1) / points`.
    pub left_open: bool,
}

impl Axis {
    pub fn closed(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            left_open: false,
        }
    }

    pub fn left_open(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            left_open: true,
        }
    }

    /// Closed axis with a fixed step; the end point is included when it falls on the lattice.
    pub fn stepped(min: f64, max: f64, step: f64) -> Self {
        let points = ((max - min) / step + 1e-9).floor() as usize + 1;
        Self::closed(min, min + step * (points - 1) as f64, points)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let needed = if self.left_open { 1 } else { 2 };
        if self.points < needed {
            return Err(SweepError::InvalidGrid(format!(
                "axis needs at least {needed} points"
            )));
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.min >= self.max {
            return Err(SweepError::InvalidGrid(format!(
                "axis bounds must satisfy min < max (got {}, {})",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn value(&self, i: usize) -> f64 {
        let span = self.max - self.min;
        if self.left_open {
            self.min + span * (i + 1) as f64 / self.points as f64
        } else if i + 1 == self.points {
            self.max
        } else {
            self.min + span * i as f64 / (self.points - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    pub fn step(&self) -> f64 {
        let gaps = if self.left_open {
            self.points
        } else {
            self.points - 1
        };
        (self.max - self.min) / gaps as f64
    }
}

/// Initial-condition grid over `(R0, x0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r0_min: f64,
    pub r0_max: f64,
    pub x0_min: f64,
    pub x0_max: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r0_min: 0.0,
            r0_max: 1.0,
            x0_min: 0.0,
            x0_max: 1.0,
            resolution: 101,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        for v in [self.r0_min, self.r0_max, self.x0_min, self.x0_max] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SweepError::InvalidGrid(format!("bound {v} outside [0, 1]")));
            }
        }
        self.r0_axis().validate()?;
        self.x0_axis().validate()
    }

    pub fn r0_axis(&self) -> Axis {
        Axis::closed(self.r0_min, self.r0_max, self.resolution)
    }

    pub fn x0_axis(&self) -> Axis {
        Axis::closed(self.x0_min, self.x0_max, self.resolution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub spec: GridSpec,
    /// `r_star[ix][ir]`: terminal resource from `(R0 = r0_axis[ir], x0 = x0_axis[ix])`.
    pub r_star: Vec<Vec<f64>>,
    /// Points `(R0, x0)` on the replicator critical line, one per `x0` row.
    pub predicted_boundary: Option<Vec<(f64, f64)>>,
}

pub fn is_sustainable(r_star: f64) -> bool {
    r_star > BRANCH_TOL
}

pub fn basin_grid(
    model: &Model,
    spec: &GridSpec,
    integrator: &IntegratorConfig,
) -> Result<BasinGrid, SweepError> {
    spec.validate()?;
    integrator.validate().map_err(|source| SweepError::Cell {
        r0: f64::NAN,
        x0: f64::NAN,
        source,
    })?;
    let (r_axis, x_axis) = (spec.r0_axis().values(), spec.x0_axis().values());
    let n = spec.resolution;
    let flat: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|cell| {
            let (r0, x0) = (r_axis[cell % n], x_axis[cell / n]);
            run_to_steady_state(model, State::new(r0, x0), integrator)
                .map(|res| res.final_state.r)
                .map_err(|source| SweepError::Cell { r0, x0, source })
        })
        .collect::<Result<_, _>>()?;
    let r_star = flat.chunks(n).map(<[f64]>::to_vec).collect();
    let predicted_boundary = if model.rule == StrategyRule::Replicator {
        x_axis
            .iter()
            .map(|&x0| critical_line_r0(x0, &model.params).map(|r0| (r0, x0)))
            .collect::<Result<Vec<_>, _>>()
            .ok()
    } else {
        None
    };
    Ok(BasinGrid {
        spec: *spec,
        r_star,
        predicted_boundary,
    })
}

impl BasinGrid {
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let (r_axis, x_axis) = (self.spec.r0_axis().values(), self.spec.x0_axis().values());
        self.r_star.iter().enumerate().flat_map(move |(ix, row)| {
            let x0 = x_axis[ix];
            let r_axis = r_axis.clone();
            row.iter()
                .enumerate()
                .map(move |(ir, &r)| (r_axis[ir], x0, r))
        })
    }

    pub fn sustainable_fraction(&self) -> f64 {
        let total = self.spec.resolution * self.spec.resolution;
        self.cells().filter(|c| is_sustainable(c.2)).count() as f64 / total as f64
    }
}

/// How well the replicator critical line predicts the simulated fates of a basin grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineAgreement {
    pub total: usize,
    pub matching: usize,
    /// `(R0, x0)` of every cell whose fate disagrees with the line.
    pub mismatches: Vec<(f64, f64)>,
    /// Mismatched cells farther than one grid cell from the line along both axes.
    pub far_mismatches: usize,
}

impl LineAgreement {
    pub fn fraction(&self) -> f64 {
        self.matching as f64 / self.total as f64
    }
}

pub fn critical_line_agreement(
    grid: &BasinGrid,
    params: &ModelParams,
) -> Result<LineAgreement, SweepError> {
    let dr = grid.spec.r0_axis().step();
    let dx = grid.spec.x0_axis().step();
    let mut out = LineAgreement {
        total: 0,
        matching: 0,
        mismatches: Vec::new(),
        far_mismatches: 0,
    };
    let no_line = |_| SweepError::InvalidGrid("critical line undefined at these parameters".into());
    for (r0, x0, r_star) in grid.cells() {
        out.total += 1;
        let boundary_r = critical_line_r0(x0, params).map_err(no_line)?;
        let predicted = r0 > boundary_r;
        if predicted == is_sustainable(r_star) {
            out.matching += 1;
            continue;
        }
        out.mismatches.push((r0, x0));
        let boundary_x = critical_line_x0(r0, params).map_err(no_line)?;
        let near = (r0 - boundary_r).abs() <= dr * (1.0 + 1e-9)
            || (x0 - boundary_x).abs() <= dx * (1.0 + 1e-9);
        if !near {
            out.far_mismatches += 1;
        }
    }
    Ok(out)
}

/// Bi-stability predicate evaluated over an `(A, e_D_hat)` window at fixed `e_C_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub e_c_hat: f64,
    pub allee_axis: Axis,
    pub e_d_axis: Axis,
    /// `bistable[ia][ie]` for `A = allee_axis[ia]`, `e_D_hat = e_d_axis[ie]`.
    pub bistable: Vec<Vec<bool>>,
    pub rule: StrategyRule,
}

pub fn region_map(
    e_c_hat: f64,
    allee_axis: &Axis,
    e_d_axis: &Axis,
    rule: StrategyRule,
) -> Result<RegionMap, SweepError> {
    allee_axis.validate()?;
    e_d_axis.validate()?;
    let e_d_values = e_d_axis.values();
    let bistable = allee_axis
        .values()
        .into_par_iter()
        .map(|allee| {
            e_d_values
                .iter()
                .map(|&e_d_hat| {
                    let p = ModelParams {
                        allee,
                        e_c_hat,
                        e_d_hat,
                        ..ModelParams::default()
                    };
                    is_bistable(&p, rule)
                })
                .collect()
        })
        .collect();
    Ok(RegionMap {
        e_c_hat,
        allee_axis: allee_axis.clone(),
        e_d_axis: e_d_axis.clone(),
        bistable,
        rule,
    })
}

impl RegionMap {
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        let (a, e) = (self.allee_axis.values(), self.e_d_axis.values());
        self.bistable.iter().enumerate().flat_map(move |(ia, row)| {
            let allee = a[ia];
            let e = e.clone();
            row.iter()
                .enumerate()
                .map(move |(ie, &b)| (allee, e[ie], b))
        })
    }

    pub fn count(&self) -> usize {
        self.bistable.iter().flatten().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionComparison {
    pub cells: usize,
    pub first_count: usize,
    pub second_count: usize,
    /// `(A, e_D_hat)` cells bi-stable in the first map only.
    pub first_only: Vec<(f64, f64)>,
    pub second_only: Vec<(f64, f64)>,
    /// Whether the first map's region lies inside the second's.
    pub contained: bool,
}

/// Cellwise comparison; `contained` reports `first ⊆ second`.
pub fn compare_regions(
    first: &RegionMap,
    second: &RegionMap,
) -> Result<RegionComparison, SweepError> {
    if first.allee_axis != second.allee_axis || first.e_d_axis != second.e_d_axis {
        return Err(SweepError::AxisMismatch);
    }
    let mut out = RegionComparison {
        cells: 0,
        first_count: 0,
        second_count: 0,
        first_only: Vec::new(),
        second_only: Vec::new(),
        contained: true,
    };
    for ((a, e, b1), (_, _, b2)) in first.cells().zip(second.cells()) {
        out.cells += 1;
        out.first_count += usize::from(b1);
        out.second_count += usize::from(b2);
        match (b1, b2) {
            (true, false) => out.first_only.push((a, e)),
            (false, true) => out.second_only.push((a, e)),
            _ => {}
        }
    }
    out.contained = out.first_only.is_empty();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweptParam {
    EDHat,
    Allee,
}

impl SweptParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweptParam::EDHat => "e_D_hat",
            SweptParam::Allee => "A",
        }
    }

    pub fn apply(self, base: ModelParams, value: f64) -> ModelParams {
        match self {
            SweptParam::EDHat => ModelParams {
                e_d_hat: value,
                ..base
            },
            SweptParam::Allee => ModelParams {
                allee: value,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    StableSustainable,
    Unstable,
    StableUnsustainable,
}

impl BranchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchKind::StableSustainable => "stable_sustainable",
            BranchKind::Unstable => "unstable",
            BranchKind::StableUnsustainable => "stable_unsustainable",
        }
    }

    pub fn is_stable(self) -> bool {
        !matches!(self, BranchKind::Unstable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub kind: BranchKind,
    pub r_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPoint {
    pub initial: State,
    pub seed: u64,
    pub r_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationSlice {
    pub value: f64,
    pub branches: Vec<BranchPoint>,
    pub simulated: Vec<SimulatedPoint>,
}

impl BifurcationSlice {
    /// Distance from `r` to the nearest stable analytic branch.
    pub fn distance_to_stable(&self, r: f64) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.kind.is_stable())
            .map(|b| (b.r_star - r).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn has_sustainable_branch(&self) -> bool {
        self.branches
            .iter()
            .any(|b| b.kind == BranchKind::StableSustainable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationScan {
    pub swept: SweptParam,
    pub rule: StrategyRule,
    pub slices: Vec<BifurcationSlice>,
}

/// How simulated terminal states are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TerminalSolver {
    /// Macroscopic steady state.
    Ode(IntegratorConfig),
    /// Final resource level of one finite-population realization.
    Agent(SimConfig),
}

/// Replicator-model branches at the given parameters: the sustainable and
/// unstable defector equilibria where they exist and the collapse state.
pub fn replicator_branches(params: &ModelParams) -> Vec<BranchPoint> {
    let mut out = Vec::with_capacity(3);
    if let Some((lo, hi)) = pure_strategy_roots(params.allee, params.e_d_hat) {
        let refine = |r| refine_pure_root(r, params.allee, params.e_d_hat);
        out.push(BranchPoint {
            kind: BranchKind::StableSustainable,
            r_star: refine(hi),
        });
        out.push(BranchPoint {
            kind: BranchKind::Unstable,
            r_star: refine(lo),
        });
    }
    out.push(BranchPoint {
        kind: BranchKind::StableUnsustainable,
        r_star: 0.0,
    });
    out
}

/// Knowledge-feedback branches: interior equilibria tagged by their numeric
/// stability, plus the collapse state.
pub fn knowledge_branches(params: &ValidatedParams) -> Result<Vec<BranchPoint>, AnalysisError> {
    let mut out = Vec::with_capacity(3);
    for p in knowledge_fixed_points(params)? {
        if p.label == FixedPointLabel::KfS0 {
            continue;
        }
        let kind = if p.classification == Stability::Stable {
            BranchKind::StableSustainable
        } else {
            BranchKind::Unstable
        };
        out.push(BranchPoint {
            kind,
            r_star: p.r_star,
        });
    }
    out.push(BranchPoint {
        kind: BranchKind::StableUnsustainable,
        r_star: 0.0,
    });
    Ok(out)
}

pub fn analytic_branches(
    params: &ValidatedParams,
    rule: StrategyRule,
) -> Result<Vec<BranchPoint>, AnalysisError> {
    match rule {
        StrategyRule::Replicator => Ok(replicator_branches(params)),
        StrategyRule::KnowledgeFeedback => knowledge_branches(params),
    }
}

/// Uniform initial condition on `(0.01, 0.99)^2`.
pub fn random_initial_condition(seed: u64) -> State {
    let mut rng = rng_from_seed(seed);
    let r = 0.01 + 0.98 * rng.random::<f64>();
    let x = 0.01 + 0.98 * rng.random::<f64>();
    State::new(r, x)
}

/// Bifurcation diagram over `values` of the swept parameter, with `n_ics`
/// simulated terminal states per value.
pub fn bifurcation_scan(
    base: &Model,
    swept: SweptParam,
    values: &[f64],
    n_ics: usize,
    base_seed: u64,
    solver: &TerminalSolver,
) -> Result<BifurcationScan, SweepError> {
    let models: Vec<Model> = values
        .iter()
        .map(|&v| {
            validate_params(swept.apply(base.params.into_inner(), v))
                .map(|p| base.with_params(p))
                .map_err(|source| SweepError::Param { value: v, source })
        })
        .collect::<Result<_, _>>()?;
    let simulated: Vec<SimulatedPoint> = (0..values.len() * n_ics.max(1))
        .into_par_iter()
        .filter(|_| n_ics > 0)
        .map(|job| {
            let (iv, ic) = (job / n_ics, job % n_ics);
            let seed = derive_seed(base_seed, &[iv as u64, ic as u64]);
            let initial = random_initial_condition(seed);
            let model = &models[iv];
            let r_star = match solver {
                TerminalSolver::Ode(cfg) => {
                    run_to_steady_state(model, initial, cfg)
                        .map_err(|source| SweepError::Cell {
                            r0: initial.r,
                            x0: initial.x,
                            source,
                        })?
                        .final_state
                        .r
                }
                TerminalSolver::Agent(cfg) => {
                    let cfg = SimConfig {
                        seed: derive_seed(seed, &[1]),
                        ..*cfg
                    };
                    run_realization(model, initial, &cfg)?
                        .last()
                        .map_or(initial.r, |(_, s)| s.r)
                }
            };
            Ok(SimulatedPoint {
                initial,
                seed,
                r_star,
            })
        })
        .collect::<Result<_, SweepError>>()?;
    let slices = models
        .iter()
        .zip(values)
        .enumerate()
        .map(|(iv, (m, &value))| {
            Ok(BifurcationSlice {
                value,
                branches: analytic_branches(&m.params, m.rule)
                    .map_err(|source| SweepError::Analysis { value, source })?,
                simulated: simulated
                    .get(iv * n_ics..(iv + 1) * n_ics)
                    .map(<[_]>::to_vec)
                    .unwrap_or_default(),
            })
        })
        .collect::<Result<_, SweepError>>()?;
    Ok(BifurcationScan {
        swept,
        rule: base.rule,
        slices,
    })
}

impl BifurcationScan {
    /// Last swept value carrying a sustainable branch, if any.
    pub fn sustainable_branch_end(&self) -> Option<f64> {
        self.slices
            .iter()
            .rev()
            .find(|s| s.has_sustainable_branch())
            .map(|s| s.value)
    }
}

/// Analytic end of the replicator sustainable branch along `e_D_hat` at fixed `A`.
pub fn replicator_branch_end_e_d(allee: f64) -> f64 {
    replicator_threshold(allee)
}

/// Analytic end of the replicator sustainable branch along `A` at fixed `e_D_hat`:
/// the smaller root of `(1 - A)^2 = 4 A e_D_hat`.
pub fn replicator_branch_end_allee(e_d_hat: f64) -> f64 {
    let b = 1.0 + 2.0 * e_d_hat;
    b - (b * b - 1.0).sqrt()
}

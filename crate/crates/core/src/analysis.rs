//! Steady states, their linear stability and the bi-stability predicates.
//!
//! Closed forms give the equilibrium locations for both strategy rules; every
//! point is then polished with Newton's method and classified from the
//! eigenvalues of a central-difference Jacobian. The closed forms assume the
//! normalized carrying capacity `K = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    coevolution_rhs, GrowthKind, ModelParams, State, StrategyRule, ValidatedParams,
};

/// Default central-difference step.
pub const JACOBIAN_STEP: f64 = 1e-6;
/// Eigenvalues smaller than this in magnitude count as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-6;
const NEWTON_MAX_ITER: usize = 10;
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("closed-form point {label:?} at (R = {r}, x = {x}) lies outside its validity region")]
    ExistenceRegionMismatch {
        label: FixedPointLabel,
        r: f64,
        x: f64,
    },
    #[error("Jacobian stencil at R = {r} with step {h} straddles the threshold A = {allee}")]
    BranchCrossing { r: f64, allee: f64, h: f64 },
    #[error("critical line needs both s_C- and s_D- in the bi-stable regime")]
    NoBoundary,
    #[error("Newton refinement of {label:?} stalled at residual {residual}")]
    RefinementFailed {
        label: FixedPointLabel,
        residual: f64,
    },
    #[error("closed-form steady states require K = 1, got {0}")]
    Unnormalized(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixedPointLabel {
    S0,
    S00,
    S01,
    SCminus,
    SCplus,
    SDminus,
    SDplus,
    /// Knowledge-feedback collapse state `(0, 1)`.
    KfS0,
    /// Interior point from the `-sqrt` closed form.
    KfMinus,
    /// Interior point from the `+sqrt` closed form.
    KfPlus,
}

impl FixedPointLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointLabel::S0 => "S0",
            FixedPointLabel::S00 => "S00",
            FixedPointLabel::S01 => "S01",
            FixedPointLabel::SCminus => "SCminus",
            FixedPointLabel::SCplus => "SCplus",
            FixedPointLabel::SDminus => "SDminus",
            FixedPointLabel::SDplus => "SDplus",
            FixedPointLabel::KfS0 => "KF_S0",
            FixedPointLabel::KfMinus => "KF_minus",
            FixedPointLabel::KfPlus => "KF_plus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    NeutralLine,
    NotApplicable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "Stable",
            Stability::Unstable => "Unstable",
            Stability::Saddle => "Saddle",
            Stability::NeutralLine => "NeutralLine",
            Stability::NotApplicable => "NotApplicable",
        }
    }

    /// True for repelling directions of any kind, saddles included.
    pub fn is_unstable(self) -> bool {
        matches!(self, Stability::Unstable | Stability::Saddle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub r_star: f64,
    pub x_star: f64,
    /// Set for the replicator extinction line, where `x_star` is only a representative.
    pub x_free: bool,
    pub label: FixedPointLabel,
    pub eigenvalues: [Complex64; 2],
    pub classification: Stability,
    pub residual: f64,
}

impl FixedPoint {
    pub fn state(&self) -> State {
        State::new(self.r_star, self.x_star)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistabilityReport {
    pub bistable: bool,
    pub existing_points: Vec<FixedPoint>,
    /// The binding bound on `e_D_hat`.
    pub threshold_value: f64,
}

pub type Matrix2 = [[f64; 2]; 2];

/// Central-difference Jacobian of an arbitrary planar field.
pub fn central_difference_jacobian(f: impl Fn(State) -> (f64, f64), at: State, h: f64) -> Matrix2 {
    let (rp, rm) = (f(State::new(at.r + h, at.x)), f(State::new(at.r - h, at.x)));
    let (xp, xm) = (f(State::new(at.r, at.x + h)), f(State::new(at.r, at.x - h)));
    let inv = 0.5 / h;
    [
        [(rp.0 - rm.0) * inv, (xp.0 - xm.0) * inv],
        [(rp.1 - rm.1) * inv, (xp.1 - xm.1) * inv],
    ]
}

/// Jacobian of the coevolution field; knowledge feedback must stay on one side of `R = A`.
pub fn numeric_jacobian(
    state: State,
    params: &ModelParams,
    kind: GrowthKind,
    rule: StrategyRule,
    h: f64,
) -> Result<Matrix2, AnalysisError> {
    if rule == StrategyRule::KnowledgeFeedback && (state.r - params.allee).abs() <= h {
        return Err(AnalysisError::BranchCrossing {
            r: state.r,
            allee: params.allee,
            h,
        });
    }
    Ok(central_difference_jacobian(
        |s| coevolution_rhs(s, params, kind, rule),
        state,
        h,
    ))
}

pub fn trace_det(j: &Matrix2) -> (f64, f64) {
    (j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0])
}

pub fn eigenvalues(j: &Matrix2) -> [Complex64; 2] {
    let (tr, det) = trace_det(j);
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex64::new(half - s, 0.0), Complex64::new(half + s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half, -s), Complex64::new(half, s)]
    }
}

/// Classification from eigenvalue real parts. `on_line` marks a member of a
/// continuum of equilibria, where one zero eigenvalue is expected.
pub fn classify_eigenvalues(eigs: &[Complex64; 2], on_line: bool) -> Stability {
    let zero = |z: &Complex64| z.norm() < ZERO_EIGENVALUE_TOL;
    let zeros = eigs.iter().filter(|z| zero(z)).count();
    if zeros > 0 {
        let rest_negative = eigs.iter().filter(|z| !zero(z)).all(|z| z.re < 0.0);
        return if on_line && zeros == 1 && rest_negative {
            Stability::NeutralLine
        } else {
            Stability::NotApplicable
        };
    }
    let neg = eigs.iter().filter(|z| z.re < 0.0).count();
    let pos = eigs.iter().filter(|z| z.re > 0.0).count();
    match (neg, pos) {
        (2, 0) => Stability::Stable,
        (0, 2) => Stability::Unstable,
        (1, 1) => Stability::Saddle,
        _ => Stability::NotApplicable,
    }
}

/// The `Det > 0 && Tr < 0` test for hyperbolic planar equilibria.
pub fn classify_det_tr(j: &Matrix2) -> Stability {
    let (tr, det) = trace_det(j);
    if det < 0.0 {
        Stability::Saddle
    } else if det > 0.0 && tr < 0.0 {
        Stability::Stable
    } else if det > 0.0 && tr > 0.0 {
        Stability::Unstable
    } else {
        Stability::NotApplicable
    }
}

fn residual(state: State, params: &ModelParams, rule: StrategyRule) -> f64 {
    let (dr, dx) = coevolution_rhs(state, params, GrowthKind::AlleeLogistic, rule);
    dr.abs().max(dx.abs())
}

fn build_point(
    state: State,
    params: &ModelParams,
    rule: StrategyRule,
    label: FixedPointLabel,
    x_free: bool,
) -> Result<FixedPoint, AnalysisError> {
    let j = numeric_jacobian(
        state,
        params,
        GrowthKind::AlleeLogistic,
        rule,
        JACOBIAN_STEP,
    )?;
    let eigs = eigenvalues(&j);
    let on_line = rule == StrategyRule::Replicator && state.r == 0.0;
    Ok(FixedPoint {
        r_star: state.r,
        x_star: state.x,
        x_free,
        label,
        eigenvalues: eigs,
        classification: classify_eigenvalues(&eigs, on_line),
        residual: residual(state, params, rule),
    })
}

/// Roots of `(R/A - 1)(1 - R) = e_hat`, the non-zero resource equilibria at a
/// pure population with extraction `e_hat`. `None` when the discriminant is negative.
pub fn pure_strategy_roots(allee: f64, e_hat: f64) -> Option<(f64, f64)> {
    let disc = (1.0 - allee).powi(2) - 4.0 * allee * e_hat;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((0.5 * (1.0 + allee - s), 0.5 * (1.0 + allee + s)))
}

/// Newton on `h(R) = (R/A - 1)(1 - R) - e_hat`.
pub fn refine_pure_root(r0: f64, allee: f64, e_hat: f64) -> f64 {
    let mut r = r0;
    for _ in 0..NEWTON_MAX_ITER {
        let h = (r / allee - 1.0) * (1.0 - r) - e_hat;
        let dh = (1.0 + allee - 2.0 * r) / allee;
        if h == 0.0 || dh.abs() < 1e-12 {
            break;
        }
        let next = r - h / dh;
        if (next - r).abs() <= f64::EPSILON * r.abs() {
            r = next;
            break;
        }
        r = next;
    }
    r
}

fn require_normalized(params: &ModelParams) -> Result<(), AnalysisError> {
    if params.capacity != 1.0 {
        return Err(AnalysisError::Unnormalized(params.capacity));
    }
    Ok(())
}

fn checked(point: FixedPoint) -> Result<FixedPoint, AnalysisError> {
    if point.residual < RESIDUAL_TOL {
        Ok(point)
    } else {
        Err(AnalysisError::RefinementFailed {
            label: point.label,
            residual: point.residual,
        })
    }
}

/// Equilibria of the replicator model. The extinction line is reported once as
/// `S0` with representative `x = 0.5`.
pub fn replicator_fixed_points(params: &ValidatedParams) -> Result<Vec<FixedPoint>, AnalysisError> {
    require_normalized(params)?;
    let rule = StrategyRule::Replicator;
    let mut out = vec![
        build_point(
            State::new(0.0, 0.5),
            params,
            rule,
            FixedPointLabel::S0,
            true,
        )?,
        build_point(
            State::new(0.0, 0.0),
            params,
            rule,
            FixedPointLabel::S00,
            false,
        )?,
        build_point(
            State::new(0.0, 1.0),
            params,
            rule,
            FixedPointLabel::S01,
            false,
        )?,
    ];
    let branches = [
        (
            params.e_c_hat,
            1.0,
            FixedPointLabel::SCminus,
            FixedPointLabel::SCplus,
        ),
        (
            params.e_d_hat,
            0.0,
            FixedPointLabel::SDminus,
            FixedPointLabel::SDplus,
        ),
    ];
    for (e_hat, x, minus, plus) in branches {
        if let Some((lo, hi)) = pure_strategy_roots(params.allee, e_hat) {
            for (r, label) in [(lo, minus), (hi, plus)] {
                let r = refine_pure_root(r, params.allee, e_hat);
                out.push(checked(build_point(
                    State::new(r, x),
                    params,
                    rule,
                    label,
                    false,
                )?)?);
            }
        }
    }
    Ok(out)
}

/// Shared discriminant of the knowledge-feedback interior closed forms.
pub fn knowledge_discriminant(allee: f64, e_c: f64, e_d: f64) -> f64 {
    let a = allee;
    (a * a - a * (e_c + 2.0) + 1.0).powi(2) + a * a * e_d * e_d
        - 2.0 * a * e_d * (a * (a + e_c - 2.0) + 1.0)
}

/// Interior knowledge-feedback equilibria `[(R, x) with -sqrt, (R, x) with +sqrt]`.
pub fn knowledge_interior_closed_form(allee: f64, e_c: f64, e_d: f64) -> Option<[(f64, f64); 2]> {
    let a = allee;
    let disc = knowledge_discriminant(a, e_c, e_d);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let point = |sign: f64| {
        let r = (-1.0 + a * (a - e_c + e_d) + sign * s) / (2.0 * (a - 1.0));
        let x = (1.0 + a * (a - e_c + e_d - 2.0) + sign * s) / (2.0 * (a - 1.0).powi(2));
        (r, x)
    };
    Some([point(-1.0), point(1.0)])
}

/// Newton on the resource nullcline restricted to the strategy nullcline `x = (1 - R)/(1 - A)`.
fn refine_knowledge_root(r0: f64, params: &ModelParams) -> State {
    let (a, ec, ed) = (params.allee, params.e_c_hat, params.e_d_hat);
    let x_of = |r: f64| (1.0 - r) / (1.0 - a);
    let mut r = r0;
    for _ in 0..NEWTON_MAX_ITER {
        let h = (r / a - 1.0) * (1.0 - r) - ed + x_of(r) * (ed - ec);
        let dh = (1.0 + a - 2.0 * r) / a - (ed - ec) / (1.0 - a);
        if h == 0.0 || dh.abs() < 1e-12 {
            break;
        }
        let next = r - h / dh;
        if (next - r).abs() <= f64::EPSILON * r.abs() {
            r = next;
            break;
        }
        r = next;
    }
    State::new(r, x_of(r))
}

/// Equilibria of the knowledge-feedback model: the collapse state and, inside
/// the bi-stability region, both interior closed-form points.
pub fn knowledge_fixed_points(params: &ValidatedParams) -> Result<Vec<FixedPoint>, AnalysisError> {
    require_normalized(params)?;
    let rule = StrategyRule::KnowledgeFeedback;
    let mut out = vec![build_point(
        State::new(0.0, 1.0),
        params,
        rule,
        FixedPointLabel::KfS0,
        false,
    )?];
    if !is_knowledge_bistable(params) {
        return Ok(out);
    }
    let (a, ec, ed) = (params.allee, params.e_c_hat, params.e_d_hat);
    let Some(points) = knowledge_interior_closed_form(a, ec, ed) else {
        return Err(AnalysisError::ExistenceRegionMismatch {
            label: FixedPointLabel::KfMinus,
            r: f64::NAN,
            x: f64::NAN,
        });
    };
    for ((r, x), label) in points
        .into_iter()
        .zip([FixedPointLabel::KfMinus, FixedPointLabel::KfPlus])
    {
        if !(r > a && r <= 1.0 && (0.0..=1.0).contains(&x)) {
            return Err(AnalysisError::ExistenceRegionMismatch { label, r, x });
        }
        let refined = refine_knowledge_root(r, params);
        out.push(checked(build_point(refined, params, rule, label, false)?)?);
    }
    Ok(out)
}

pub fn fixed_points(
    params: &ValidatedParams,
    rule: StrategyRule,
) -> Result<Vec<FixedPoint>, AnalysisError> {
    match rule {
        StrategyRule::Replicator => replicator_fixed_points(params),
        StrategyRule::KnowledgeFeedback => knowledge_fixed_points(params),
    }
}

/// Largest `e_D_hat` admitting a sustainable replicator equilibrium: `(1 - A)^2 / (4A)`.
pub fn replicator_threshold(allee: f64) -> f64 {
    (1.0 - allee).powi(2) / (4.0 * allee)
}

pub fn is_replicator_bistable(params: &ModelParams) -> bool {
    params.e_d_hat < replicator_threshold(params.allee)
}

/// Lower bound on `A` where the first knowledge-feedback existence branch ends: `3 - 2 sqrt(2)`.
pub fn knowledge_branch_split() -> f64 {
    3.0 - 2.0 * 2f64.sqrt()
}

/// Upper bound on `A` for any knowledge-feedback bi-stability: `(3 - sqrt(5)) / 2`.
pub fn knowledge_allee_limit() -> f64 {
    0.5 * (3.0 - 5f64.sqrt())
}

/// `2 sqrt((A-1)^2 e_C / A) - A - 1/A - e_C + e_D + 2`, negative inside the region.
pub fn knowledge_extraction_condition(allee: f64, e_c: f64, e_d: f64) -> f64 {
    let a = allee;
    2.0 * ((a - 1.0).powi(2) * e_c / a).sqrt() - a - 1.0 / a - e_c + e_d + 2.0
}

/// `-A + 2 sqrt((A-1)^2 / A) - 1/A + e_C + 1`, the extra condition on the second branch.
pub fn knowledge_cooperator_condition(allee: f64, e_c: f64) -> f64 {
    let a = allee;
    -a + 2.0 * ((a - 1.0).powi(2) / a).sqrt() - 1.0 / a + e_c + 1.0
}

pub fn is_knowledge_bistable(params: &ModelParams) -> bool {
    let (a, ec, ed) = (params.allee, params.e_c_hat, params.e_d_hat);
    let split = knowledge_branch_split();
    let first = knowledge_extraction_condition(a, ec, ed) < 0.0;
    (0.0 < a && a < split && first)
        || (split < a
            && a < knowledge_allee_limit()
            && first
            && knowledge_cooperator_condition(a, ec) < 0.0)
}

/// `e_D_hat` bound implied by the knowledge-feedback extraction condition.
pub fn knowledge_threshold(allee: f64, e_c: f64) -> f64 {
    -knowledge_extraction_condition(allee, e_c, 0.0)
}

pub fn replicator_bistable(params: &ValidatedParams) -> Result<BistabilityReport, AnalysisError> {
    Ok(BistabilityReport {
        bistable: is_replicator_bistable(params),
        existing_points: replicator_fixed_points(params)?,
        threshold_value: replicator_threshold(params.allee),
    })
}

pub fn knowledge_bistable(params: &ValidatedParams) -> Result<BistabilityReport, AnalysisError> {
    Ok(BistabilityReport {
        bistable: is_knowledge_bistable(params),
        existing_points: knowledge_fixed_points(params)?,
        threshold_value: knowledge_threshold(params.allee, params.e_c_hat),
    })
}

pub fn is_bistable(params: &ModelParams, rule: StrategyRule) -> bool {
    match rule {
        StrategyRule::Replicator => is_replicator_bistable(params),
        StrategyRule::KnowledgeFeedback => is_knowledge_bistable(params),
    }
}

fn critical_roots(params: &ModelParams) -> Result<(f64, f64), AnalysisError> {
    if !is_replicator_bistable(params) {
        return Err(AnalysisError::NoBoundary);
    }
    let (sc_minus, _) =
        pure_strategy_roots(params.allee, params.e_c_hat).ok_or(AnalysisError::NoBoundary)?;
    let (sd_minus, _) =
        pure_strategy_roots(params.allee, params.e_d_hat).ok_or(AnalysisError::NoBoundary)?;
    Ok((sc_minus, sd_minus))
}

/// Cooperator fraction on the straight line through `(s_D-, 0)` and `(s_C-, 1)` at
/// resource level `r0`. Values outside `[0, 1]` mean the line does not cross that column.
pub fn critical_line_x0(r0: f64, params: &ModelParams) -> Result<f64, AnalysisError> {
    let (sc, sd) = critical_roots(params)?;
    Ok((r0 - sd) / (sc - sd))
}

/// Resource level on the critical line at cooperator fraction `x0`.
pub fn critical_line_r0(x0: f64, params: &ModelParams) -> Result<f64, AnalysisError> {
    let (sc, sd) = critical_roots(params)?;
    Ok(sd + x0 * (sc - sd))
}

/// Replicator fate predicted by the critical line: sustainable above it, collapse below.
pub fn predicted_sustainable(state0: State, params: &ModelParams) -> Result<bool, AnalysisError> {
    Ok(state0.r > critical_line_r0(state0.x, params)?)
}

//! Parameters, state and drift functions shared by every engine.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Macroscopic model parameters.
///
/// Extraction rates are stored in normalized form, `e_hat = N * e / T`, so the
/// resource equation never needs the population size or raw extraction rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Natural growth rate `T` of the resource.
    pub growth_rate: f64,
    /// Allee threshold `A`; growth is negative below it.
    pub allee: f64,
    /// Carrying capacity `K`.
    pub capacity: f64,
    /// Normalized cooperator extraction rate.
    pub e_c_hat: f64,
    /// Normalized defector extraction rate.
    pub e_d_hat: f64,
    /// Greed parameter `w`, read only by the replicator rule.
    pub greed: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            growth_rate: 2.0,
            allee: 0.1,
            capacity: 1.0,
            e_c_hat: 0.5,
            e_d_hat: 1.5,
            greed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parameter {field} = {value} violates {constraint}")]
pub struct ParamDomainError {
    pub field: &'static str,
    pub constraint: &'static str,
    pub value: f64,
}

/// Parameters that passed [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(ModelParams);

impl ValidatedParams {
    #[cfg(test)]
    pub(crate) fn new_unchecked(params: ModelParams) -> Self {
        Self(params)
    }

    pub fn into_inner(self) -> ModelParams {
        self.0
    }
}

impl Deref for ValidatedParams {
    type Target = ModelParams;

    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

fn check(
    ok: bool,
    field: &'static str,
    constraint: &'static str,
    value: f64,
) -> Result<(), ParamDomainError> {
    if ok {
        Ok(())
    } else {
        Err(ParamDomainError {
            field,
            constraint,
            value,
        })
    }
}

/// Checks every parameter domain and requires the normalized capacity `K = 1`.
pub fn validate_params(params: ModelParams) -> Result<ValidatedParams, ParamDomainError> {
    validate_with(params, false)
}

/// Like [`validate_params`] but accepts any positive carrying capacity.
pub fn validate_params_unnormalized(
    params: ModelParams,
) -> Result<ValidatedParams, ParamDomainError> {
    validate_with(params, true)
}

fn validate_with(
    p: ModelParams,
    allow_unnormalized: bool,
) -> Result<ValidatedParams, ParamDomainError> {
    check(
        p.growth_rate.is_finite() && p.growth_rate > 0.0,
        "T",
        "T > 0",
        p.growth_rate,
    )?;
    check(
        p.capacity.is_finite() && p.capacity > 0.0,
        "K",
        "K > 0",
        p.capacity,
    )?;
    if !allow_unnormalized {
        check(p.capacity == 1.0, "K", "K = 1 (normalized)", p.capacity)?;
    }
    check(
        p.allee > 0.0 && p.allee < p.capacity,
        "A",
        "0 < A < K",
        p.allee,
    )?;
    check(
        p.e_c_hat > 0.0 && p.e_c_hat < 1.0,
        "e_C_hat",
        "0 < e_C_hat < 1",
        p.e_c_hat,
    )?;
    check(
        p.e_d_hat > 1.0 && p.e_d_hat.is_finite(),
        "e_D_hat",
        "e_D_hat > 1",
        p.e_d_hat,
    )?;
    check(p.greed > 0.0 && p.greed <= 1.0, "w", "0 < w <= 1", p.greed)?;
    Ok(ValidatedParams(p))
}

/// Resource level `R` and cooperator fraction `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub r: f64,
    pub x: f64,
}

impl State {
    pub const fn new(r: f64, x: f64) -> Self {
        Self { r, x }
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.r) && (0.0..=1.0).contains(&self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrowthKind {
    PlainLogistic,
    AlleeLogistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyRule {
    Replicator,
    KnowledgeFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {what} `{got}` (expected one of: {expected})")]
pub struct ParseVariantError {
    what: &'static str,
    got: String,
    expected: &'static str,
}

impl GrowthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GrowthKind::PlainLogistic => "logistic",
            GrowthKind::AlleeLogistic => "allee",
        }
    }
}

impl fmt::Display for GrowthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GrowthKind {
    type Err = ParseVariantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic" => Ok(GrowthKind::PlainLogistic),
            "allee" => Ok(GrowthKind::AlleeLogistic),
            _ => Err(ParseVariantError {
                what: "growth kind",
                got: s.to_string(),
                expected: "logistic, allee",
            }),
        }
    }
}

impl StrategyRule {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyRule::Replicator => "replicator",
            StrategyRule::KnowledgeFeedback => "knowledge",
        }
    }
}

impl fmt::Display for StrategyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyRule {
    type Err = ParseVariantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replicator" => Ok(StrategyRule::Replicator),
            "knowledge" => Ok(StrategyRule::KnowledgeFeedback),
            _ => Err(ParseVariantError {
                what: "strategy rule",
                got: s.to_string(),
                expected: "replicator, knowledge",
            }),
        }
    }
}

/// Unit step with `step(0) = 1`.
#[inline]
pub fn unit_step(y: f64) -> f64 {
    if y >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Growth term of the resource equation, including the factor `T`.
#[inline]
pub fn growth_rate(r: f64, params: &ModelParams, kind: GrowthKind) -> f64 {
    let logistic = params.growth_rate * r * (1.0 - r / params.capacity);
    match kind {
        GrowthKind::PlainLogistic => logistic,
        GrowthKind::AlleeLogistic => logistic * (r / params.allee - 1.0),
    }
}

/// Mean normalized extraction rate of a population with cooperator fraction `x`.
#[inline]
pub fn mean_extraction(x: f64, params: &ModelParams) -> f64 {
    x * params.e_c_hat + (1.0 - x) * params.e_d_hat
}

#[inline]
pub fn resource_drift(state: State, params: &ModelParams, kind: GrowthKind) -> f64 {
    growth_rate(state.r, params, kind)
        - params.growth_rate * state.r * mean_extraction(state.x, params)
}

/// Probability that a cooperator turns defector under knowledge feedback.
#[inline]
pub fn knowledge_defect_probability(r: f64, params: &ModelParams) -> f64 {
    let excess = r - params.allee;
    unit_step(excess) * excess / (params.capacity - params.allee)
}

#[inline]
pub fn strategy_drift(state: State, params: &ModelParams, rule: StrategyRule) -> f64 {
    match rule {
        StrategyRule::Replicator => -params.greed * state.r * state.x * (1.0 - state.x),
        StrategyRule::KnowledgeFeedback => {
            1.0 - state.x - knowledge_defect_probability(state.r, params)
        }
    }
}

/// `(dR/dt, dx/dt)` for the coupled system.
#[inline]
pub fn coevolution_rhs(
    state: State,
    params: &ModelParams,
    kind: GrowthKind,
    rule: StrategyRule,
) -> (f64, f64) {
    (
        resource_drift(state, params, kind),
        strategy_drift(state, params, rule),
    )
}

/// A fully specified model variant: parameters plus growth and strategy rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub params: ValidatedParams,
    pub growth: GrowthKind,
    pub rule: StrategyRule,
}

impl Model {
    pub fn new(params: ValidatedParams, growth: GrowthKind, rule: StrategyRule) -> Self {
        Self {
            params,
            growth,
            rule,
        }
    }

    #[inline]
    pub fn rhs(&self, state: State) -> (f64, f64) {
        coevolution_rhs(state, &self.params, self.growth, self.rule)
    }

    pub fn with_params(&self, params: ValidatedParams) -> Self {
        Self { params, ..*self }
    }
}

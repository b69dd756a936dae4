//! Coevolution of a common-pool resource with an Allee effect and the
//! strategies of the players extracting it.
//!
//! The crate provides the macroscopic ODE models (replicator dynamics and
//! knowledge feedback), their finite-population stochastic counterparts, the
//! closed-form steady-state analysis and gridded sweeps over initial
//! conditions and parameters.

pub mod agent;
pub mod analysis;
pub mod model;
pub mod ode;
pub mod seed;
pub mod sweep;

pub use model::{
    coevolution_rhs, growth_rate, resource_drift, strategy_drift, validate_params, GrowthKind,
    Model, ModelParams, ParamDomainError, State, StrategyRule, ValidatedParams,
};

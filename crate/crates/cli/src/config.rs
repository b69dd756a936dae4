//! Flat `key=value` run configuration.
//!
//! One assignment per line; blank lines and lines starting with `#` are ignored.
//! Keys are case sensitive and unknown keys are rejected.

use std::fmt::Display;
use std::str::FromStr;

use allee_core::agent::SimConfig;
use allee_core::ode::IntegratorConfig;
use allee_core::sweep::{Axis, GridSpec, SweptParam};
use allee_core::{GrowthKind, ModelParams, State, StrategyRule};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("invalid value `{value}` for key `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalMode {
    Ode,
    Agent,
}

impl FromStr for TerminalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ode" => Ok(Self::Ode),
            "agent" => Ok(Self::Agent),
            _ => Err("expected `ode` or `agent`".into()),
        }
    }
}

impl Display for TerminalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Ode => "ode",
            Self::Agent => "agent",
        })
    }
}

/// Wrapper so the swept parameter parses from and prints as its config name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Swept(pub SweptParam);

impl FromStr for Swept {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e_D_hat" => Ok(Self(SweptParam::EDHat)),
            "A" => Ok(Self(SweptParam::Allee)),
            _ => Err("expected `e_D_hat` or `A`".into()),
        }
    }
}

impl Display for Swept {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub growth: GrowthKind,
    pub rule: StrategyRule,
    pub initial: State,
    pub integrator: IntegratorConfig,
    pub sim: SimConfig,
    pub n_runs: usize,
    pub grid: GridSpec,
    pub allee_axis: Axis,
    pub e_d_axis: Axis,
    pub swept: Swept,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_step: f64,
    pub n_ics: usize,
    pub terminal: TerminalMode,
    /// Empty means standard output.
    pub out: String,
    /// Per-run ensemble trajectories; empty disables.
    pub raw_out: String,
    /// Critical line for basin runs; empty disables.
    pub line_out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            growth: GrowthKind::AlleeLogistic,
            rule: StrategyRule::Replicator,
            initial: State::new(0.5, 0.5),
            integrator: IntegratorConfig::default(),
            sim: SimConfig::default(),
            n_runs: 50,
            grid: GridSpec::default(),
            // 100 interior points of a 101-point lattice whose left edge lies outside the domain.
            allee_axis: Axis::left_open(0.0, 0.4, 100),
            e_d_axis: Axis::left_open(1.0, 3.0, 100),
            swept: Swept(SweptParam::EDHat),
            sweep_min: 1.02,
            sweep_max: 3.0,
            sweep_step: 0.02,
            n_ics: 50,
            terminal: TerminalMode::Ode,
            out: String::new(),
            raw_out: String::new(),
            line_out: String::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value;
        match key {
            "T" => self.params.growth_rate = parse(key, v)?,
            "K" => self.params.capacity = parse(key, v)?,
            "A" => self.params.allee = parse(key, v)?,
            "e_C_hat" => self.params.e_c_hat = parse(key, v)?,
            "e_D_hat" => self.params.e_d_hat = parse(key, v)?,
            "w" => self.params.greed = parse(key, v)?,
            "growth" => self.growth = parse(key, v)?,
            "rule" => self.rule = parse(key, v)?,
            "R0" => self.initial.r = parse(key, v)?,
            "x0" => self.initial.x = parse(key, v)?,
            "dt" => self.integrator.dt = parse(key, v)?,
            "t_max" => self.integrator.t_max = parse(key, v)?,
            "conv_tol" => self.integrator.conv_tol = parse(key, v)?,
            "record_stride" => self.integrator.record_stride = parse(key, v)?,
            "extinct_eps" => {
                let eps = parse(key, v)?;
                self.integrator.extinct_eps = eps;
                self.sim.extinct_eps = eps;
            }
            "stop_at_steady_state" => self.integrator.stop_at_steady_state = parse(key, v)?,
            "N" => self.sim.population = parse(key, v)?,
            "steps" => self.sim.steps = parse(key, v)?,
            "sim_stride" => self.sim.record_stride = parse(key, v)?,
            "seed" => self.sim.seed = parse(key, v)?,
            "n_runs" => self.n_runs = parse(key, v)?,
            "R0_min" => self.grid.r0_min = parse(key, v)?,
            "R0_max" => self.grid.r0_max = parse(key, v)?,
            "x0_min" => self.grid.x0_min = parse(key, v)?,
            "x0_max" => self.grid.x0_max = parse(key, v)?,
            "resolution" => self.grid.resolution = parse(key, v)?,
            "A_min" => self.allee_axis.min = parse(key, v)?,
            "A_max" => self.allee_axis.max = parse(key, v)?,
            "A_points" => self.allee_axis.points = parse(key, v)?,
            "A_left_open" => self.allee_axis.left_open = parse(key, v)?,
            "e_D_min" => self.e_d_axis.min = parse(key, v)?,
            "e_D_max" => self.e_d_axis.max = parse(key, v)?,
            "e_D_points" => self.e_d_axis.points = parse(key, v)?,
            "e_D_left_open" => self.e_d_axis.left_open = parse(key, v)?,
            "swept" => self.swept = parse(key, v)?,
            "sweep_min" => self.sweep_min = parse(key, v)?,
            "sweep_max" => self.sweep_max = parse(key, v)?,
            "sweep_step" => self.sweep_step = parse(key, v)?,
            "n_ics" => self.n_ics = parse(key, v)?,
            "terminal" => self.terminal = parse(key, v)?,
            "out" => self.out = v.to_string(),
            "raw_out" => self.raw_out = v.to_string(),
            "line_out" => self.line_out = v.to_string(),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies a single `key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax {
                line: 0,
                text: assignment.to_string(),
            })?;
        self.set(key.trim(), value.trim())
    }

    /// Every effective setting, in a fixed order; feeding these back through
    /// [`RunConfig::set`] reproduces the configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let ic = &self.integrator;
        let s = &self.sim;
        let g = &self.grid;
        let (a, e) = (&self.allee_axis, &self.e_d_axis);
        vec![
            ("T", p.growth_rate.to_string()),
            ("K", p.capacity.to_string()),
            ("A", p.allee.to_string()),
            ("e_C_hat", p.e_c_hat.to_string()),
            ("e_D_hat", p.e_d_hat.to_string()),
            ("w", p.greed.to_string()),
            ("growth", self.growth.to_string()),
            ("rule", self.rule.to_string()),
            ("R0", self.initial.r.to_string()),
            ("x0", self.initial.x.to_string()),
            ("dt", ic.dt.to_string()),
            ("t_max", ic.t_max.to_string()),
            ("conv_tol", ic.conv_tol.to_string()),
            ("record_stride", ic.record_stride.to_string()),
            ("extinct_eps", ic.extinct_eps.to_string()),
            ("stop_at_steady_state", ic.stop_at_steady_state.to_string()),
            ("N", s.population.to_string()),
            ("steps", s.steps.to_string()),
            ("sim_stride", s.record_stride.to_string()),
            ("seed", s.seed.to_string()),
            ("n_runs", self.n_runs.to_string()),
            ("R0_min", g.r0_min.to_string()),
            ("R0_max", g.r0_max.to_string()),
            ("x0_min", g.x0_min.to_string()),
            ("x0_max", g.x0_max.to_string()),
            ("resolution", g.resolution.to_string()),
            ("A_min", a.min.to_string()),
            ("A_max", a.max.to_string()),
            ("A_points", a.points.to_string()),
            ("A_left_open", a.left_open.to_string()),
            ("e_D_min", e.min.to_string()),
            ("e_D_max", e.max.to_string()),
            ("e_D_points", e.points.to_string()),
            ("e_D_left_open", e.left_open.to_string()),
            ("swept", self.swept.to_string()),
            ("sweep_min", self.sweep_min.to_string()),
            ("sweep_max", self.sweep_max.to_string()),
            ("sweep_step", self.sweep_step.to_string()),
            ("n_ics", self.n_ics.to_string()),
            ("terminal", self.terminal.to_string()),
            ("out", self.out.clone()),
            ("raw_out", self.raw_out.clone()),
            ("line_out", self.line_out.clone()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Swept values `sweep_min, sweep_min + step, ...` up to `sweep_max`.
    pub fn sweep_values(&self) -> Result<Vec<f64>, ConfigError> {
        let finite = [self.sweep_min, self.sweep_max, self.sweep_step]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.sweep_step <= 0.0 || self.sweep_min > self.sweep_max {
            return Err(ConfigError::Invalid(
                "sweep needs sweep_step > 0 and sweep_min <= sweep_max".into(),
            ));
        }
        let n = ((self.sweep_max - self.sweep_min) / self.sweep_step + 1e-9).floor() as usize + 1;
        Ok((0..n)
            .map(|i| self.sweep_min + self.sweep_step * i as f64)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_echo_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let cfg = RunConfig::from_text("# strong threshold\n\nA = 0.3\nrule=knowledge\n").unwrap();
        assert_eq!(cfg.params.allee, 0.3);
        assert_eq!(cfg.rule, StrategyRule::KnowledgeFeedback);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_text("Alee=0.1").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("Alee".into()));
        assert!(err.to_string().contains("Alee"));
    }

    #[test]
    fn bad_values_and_syntax() {
        assert!(matches!(
            RunConfig::from_text("A=abc"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            RunConfig::from_text("rule=greedy"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            RunConfig::from_text("just words"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn sweep_values_include_end_point() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("sweep_min=1.8\nsweep_max=2.2\nsweep_step=0.005")
            .unwrap();
        let v = cfg.sweep_values().unwrap();
        assert_eq!(v.len(), 81);
        assert!((v[80] - 2.2).abs() < 1e-12);
    }
}

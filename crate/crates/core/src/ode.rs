//! Fixed-step RK4 integration of the macroscopic equations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("non-finite state at t = {t} (R = {r}, x = {x})")]
    NonFiniteState { t: f64, r: f64, x: f64 },
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Max-norm of the right-hand side below which a state counts as steady.
    pub conv_tol: f64,
    pub record_stride: usize,
    /// Resource levels below this snap to exactly zero.
    pub extinct_eps: f64,
    /// Whether [`integrate`] stops recording once the state is steady.
    pub stop_at_steady_state: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 200.0,
            conv_tol: 1e-9,
            record_stride: 100,
            extinct_eps: 1e-12,
            stop_at_steady_state: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), OdeError> {
        let bad = |msg: &str| Err(OdeError::InvalidConfig(msg.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_max > self.dt && self.t_max.is_finite()) {
            return bad("t_max must exceed dt");
        }
        if self.conv_tol.is_nan() || self.conv_tol <= 0.0 {
            return bad("conv_tol must be positive");
        }
        if self.extinct_eps.is_nan() || self.extinct_eps <= 0.0 {
            return bad("extinct_eps must be positive");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

/// Time series of states; `times[i]` is the time of `states[i]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, s: State) {
        self.times.push(t);
        self.states.push(s);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, State)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    /// Linear interpolation at time `t`, clamped to the recorded range.
    pub fn sample(&self, t: f64) -> Option<State> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t <= first {
            return Some(self.states[0]);
        }
        if t >= last {
            return Some(*self.states.last()?);
        }
        let i = self.times.partition_point(|&ti| ti <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (a, b) = (self.states[i - 1], self.states[i]);
        let u = (t - t0) / (t1 - t0);
        Some(State::new(a.r + u * (b.r - a.r), a.x + u * (b.x - a.x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateResult {
    pub final_state: State,
    pub converged: bool,
    pub t_elapsed: f64,
    pub rhs_norm: f64,
}

#[inline]
fn rhs_norm(d: (f64, f64)) -> f64 {
    d.0.abs().max(d.1.abs())
}

#[inline]
fn finite(d: (f64, f64)) -> bool {
    d.0.is_finite() && d.1.is_finite()
}

/// Clamps to the unit square and snaps near-extinct resource to zero.
#[inline]
pub fn enforce_bounds(s: State, extinct_eps: f64) -> State {
    let r = s.r.clamp(0.0, 1.0);
    State::new(if r < extinct_eps { 0.0 } else { r }, s.x.clamp(0.0, 1.0))
}

fn rk4_from(
    model: &Model,
    s: State,
    k1: (f64, f64),
    dt: f64,
    t: f64,
    extinct_eps: f64,
) -> Result<State, OdeError> {
    let half = 0.5 * dt;
    let k2 = model.rhs(State::new(s.r + half * k1.0, s.x + half * k1.1));
    let k3 = model.rhs(State::new(s.r + half * k2.0, s.x + half * k2.1));
    let k4 = model.rhs(State::new(s.r + dt * k3.0, s.x + dt * k3.1));
    if !(finite(k1) && finite(k2) && finite(k3) && finite(k4)) {
        return Err(OdeError::NonFiniteState { t, r: s.r, x: s.x });
    }
    let next = State::new(
        s.r + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s.x + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    );
    if !(next.r.is_finite() && next.x.is_finite()) {
        return Err(OdeError::NonFiniteState { t, r: s.r, x: s.x });
    }
    // R = 0 is absorbing; the cubic can otherwise push it slightly negative.
    if s.r == 0.0 {
        return Ok(enforce_bounds(State::new(0.0, next.x), extinct_eps));
    }
    Ok(enforce_bounds(next, extinct_eps))
}

/// One classical Runge-Kutta step followed by clamping and the extinction snap.
pub fn step_rk4(model: &Model, state: State, dt: f64, extinct_eps: f64) -> Result<State, OdeError> {
    rk4_from(model, state, model.rhs(state), dt, 0.0, extinct_eps)
}

/// Integrates from `state0`, recording every `record_stride` steps and always the final state.
pub fn integrate(
    model: &Model,
    state0: State,
    config: &IntegratorConfig,
) -> Result<Trajectory, OdeError> {
    config.validate()?;
    let n = config.n_steps();
    let mut traj = Trajectory::with_capacity(n / config.record_stride + 2);
    let mut s = enforce_bounds(state0, config.extinct_eps);
    traj.push(0.0, s);
    for i in 0..n {
        let t = i as f64 * config.dt;
        let k1 = model.rhs(s);
        if !finite(k1) {
            return Err(OdeError::NonFiniteState { t, r: s.r, x: s.x });
        }
        if config.stop_at_steady_state && rhs_norm(k1) <= config.conv_tol {
            if traj.times.last() != Some(&t) {
                traj.push(t, s);
            }
            return Ok(traj);
        }
        s = rk4_from(model, s, k1, config.dt, t, config.extinct_eps)?;
        let step = i + 1;
        if step % config.record_stride == 0 || step == n {
            traj.push(step as f64 * config.dt, s);
        }
    }
    Ok(traj)
}

/// Integrates until the right-hand side max-norm drops to `conv_tol` or `t_max` is reached.
pub fn run_to_steady_state(
    model: &Model,
    state0: State,
    config: &IntegratorConfig,
) -> Result<SteadyStateResult, OdeError> {
    config.validate()?;
    let n = config.n_steps();
    let mut s = enforce_bounds(state0, config.extinct_eps);
    for i in 0..n {
        let t = i as f64 * config.dt;
        let k1 = model.rhs(s);
        if !finite(k1) {
            return Err(OdeError::NonFiniteState { t, r: s.r, x: s.x });
        }
        let norm = rhs_norm(k1);
        if norm <= config.conv_tol {
            return Ok(SteadyStateResult {
                final_state: s,
                converged: true,
                t_elapsed: t,
                rhs_norm: norm,
            });
        }
        s = rk4_from(model, s, k1, config.dt, t, config.extinct_eps)?;
    }
    let norm = rhs_norm(model.rhs(s));
    Ok(SteadyStateResult {
        final_state: s,
        converged: norm <= config.conv_tol,
        t_elapsed: n as f64 * config.dt,
        rhs_norm: norm,
    })
}

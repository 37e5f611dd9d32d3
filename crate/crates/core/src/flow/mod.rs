//! Time integration of `∂u/∂t = θ(D²u) + κu`.
//!
//! The time-dependent constant that the potential form allows on the right
//! hand side is fixed to zero; it does not move the graph of `du`.

mod checkpoint;
mod monitor;

pub use checkpoint::{
    checkpoint_load, checkpoint_save, decode_checkpoint, encode_checkpoint, Checkpoint,
    CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use monitor::{
    psi_from_jets, FnSink, MonitorRecord, MonitorSink, NullSink, StateSampler, MONITOR_HEADER,
};

use std::fmt;

use thiserror::Error;

use crate::field::{
    DiffScheme, Differentiator, FieldError, GridSpec, PeriodicScalarField, SupNorm, SymMatrixField,
    SymTensor3Field, VectorField,
};
use crate::geometry::SymMatrix;

/// Largest `sup|D²u|` the integrator accepts before abandoning the graph
/// regime.
pub const MAX_HESSIAN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub grid: GridSpec,
    /// Kähler–Einstein constant κ. Values above zero are integrated but
    /// carry no convergence guarantee.
    pub kappa: f64,
    pub cfl: f64,
    pub scheme: DiffScheme,
    pub t_max: f64,
    pub conv_tol: f64,
    pub c0: f64,
    pub c1: f64,
    pub eps1: f64,
    /// Emit a monitor record every this many steps (0: initial and final only).
    pub checkpoint_every: usize,
}

impl FlowConfig {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            kappa: 0.0,
            cfl: 0.2,
            scheme: DiffScheme::Spectral,
            t_max: 1.0,
            conv_tol: 1e-8,
            c0: 100.0,
            c1: 10.0,
            eps1: 0.1,
            checkpoint_every: 100,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |msg: String| Err(FlowError::InvalidConfig(msg));
        if !self.kappa.is_finite() {
            return bad(format!("kappa = {}", self.kappa));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad(format!("cfl = {} not in (0, 0.5]", self.cfl));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max = {} must be positive", self.t_max));
        }
        if !(self.conv_tol > 0.0) {
            return bad(format!("conv_tol = {} must be positive", self.conv_tol));
        }
        if !(self.c0 >= 1.0 && self.c1 >= 1.0) || !self.c0.is_finite() || !self.c1.is_finite() {
            return bad(format!("c0 = {}, c1 = {} must be >= 1", self.c0, self.c1));
        }
        if !(self.eps1 > 0.0 && self.eps1 <= 1.0) {
            return bad(format!("eps1 = {} not in (0, 1]", self.eps1));
        }
        Ok(())
    }

    /// `cfl · min_a h_a² / (2n)`: the explicit heat-equation bound, valid
    /// for the linearized flow because `μ⁻¹ ⪯ I`.
    pub fn dt(&self) -> f64 {
        let h = self.grid.min_spacing();
        self.cfl * h * h / (2.0 * self.grid.dim() as f64)
    }

    pub fn is_experimental(&self) -> bool {
        self.kappa > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupReason {
    NonFinite,
    /// `sup|D²u|` exceeded [`MAX_HESSIAN`].
    LeftGraphRegime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub t: f64,
    pub sup_u: f64,
    pub sup_d2u: f64,
    pub reason: BlowupReason,
}

impl fmt::Display for BlowupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at t = {:e} (sup|u| = {:e}, sup|D²u| = {:e})",
            self.reason, self.t, self.sup_u, self.sup_d2u
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("blowup: {0}")]
    Blowup(BlowupReport),
}

/// Potential `u(·, t)` with the derivative jets the monitors need.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub(crate) t: f64,
    pub(crate) u: PeriodicScalarField,
    pub(crate) du: VectorField,
    pub(crate) d2u: SymMatrixField,
    pub(crate) d3u: SymTensor3Field,
    pub(crate) last_dt: f64,
}

impl FlowState {
    pub fn new(u: PeriodicScalarField, t: f64, diff: &Differentiator) -> Result<Self, FieldError> {
        let mut jets = diff.jets(&u, 3)?.into_iter();
        Ok(Self {
            t,
            u,
            du: jets.next().unwrap(),
            d2u: jets.next().unwrap(),
            d3u: jets.next().unwrap(),
            last_dt: 0.0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn u(&self) -> &PeriodicScalarField {
        &self.u
    }

    pub fn du(&self) -> &VectorField {
        &self.du
    }

    pub fn d2u(&self) -> &SymMatrixField {
        &self.d2u
    }

    pub fn d3u(&self) -> &SymTensor3Field {
        &self.d3u
    }

    pub fn last_dt(&self) -> f64 {
        self.last_dt
    }
}

/// How an integration ended.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowOutcome {
    Converged(FlowState),
    TimedOut(FlowState),
    Blowup(BlowupReport),
}

impl FlowOutcome {
    pub fn state(&self) -> Option<&FlowState> {
        match self {
            FlowOutcome::Converged(s) | FlowOutcome::TimedOut(s) => Some(s),
            FlowOutcome::Blowup(_) => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FlowOutcome::Converged(_) => "converged",
            FlowOutcome::TimedOut(_) => "timed_out",
            FlowOutcome::Blowup(_) => "blowup",
        }
    }
}

/// `θ(D²u) + κu` pointwise, given the Hessian components.
fn rhs_from_hessian(dim: usize, u: &[f64], hess: &[Vec<f64>], kappa: f64) -> Vec<f64> {
    let mut packed = vec![0.0; hess.len()];
    u.iter()
        .enumerate()
        .map(|(p, &v)| {
            for (slot, c) in packed.iter_mut().zip(hess) {
                *slot = c[p];
            }
            SymMatrix::from_packed(dim, &packed).lagrangian_angle() + kappa * v
        })
        .collect()
}

/// Right-hand side `θ(D²u) + κu` of the flow.
pub fn rhs(u: &PeriodicScalarField, kappa: f64, scheme: DiffScheme) -> PeriodicScalarField {
    let diff = Differentiator::new(u.spec(), scheme);
    let hess = diff.hessian_raw(u.values());
    let values = rhs_from_hessian(u.spec().dim(), u.values(), &hess, kappa);
    PeriodicScalarField::from_raw(u.spec().clone(), values)
}

/// A validated config with its differentiator. Reuse one engine per run.
#[derive(Debug)]
pub struct FlowEngine {
    cfg: FlowConfig,
    diff: Differentiator,
}

impl FlowEngine {
    pub fn new(cfg: FlowConfig) -> Result<Self, FlowError> {
        cfg.validate()?;
        let diff = Differentiator::new(&cfg.grid, cfg.scheme);
        Ok(Self { cfg, diff })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn differentiator(&self) -> &Differentiator {
        &self.diff
    }

    pub fn initial_state(&self, u0: PeriodicScalarField) -> Result<FlowState, FlowError> {
        Ok(FlowState::new(u0, 0.0, &self.diff)?)
    }

    pub fn state_at(&self, u: PeriodicScalarField, t: f64) -> Result<FlowState, FlowError> {
        Ok(FlowState::new(u, t, &self.diff)?)
    }

    pub fn rhs(&self, u: &PeriodicScalarField) -> PeriodicScalarField {
        let hess = self.diff.hessian_raw(u.values());
        let values = rhs_from_hessian(u.spec().dim(), u.values(), &hess, self.cfg.kappa);
        PeriodicScalarField::from_raw(u.spec().clone(), values)
    }

    fn rhs_raw(&self, u: &[f64]) -> Vec<f64> {
        let hess = self.diff.hessian_raw(u);
        rhs_from_hessian(self.cfg.grid.dim(), u, &hess, self.cfg.kappa)
    }

    /// One classical RK4 step of the configured CFL size.
    pub fn step(&self, state: &FlowState) -> Result<FlowState, FlowError> {
        self.step_with_dt(state, self.cfg.dt())
    }

    /// One classical RK4 step of size `dt`.
    pub fn step_with_dt(&self, state: &FlowState, dt: f64) -> Result<FlowState, FlowError> {
        let dim = self.cfg.grid.dim();
        let u = state.u.values();
        // The first stage reuses the cached Hessian.
        let k1 = rhs_from_hessian(dim, u, state.d2u.components(), self.cfg.kappa);
        let stage = |k: &[f64], h: f64| -> Vec<f64> {
            u.iter().zip(k).map(|(&v, &kv)| v + h * kv).collect()
        };
        let k2 = self.rhs_raw(&stage(&k1, 0.5 * dt));
        let k3 = self.rhs_raw(&stage(&k2, 0.5 * dt));
        let k4 = self.rhs_raw(&stage(&k3, dt));
        let next: Vec<f64> = (0..u.len())
            .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let t = state.t + dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::Blowup(BlowupReport {
                t,
                sup_u: next.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                sup_d2u: f64::NAN,
                reason: BlowupReason::NonFinite,
            }));
        }
        let u_next = PeriodicScalarField::from_raw(self.cfg.grid.clone(), next);
        let mut out = FlowState::new(u_next, t, &self.diff)?;
        out.last_dt = dt;
        let sup_d2u = out.d2u.sup_norm();
        if !out.d2u.is_finite() || !out.d3u.is_finite() || sup_d2u > MAX_HESSIAN {
            return Err(FlowError::Blowup(BlowupReport {
                t,
                sup_u: out.u.sup_norm(),
                sup_d2u,
                reason: if sup_d2u.is_finite() {
                    BlowupReason::LeftGraphRegime
                } else {
                    BlowupReason::NonFinite
                },
            }));
        }
        Ok(out)
    }

    /// The flow has reached its limit: a constant for `κ = 0`, zero for
    /// `κ < 0`.
    pub fn is_converged(&self, state: &FlowState) -> bool {
        let tol = self.cfg.conv_tol;
        state.du.sup_norm() < tol
            && state.d2u.sup_norm() < tol
            && (self.cfg.kappa >= 0.0 || state.u.sup_norm() < tol)
    }

    pub fn record(&self, state: &FlowState) -> MonitorRecord {
        MonitorRecord::from_state(state, self.cfg.c0, self.cfg.c1)
    }

    pub fn integrate(
        &self,
        u0: PeriodicScalarField,
        sink: &mut dyn MonitorSink,
    ) -> Result<FlowOutcome, FlowError> {
        let state = self.initial_state(u0)?;
        Ok(self.integrate_from(state, sink))
    }

    /// Steps from `state` until convergence, `t_max`, or blowup. A record is
    /// emitted for the starting state, every `checkpoint_every` steps, and
    /// for the final state.
    pub fn integrate_from(&self, state: FlowState, sink: &mut dyn MonitorSink) -> FlowOutcome {
        self.drive(state, sink, true)
    }

    /// Like [`FlowEngine::integrate_from`] but always runs to `t_max`, even
    /// past convergence. Used to fit rates of stationary or converged data.
    pub fn integrate_to_horizon(
        &self,
        state: FlowState,
        sink: &mut dyn MonitorSink,
    ) -> FlowOutcome {
        self.drive(state, sink, false)
    }

    fn drive(
        &self,
        mut state: FlowState,
        sink: &mut dyn MonitorSink,
        stop_on_convergence: bool,
    ) -> FlowOutcome {
        if self.cfg.is_experimental() {
            log::warn!(
                "kappa = {} > 0 is experimental; no convergence guarantee",
                self.cfg.kappa
            );
        }
        let threshold = self.cfg.eps1 * self.cfg.eps1;
        let mut warned = false;
        let mut emit = |state: &FlowState, sink: &mut dyn MonitorSink| {
            let record = self.record(state);
            if !warned && record.psi_max >= threshold {
                log::warn!(
                    "max psi = {:e} at t = {:e} is not below eps1² = {:e}",
                    record.psi_max,
                    record.t,
                    threshold
                );
                warned = true;
            }
            sink.observe(state, &record);
        };
        emit(&state, sink);
        if stop_on_convergence && self.is_converged(&state) {
            return FlowOutcome::Converged(state);
        }
        if state.t >= self.cfg.t_max {
            return FlowOutcome::TimedOut(state);
        }
        let dt = self.cfg.dt();
        let mut steps = 0usize;
        loop {
            let remaining = self.cfg.t_max - state.t;
            let last = remaining <= dt * (1.0 + 1e-9);
            let h = if last { remaining } else { dt };
            state = match self.step_with_dt(&state, h) {
                Ok(s) => s,
                Err(FlowError::Blowup(report)) => return FlowOutcome::Blowup(report),
                Err(e) => unreachable!("stepping a valid state cannot fail otherwise: {e}"),
            };
            if last {
                state.t = self.cfg.t_max;
            }
            steps += 1;
            let every = self.cfg.checkpoint_every;
            let emitted = every > 0 && steps % every == 0;
            if emitted {
                emit(&state, sink);
            }
            let converged = stop_on_convergence && self.is_converged(&state);
            if converged || last {
                if !emitted {
                    emit(&state, sink);
                }
                return if converged {
                    FlowOutcome::Converged(state)
                } else {
                    FlowOutcome::TimedOut(state)
                };
            }
        }
    }
}

/// One RK4 step of size `cfg.dt()`.
pub fn step_rk4(state: &FlowState, cfg: &FlowConfig) -> Result<FlowState, FlowError> {
    FlowEngine::new(cfg.clone())?.step(state)
}

pub fn integrate(
    u0: PeriodicScalarField,
    cfg: &FlowConfig,
    sink: &mut dyn MonitorSink,
) -> Result<FlowOutcome, FlowError> {
    FlowEngine::new(cfg.clone())?.integrate(u0, sink)
}

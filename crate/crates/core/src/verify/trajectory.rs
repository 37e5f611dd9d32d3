use std::fmt;
use std::str::FromStr;

use super::{ResidualReport, VerifyError};
use crate::field::{
    l2_pairing, lowpass_spectral, resample_spectral, resample_tensor_spectral, DiffScheme,
    Differentiator, GridSpec, PeriodicScalarField, SymTensorField,
};
use crate::flow::{psi_from_jets, FlowConfig, FlowEngine, FlowState, MonitorRecord};
use crate::geometry::{
    induced_metric, lagrangian_angle, laplace_beltrami, metric_pairing, volume_excess,
    LaplacianRoute,
};

/// Three consecutive states `t − dt, t, t + dt` of one trajectory,
/// optionally with the states at `t ∓ 2dt`.
#[derive(Debug, Clone)]
pub struct Triple {
    pub prev: FlowState,
    pub mid: FlowState,
    pub next: FlowState,
    pub outer: Option<(FlowState, FlowState)>,
}

impl Triple {
    pub fn dt(&self) -> f64 {
        0.5 * (self.next.t() - self.prev.t())
    }
}

/// Triples sampled along one run, all inside the small-data region.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: FlowConfig,
    pub triples: Vec<Triple>,
}

impl Trajectory {
    /// [`Trajectory::sample_centered`] with the engine's own step as the
    /// half-width.
    pub fn sample(
        engine: &FlowEngine,
        u0: PeriodicScalarField,
        interval: f64,
        count: usize,
    ) -> Result<Self, VerifyError> {
        Self::sample_centered(engine, u0, interval, count, engine.config().dt())
    }

    /// Integrates from `u0` and stores triples `t − w, t, t + w` centred at
    /// exactly `t = k·interval`, `k = 1..=count`, where `w = width`, along
    /// with the outer states `t ∓ 2w`. The flow is stepped normally between
    /// samples and shortened steps land on `t − 2w`, so runs on different
    /// grids are sampled at the same instants. Stops early past `t_max` or
    /// on convergence.
    pub fn sample_centered(
        engine: &FlowEngine,
        u0: PeriodicScalarField,
        interval: f64,
        count: usize,
        width: f64,
    ) -> Result<Self, VerifyError> {
        let cfg = engine.config();
        if !(width > 0.0 && width <= cfg.dt()) {
            return Err(VerifyError::Precondition(format!(
                "half-width {width:e} must lie in (0, dt = {:e}]",
                cfg.dt()
            )));
        }
        if !(interval > 4.0 * width) {
            return Err(VerifyError::Precondition(format!(
                "interval {interval:e} must exceed four times the half-width {width:e}"
            )));
        }
        let threshold = cfg.eps1 * cfg.eps1;
        let mut state = engine.initial_state(u0)?;
        let mut triples = Vec::with_capacity(count);
        for k in 1..=count {
            let center = k as f64 * interval;
            if center > cfg.t_max * (1.0 + 1e-12) {
                break;
            }
            let start = center - 2.0 * width;
            while state.t() < start {
                let h = cfg.dt().min(start - state.t());
                state = engine.step_with_dt(&state, h)?;
            }
            let prev = engine.step_with_dt(&state, width)?;
            let mid = engine.step_with_dt(&prev, width)?;
            if engine.is_converged(&mid) {
                break;
            }
            let psi_max = engine.record(&mid).psi_max;
            if psi_max >= threshold {
                return Err(VerifyError::OutsideSmallData {
                    t: mid.t(),
                    psi_max,
                });
            }
            let next = engine.step_with_dt(&mid, width)?;
            let after = engine.step_with_dt(&next, width)?;
            let before = std::mem::replace(&mut state, after.clone());
            triples.push(Triple {
                prev,
                mid,
                next,
                outer: Some((before, after)),
            });
        }
        Ok(Self {
            config: cfg.clone(),
            triples,
        })
    }

    pub fn mid_states(&self) -> impl Iterator<Item = &FlowState> {
        self.triples.iter().map(|t| &t.mid)
    }
}

/// The parabolic estimates checked along trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `(∂t − Δμ)u² ≤ −|du|² + 2κu² + c|u|(|D³u|² + |D²u|² + |du|²)`
    U2,
    /// `(∂t − Δμ)|du|² ≤ −½|D²u|² + c(|D³u||du| + |du|²)`
    Du2,
    /// `(∂t − Δμ)|D²u|² ≤ −½|D³u|² + c(|D³u|²|D²u| + |D²u|² + |du|²)`
    D2u2,
    /// `(∂t − Δμ)|D³u|² ≤ c(|D³u|⁴ + |D³u|² + |D²u|² + |du|²)`; the
    /// `−½|D⁴u|²` term on the good side is dropped, which only weakens the
    /// inequality.
    D3u2,
    /// `(∂t − Δμ)ψ ≤ 2C₀κu² − ¼(C₀|du|² + C₁|D²u|² + |D³u|²)`
    Psi,
}

impl Inequality {
    pub const ALL: [Inequality; 5] = [
        Inequality::U2,
        Inequality::Du2,
        Inequality::D2u2,
        Inequality::D3u2,
        Inequality::Psi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Inequality::U2 => "u2",
            Inequality::Du2 => "du2",
            Inequality::D2u2 => "d2u2",
            Inequality::D3u2 => "d3u2",
            Inequality::Psi => "psi",
        }
    }

    /// Inequalities whose right-hand side carries an unknown constant.
    pub fn has_constant(self) -> bool {
        self != Inequality::Psi
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Inequality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Inequality::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| format!("unknown inequality '{s}'"))
    }
}

/// A state and its first three derivatives on the evaluation grid.
struct Sampled {
    u: PeriodicScalarField,
    du: SymTensorField,
    d2u: SymTensorField,
    d3u: SymTensorField,
}

impl Sampled {
    /// The state's own jets, or their trigonometric interpolants on the
    /// grid of `fine`. Derivatives are always taken on the simulation grid:
    /// differentiating on the fine grid would amplify rounding noise in the
    /// unresolved modes.
    fn of(state: &FlowState, fine: Option<&Differentiator>) -> Result<Self, VerifyError> {
        let Some(diff) = fine else {
            return Ok(Self {
                u: state.u().clone(),
                du: state.du().clone(),
                d2u: state.d2u().clone(),
                d3u: state.d3u().clone(),
            });
        };
        let sizes = diff.spec().sizes();
        Ok(Self {
            u: resample_spectral(state.u(), sizes)?,
            du: resample_tensor_spectral(state.du(), sizes)?,
            d2u: resample_tensor_spectral(state.d2u(), sizes)?,
            d3u: resample_tensor_spectral(state.d3u(), sizes)?,
        })
    }
}

/// Pointwise norms of the jets of one state.
struct Jets {
    u: Vec<f64>,
    du2: Vec<f64>,
    d2u2: Vec<f64>,
    d3u2: Vec<f64>,
}

impl Jets {
    fn of(s: &Sampled) -> Self {
        Self {
            u: s.u.values().to_vec(),
            du2: s.du.norm_sq().into_values(),
            d2u2: s.d2u.norm_sq().into_values(),
            d3u2: s.d3u.norm_sq().into_values(),
        }
    }
}

fn phi(kind: Inequality, s: &Sampled, cfg: &FlowConfig) -> PeriodicScalarField {
    match kind {
        Inequality::U2 => s.u.map(|v| v * v),
        Inequality::Du2 => s.du.norm_sq(),
        Inequality::D2u2 => s.d2u.norm_sq(),
        Inequality::D3u2 => s.d3u.norm_sq(),
        Inequality::Psi => psi_from_jets(&s.u, &s.du, &s.d2u, cfg.c0, cfg.c1),
    }
}

/// Relative slack on the parabolic operator, covering the centred time
/// difference and the spatial discretization.
const PARABOLIC_SLACK: f64 = 1e-6;

/// Safety factor on the two-stencil error estimate of `∂tφ`, as in the
/// two-grid convergence index.
const NOISE_SAFETY: f64 = 3.0;

/// Bound terms below this fraction of their sample maximum are treated as
/// zero: there the constant-free part of the inequality must hold alone.
const BOUND_FLOOR: f64 = 1e-12;

/// Evaluates `(φ(t+dt) − φ(t−dt))/(2dt) − Δ_μ φ(t)` at every grid point of
/// every triple and compares it with the right-hand side of `kind`.
///
/// For the inequalities with an unknown constant, each sample records the
/// worst point `(R − slack − noise)/B` where `R` is the left side minus the
/// constant-free terms and `B` the term multiplying `c`. When the triple
/// carries its outer states, `noise` is three times the largest gap between
/// the time differences over `2dt` and `4dt`, a measured error bar on `∂tφ`
/// that covers both truncation and rounding. A constant fitted from residuals
/// inside that bar would describe the arithmetic, not the flow. The fitted constant
/// is the smallest `c ≥ 0` that makes every point hold. Where `B` vanishes
/// the constant-free part must hold on its own, or the report fails.
///
/// For `psi` each sample records `max(LHS − 2C₀κu²)` against the slack and
/// the report fails on any excess. Its fitted constant is the largest
/// pointwise ratio `(LHS − 2C₀κu²)/(C₀|du|² + C₁|D²u|² + |D³u|²)`, which
/// the estimate predicts to be at most −¼.
///
/// The slack at each sample is `1e-6 · sup(|∂tφ| + |Δ_μ φ|)`.
pub fn check_evolution_inequality(
    kind: Inequality,
    traj: &Trajectory,
) -> Result<ResidualReport, VerifyError> {
    check_evolution_inequality_on(kind, traj, None)
}

/// [`check_evolution_inequality`] evaluated on a finer grid with `eval_sizes`
/// points per axis, through the trigonometric interpolant of every state.
/// Pointwise maxima then no longer depend on where the simulation grid
/// happens to fall, so runs at different resolutions share the same
/// evaluation points. Needs the spectral scheme.
pub fn check_evolution_inequality_on(
    kind: Inequality,
    traj: &Trajectory,
    eval_sizes: Option<&[usize]>,
) -> Result<ResidualReport, VerifyError> {
    let cfg = &traj.config;
    let fine = match eval_sizes {
        None => None,
        Some(_) if cfg.scheme != DiffScheme::Spectral => {
            return Err(VerifyError::Precondition(
                "interpolated evaluation needs the spectral scheme".into(),
            ))
        }
        Some(sizes) => {
            let spec = GridSpec::new(sizes.to_vec(), cfg.grid.periods().to_vec())?;
            Some(Differentiator::new(&spec, DiffScheme::Spectral))
        }
    };
    let native = Differentiator::new(&cfg.grid, cfg.scheme);
    let diff = fine.as_ref().unwrap_or(&native);
    let mut report = ResidualReport::new(kind.name());
    let mut c = if kind.has_constant() {
        0.0f64
    } else {
        f64::NEG_INFINITY
    };
    for triple in &traj.triples {
        let dt = triple.dt();
        let t = triple.mid.t();
        let mid = Sampled::of(&triple.mid, fine.as_ref())?;
        let p0 = phi(kind, &Sampled::of(&triple.prev, fine.as_ref())?, cfg);
        let mut p1 = phi(kind, &mid, cfg);
        if fine.is_some() {
            // Quadratic in the jets, so its band is twice theirs.
            p1 = lowpass_spectral(&p1, cfg.grid.sizes())?;
        }
        let p2 = phi(kind, &Sampled::of(&triple.next, fine.as_ref())?, cfg);
        let metric = induced_metric(&mid.d2u)?;
        let lap = laplace_beltrami(diff, &p1, &metric, LaplacianRoute::Divergence)?;
        let dphi: Vec<f64> = p0
            .values()
            .iter()
            .zip(p2.values())
            .map(|(a, b)| (b - a) / (2.0 * dt))
            .collect();
        let lhs: Vec<f64> = dphi.iter().zip(lap.values()).map(|(d, l)| d - l).collect();
        let scale = dphi
            .iter()
            .zip(lap.values())
            .map(|(d, l)| d.abs() + l.abs())
            .fold(0.0, f64::max);
        let slack = PARABOLIC_SLACK * scale;
        let noise = match &triple.outer {
            Some((before, after)) if kind.has_constant() => {
                let q0 = phi(kind, &Sampled::of(before, fine.as_ref())?, cfg);
                let q2 = phi(kind, &Sampled::of(after, fine.as_ref())?, cfg);
                dphi.iter()
                    .zip(q0.values().iter().zip(q2.values()))
                    .map(|(d, (a, b))| (d - (b - a) / (4.0 * dt)).abs())
                    .fold(0.0, f64::max)
                    * NOISE_SAFETY
            }
            _ => 0.0,
        };
        let j = Jets::of(&mid);
        let k = cfg.kappa;
        let good = |p: usize| -> f64 {
            match kind {
                Inequality::U2 => -j.du2[p] + 2.0 * k * j.u[p] * j.u[p],
                Inequality::Du2 => -0.5 * j.d2u2[p],
                Inequality::D2u2 => -0.5 * j.d3u2[p],
                Inequality::D3u2 => 0.0,
                Inequality::Psi => 2.0 * cfg.c0 * k * j.u[p] * j.u[p],
            }
        };
        let bound = |p: usize| -> f64 {
            let (g, h, k3) = (j.du2[p], j.d2u2[p], j.d3u2[p]);
            match kind {
                Inequality::U2 => j.u[p].abs() * (k3 + h + g),
                Inequality::Du2 => (k3 * g).sqrt() + g,
                Inequality::D2u2 => k3 * h.sqrt() + h + g,
                Inequality::D3u2 => k3 * k3 + k3 + h + g,
                Inequality::Psi => cfg.c0 * g + cfg.c1 * h + k3,
            }
        };
        let n = lhs.len();
        let b_max = (0..n).map(bound).fold(0.0, f64::max);
        let floor = BOUND_FLOOR * b_max;
        if kind.has_constant() {
            let mut worst: Option<(f64, f64, f64)> = None;
            for p in 0..n {
                let r = lhs[p] - good(p) - slack - noise;
                let b = bound(p);
                if b > floor {
                    let ratio = r / b;
                    if worst.map_or(true, |(_, _, w)| ratio > w) {
                        worst = Some((r, b, ratio));
                    }
                } else if r > 0.0 {
                    report.fail(format!(
                        "constant-free part violated at t = {t:e}, point {p}: excess {r:e}"
                    ));
                }
            }
            if let Some((r, b, ratio)) = worst {
                report.push(t, r, b);
                c = c.max(ratio);
            } else {
                report.push(t, 0.0, 0.0);
            }
        } else {
            let mut excess = f64::NEG_INFINITY;
            for p in 0..n {
                let r = lhs[p] - good(p);
                excess = excess.max(r);
                let q = bound(p);
                if q > floor {
                    c = c.max(r / q);
                }
            }
            report.push(t, excess, slack);
            if excess > slack {
                report.fail(format!(
                    "psi inequality exceeded by {excess:e} at t = {t:e}"
                ));
            }
        }
    }
    report.fitted_constant = c;
    if report.samples.is_empty() {
        report.fail("trajectory has no samples");
    }
    Ok(report)
}

/// Compares the constants fitted on the same inequality at two resolutions.
/// Stable when both vanish or their ratio is below 2.
pub fn check_resolution_stability(
    coarse: &ResidualReport,
    fine: &ResidualReport,
) -> ResidualReport {
    let mut report = ResidualReport::new(format!("{}_resolution", coarse.name));
    let (a, b) = (coarse.fitted_constant, fine.fitted_constant);
    let ratio = if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a.max(b) / a.min(b)
    };
    report.push(0.0, a, 0.0);
    report.push(1.0, b, 0.0);
    report.fitted_constant = ratio;
    if !coarse.pass || !fine.pass {
        report.fail("an underlying report failed");
    }
    if !(ratio < 2.0) {
        report.fail(format!(
            "fitted constants {a:e} and {b:e} differ by {ratio:.3}x"
        ));
    }
    report
}

/// `max_x (log(1 + |D³u|²) + Kψ)`.
pub fn wang_quantity(state: &FlowState, k: f64, c0: f64, c1: f64) -> f64 {
    let psi = psi_from_jets(state.u(), state.du(), state.d2u(), c0, c1);
    let d3 = state.d3u().norm_sq();
    psi.values()
        .iter()
        .zip(d3.values())
        .map(|(p, d)| d.ln_1p() + k * p)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The quantity of [`wang_quantity`] must not grow between consecutive
/// states by more than `slack`.
pub fn check_wang_trick<'a>(
    states: impl IntoIterator<Item = &'a FlowState>,
    cfg: &FlowConfig,
    k: f64,
    slack: f64,
) -> ResidualReport {
    let series = states
        .into_iter()
        .map(|s| (s.t(), wang_quantity(s, k, cfg.c0, cfg.c1)));
    monotone_report("wang", series, slack)
}

/// Recorded `psi_max` must not grow between samples by more than `slack`.
pub fn check_psi_monotone(records: &[MonitorRecord], slack: f64) -> ResidualReport {
    monotone_report(
        "psi_monotone",
        records.iter().map(|r| (r.t, r.psi_max)),
        slack,
    )
}

fn monotone_report(
    name: &str,
    series: impl IntoIterator<Item = (f64, f64)>,
    slack: f64,
) -> ResidualReport {
    let mut report = ResidualReport::new(name);
    let mut last: Option<f64> = None;
    let mut worst = f64::NEG_INFINITY;
    for (t, v) in series {
        if let Some(prev) = last {
            let growth = v - prev;
            report.push(t, growth, slack);
            worst = worst.max(growth);
            if !(growth <= slack) {
                report.fail(format!("grew by {growth:e} at t = {t:e}"));
            }
        }
        last = Some(v);
    }
    report.fitted_constant = worst;
    if report.samples.is_empty() {
        report.fail("fewer than two samples");
    }
    report
}

/// `−∫ ⟨dθ, d(θ + κu)⟩_μ √det μ dx`, the exact time derivative of the
/// volume along the flow.
fn volume_rate(engine: &FlowEngine, state: &FlowState) -> Result<f64, VerifyError> {
    let diff = engine.differentiator();
    let kappa = engine.config().kappa;
    let metric = induced_metric(state.d2u())?;
    let theta = lagrangian_angle(state.d2u())?.theta;
    let potential = theta.zip_map(state.u(), |t, v| t + kappa * v)?;
    let dtheta = diff.gradient(&theta)?;
    let dpot = diff.gradient(&potential)?;
    let pairing = metric_pairing(&dtheta, &dpot, &metric)?;
    Ok(-l2_pairing(&pairing, metric.sqrt_det(), None)?)
}

/// Steps `steps` times from `u0` and compares the centred difference of the
/// volume with its exact rate at each interior step.
///
/// The allowance is `5·dt²·scale`, with `scale` the largest third time
/// derivative of the volume estimated from third differences (the
/// truncation error of a centred difference is `dt²/6` times it), plus the
/// rounding error `64·ε·sup|Vol − vol(Tⁿ)|/dt` of differencing. Separately
/// the volume may never grow by more than `1e-10` in one step.
pub fn check_volume_lyapunov(
    engine: &FlowEngine,
    u0: PeriodicScalarField,
    steps: usize,
) -> Result<ResidualReport, VerifyError> {
    if steps < 4 {
        return Err(VerifyError::Precondition(format!(
            "need at least 4 steps, got {steps}"
        )));
    }
    let dt = engine.config().dt();
    let mut state = engine.initial_state(u0)?;
    let mut excess = Vec::with_capacity(steps + 1);
    let mut rates = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        excess.push(volume_excess(&induced_metric(state.d2u())?));
        rates.push(volume_rate(engine, &state)?);
        if i < steps {
            state = engine.step(&state)?;
        }
    }
    let third = (1..steps - 1)
        .map(|k| {
            (excess[k + 2] - 3.0 * excess[k + 1] + 3.0 * excess[k] - excess[k - 1]) / dt.powi(3)
        })
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let rounding = 64.0 * f64::EPSILON * excess.iter().fold(0.0f64, |m, v| m.max(v.abs())) / dt;
    let allowance = 5.0 * dt * dt * third + rounding;
    let mut report = ResidualReport::new("volume_lyapunov");
    let mut worst_growth = f64::NEG_INFINITY;
    for k in 1..steps {
        let centred = (excess[k + 1] - excess[k - 1]) / (2.0 * dt);
        report.push(k as f64 * dt, (centred - rates[k]).abs(), allowance);
    }
    for k in 0..steps {
        let growth = excess[k + 1] - excess[k];
        worst_growth = worst_growth.max(growth);
        if growth > 1e-10 {
            report.fail(format!("volume grew by {growth:e} in step {k}"));
        }
    }
    report.fitted_constant = report.max_ratio();
    if report.fitted_constant > 1.0 {
        report.fail(format!(
            "rate mismatch at {:.3}x the allowance {allowance:e}",
            report.fitted_constant
        ));
    }
    if worst_growth > 0.0 {
        log::debug!("largest per-step volume growth {worst_growth:e}");
    }
    Ok(report)
}

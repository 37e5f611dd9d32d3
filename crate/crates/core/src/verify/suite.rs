use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::{
    check_angle_expansion, check_angle_gradient, check_angle_oracle, check_decay_rate,
    check_evolution_inequality_on, check_laplacian_difference, check_laplacian_routes,
    check_psi_monotone, check_resolution_stability, check_second_variation, check_volume_lyapunov,
    check_wang_trick, fit_decay_rate, DecayField, Inequality, ResidualReport, Trajectory,
    VerifyError,
};
use crate::field::{DiffScheme, Differentiator, GridSpec, PeriodicScalarField, SupNorm};
use crate::flow::{FlowConfig, FlowEngine, FlowOutcome, MonitorRecord, StateSampler};
use crate::initial::{psi_scale, random_bandlimited, single_mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Geometry,
    Inequalities,
    Decay,
    Variation,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["all", "geometry", "inequalities", "decay", "variation"];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::All => "all",
            Suite::Geometry => "geometry",
            Suite::Inequalities => "inequalities",
            Suite::Decay => "decay",
            Suite::Variation => "variation",
        })
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Suite::All),
            "geometry" => Ok(Suite::Geometry),
            "inequalities" => Ok(Suite::Inequalities),
            "decay" => Ok(Suite::Decay),
            "variation" => Ok(Suite::Variation),
            other => Err(format!(
                "unknown suite '{other}' (expected one of {:?})",
                Suite::NAMES
            )),
        }
    }
}

/// Runs every report of `suite` on the built-in seeds.
pub fn run_suite(suite: Suite) -> Result<Vec<ResidualReport>, VerifyError> {
    match suite {
        Suite::All => {
            let mut out = geometry_reports()?;
            out.extend(inequality_reports(&SmallDataCase::standard(6))?);
            out.extend(decay_reports()?);
            out.extend(variation_reports()?);
            Ok(out)
        }
        Suite::Geometry => geometry_reports(),
        Suite::Inequalities => inequality_reports(&SmallDataCase::standard(6)),
        Suite::Decay => decay_reports(),
        Suite::Variation => variation_reports(),
    }
}

/// `sin(2πx₁)/(4π²)`: a unit-period mode with `sup|D²u| = 1`.
pub fn unit_hessian_mode(spec: &GridSpec) -> PeriodicScalarField {
    PeriodicScalarField::from_fn(spec, |x| (2.0 * PI * x[0]).sin() / (4.0 * PI * PI))
        .expect("finite samples")
}

fn scaled_to_hessian(
    u: PeriodicScalarField,
    max_hessian: f64,
) -> Result<PeriodicScalarField, VerifyError> {
    let diff = Differentiator::new(u.spec(), DiffScheme::Spectral);
    let s = diff.derivative(&u, 2)?.sup_norm();
    Ok(u.scaled(max_hessian / s))
}

fn raise_order_floor(report: &mut ResidualReport, floor: f64) {
    if !(report.fitted_order >= floor) {
        report.fail(format!(
            "residual order {:.3} below {floor}",
            report.fitted_order
        ));
    }
}

pub fn geometry_reports() -> Result<Vec<ResidualReport>, VerifyError> {
    let mut out = vec![
        check_angle_oracle(&[1, 2, 3], 1000, 0.5, 1e-10, 1)?,
        check_angle_gradient(100, 1.0, 1e-6, 1e-5, 2)?,
    ];
    let plane = GridSpec::unit(2, 128)?;
    let u = scaled_to_hessian(random_bandlimited(&plane, 3, 3), 0.3)?;
    let f = random_bandlimited(&plane, 3, 4);
    out.push(check_laplacian_routes(&u, &f, DiffScheme::Spectral, 1e-8)?);

    let line = GridSpec::unit(1, 128)?;
    let base = unit_hessian_mode(&line);
    let mut expansion = check_angle_expansion(
        std::slice::from_ref(&base),
        &[1e-1, 1e-2, 1e-3],
        DiffScheme::Spectral,
    )?;
    // θ − Δu starts at the cubic term for a single mode.
    raise_order_floor(&mut expansion, 2.9);
    out.push(expansion);

    let f = PeriodicScalarField::from_fn(&line, |x| (2.0 * PI * x[0]).cos())?;
    out.push(check_laplacian_difference(
        &base,
        &f,
        &[1e-1, 1e-2, 1e-3],
        DiffScheme::Spectral,
    )?);
    Ok(out)
}

/// Small initial data for the monotonicity and inequality checks: a random
/// band-limited field normalized so that `max ψ(u₀) = psi0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallDataCase {
    pub dim: usize,
    /// Grid points per axis of the base resolution.
    pub n: usize,
    pub kappa: f64,
    pub psi0: f64,
    pub max_mode: usize,
    pub seed: u64,
    pub t_max: f64,
}

impl SmallDataCase {
    /// `count` one-dimensional cases on 64 points alternating `κ = 0` and
    /// `κ = −1`, with `max ψ(u₀)` spread over `[0.002, 0.009]`.
    pub fn standard(count: usize) -> Vec<SmallDataCase> {
        (0..count)
            .map(|i| SmallDataCase {
                dim: 1,
                n: 64,
                kappa: if i % 2 == 0 { 0.0 } else { -1.0 },
                psi0: 0.002 + 0.007 * (i % 8) as f64 / 7.0,
                max_mode: 2 + i % 3,
                seed: 1000 + i as u64,
                t_max: 0.3,
            })
            .collect()
    }

    pub fn label(&self) -> String {
        format!("seed{}", self.seed)
    }

    pub fn config(&self, n: usize) -> Result<FlowConfig, VerifyError> {
        let mut cfg = FlowConfig::new(GridSpec::unit(self.dim, n)?);
        cfg.kappa = self.kappa;
        cfg.t_max = self.t_max;
        cfg.checkpoint_every = 20;
        Ok(cfg)
    }

    /// The initial field sampled on `n` points per axis. The normalization
    /// is computed once at the base resolution, so every grid samples the
    /// same continuous function.
    pub fn initial(&self, n: usize) -> Result<PeriodicScalarField, VerifyError> {
        let base = self.config(self.n)?;
        let u = random_bandlimited(&base.grid, self.max_mode, self.seed);
        let s = psi_scale(&u, base.c0, base.c1, self.psi0, base.scheme)
            .ok_or_else(|| VerifyError::Degenerate("initial field has psi = 0".into()))?;
        let grid = GridSpec::unit(self.dim, n)?;
        Ok(random_bandlimited(&grid, self.max_mode, self.seed).scaled(s))
    }
}

/// Records and sampled states of one full run.
pub struct CaseRun {
    pub records: Vec<MonitorRecord>,
    pub sampler: StateSampler,
    pub outcome: FlowOutcome,
}

pub fn run_case(case: &SmallDataCase) -> Result<CaseRun, VerifyError> {
    let engine = FlowEngine::new(case.config(case.n)?)?;
    let mut sampler = StateSampler::default();
    let outcome = engine.integrate(case.initial(case.n)?, &mut sampler)?;
    Ok(CaseRun {
        records: sampler.records.clone(),
        sampler,
        outcome,
    })
}

fn renamed(mut r: ResidualReport, suffix: &str) -> ResidualReport {
    r.name = format!("{}/{suffix}", r.name);
    r
}

/// Monotonicity of `max ψ` and of the `log(1+|D³u|²) + 10ψ` quantity
/// over one run of `case`.
pub fn monotonicity_reports(case: &SmallDataCase) -> Result<Vec<ResidualReport>, VerifyError> {
    let run = run_case(case)?;
    let label = case.label();
    if let FlowOutcome::Blowup(b) = &run.outcome {
        let mut r = ResidualReport::new(format!("psi_monotone/{label}"));
        r.fail(format!("blowup: {b}"));
        return Ok(vec![r]);
    }
    let cfg = case.config(case.n)?;
    Ok(vec![
        renamed(check_psi_monotone(&run.records, 1e-8), &label),
        renamed(
            check_wang_trick(&run.sampler.states, &cfg, 10.0, 1e-8),
            &label,
        ),
    ])
}

/// Evaluation grid of the certification, as a multiple of the base size
/// per axis, indexed by dimension. Shared by both resolutions.
const EVAL_REFINEMENT: [usize; 3] = [16, 4, 2];

/// Evolution inequalities of `case` on trajectories at the base resolution
/// and at twice that, plus the resolution-stability comparison of each
/// fitted constant.
pub fn inequality_certification(case: &SmallDataCase) -> Result<Vec<ResidualReport>, VerifyError> {
    let label = case.label();
    let eval = vec![EVAL_REFINEMENT[case.dim - 1] * case.n; case.dim];
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    // Both runs use the finer run's step as the half-width of every triple.
    let width = case.config(2 * case.n)?.dt();
    for (n, out) in [(case.n, &mut coarse), (2 * case.n, &mut fine)] {
        let mut cfg = case.config(n)?;
        cfg.t_max = 0.1;
        let engine = FlowEngine::new(cfg)?;
        let traj = Trajectory::sample_centered(&engine, case.initial(n)?, 0.005, 20, width)?;
        for kind in Inequality::ALL {
            out.push(check_evolution_inequality_on(kind, &traj, Some(&eval))?);
        }
    }
    let mut reports = Vec::new();
    for (c, f) in coarse.iter().zip(&fine) {
        if Inequality::from_str(&c.name).map_or(false, Inequality::has_constant) {
            reports.push(renamed(check_resolution_stability(c, f), &label));
        }
    }
    for (c, f) in coarse.into_iter().zip(fine) {
        reports.push(renamed(c, &format!("{label}/n{}", case.n)));
        reports.push(renamed(f, &format!("{label}/n{}", 2 * case.n)));
    }
    Ok(reports)
}

/// Volume decrease against its exact rate over the first 400 steps.
pub fn volume_reports(cases: &[SmallDataCase]) -> Result<Vec<ResidualReport>, VerifyError> {
    cases
        .iter()
        .map(|case| {
            let engine = FlowEngine::new(case.config(case.n)?)?;
            let r = check_volume_lyapunov(&engine, case.initial(case.n)?, 400)?;
            Ok(renamed(r, &case.label()))
        })
        .collect()
}

pub fn inequality_reports(cases: &[SmallDataCase]) -> Result<Vec<ResidualReport>, VerifyError> {
    let mut out = Vec::new();
    for case in cases {
        out.extend(monotonicity_reports(case)?);
        out.extend(inequality_certification(case)?);
    }
    out.extend(volume_reports(&cases[..cases.len().min(2)])?);
    Ok(out)
}

fn integrate_records(
    cfg: FlowConfig,
    u0: PeriodicScalarField,
) -> Result<(Vec<MonitorRecord>, FlowOutcome), VerifyError> {
    let mut records = Vec::new();
    let outcome = FlowEngine::new(cfg)?.integrate(u0, &mut records)?;
    Ok((records, outcome))
}

/// The constant solution `0.01·e^{−t}` at `κ = −1` on 64 points up to
/// `t = 5`: pointwise agreement and the decay rates of `sup|u|` and `max ψ`.
pub fn constant_decay_reports(tol_rate: f64) -> Result<Vec<ResidualReport>, VerifyError> {
    let grid = GridSpec::unit(1, 64)?;
    let mut cfg = FlowConfig::new(grid.clone());
    cfg.kappa = -1.0;
    cfg.t_max = 5.0;
    cfg.checkpoint_every = 1000;
    let engine = FlowEngine::new(cfg)?;
    let mut state = engine.initial_state(PeriodicScalarField::constant(&grid, 0.01)?)?;
    let mut worst = 0.0f64;
    let mut records = vec![engine.record(&state)];
    let mut steps = 0usize;
    while state.t() < 5.0 {
        let h = engine.config().dt().min(5.0 - state.t());
        state = engine.step_with_dt(&state, h)?;
        steps += 1;
        let exact = 0.01 * (-state.t()).exp();
        worst = state
            .u()
            .values()
            .iter()
            .fold(worst, |m, v| m.max((v - exact).abs()));
        if steps % 1000 == 0 {
            records.push(engine.record(&state));
        }
    }
    records.push(engine.record(&state));
    let mut ode = ResidualReport::new("constant_ode");
    ode.push(state.t(), worst, 1e-9);
    ode.fitted_constant = worst;
    if !(worst <= 1e-9) {
        ode.fail(format!("sup|u − 0.01e^(−t)| = {worst:e}"));
    }
    let window = (0.0, 5.0);
    Ok(vec![
        ode,
        check_decay_rate(
            "constant_rate_sup_u",
            fit_decay_rate(&records, DecayField::SupU, window)?,
            -1.0,
            tol_rate,
        ),
        check_decay_rate(
            "constant_rate_psi",
            fit_decay_rate(&records, DecayField::PsiMax, window)?,
            -2.0,
            tol_rate,
        ),
    ])
}

/// `10⁻³cos(2πx)` at `κ = 0` on 128 points: the heat-equation rate `4π²`
/// of `sup|du|` over `[0.01, 0.1]` within 1%, convergence, and the limit
/// constant within `10·max ψ(u₀)` of the initial mean.
pub fn heat_decay_reports() -> Result<Vec<ResidualReport>, VerifyError> {
    let grid = GridSpec::unit(1, 128)?;
    let mut cfg = FlowConfig::new(grid.clone());
    cfg.t_max = 2.0;
    cfg.checkpoint_every = 200;
    let u0 = single_mode(&grid, 1, 1e-3);
    let mean0 = u0.mean();
    let psi0 = super::psi(&u0, &cfg)?.max();
    let (records, outcome) = integrate_records(cfg, u0)?;
    let rate = fit_decay_rate(&records, DecayField::SupDu, (0.01, 0.1))?;
    let heat = -4.0 * PI * PI;
    let mut out = vec![check_decay_rate(
        "heat_rate_sup_du",
        rate,
        heat,
        0.01 * heat.abs(),
    )];
    let mut limit = ResidualReport::new("heat_limit");
    match &outcome {
        FlowOutcome::Converged(s) => {
            let drift = (s.u().mean() - mean0).abs();
            limit.push(s.t(), drift, 10.0 * psi0);
            limit.fitted_constant = drift / psi0;
            if !(drift <= 10.0 * psi0) {
                limit.fail(format!("limit drifted {drift:e} from the initial mean"));
            }
        }
        other => limit.fail(format!("run ended {}", other.label())),
    }
    out.push(limit);
    Ok(out)
}

/// Constant data at `κ ∈ {0, −0.5, −1}`: `sup|u|` decays at rate `κ`.
pub fn kappa_rate_reports() -> Result<Vec<ResidualReport>, VerifyError> {
    let grid = GridSpec::unit(1, 16)?;
    [0.0, -0.5, -1.0]
        .into_iter()
        .map(|kappa| {
            let mut cfg = FlowConfig::new(grid.clone());
            cfg.kappa = kappa;
            cfg.t_max = 1.0;
            cfg.checkpoint_every = 50;
            let engine = FlowEngine::new(cfg)?;
            let state = engine.initial_state(PeriodicScalarField::constant(&grid, 0.01)?)?;
            let mut records = Vec::new();
            // At κ = 0 the data is converged from the start; run the full
            // horizon anyway so there is a series to fit.
            engine.integrate_to_horizon(state, &mut records);
            let rate = fit_decay_rate(&records, DecayField::SupU, (0.0, 1.0))?;
            Ok(check_decay_rate(
                &format!("kappa_rate/{kappa}"),
                rate,
                kappa,
                1e-6,
            ))
        })
        .collect()
}

pub fn decay_reports() -> Result<Vec<ResidualReport>, VerifyError> {
    let mut out = constant_decay_reports(1e-6)?;
    out.extend(heat_decay_reports()?);
    out.extend(kappa_rate_reports()?);
    Ok(out)
}

const VARIATION_EPSILONS: [f64; 3] = [4e-3, 2e-3, 1e-3];

/// Second variation of volume for `sin(2πx)` and for `count` random
/// directions (alternating one and two dimensions).
pub fn variation_reports_with(count: usize) -> Result<Vec<ResidualReport>, VerifyError> {
    let line = GridSpec::unit(1, 128)?;
    let h = PeriodicScalarField::from_fn(&line, |x| (2.0 * PI * x[0]).sin())?;
    let mut out = vec![check_second_variation(
        &h,
        &VARIATION_EPSILONS,
        DiffScheme::Spectral,
        1e-4,
    )?];
    let plane = GridSpec::unit(2, 32)?;
    for i in 0..count {
        let grid = if i % 2 == 0 { &line } else { &plane };
        let h = scaled_to_hessian(random_bandlimited(grid, 3, 500 + i as u64), 1.0)?;
        let r = check_second_variation(&h, &VARIATION_EPSILONS, DiffScheme::Spectral, 1e-4)?;
        out.push(renamed(r, &format!("random{i}")));
    }
    Ok(out)
}

pub fn variation_reports() -> Result<Vec<ResidualReport>, VerifyError> {
    variation_reports_with(20)
}

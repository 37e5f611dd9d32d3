//! End-to-end acceptance: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use lmcf_core::field::{DiffScheme, GridSpec, PeriodicScalarField};
use lmcf_core::flow::{
    decode_checkpoint, encode_checkpoint, FlowConfig, FlowEngine, FlowOutcome, NullSink,
    StateSampler,
};
use lmcf_core::initial::{random_bandlimited, single_mode};
use lmcf_core::stats::log_log_slope;
use lmcf_core::verify::suite::{
    constant_decay_reports, heat_decay_reports, inequality_certification, monotonicity_reports,
    unit_hessian_mode, variation_reports_with, volume_reports,
};
use lmcf_core::verify::{
    check_angle_expansion, check_angle_gradient, check_angle_oracle, check_laplacian_routes,
    ResidualReport, SmallDataCase, VerifyError,
};

struct Verdict {
    pass: bool,
    detail: String,
}

type Outcome = Result<Verdict, VerifyError>;

fn from_reports(reports: &[ResidualReport], elapsed: Duration, limit: Option<Duration>) -> Verdict {
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.summary())
        .collect();
    let in_time = limit.map_or(true, |l| elapsed < l);
    let mut detail = format!(
        "{} reports, {} failed, {:.2?}",
        reports.len(),
        failed.len(),
        elapsed
    );
    if let Some(l) = limit {
        detail.push_str(&format!(" (limit {l:?})"));
    }
    if let Some(first) = failed.first() {
        detail.push_str(&format!("; first failure: {first}"));
    }
    Verdict {
        pass: failed.is_empty() && in_time,
        detail,
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn random_hessian_bounded(
    grid: &GridSpec,
    seed: u64,
    bound: f64,
) -> Result<PeriodicScalarField, VerifyError> {
    let u = random_bandlimited(grid, 3, seed);
    let diff = lmcf_core::field::Differentiator::new(grid, DiffScheme::Spectral);
    let s = lmcf_core::field::SupNorm::sup_norm(&diff.derivative(&u, 2)?);
    Ok(u.scaled(bound / s))
}

fn angle_oracle() -> Outcome {
    let (r, el) = timed(|| check_angle_oracle(&[1, 2], 1000, 0.5, 1e-10, 11));
    Ok(from_reports(&[r?], el, Some(Duration::from_secs(1))))
}

fn angle_gradient() -> Outcome {
    let (r, el) = timed(|| check_angle_gradient(100, 1.0, 1e-6, 1e-5, 12));
    Ok(from_reports(&[r?], el, None))
}

fn laplacian_routes() -> Outcome {
    let start = Instant::now();
    let mut reports = Vec::new();
    for seed in 0..4u64 {
        let dim = 1 + (seed % 2) as usize;
        let grid = GridSpec::unit(dim, 128)?;
        let u = random_hessian_bounded(&grid, 100 + seed, 0.3)?;
        let f = random_bandlimited(&grid, 3, 200 + seed);
        reports.push(check_laplacian_routes(&u, &f, DiffScheme::Spectral, 1e-8)?);
    }
    Ok(from_reports(&reports, start.elapsed(), None))
}

fn angle_expansion() -> Outcome {
    let (r, el) = timed(|| {
        let grid = GridSpec::unit(1, 128)?;
        let base = unit_hessian_mode(&grid);
        let mut r = check_angle_expansion(&[base], &[1e-1, 1e-2, 1e-3], DiffScheme::Spectral)?;
        if !(r.fitted_order >= 2.9) {
            r.fail(format!("slope {:.4} below 2.9", r.fitted_order));
        }
        Ok::<_, VerifyError>(r)
    });
    Ok(from_reports(&[r?], el, Some(Duration::from_secs(5))))
}

fn constant_ode() -> Outcome {
    let (r, el) = timed(|| constant_decay_reports(1e-4));
    Ok(from_reports(&r?, el, Some(Duration::from_secs(10))))
}

fn heat_decay() -> Outcome {
    let (r, el) = timed(heat_decay_reports);
    Ok(from_reports(&r?, el, Some(Duration::from_secs(30))))
}

fn cases() -> Vec<SmallDataCase> {
    SmallDataCase::standard(20)
}

/// Monotonicity reports of the 20 runs, shared by the ψ and Wang criteria.
fn monotonicity() -> &'static Result<(Vec<ResidualReport>, Duration), String> {
    static RUNS: OnceLock<Result<(Vec<ResidualReport>, Duration), String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let (r, el) = timed(|| {
            let mut out = Vec::new();
            for case in cases() {
                out.extend(monotonicity_reports(&case)?);
            }
            Ok::<_, VerifyError>(out)
        });
        r.map(|r| (r, el)).map_err(|e| e.to_string())
    })
}

fn monotonicity_subset(prefix: &str, limit: Option<Duration>) -> Outcome {
    let (reports, el) = monotonicity()
        .as_ref()
        .map_err(|e| VerifyError::Precondition(e.clone()))?;
    let subset: Vec<ResidualReport> = reports
        .iter()
        .filter(|r| r.name.starts_with(prefix))
        .cloned()
        .collect();
    let mut v = from_reports(&subset, *el, limit);
    v.pass &= subset.len() == 20;
    Ok(v)
}

fn psi_monotone() -> Outcome {
    monotonicity_subset("psi_monotone/", Some(Duration::from_secs(180)))
}

fn inequality_certificates() -> Outcome {
    let (r, el) = timed(|| {
        let mut out = Vec::new();
        for case in cases() {
            out.extend(inequality_certification(&case)?);
        }
        Ok::<_, VerifyError>(out)
    });
    Ok(from_reports(&r?, el, None))
}

fn wang_quantity() -> Outcome {
    monotonicity_subset("wang/", None)
}

fn volume_lyapunov() -> Outcome {
    let (r, el) = timed(|| volume_reports(&cases()));
    Ok(from_reports(&r?, el, None))
}

fn second_variation() -> Outcome {
    let (r, el) = timed(|| variation_reports_with(20));
    let r = r?;
    let mut v = from_reports(&r, el, None);
    let target = 8.0 * PI.powi(4);
    v.detail = format!(
        "extrapolated {:.6} vs {target:.6}; {}",
        r[0].fitted_constant, v.detail
    );
    Ok(v)
}

fn rk4_error(dt_divisor: usize) -> Result<Vec<f64>, VerifyError> {
    let mut cfg = FlowConfig::new(GridSpec::unit(1, 8)?);
    cfg.cfl = 0.4;
    cfg.kappa = -1.0;
    let engine = FlowEngine::new(cfg)?;
    let dt = engine.config().dt() / dt_divisor as f64;
    let steps = (0.1 / engine.config().dt()).round() as usize * dt_divisor;
    let mut state = engine.initial_state(single_mode(&engine.config().grid, 1, 0.02))?;
    for _ in 0..steps {
        state = engine.step_with_dt(&state, dt)?;
    }
    Ok(state.u().values().to_vec())
}

fn determinism() -> Outcome {
    let mut problems = Vec::new();

    // Checkpoint round trip and bitwise resume.
    let mut cfg = FlowConfig::new(GridSpec::unit(1, 64)?);
    cfg.kappa = -1.0;
    cfg.t_max = 0.05;
    cfg.checkpoint_every = 50;
    let engine = FlowEngine::new(cfg)?;
    let u0 = random_bandlimited(&engine.config().grid, 3, 5).scaled(1e-3);
    let mut sampler = StateSampler::default();
    let full = engine.integrate(u0, &mut sampler)?;
    let mid = &sampler.states[sampler.states.len() / 2];
    let bytes = encode_checkpoint(mid.u(), mid.t(), engine.config().kappa);
    let cp = decode_checkpoint(&bytes).map_err(|e| VerifyError::Precondition(e.to_string()))?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    if bits(cp.u.values()) != bits(mid.u().values()) || cp.t.to_bits() != mid.t().to_bits() {
        problems.push("checkpoint round trip changed bits".to_string());
    }
    let resumed = engine.integrate_from(engine.state_at(cp.u, cp.t)?, &mut NullSink);
    match (&full, &resumed) {
        (FlowOutcome::TimedOut(a), FlowOutcome::TimedOut(b))
            if bits(a.u().values()) == bits(b.u().values()) => {}
        _ => problems.push("resumed run differs from the uninterrupted one".into()),
    }

    // Repeated CLI runs are bit-identical.
    let dir = tempfile::tempdir().map_err(|e| VerifyError::Precondition(e.to_string()))?;
    let config = dir.path().join("small.cfg");
    std::fs::write(
        &config,
        "dim = 1\nsizes = 64\nt_max = 0.05\ncheckpoint_every = 50\n\
         u0_preset = random_bandlimited\nu0_amplitude = 0.05\nu0_seed = 4\n",
    )
    .map_err(|e| VerifyError::Precondition(e.to_string()))?;
    let mut artifacts = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_lmcf"))
            .arg("run")
            .arg(&config)
            .arg("-o")
            .arg(&out)
            .output()
            .expect("lmcf runs")
            .status;
        let read = |f: &str| std::fs::read(out.join(f)).unwrap_or_default();
        artifacts.push((status.code(), read("monitors.csv"), read("checkpoint.lmcf")));
    }
    if artifacts[0] != artifacts[1] || artifacts[0].1.is_empty() {
        problems.push("repeated runs differ".into());
    }

    // RK4 order.
    let reference = rk4_error(16)?;
    let errors: Vec<f64> = [1, 2, 4]
        .into_iter()
        .map(|d| {
            rk4_error(d).map(|u| {
                u.iter()
                    .zip(&reference)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
        })
        .collect::<Result<_, _>>()?;
    let slope = log_log_slope(&[1.0, 0.5, 0.25], &errors);
    if !((slope - 4.0).abs() <= 0.3) {
        problems.push(format!("RK4 order {slope:.3}"));
    }

    // Full verification through the CLI.
    let (status, el) = timed(|| {
        Command::new(env!("CARGO_BIN_EXE_lmcf"))
            .args(["verify", "all", "-o"])
            .arg(dir.path().join("verify"))
            .output()
            .expect("lmcf runs")
            .status
    });
    if status.code() != Some(0) {
        problems.push(format!("verify all exited {:?}", status.code()));
    }
    if el >= Duration::from_secs(300) {
        problems.push(format!("verify all took {el:.1?}"));
    }

    let detail = format!(
        "RK4 order {slope:.3}, verify all {:?} in {el:.2?}",
        status.code()
    );
    Ok(Verdict {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            detail
        } else {
            format!("{detail}; {}", problems.join("; "))
        },
    })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("angle oracle equivalence", angle_oracle),
        ("angle gradient identity", angle_gradient),
        ("Laplace-Beltrami two-route agreement", laplacian_routes),
        ("angle expansion order", angle_expansion),
        ("exact ODE regime", constant_ode),
        ("linearized decay", heat_decay),
        ("psi monotonicity", psi_monotone),
        (
            "evolution-inequality certification",
            inequality_certificates,
        ),
        ("Wang-trick quantity", wang_quantity),
        ("volume Lyapunov", volume_lyapunov),
        ("second variation", second_variation),
        ("engineering determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = check().unwrap_or_else(|e| Verdict {
            pass: false,
            detail: format!("error: {e}"),
        });
        if !verdict.pass {
            failures += 1;
        }
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {}", i + 1, verdict.detail);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}

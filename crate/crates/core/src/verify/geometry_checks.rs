use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ResidualReport, VerifyError};
use crate::field::{DiffScheme, Differentiator, PeriodicScalarField, SupNorm};
use crate::geometry::pointwise::packed_slot;
use crate::geometry::{
    induced_metric, lagrangian_angle, laplace_beltrami, trace_hessian, LaplacianRoute, SymMatrix,
};
use crate::stats::log_log_slope;

/// Symmetric matrix with uniform random entries, rescaled to a Frobenius
/// norm drawn uniformly from `[0, max_frob]`.
pub fn random_symmetric(rng: &mut impl Rng, dim: usize, max_frob: f64) -> SymMatrix {
    let packed: Vec<f64> = (0..dim * (dim + 1) / 2)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let q = SymMatrix::from_packed(dim, &packed);
    let norm = q.frobenius_sq().sqrt();
    if norm == 0.0 {
        return q;
    }
    q.scaled(max_frob * rng.gen_range(0.0..=1.0) / norm)
}

/// `Σ arctan λ_i(Q)` against `arg det(I + iQ)` on `count` random matrices
/// per dimension. One sample per dimension holding the worst discrepancy.
pub fn check_angle_oracle(
    dims: &[usize],
    count: usize,
    max_frob: f64,
    tol: f64,
    seed: u64,
) -> Result<ResidualReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ResidualReport::new("angle_oracle");
    let mut worst = 0.0f64;
    for &dim in dims {
        let mut max_err = 0.0f64;
        for _ in 0..count {
            let q = random_symmetric(&mut rng, dim, max_frob);
            let oracle = q.angle_oracle().map_err(VerifyError::Branch)?;
            max_err = max_err.max((q.lagrangian_angle() - oracle).abs());
        }
        report.push(dim as f64, max_err, tol);
        worst = worst.max(max_err);
    }
    report.fitted_constant = worst;
    if worst > tol {
        report.fail(format!("discrepancy {worst:e} above {tol:e}"));
    }
    Ok(report)
}

/// Central finite differences of `θ(Q)` against `∂θ/∂Q_ij = μ^{ij}` at
/// `count` random points, dimensions cycling through 1..=3. Errors are
/// relative to the largest diagonal entry of `μ⁻¹`.
pub fn check_angle_gradient(
    count: usize,
    max_frob: f64,
    step: f64,
    tol: f64,
    seed: u64,
) -> Result<ResidualReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ResidualReport::new("angle_gradient");
    let mut worst = 0.0f64;
    for k in 0..count {
        let dim = 1 + k % 3;
        let q = random_symmetric(&mut rng, dim, max_frob);
        let (_, inv, _) = q.induced_metric();
        let scale = (0..dim).map(|i| inv.get(i, i).abs()).fold(0.0, f64::max);
        let base = q.packed();
        let mut err = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let slot = packed_slot(dim, i, j);
                let bump = |s: f64| {
                    let mut p = base.clone();
                    p[slot] += s;
                    SymMatrix::from_packed(dim, &p).lagrangian_angle()
                };
                // A packed off-diagonal entry moves both Q_ij and Q_ji.
                let sym = if i == j { 1.0 } else { 2.0 };
                let fd = (bump(step) - bump(-step)) / (2.0 * step) / sym;
                err = err.max((fd - inv.get(i, j)).abs() / scale);
            }
        }
        report.push(k as f64, err, tol);
        worst = worst.max(err);
    }
    report.fitted_constant = worst;
    if worst > tol {
        report.fail(format!("relative error {worst:e} above {tol:e}"));
    }
    Ok(report)
}

/// Divergence-form against Christoffel-form `Δ_μ f` on the graph of `du`,
/// relative to `sup|Δ_μ f|`.
pub fn check_laplacian_routes(
    u: &PeriodicScalarField,
    f: &PeriodicScalarField,
    scheme: DiffScheme,
    tol: f64,
) -> Result<ResidualReport, VerifyError> {
    let diff = Differentiator::new(u.spec(), scheme);
    let metric = induced_metric(&diff.derivative(u, 2)?)?;
    let a = laplace_beltrami(&diff, f, &metric, LaplacianRoute::Divergence)?;
    let b = laplace_beltrami(&diff, f, &metric, LaplacianRoute::Christoffel)?;
    let gap = a.zip_map(&b, |x, y| x - y)?.sup_norm();
    let rel = gap / a.sup_norm().max(f64::MIN_POSITIVE);
    let mut report = ResidualReport::new("laplacian_routes");
    report.push(u.spec().sizes()[0] as f64, rel, tol);
    report.fitted_constant = rel;
    if !(rel <= tol) {
        report.fail(format!("relative route gap {rel:e} above {tol:e}"));
    }
    Ok(report)
}

fn require_small(
    diff: &Differentiator,
    u: &PeriodicScalarField,
    what: &str,
) -> Result<(), VerifyError> {
    let jets = diff.jets(u, 2)?;
    let (d1, d2) = (jets[0].sup_norm(), jets[1].sup_norm());
    // A unit-normalized base may exceed 1 by rounding.
    if d1 > 1.0 + 1e-12 || d2 > 1.0 + 1e-12 {
        return Err(VerifyError::Precondition(format!(
            "{what} has sup|du| = {d1:.4}, sup|D²u| = {d2:.4}; both must be <= 1"
        )));
    }
    Ok(())
}

/// Log–log slope of `residuals` against `amplitudes`, or NaN when every
/// residual sits at the rounding floor (nothing left to fit).
fn order_of(amplitudes: &[f64], residuals: &[f64], floor: f64) -> f64 {
    if residuals.iter().all(|&r| r <= floor) {
        return f64::NAN;
    }
    log_log_slope(
        amplitudes,
        &residuals
            .iter()
            .map(|r| r.max(f64::MIN_POSITIVE))
            .collect::<Vec<_>>(),
    )
}

/// `R(ε) = sup|θ(D²(εu*)) − Δ(εu*)|` against `B(ε) = sup(|d(εu*)|² + |D²(εu*)|²)`
/// for each base field `u*`. Passes when the residual scales at least
/// quadratically (slope ≥ 1.9) for every base. The fitted constant is the
/// smallest `c` with `R ≤ c·B` over all samples; the fitted order is the
/// smallest slope over the bases.
pub fn check_angle_expansion(
    bases: &[PeriodicScalarField],
    amplitudes: &[f64],
    scheme: DiffScheme,
) -> Result<ResidualReport, VerifyError> {
    if amplitudes.len() < 3 {
        return Err(VerifyError::TooFewAmplitudes {
            needed: 3,
            got: amplitudes.len(),
        });
    }
    let mut report = ResidualReport::new("angle_expansion");
    let mut c = 0.0f64;
    let mut order = f64::INFINITY;
    for base in bases {
        let diff = Differentiator::new(base.spec(), scheme);
        require_small(&diff, base, "angle expansion base")?;
        let mut residuals = Vec::with_capacity(amplitudes.len());
        for &eps in amplitudes {
            let u = base.scaled(eps);
            let jets = diff.jets(&u, 2)?;
            let theta = lagrangian_angle(&jets[1])?.theta;
            let lap = jets[1].trace()?;
            let r = theta.zip_map(&lap, |a, b| a - b)?.sup_norm();
            let b = jets[0]
                .norm_sq()
                .zip_map(&jets[1].norm_sq(), |a, b| a + b)?
                .max();
            report.push(eps, r, b);
            if b > 0.0 {
                c = c.max(r / b);
            }
            residuals.push(r);
        }
        let slope = order_of(amplitudes, &residuals, 1e-300);
        if !slope.is_nan() {
            order = order.min(slope);
        }
    }
    report.fitted_constant = c;
    report.fitted_order = if order.is_finite() { order } else { f64::NAN };
    if report.fitted_order < 1.9 {
        report.fail(format!(
            "residual order {:.3} below 1.9",
            report.fitted_order
        ));
    }
    Ok(report)
}

/// `sup|Δ_μ f − tr_μ(Hess f)|` on the graph of `d(εu*)` against
/// `sup|df|·(sup|D³u| + sup|D²u| + sup|du|)`. The difference is the
/// Christoffel term, so it must vanish at least linearly in `ε`
/// (slope ≥ 0.9). Residuals below `1e-11·sup|D²f|` count as exact zeros.
pub fn check_laplacian_difference(
    base: &PeriodicScalarField,
    f: &PeriodicScalarField,
    amplitudes: &[f64],
    scheme: DiffScheme,
) -> Result<ResidualReport, VerifyError> {
    if amplitudes.len() < 3 {
        return Err(VerifyError::TooFewAmplitudes {
            needed: 3,
            got: amplitudes.len(),
        });
    }
    let diff = Differentiator::new(base.spec(), scheme);
    require_small(&diff, base, "laplacian difference base")?;
    let df = diff.jets(f, 2)?;
    let sup_df = df[0].sup_norm();
    let floor = 1e-11 * df[1].sup_norm().max(1.0);
    let mut report = ResidualReport::new("laplacian_difference");
    let mut c = 0.0f64;
    let mut residuals = Vec::with_capacity(amplitudes.len());
    for &eps in amplitudes {
        let u = base.scaled(eps);
        let jets = diff.jets(&u, 3)?;
        let metric = induced_metric(&jets[1])?;
        let lb = laplace_beltrami(&diff, f, &metric, LaplacianRoute::Divergence)?;
        let tr = trace_hessian(&diff, f, &metric)?;
        let r = lb.zip_map(&tr, |a, b| a - b)?.sup_norm();
        let b = sup_df * (jets[2].sup_norm() + jets[1].sup_norm() + jets[0].sup_norm());
        report.push(eps, r, b);
        if r > floor {
            if b == 0.0 {
                report.fail(format!("residual {r:e} with zero bound at eps = {eps:e}"));
            } else {
                c = c.max(r / b);
            }
        }
        residuals.push(r);
    }
    report.fitted_constant = c;
    report.fitted_order = order_of(amplitudes, &residuals, floor);
    if report.fitted_order < 0.9 {
        report.fail(format!(
            "residual order {:.3} below 0.9",
            report.fitted_order
        ));
    }
    Ok(report)
}

use std::fmt;
use std::str::FromStr;

use super::{ResidualReport, VerifyError};
use crate::field::{
    l2_pairing, DiffScheme, Differentiator, PeriodicScalarField, SupNorm, SymTensorField,
};
use crate::flow::MonitorRecord;
use crate::geometry::{induced_metric, volume_excess};
use crate::stats::{least_squares_slope, log_log_slope};

/// Monitor column whose exponential decay rate is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayField {
    PsiMax,
    SupU,
    SupDu,
    SupD2u,
}

impl DecayField {
    pub fn name(self) -> &'static str {
        match self {
            DecayField::PsiMax => "psi_max",
            DecayField::SupU => "sup_u",
            DecayField::SupDu => "sup_du",
            DecayField::SupD2u => "sup_d2u",
        }
    }

    pub fn of(self, r: &MonitorRecord) -> f64 {
        match self {
            DecayField::PsiMax => r.psi_max,
            DecayField::SupU => r.max_u,
            DecayField::SupDu => r.max_du,
            DecayField::SupD2u => r.max_d2u,
        }
    }
}

impl fmt::Display for DecayField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecayField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            DecayField::PsiMax,
            DecayField::SupU,
            DecayField::SupDu,
            DecayField::SupD2u,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| format!("unknown decay field '{s}'"))
    }
}

/// Least-squares slope of `log(field)` against `t` over the records with
/// `t` in `[t1, t2]`.
pub fn fit_decay_rate(
    series: &[MonitorRecord],
    field: DecayField,
    window: (f64, f64),
) -> Result<f64, VerifyError> {
    let (t1, t2) = window;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for r in series.iter().filter(|r| r.t >= t1 && r.t <= t2) {
        let v = field.of(r);
        if !(v > 0.0) {
            return Err(VerifyError::NonPositive { t: r.t, value: v });
        }
        ts.push(r.t);
        logs.push(v.ln());
    }
    if ts.len() < 2 {
        return Err(VerifyError::EmptyWindow(t1, t2));
    }
    Ok(least_squares_slope(&ts, &logs))
}

/// Report comparing a fitted rate with its expected value.
pub fn check_decay_rate(name: &str, rate: f64, expected: f64, tol: f64) -> ResidualReport {
    let mut report = ResidualReport::new(name);
    let err = (rate - expected).abs();
    report.push(expected, err, tol);
    report.fitted_constant = rate;
    if !(err <= tol) {
        report.fail(format!(
            "rate {rate:.8e} differs from {expected:.8e} by {err:e}"
        ));
    }
    report
}

/// Second variation of the volume along the Hamiltonian direction `h`:
/// the central second difference `(Vol(εh) − 2Vol(0) + Vol(−εh))/ε²` of the
/// graph of `ε·dh`, Richardson-extrapolated from the last two `epsilons`,
/// compared with `∫(Δh)² dx`.
///
/// Samples hold `|D_ε − ∫(Δh)²|` per `ε`; the fitted order is their
/// log–log slope (2 for a smooth `h`). Passes when the extrapolated value is
/// within `rel_tol` of the integral and every difference is non-negative.
pub fn check_second_variation(
    h: &PeriodicScalarField,
    epsilons: &[f64],
    scheme: DiffScheme,
    rel_tol: f64,
) -> Result<ResidualReport, VerifyError> {
    if epsilons.len() < 2 {
        return Err(VerifyError::TooFewAmplitudes {
            needed: 2,
            got: epsilons.len(),
        });
    }
    let diff = Differentiator::new(h.spec(), scheme);
    let lap = diff.laplacian(h)?;
    let target = l2_pairing(&lap, &lap, None)?;
    let hess = diff.derivative(h, 2)?;
    let curvature = hess.sup_norm();
    if !(curvature > 1e-10 * h.sup_norm()) || curvature == 0.0 {
        return Err(VerifyError::Degenerate("h is constant".into()));
    }
    let mut report = ResidualReport::new("second_variation");
    let mut values = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        // Vol is even in ε, so the central second difference is 2(Vol(ε) − Vol(0))/ε².
        let q = SymTensorField::new(
            h.spec().clone(),
            2,
            hess.components()
                .iter()
                .map(|c| c.iter().map(|v| eps * v).collect())
                .collect(),
        )?;
        let d = 2.0 * volume_excess(&induced_metric(&q)?) / (eps * eps);
        if d < 0.0 {
            report.fail(format!("negative second difference {d:e} at eps = {eps:e}"));
        }
        report.push(eps, (d - target).abs(), target);
        values.push(d);
    }
    // The error expands in even powers of ε; one Richardson step on the last
    // two steps cancels the ε² term.
    let n = values.len();
    let r2 = (epsilons[n - 2] / epsilons[n - 1]).powi(2);
    let extrapolated = (r2 * values[n - 1] - values[n - 2]) / (r2 - 1.0);
    report.fitted_constant = extrapolated;
    let errs: Vec<f64> = report
        .samples
        .iter()
        .map(|s| s.residual.max(f64::MIN_POSITIVE))
        .collect();
    report.fitted_order = log_log_slope(epsilons, &errs);
    let rel = (extrapolated - target).abs() / target;
    if !(rel <= rel_tol) {
        report.fail(format!(
            "extrapolated {extrapolated:.10e} vs integral {target:.10e} (relative {rel:e})"
        ));
    }
    if extrapolated < 0.0 {
        report.fail("negative second variation");
    }
    Ok(report)
}

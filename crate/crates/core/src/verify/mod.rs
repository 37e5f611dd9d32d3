//! Numerical certification of the estimates behind the stability theory.
//!
//! Every check produces a [`ResidualReport`]. Constants that the analysis
//! only proves to exist are reported as fitted values; what a report asserts
//! is sign structure, scaling order and monotonicity.

mod decay;
mod geometry_checks;
pub mod suite;
mod trajectory;

pub use decay::{check_decay_rate, check_second_variation, fit_decay_rate, DecayField};
pub use geometry_checks::{
    check_angle_expansion, check_angle_gradient, check_angle_oracle, check_laplacian_difference,
    check_laplacian_routes, random_symmetric,
};
pub use suite::{run_suite, SmallDataCase, Suite};
pub use trajectory::{
    check_evolution_inequality, check_evolution_inequality_on, check_psi_monotone,
    check_resolution_stability, check_volume_lyapunov, check_wang_trick, wang_quantity, Inequality,
    Trajectory, Triple,
};

use std::fmt::Write as _;

use thiserror::Error;

use crate::field::{DiffScheme, Differentiator, FieldError, PeriodicScalarField};
use crate::flow::{psi_from_jets, FlowConfig, FlowError};
use crate::geometry::{BranchInvalid, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("need at least {needed} amplitudes, got {got}")]
    TooFewAmplitudes { needed: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("trajectory left the small-data region at t = {t:e} (max psi = {psi_max:e})")]
    OutsideSmallData { t: f64, psi_max: f64 },
    #[error("degenerate direction: {0}")]
    Degenerate(String),
    #[error("series has non-positive value {value:e} at t = {t:e}")]
    NonPositive { t: f64, value: f64 },
    #[error("fewer than two samples in window [{0:e}, {1:e}]")]
    EmptyWindow(f64, f64),
    #[error("angle oracle branch invalid: {0:?}")]
    Branch(BranchInvalid),
}

/// One sampled `(parameter, residual, bound)` triple. The parameter is an
/// amplitude, a time, or an index, depending on the check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub residual: f64,
    pub bound: f64,
}

impl Sample {
    pub fn ratio(&self) -> f64 {
        if self.bound != 0.0 {
            self.residual / self.bound
        } else if self.residual <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub name: String,
    pub samples: Vec<Sample>,
    pub fitted_constant: f64,
    /// Log–log slope where a scaling order is part of the check, NaN
    /// otherwise.
    pub fitted_order: f64,
    pub pass: bool,
    /// Human-readable reason for a failure, empty on success.
    pub message: String,
}

impl ResidualReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            samples: Vec::new(),
            fitted_constant: f64::NAN,
            fitted_order: f64::NAN,
            pass: true,
            message: String::new(),
        }
    }

    pub fn push(&mut self, x: f64, residual: f64, bound: f64) {
        self.samples.push(Sample { x, residual, bound });
    }

    /// Marks the report failed, keeping the first reason.
    pub fn fail(&mut self, reason: impl Into<String>) {
        if self.pass {
            self.message = reason.into();
        }
        self.pass = false;
    }

    pub fn max_ratio(&self) -> f64 {
        self.samples
            .iter()
            .map(Sample::ratio)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `name,x,residual,bound,ratio` per sample, then
    /// `name,fitted_c,fitted_order,pass`.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for p in &self.samples {
            writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                self.name,
                p.x,
                p.residual,
                p.bound,
                p.ratio()
            )
            .unwrap();
        }
        writeln!(
            s,
            "{},{:e},{:e},{}",
            self.name, self.fitted_constant, self.fitted_order, self.pass
        )
        .unwrap();
        s
    }

    /// One-line status for terminals.
    pub fn summary(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{status} {} (c = {:.4e}, order = {:.4}, samples = {})",
            self.name,
            self.fitted_constant,
            self.fitted_order,
            self.samples.len()
        );
        if !self.message.is_empty() {
            write!(s, ": {}", self.message).unwrap();
        }
        s
    }
}

/// `ψ = C₀u² + C₁|du|² + |D²u|²` with the constants and scheme of `cfg`.
pub fn psi(u: &PeriodicScalarField, cfg: &FlowConfig) -> Result<PeriodicScalarField, VerifyError> {
    psi_with(u, cfg.c0, cfg.c1, cfg.scheme)
}

pub fn psi_with(
    u: &PeriodicScalarField,
    c0: f64,
    c1: f64,
    scheme: DiffScheme,
) -> Result<PeriodicScalarField, VerifyError> {
    let diff = Differentiator::new(u.spec(), scheme);
    let jets = diff.jets(u, 2)?;
    Ok(psi_from_jets(u, &jets[0], &jets[1], c0, c1))
}

#[cfg(test)]
mod tests;

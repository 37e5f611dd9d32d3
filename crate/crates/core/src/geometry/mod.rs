//! Geometry of the Lagrangian graph of `du` over a flat torus.
//!
//! For a potential `u` with Hessian `Q = D²u` the graph of `du` in
//! `T*Tⁿ = Tⁿ × ℝⁿ` has induced metric `μ = I + Q²`, Lagrangian angle
//! `θ = Σ arctan λ_i(Q)` and mean curvature one-form `α = -d(θ + κu)`.

pub mod pointwise;

pub use pointwise::{BranchInvalid, SymMatrix};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::field::{
    l2_pairing, Differentiator, FieldError, PeriodicScalarField, SymMatrixField, SymTensorField,
    VectorField,
};
use pointwise::packed_slot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn require_rank(t: &SymTensorField, rank: usize) -> Result<(), FieldError> {
    if t.rank() == rank {
        Ok(())
    } else {
        Err(FieldError::RankMismatch {
            expected: rank,
            got: t.rank(),
        })
    }
}

/// Induced metric of the graph, its inverse, and the volume density.
#[derive(Debug, Clone)]
pub struct InducedMetricField {
    mu: SymMatrixField,
    mu_inv: SymMatrixField,
    sqrt_det: PeriodicScalarField,
    sqrt_det_excess: PeriodicScalarField,
}

impl InducedMetricField {
    pub fn mu(&self) -> &SymMatrixField {
        &self.mu
    }

    pub fn mu_inv(&self) -> &SymMatrixField {
        &self.mu_inv
    }

    /// `√det μ`.
    pub fn sqrt_det(&self) -> &PeriodicScalarField {
        &self.sqrt_det
    }

    /// `√det μ - 1`, accurate even when the graph is nearly flat.
    pub fn sqrt_det_excess(&self) -> &PeriodicScalarField {
        &self.sqrt_det_excess
    }

    pub fn dim(&self) -> usize {
        self.mu.spec().dim()
    }

    pub fn mu_at(&self, point: usize) -> SymMatrix {
        SymMatrix::from_packed(self.dim(), &self.mu.at(point))
    }

    pub fn mu_inv_at(&self, point: usize) -> SymMatrix {
        SymMatrix::from_packed(self.dim(), &self.mu_inv.at(point))
    }
}

/// `μ = I + Q²` pointwise.
pub fn induced_metric(q: &SymMatrixField) -> Result<InducedMetricField, GeometryError> {
    require_rank(q, 2)?;
    let spec = q.spec().clone();
    let dim = spec.dim();
    let ncomp = q.components().len();
    let mut mu = vec![Vec::with_capacity(spec.len()); ncomp];
    let mut mu_inv = vec![Vec::with_capacity(spec.len()); ncomp];
    let mut sqrt_det = Vec::with_capacity(spec.len());
    let mut excess = Vec::with_capacity(spec.len());
    for p in 0..spec.len() {
        let qp = SymMatrix::from_packed(dim, &q.at(p));
        if !qp.is_finite() {
            return Err(FieldError::NonFinite(p).into());
        }
        let (m, inv, det_minus_one) = qp.induced_metric();
        for (slot, v) in m.packed().into_iter().enumerate() {
            mu[slot].push(v);
        }
        for (slot, v) in inv.packed().into_iter().enumerate() {
            mu_inv[slot].push(v);
        }
        let s = (1.0 + det_minus_one).sqrt();
        sqrt_det.push(s);
        excess.push(det_minus_one / (s + 1.0));
    }
    Ok(InducedMetricField {
        mu: SymTensorField::from_raw(spec.clone(), 2, mu),
        mu_inv: SymTensorField::from_raw(spec.clone(), 2, mu_inv),
        sqrt_det: PeriodicScalarField::from_raw(spec.clone(), sqrt_det),
        sqrt_det_excess: PeriodicScalarField::from_raw(spec, excess),
    })
}

/// Lagrangian angle of the graph of `du` as a field.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleField {
    pub theta: PeriodicScalarField,
}

/// `θ = Σ arctan λ_i(Q)` pointwise.
pub fn lagrangian_angle(q: &SymMatrixField) -> Result<AngleField, GeometryError> {
    require_rank(q, 2)?;
    let dim = q.spec().dim();
    let theta = (0..q.spec().len())
        .map(|p| SymMatrix::from_packed(dim, &q.at(p)).lagrangian_angle())
        .collect();
    Ok(AngleField {
        theta: PeriodicScalarField::from_raw(q.spec().clone(), theta),
    })
}

/// Pointwise independent route to `θ`; see [`SymMatrix::angle_oracle`].
pub fn angle_oracle(q: &SymMatrix) -> Result<f64, BranchInvalid> {
    q.angle_oracle()
}

/// `α = -d(θ(D²u) + κu)`, the mean curvature one-form pulled back to the
/// torus.
pub fn mean_curvature_one_form(
    diff: &Differentiator,
    u: &PeriodicScalarField,
    kappa: f64,
) -> Result<VectorField, GeometryError> {
    let q = diff.derivative(u, 2)?;
    let theta = lagrangian_angle(&q)?.theta;
    let potential = theta.zip_map(u, |t, v| -(t + kappa * v))?;
    Ok(diff.gradient(&potential)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianRoute {
    /// `(1/√det μ) ∂_i(√det μ μ^{ij} ∂_j f)`.
    #[default]
    Divergence,
    /// `μ^{ij}(∂_i∂_j f - Γ^k_ij ∂_k f)` with the Christoffel symbols of `μ`.
    Christoffel,
}

impl fmt::Display for LaplacianRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaplacianRoute::Divergence => "divergence",
            LaplacianRoute::Christoffel => "christoffel",
        })
    }
}

impl FromStr for LaplacianRoute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "divergence" => Ok(Self::Divergence),
            "christoffel" => Ok(Self::Christoffel),
            other => Err(format!("unknown route '{other}'")),
        }
    }
}

/// Laplace–Beltrami operator `Δ_μ f` of the induced metric.
pub fn laplace_beltrami(
    diff: &Differentiator,
    f: &PeriodicScalarField,
    metric: &InducedMetricField,
    route: LaplacianRoute,
) -> Result<PeriodicScalarField, GeometryError> {
    if f.spec() != metric.mu.spec() || diff.spec() != f.spec() {
        return Err(FieldError::SpecMismatch.into());
    }
    let spec = f.spec();
    let dim = spec.dim();
    let grad = diff.gradient(f)?;
    let g = grad.components();
    let inv = metric.mu_inv.components();
    let sqrt_det = metric.sqrt_det.values();
    let values = match route {
        LaplacianRoute::Divergence => {
            let flux: Vec<Vec<f64>> = (0..dim)
                .map(|i| {
                    (0..spec.len())
                        .map(|p| {
                            let s: f64 = (0..dim)
                                .map(|j| inv[packed_slot(dim, i, j)][p] * g[j][p])
                                .sum();
                            sqrt_det[p] * s
                        })
                        .collect()
                })
                .collect();
            diff.divergence_raw(&flux)
                .into_iter()
                .zip(sqrt_det)
                .map(|(d, s)| d / s)
                .collect()
        }
        LaplacianRoute::Christoffel => {
            let hess = diff.hessian_raw(f.values());
            // dmu[c][l] = ∂_l μ_c for packed component c.
            let dmu: Vec<Vec<Vec<f64>>> = metric
                .mu
                .components()
                .iter()
                .map(|c| {
                    let field = PeriodicScalarField::from_raw(spec.clone(), c.clone());
                    diff.gradient(&field).map(|d| d.components().to_vec())
                })
                .collect::<Result<_, _>>()?;
            let mut out = vec![0.0; spec.len()];
            for (p, o) in out.iter_mut().enumerate() {
                let mi = |i: usize, j: usize| inv[packed_slot(dim, i, j)][p];
                let dm = |i: usize, j: usize, l: usize| dmu[packed_slot(dim, i, j)][l][p];
                // v_l = Σ_ij μ^{ij} (∂_i μ_jl + ∂_j μ_il - ∂_l μ_ij) / 2
                let mut v = [0.0; 3];
                for (l, vl) in v.iter_mut().enumerate().take(dim) {
                    for i in 0..dim {
                        for j in 0..dim {
                            *vl += 0.5 * mi(i, j) * (dm(j, l, i) + dm(i, l, j) - dm(i, j, l));
                        }
                    }
                }
                let mut acc = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        acc += mi(i, j) * hess[packed_slot(dim, i, j)][p];
                    }
                }
                for k in 0..dim {
                    for l in 0..dim {
                        acc -= mi(k, l) * v[l] * g[k][p];
                    }
                }
                *o = acc;
            }
            out
        }
    };
    Ok(PeriodicScalarField::from_raw(spec.clone(), values))
}

/// `tr_μ(Hess f) = μ^{ij} ∂_i∂_j f`.
pub fn trace_hessian(
    diff: &Differentiator,
    f: &PeriodicScalarField,
    metric: &InducedMetricField,
) -> Result<PeriodicScalarField, GeometryError> {
    if f.spec() != metric.mu.spec() {
        return Err(FieldError::SpecMismatch.into());
    }
    let dim = f.spec().dim();
    let hess = diff.derivative(f, 2)?;
    let h = hess.components();
    let inv = metric.mu_inv.components();
    let values = (0..f.spec().len())
        .map(|p| {
            let mut acc = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    let s = packed_slot(dim, i, j);
                    acc += inv[s][p] * h[s][p];
                }
            }
            acc
        })
        .collect();
    Ok(PeriodicScalarField::from_raw(f.spec().clone(), values))
}

/// `⟨a, b⟩_μ = μ^{ij} a_i b_j` pointwise for two covector fields.
pub fn metric_pairing(
    a: &VectorField,
    b: &VectorField,
    metric: &InducedMetricField,
) -> Result<PeriodicScalarField, GeometryError> {
    require_rank(a, 1)?;
    require_rank(b, 1)?;
    if a.spec() != b.spec() || a.spec() != metric.mu.spec() {
        return Err(FieldError::SpecMismatch.into());
    }
    let dim = a.spec().dim();
    let inv = metric.mu_inv.components();
    let (ac, bc) = (a.components(), b.components());
    let values = (0..a.spec().len())
        .map(|p| {
            let mut acc = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    acc += inv[packed_slot(dim, i, j)][p] * ac[i][p] * bc[j][p];
                }
            }
            acc
        })
        .collect();
    Ok(PeriodicScalarField::from_raw(a.spec().clone(), values))
}

/// Riemannian volume `∫ √det μ dx` of the graph.
pub fn volume(metric: &InducedMetricField) -> f64 {
    metric.sqrt_det.spec().total_volume() + volume_excess(metric)
}

/// `Vol - vol(Tⁿ) = ∫ (√det μ - 1) dx`, free of the cancellation in `Vol - 1`.
pub fn volume_excess(metric: &InducedMetricField) -> f64 {
    let spec = metric.sqrt_det.spec();
    let one = PeriodicScalarField::constant(spec, 1.0).expect("finite");
    l2_pairing(&metric.sqrt_det_excess, &one, None).expect("same spec")
}

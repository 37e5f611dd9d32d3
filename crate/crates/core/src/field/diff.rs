use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{
    axis_counts, sym_indices, FieldError, GridSpec, PeriodicScalarField, SymTensorField, MAX_DIM,
    MAX_ORDER,
};

/// How partial derivatives are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    /// Multiplication by `(ik)^m` in Fourier space.
    #[default]
    Spectral,
    /// Fourth-order centered stencils with periodic wrap.
    Central4,
}

impl fmt::Display for DiffScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffScheme::Spectral => "spectral",
            DiffScheme::Central4 => "central4",
        })
    }
}

impl FromStr for DiffScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spectral" => Ok(DiffScheme::Spectral),
            "central4" => Ok(DiffScheme::Central4),
            other => Err(format!(
                "unknown scheme '{other}' (expected spectral or central4)"
            )),
        }
    }
}

struct FftPlans {
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// `symbols[axis][m][j]` is the Fourier multiplier of `∂^m` on mode `j`.
    symbols: Vec<Vec<Vec<Complex64>>>,
}

/// Partial-derivative engine bound to one grid and one scheme. FFT plans
/// are built once and reused, so keep one of these around in hot loops.
pub struct Differentiator {
    spec: GridSpec,
    scheme: DiffScheme,
    plans: Option<FftPlans>,
}

impl fmt::Debug for Differentiator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Differentiator")
            .field("spec", &self.spec)
            .field("scheme", &self.scheme)
            .finish()
    }
}

/// Multiplier of the `m`-th derivative on the DFT mode `j` of an axis with
/// `n` points and period `period`. The Nyquist mode is dropped for odd `m`.
fn spectral_symbol(j: usize, n: usize, period: f64, m: usize) -> Complex64 {
    if m == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if j == n / 2 && m % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let signed = if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    };
    let k = 2.0 * PI * signed / period;
    let km = k.powi(m as i32);
    match m % 4 {
        0 => Complex64::new(km, 0.0),
        1 => Complex64::new(0.0, km),
        2 => Complex64::new(-km, 0.0),
        _ => Complex64::new(0.0, -km),
    }
}

impl Differentiator {
    pub fn new(spec: &GridSpec, scheme: DiffScheme) -> Self {
        let plans = match scheme {
            DiffScheme::Spectral => {
                let mut planner = FftPlanner::new();
                let mut forward = Vec::new();
                let mut inverse = Vec::new();
                let mut symbols = Vec::new();
                for a in 0..spec.dim() {
                    let n = spec.sizes()[a];
                    forward.push(planner.plan_fft_forward(n));
                    inverse.push(planner.plan_fft_inverse(n));
                    symbols.push(
                        (0..=MAX_ORDER)
                            .map(|m| {
                                (0..n)
                                    .map(|j| spectral_symbol(j, n, spec.periods()[a], m))
                                    .collect()
                            })
                            .collect(),
                    );
                }
                Some(FftPlans {
                    forward,
                    inverse,
                    symbols,
                })
            }
            DiffScheme::Central4 => None,
        };
        Self {
            spec: spec.clone(),
            scheme,
            plans,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn scheme(&self) -> DiffScheme {
        self.scheme
    }

    fn check(&self, f: &PeriodicScalarField) -> Result<(), FieldError> {
        if f.spec() == &self.spec {
            Ok(())
        } else {
            Err(FieldError::SpecMismatch)
        }
    }

    /// `∂^{counts} f`, where `counts[a]` is the number of derivatives along
    /// axis `a`.
    pub fn partial(
        &self,
        f: &PeriodicScalarField,
        counts: &[usize],
    ) -> Result<PeriodicScalarField, FieldError> {
        self.check(f)?;
        if counts.len() != self.spec.dim() {
            return Err(FieldError::InvalidGrid(format!(
                "{} derivative counts for dimension {}",
                counts.len(),
                self.spec.dim()
            )));
        }
        let total: usize = counts.iter().sum();
        if total > MAX_ORDER {
            return Err(FieldError::UnsupportedOrder(total));
        }
        let mut req = [0; MAX_DIM];
        req[..counts.len()].copy_from_slice(counts);
        let mut out = self.apply_raw(f.values(), &[req]);
        Ok(PeriodicScalarField::from_raw(
            self.spec.clone(),
            out.pop().unwrap(),
        ))
    }

    /// All distinct partial derivatives of order `order`, in the symmetric
    /// layout of [`SymTensorField`].
    pub fn derivative(
        &self,
        f: &PeriodicScalarField,
        order: usize,
    ) -> Result<SymTensorField, FieldError> {
        let mut jets = self.jets_of_orders(f, &[order])?;
        Ok(jets.pop().unwrap())
    }

    /// `[du, D²u, ..., D^max u]`, sharing one forward transform.
    pub fn jets(
        &self,
        f: &PeriodicScalarField,
        max_order: usize,
    ) -> Result<Vec<SymTensorField>, FieldError> {
        let orders: Vec<usize> = (1..=max_order).collect();
        self.jets_of_orders(f, &orders)
    }

    pub fn jets_of_orders(
        &self,
        f: &PeriodicScalarField,
        orders: &[usize],
    ) -> Result<Vec<SymTensorField>, FieldError> {
        self.check(f)?;
        for &order in orders {
            if order == 0 || order > MAX_ORDER {
                return Err(FieldError::UnsupportedOrder(order));
            }
        }
        let dim = self.spec.dim();
        let mut requests = Vec::new();
        let mut layout = Vec::new();
        for &order in orders {
            let idx = sym_indices(dim, order);
            layout.push(idx.len());
            requests.extend(idx.iter().map(|ix| axis_counts(ix)));
        }
        let mut raw = self.apply_raw(f.values(), &requests).into_iter();
        Ok(orders
            .iter()
            .zip(layout)
            .map(|(&order, count)| {
                let comps: Vec<Vec<f64>> = raw.by_ref().take(count).collect();
                SymTensorField::from_raw(self.spec.clone(), order, comps)
            })
            .collect())
    }

    pub fn gradient(&self, f: &PeriodicScalarField) -> Result<SymTensorField, FieldError> {
        self.derivative(f, 1)
    }

    /// Flat Laplacian `Σ_i ∂_i² f`.
    pub fn laplacian(&self, f: &PeriodicScalarField) -> Result<PeriodicScalarField, FieldError> {
        self.derivative(f, 2)?.trace()
    }

    /// `Σ_i ∂_i v_i` for a covector field given by raw components.
    pub(crate) fn divergence_raw(&self, components: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.len()];
        for (a, comp) in components.iter().enumerate() {
            let mut req = [0; MAX_DIM];
            req[a] = 1;
            let d = self.apply_raw(comp, &[req]).pop().unwrap();
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        out
    }

    /// Second derivatives `∂_i∂_j f` of raw values, symmetric layout.
    pub(crate) fn hessian_raw(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let requests: Vec<_> = sym_indices(self.spec.dim(), 2)
            .iter()
            .map(|ix| axis_counts(ix))
            .collect();
        self.apply_raw(values, &requests)
    }

    pub(crate) fn apply_raw(&self, values: &[f64], requests: &[[usize; MAX_DIM]]) -> Vec<Vec<f64>> {
        match &self.plans {
            Some(plans) => self.apply_spectral(plans, values, requests),
            None => requests
                .iter()
                .map(|req| self.apply_central4(values, req))
                .collect(),
        }
    }

    fn apply_spectral(
        &self,
        plans: &FftPlans,
        values: &[f64],
        requests: &[[usize; MAX_DIM]],
    ) -> Vec<Vec<f64>> {
        let len = self.spec.len();
        let mut hat: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_nd(&plans.forward, &mut hat);
        let norm = 1.0 / len as f64;
        let dim = self.spec.dim();
        let mut work = vec![Complex64::new(0.0, 0.0); len];
        requests
            .iter()
            .map(|req| {
                for (p, w) in work.iter_mut().enumerate() {
                    let idx = self.spec.unravel(p);
                    let mut s = hat[p];
                    for a in 0..dim {
                        if req[a] > 0 {
                            s *= plans.symbols[a][req[a]][idx[a]];
                        }
                    }
                    *w = s;
                }
                self.fft_nd(&plans.inverse, &mut work);
                work.iter().map(|c| c.re * norm).collect()
            })
            .collect()
    }

    fn fft_nd(&self, plans: &[Arc<dyn Fft<f64>>], data: &mut [Complex64]) {
        for (a, plan) in plans.iter().enumerate() {
            let n = self.spec.sizes()[a];
            let stride = self.spec.stride(a);
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for_each_line(&self.spec, a, |base| {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    data[base + j * stride] = *l;
                }
            });
        }
    }

    fn apply_central4(&self, values: &[f64], req: &[usize; MAX_DIM]) -> Vec<f64> {
        let mut cur = values.to_vec();
        for a in 0..self.spec.dim() {
            let ops: &[Stencil] = match req[a] {
                0 => &[],
                1 => &[Stencil::First],
                2 => &[Stencil::Second],
                3 => &[Stencil::Second, Stencil::First],
                _ => &[Stencil::Second, Stencil::Second],
            };
            for op in ops {
                cur = self.stencil_along(&cur, a, *op);
            }
        }
        cur
    }

    fn stencil_along(&self, values: &[f64], axis: usize, op: Stencil) -> Vec<f64> {
        let n = self.spec.sizes()[axis];
        let h = self.spec.spacing(axis);
        let stride = self.spec.stride(axis);
        let mut out = vec![0.0; values.len()];
        let mut line = vec![0.0; n];
        for_each_line(&self.spec, axis, |base| {
            for (j, l) in line.iter_mut().enumerate() {
                *l = values[base + j * stride];
            }
            for j in 0..n {
                let at = |o: isize| line[(j as isize + o).rem_euclid(n as isize) as usize];
                out[base + j * stride] = match op {
                    Stencil::First => (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h),
                    Stencil::Second => {
                        (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2))
                            / (12.0 * h * h)
                    }
                };
            }
        });
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Stencil {
    First,
    Second,
}

/// Calls `f(base)` for the flat index of the first point of every grid line
/// running along `axis`.
fn for_each_line(spec: &GridSpec, axis: usize, mut f: impl FnMut(usize)) {
    let n = spec.sizes()[axis];
    let stride = spec.stride(axis);
    let outer = spec.len() / (n * stride);
    for o in 0..outer {
        for r in 0..stride {
            f(o * n * stride + r);
        }
    }
}

/// All distinct partial derivatives of `f` of the given order.
pub fn derivative(
    f: &PeriodicScalarField,
    order: usize,
    scheme: DiffScheme,
) -> Result<SymTensorField, FieldError> {
    Differentiator::new(f.spec(), scheme).derivative(f, order)
}

/// Spectral flat Laplacian `Δ_σ f = Σ_i ∂_i² f`.
pub fn laplacian_flat(f: &PeriodicScalarField) -> PeriodicScalarField {
    Differentiator::new(f.spec(), DiffScheme::Spectral)
        .laplacian(f)
        .expect("spec of a field always matches its own differentiator")
}

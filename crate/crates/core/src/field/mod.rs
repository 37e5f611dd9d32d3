//! Sampled fields on a flat periodic torus.
//!
//! The base metric is the identity in Cartesian coordinates, so every
//! covariant derivative of the flow reduces to an ordinary partial
//! derivative and every pointwise tensor norm is the Frobenius norm of the
//! stored components.

mod diff;
mod reduce;
mod resample;

pub use diff::{derivative, laplacian_flat, DiffScheme, Differentiator};
pub use reduce::{l2_pairing, pairwise_sum, sup_norm, SupNorm};
pub use resample::{lowpass_spectral, resample_spectral, resample_tensor_spectral};

use thiserror::Error;

pub const MAX_DIM: usize = 3;
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid specs of operands differ")]
    SpecMismatch,
    #[error("derivative order {0} is not supported (1..=4)")]
    UnsupportedOrder(usize),
    #[error("non-finite value at grid point {0}")]
    NonFinite(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("tensor rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },
}

/// Uniform periodic grid on `T^n = Π [0, P_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    sizes: Vec<usize>,
    periods: Vec<f64>,
}

impl GridSpec {
    pub fn new(sizes: Vec<usize>, periods: Vec<f64>) -> Result<Self, FieldError> {
        let dim = sizes.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(FieldError::InvalidGrid(format!(
                "dimension {dim} not in 1..=3"
            )));
        }
        if periods.len() != dim {
            return Err(FieldError::InvalidGrid(format!(
                "{} periods given for dimension {dim}",
                periods.len()
            )));
        }
        for &n in &sizes {
            if n < 8 || n % 2 != 0 {
                return Err(FieldError::InvalidGrid(format!(
                    "axis size {n} must be even and at least 8"
                )));
            }
        }
        for &p in &periods {
            if !(p.is_finite() && p > 0.0) {
                return Err(FieldError::InvalidGrid(format!(
                    "period {p} must be positive"
                )));
            }
        }
        Ok(Self { sizes, periods })
    }

    /// `dim` axes of `n` points each on the unit torus.
    pub fn unit(dim: usize, n: usize) -> Result<Self, FieldError> {
        Self::new(vec![n; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.sizes[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume of one grid cell, `Π h_a`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Volume of the torus, `Π P_a`.
    pub fn total_volume(&self) -> f64 {
        self.periods.iter().product()
    }

    /// Row-major stride of `axis` (last axis contiguous).
    pub fn stride(&self, axis: usize) -> usize {
        self.sizes[axis + 1..].iter().product()
    }

    /// Per-axis indices of a flat row-major index.
    pub fn unravel(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.sizes[a];
            flat /= self.sizes[a];
        }
        idx
    }

    /// Cartesian coordinates of a grid point.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = idx[a] as f64 * self.spacing(a);
        }
        x
    }

    fn check_same(&self, other: &GridSpec) -> Result<(), FieldError> {
        if self == other {
            Ok(())
        } else {
            Err(FieldError::SpecMismatch)
        }
    }
}

fn check_finite(values: &[f64]) -> Result<(), FieldError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(FieldError::NonFinite(i)),
        None => Ok(()),
    }
}

/// A real function sampled on every point of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl PeriodicScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != spec.len() {
            return Err(FieldError::LengthMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { spec, values })
    }

    /// Wraps values without the finiteness scan. Callers that may produce
    /// non-finite data check for it themselves (see the flow integrator).
    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn from_fn(spec: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self, FieldError> {
        let dim = spec.dim();
        let values = (0..spec.len()).map(|i| f(&spec.point(i)[..dim])).collect();
        Self::new(spec.clone(), values)
    }

    pub fn constant(spec: &GridSpec, c: f64) -> Result<Self, FieldError> {
        Self::new(spec.clone(), vec![c; spec.len()])
    }

    pub fn zeros(spec: &GridSpec) -> Self {
        Self {
            spec: spec.clone(),
            values: vec![0.0; spec.len()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(
            self.spec.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        self.spec.check_same(&other.spec)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_raw(self.spec.clone(), values))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid average, i.e. `∫ f dV / vol(T^n)`.
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }
}

/// Sorted index tuples `i_1 <= ... <= i_rank`, in lexicographic order. These
/// are the distinct components of a fully symmetric tensor.
pub fn sym_indices(dim: usize, rank: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, rank: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == rank {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            rec(dim, rank, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, rank, 0, &mut Vec::with_capacity(rank), &mut out);
    out
}

/// Number of index permutations that map onto a sorted tuple.
pub fn multiplicity(index: &[usize]) -> f64 {
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let mut counts = [0usize; MAX_DIM];
    for &i in index {
        counts[i] += 1;
    }
    fact(index.len()) / counts.iter().map(|&c| fact(c)).product::<f64>()
}

/// Per-axis derivative counts of an index tuple, e.g. `(0, 0, 1)` -> `[2, 1, 0]`.
pub fn axis_counts(index: &[usize]) -> [usize; MAX_DIM] {
    let mut counts = [0; MAX_DIM];
    for &i in index {
        counts[i] += 1;
    }
    counts
}

/// Fully symmetric tensor field of a given rank stored by its distinct
/// components. Rank 1 is a covector field (`du`), rank 2 a symmetric matrix
/// field (`D²u`, `μ`), ranks 3 and 4 hold `D³u` and `D⁴u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    spec: GridSpec,
    rank: usize,
    indices: Vec<Vec<usize>>,
    weights: Vec<f64>,
    components: Vec<Vec<f64>>,
}

pub type VectorField = SymTensorField;
pub type SymMatrixField = SymTensorField;
pub type SymTensor3Field = SymTensorField;
pub type SymTensor4Field = SymTensorField;

impl SymTensorField {
    pub fn new(spec: GridSpec, rank: usize, components: Vec<Vec<f64>>) -> Result<Self, FieldError> {
        let indices = sym_indices(spec.dim(), rank);
        if components.len() != indices.len() {
            return Err(FieldError::LengthMismatch {
                expected: indices.len(),
                got: components.len(),
            });
        }
        for c in &components {
            if c.len() != spec.len() {
                return Err(FieldError::LengthMismatch {
                    expected: spec.len(),
                    got: c.len(),
                });
            }
            check_finite(c)?;
        }
        Ok(Self::from_raw(spec, rank, components))
    }

    pub(crate) fn from_raw(spec: GridSpec, rank: usize, components: Vec<Vec<f64>>) -> Self {
        let indices = sym_indices(spec.dim(), rank);
        let weights = indices.iter().map(|ix| multiplicity(ix)).collect();
        debug_assert_eq!(indices.len(), components.len());
        Self {
            spec,
            rank,
            indices,
            weights,
            components,
        }
    }

    pub fn zeros(spec: &GridSpec, rank: usize) -> Self {
        let n = sym_indices(spec.dim(), rank).len();
        Self::from_raw(spec.clone(), rank, vec![vec![0.0; spec.len()]; n])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Sorted index tuple of each stored component.
    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Component slot of an arbitrary (unsorted) index tuple.
    pub fn slot(&self, index: &[usize]) -> usize {
        let mut sorted = index.to_vec();
        sorted.sort_unstable();
        self.indices
            .iter()
            .position(|ix| *ix == sorted)
            .expect("index tuple out of range for this tensor")
    }

    pub fn component(&self, index: &[usize]) -> &[f64] {
        &self.components[self.slot(index)]
    }

    /// Packed components at one grid point.
    pub fn at(&self, point: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[point]).collect()
    }

    /// Pointwise squared Frobenius norm `Σ_{i_1..i_k} T_{i_1..i_k}²`.
    pub fn norm_sq(&self) -> PeriodicScalarField {
        let mut out = vec![0.0; self.spec.len()];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for (o, &v) in out.iter_mut().zip(c) {
                *o += w * v * v;
            }
        }
        PeriodicScalarField::from_raw(self.spec.clone(), out)
    }

    pub fn norm(&self) -> PeriodicScalarField {
        self.norm_sq().map(f64::sqrt)
    }

    /// Trace over the first two indices (rank 2 only: `Σ_i T_ii`).
    pub fn trace(&self) -> Result<PeriodicScalarField, FieldError> {
        if self.rank != 2 {
            return Err(FieldError::RankMismatch {
                expected: 2,
                got: self.rank,
            });
        }
        let mut out = vec![0.0; self.spec.len()];
        for i in 0..self.spec.dim() {
            for (o, &v) in out.iter_mut().zip(self.component(&[i, i])) {
                *o += v;
            }
        }
        Ok(PeriodicScalarField::from_raw(self.spec.clone(), out))
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_and_small_sizes() {
        assert!(GridSpec::unit(1, 7).is_err());
        assert!(GridSpec::unit(1, 6).is_err());
        assert!(GridSpec::unit(4, 8).is_err());
        assert!(GridSpec::new(vec![8], vec![0.0]).is_err());
        assert!(GridSpec::new(vec![8, 8], vec![1.0]).is_err());
        let g = GridSpec::new(vec![8, 16], vec![2.0, 1.0]).unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g.spacing(0), 0.25);
        assert_eq!(g.stride(0), 16);
        assert_eq!(g.total_volume(), 2.0);
    }

    #[test]
    fn unravel_is_row_major() {
        let g = GridSpec::new(vec![8, 10, 12], vec![1.0; 3]).unwrap();
        let flat = 3 * 120 + 7 * 12 + 5;
        assert_eq!(g.unravel(flat), [3, 7, 5]);
        let x = g.point(flat);
        assert_eq!(x[0], 3.0 / 8.0);
    }

    #[test]
    fn sym_layout_counts() {
        assert_eq!(sym_indices(2, 2), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(sym_indices(3, 3).len(), 10);
        assert_eq!(sym_indices(2, 4).len(), 5);
        assert_eq!(multiplicity(&[0, 1]), 2.0);
        assert_eq!(multiplicity(&[0, 0, 1]), 3.0);
        assert_eq!(multiplicity(&[0, 1, 2]), 6.0);
    }

    #[test]
    fn frobenius_norm_counts_off_diagonal_twice() {
        let g = GridSpec::unit(2, 8).unwrap();
        let n = g.len();
        let t = SymTensorField::new(g, 2, vec![vec![1.0; n], vec![2.0; n], vec![3.0; n]]).unwrap();
        assert_eq!(t.norm_sq().values()[0], 1.0 + 2.0 * 4.0 + 9.0);
        assert_eq!(t.component(&[1, 0])[0], 2.0);
        assert_eq!(t.trace().unwrap().values()[5], 4.0);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = GridSpec::unit(1, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert_eq!(
            PeriodicScalarField::new(g, v),
            Err(FieldError::NonFinite(3))
        );
    }
}

//! Dense symmetric matrices of size at most 3 at a single grid point.

use num_complex::Complex64;

use crate::field::MAX_DIM;

pub type Mat3 = [[f64; 3]; 3];

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 30;

/// Slot of entry `(i, j)` in the packed symmetric layout of a `dim × dim`
/// matrix (`(0,0), (0,1), .., (1,1), ..`).
pub fn packed_slot(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Rows before `i` hold dim, dim - 1, ..., dim - i + 1 entries.
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Symmetric matrix of dimension `dim <= 3`, zero-padded to 3×3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    m: Mat3,
}

/// `arg det(I + iQ)` is only reported on the half-plane `Re det > 0`.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("det(I + iQ) = {re} + {im}i lies off the principal branch")]
pub struct BranchInvalid {
    pub re: f64,
    pub im: f64,
}

impl SymMatrix {
    /// From rows; only the upper triangle is read.
    pub fn from_rows(dim: usize, rows: &[&[f64]]) -> Self {
        assert!((1..=MAX_DIM).contains(&dim) && rows.len() == dim);
        let mut m = [[0.0; 3]; 3];
        for i in 0..dim {
            for j in i..dim {
                m[i][j] = rows[i][j];
                m[j][i] = rows[i][j];
            }
        }
        Self { dim, m }
    }

    pub fn from_packed(dim: usize, packed: &[f64]) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        let mut m = [[0.0; 3]; 3];
        for i in 0..dim {
            for j in i..dim {
                let v = packed[packed_slot(dim, i, j)];
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        Self { dim, m }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, &v) in values.iter().enumerate() {
            m[i][i] = v;
        }
        Self {
            dim: values.len(),
            m,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn packed(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push(self.m[i][j]);
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.m;
        m.iter_mut().flatten().for_each(|v| *v *= s);
        Self { dim: self.dim, m }
    }

    /// `R A Rᵀ` for a (not necessarily orthogonal) square `r`.
    pub fn conjugated(&self, r: &Mat3) -> Self {
        let n = self.dim;
        let mut out = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += r[i][k] * self.m[k][l] * r[j][l];
                    }
                }
                out[i][j] = s;
            }
        }
        // Symmetrize away rounding asymmetry.
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (out[i][j] + out[j][i]);
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        Self { dim: n, m: out }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.m.iter().flatten().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    pub fn square(&self) -> Self {
        let n = self.dim;
        let mut out = [[0.0; 3]; 3];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| self.m[i][k] * self.m[k][j]).sum();
                out[i][j] = s;
                out[j][i] = s;
            }
        }
        Self { dim: n, m: out }
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[0][1],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// Eigenvalues in no particular order (entries past `dim` are zero).
    /// Closed form for `dim <= 2`, cyclic Jacobi for `dim = 3`.
    pub fn eigenvalues(&self) -> [f64; 3] {
        match self.dim {
            1 => [self.m[0][0], 0.0, 0.0],
            2 => {
                let (a, b, c) = (self.m[0][0], self.m[0][1], self.m[1][1]);
                let mean = 0.5 * (a + c);
                let radius = (0.5 * (a - c)).hypot(b);
                // Larger-magnitude root first, the other from the determinant
                // to avoid cancellation.
                let big = if mean >= 0.0 {
                    mean + radius
                } else {
                    mean - radius
                };
                let small = if big == 0.0 {
                    0.0
                } else {
                    (a * c - b * b) / big
                };
                [big, small, 0.0]
            }
            _ => jacobi_eigenvalues(self.m),
        }
    }

    /// Lagrangian angle of a graph with Hessian `self`: `Σ arctan λ_i`.
    pub fn lagrangian_angle(&self) -> f64 {
        self.eigenvalues()[..self.dim]
            .iter()
            .map(|l| l.atan())
            .sum()
    }

    /// `det(I + iQ)` expanded directly.
    pub fn det_i_plus_iq(&self) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let e = |r: usize, c: usize| {
            let id = if r == c { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) + i * self.m[r][c]
        };
        match self.dim {
            1 => e(0, 0),
            2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
            _ => {
                e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                    - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                    + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
            }
        }
    }

    /// Independent route to the angle: `arg det(I + iQ)` on the principal
    /// branch, which equals `Σ arctan λ_i` whenever `Re det(I + iQ) > 0`.
    pub fn angle_oracle(&self) -> Result<f64, BranchInvalid> {
        let d = self.det_i_plus_iq();
        if d.re > 0.0 {
            Ok(d.arg())
        } else {
            Err(BranchInvalid { re: d.re, im: d.im })
        }
    }

    /// `μ = I + Q²`, `μ⁻¹`, and `det μ - 1` computed without cancellation.
    pub fn induced_metric(&self) -> (SymMatrix, SymMatrix, f64) {
        let n = self.dim;
        let p = self.square();
        let mut mu = p;
        for i in 0..n {
            mu.m[i][i] += 1.0;
        }
        // det(I + P) - 1 = tr P + e2(P) + det P for P = Q² (det P = (det Q)²);
        // every term is non-negative.
        let det_q = self.det();
        let trace_p: f64 = (0..n).map(|i| p.m[i][i]).sum();
        let e2 = match n {
            1 => 0.0,
            2 => det_q * det_q,
            _ => {
                let minor = |a: usize, b: usize| p.m[a][a] * p.m[b][b] - p.m[a][b] * p.m[a][b];
                minor(0, 1) + minor(0, 2) + minor(1, 2)
            }
        };
        let det_minus_one = match n {
            1 => trace_p,
            2 => trace_p + e2,
            _ => trace_p + e2 + det_q * det_q,
        };
        let det = 1.0 + det_minus_one;
        let m = &mu.m;
        let mut inv = [[0.0; 3]; 3];
        match n {
            1 => inv[0][0] = 1.0 / det,
            2 => {
                inv[0][0] = m[1][1] / det;
                inv[1][1] = m[0][0] / det;
                inv[0][1] = -m[0][1] / det;
                inv[1][0] = inv[0][1];
            }
            _ => {
                let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
                    m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
                };
                inv[0][0] = cof(1, 2, 1, 2) / det;
                inv[0][1] = -cof(0, 2, 1, 2) / det;
                inv[0][2] = cof(0, 1, 1, 2) / det;
                inv[1][1] = cof(0, 2, 0, 2) / det;
                inv[1][2] = -cof(0, 2, 0, 1) / det;
                inv[2][2] = cof(0, 1, 0, 1) / det;
                inv[1][0] = inv[0][1];
                inv[2][0] = inv[0][2];
                inv[2][1] = inv[1][2];
            }
        }
        (mu, SymMatrix { dim: n, m: inv }, det_minus_one)
    }
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric 3×3 matrix.
pub fn jacobi_eigenvalues(mut a: Mat3) -> [f64; 3] {
    let total: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if total == 0.0 {
        return [0.0; 3];
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = (2.0 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2])).sqrt();
        if off <= JACOBI_TOL * total {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn packed_layout() {
        assert_eq!(packed_slot(1, 0, 0), 0);
        assert_eq!(
            [
                packed_slot(2, 0, 0),
                packed_slot(2, 0, 1),
                packed_slot(2, 1, 1)
            ],
            [0, 1, 2]
        );
        let slots: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
            .iter()
            .map(|&(i, j)| packed_slot(3, i, j))
            .collect();
        assert_eq!(slots, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(packed_slot(3, 2, 1), 4);
    }

    #[test]
    fn angle_examples() {
        assert_eq!(SymMatrix::diagonal(&[0.0, 0.0]).lagrangian_angle(), 0.0);
        assert!((SymMatrix::identity(2).lagrangian_angle() - FRAC_PI_2).abs() < 1e-15);
        // atan(0.1) to 30 digits: 0.0996686524911620273784461198780
        let q = SymMatrix::diagonal(&[0.1]);
        assert!((q.lagrangian_angle() - 0.099_668_652_491_162_03).abs() <= 2e-17);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(
            SymMatrix::diagonal(&[0.0, 0.0]).angle_oracle().unwrap(),
            0.0
        );
        let q = SymMatrix::diagonal(&[1.0, -1.0]);
        assert_eq!(q.angle_oracle().unwrap(), 0.0);
        assert!(q.lagrangian_angle().abs() < 1e-16);
        // Re det(I + iQ) = 1 - 4 < 0 for Q = 2I.
        assert!(SymMatrix::diagonal(&[2.0, 2.0]).angle_oracle().is_err());
    }

    #[test]
    fn metric_examples() {
        let (mu, inv, dm1) = SymMatrix::diagonal(&[0.0, 0.0]).induced_metric();
        assert_eq!(mu, SymMatrix::identity(2));
        assert_eq!(inv, SymMatrix::identity(2));
        assert_eq!(dm1, 0.0);
        let (mu, inv, dm1) = SymMatrix::diagonal(&[0.3]).induced_metric();
        assert_eq!(mu.get(0, 0), 1.0 + 0.09);
        assert_eq!(inv.get(0, 0), 1.0 / 1.09);
        assert_eq!(dm1, 0.09);
        let q = SymMatrix::from_rows(2, &[&[0.0, 1.0], &[1.0, 0.0]]);
        let (mu, _, dm1) = q.induced_metric();
        assert_eq!(mu, SymMatrix::diagonal(&[2.0, 2.0]));
        assert_eq!((1.0 + dm1).sqrt(), 2.0);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let (c, s) = (0.6f64, 0.8f64);
        let r1: Mat3 = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let r2: Mat3 = [[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]];
        let d = SymMatrix::diagonal(&[0.7, -0.2, 0.05]);
        let a = d.conjugated(&r1).conjugated(&r2);
        let mut ev = a.eigenvalues();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in ev.iter().zip([-0.2, 0.05, 0.7]) {
            assert!((got - want).abs() < 1e-14, "{ev:?}");
        }
    }

    #[test]
    fn det_excess_matches_direct_determinant() {
        let q = SymMatrix::from_rows(
            3,
            &[&[0.2, 0.1, -0.3], &[0.1, -0.4, 0.05], &[-0.3, 0.05, 0.1]],
        );
        let (mu, inv, dm1) = q.induced_metric();
        assert!((mu.det() - 1.0 - dm1).abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| mu.get(i, k) * inv.get(k, j)).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((s - id).abs() < 1e-15);
            }
        }
    }
}

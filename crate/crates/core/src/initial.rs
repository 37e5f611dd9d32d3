//! Initial data for flow experiments.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{DiffScheme, Differentiator, GridSpec, PeriodicScalarField};
use crate::flow::psi_from_jets;

/// `amplitude · cos(2π k x₁ / P₁)`.
pub fn single_mode(spec: &GridSpec, k: usize, amplitude: f64) -> PeriodicScalarField {
    let period = spec.periods()[0];
    PeriodicScalarField::from_fn(spec, |x| {
        amplitude * (2.0 * PI * k as f64 * x[0] / period).cos()
    })
    .expect("cosine samples are finite")
}

/// Random trigonometric polynomial with all wave vectors `|k_a| <= max_mode`
/// (the mean included). Coefficients are uniform in `[-1, 1]` and damped by
/// `1 / (1 + |k|²)`, drawn from a ChaCha stream so the field depends only on
/// `seed`.
pub fn random_bandlimited(spec: &GridSpec, max_mode: usize, seed: u64) -> PeriodicScalarField {
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = max_mode as i64;
    let side = (2 * m + 1) as usize;
    let count = side.pow(dim as u32);
    let mut modes = Vec::with_capacity(count);
    for flat in 0..count {
        let mut k = [0i64; 3];
        let mut r = flat;
        for ka in k.iter_mut().take(dim) {
            *ka = (r % side) as i64 - m;
            r /= side;
        }
        let k2: i64 = k.iter().map(|v| v * v).sum();
        let damp = 1.0 / (1.0 + k2 as f64);
        let a = rng.gen_range(-1.0..=1.0) * damp;
        let b = rng.gen_range(-1.0..=1.0) * damp;
        modes.push((k, a, b));
    }
    let periods = spec.periods().to_vec();
    PeriodicScalarField::from_fn(spec, |x| {
        modes
            .iter()
            .map(|(k, a, b)| {
                let phase: f64 = (0..dim)
                    .map(|d| 2.0 * PI * k[d] as f64 * x[d] / periods[d])
                    .sum();
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    })
    .expect("trigonometric polynomial samples are finite")
}

/// Factor `s` such that `max ψ(s·u) = target`, where
/// `ψ = c0·u² + c1·|du|² + |D²u|²`. `None` when `u` has `ψ ≡ 0`.
pub fn psi_scale(
    u: &PeriodicScalarField,
    c0: f64,
    c1: f64,
    target: f64,
    scheme: DiffScheme,
) -> Option<f64> {
    let diff = Differentiator::new(u.spec(), scheme);
    let jets = diff.jets(u, 2).expect("differentiator built for this grid");
    let max = psi_from_jets(u, &jets[0], &jets[1], c0, c1).max();
    (max > 0.0).then(|| (target / max).sqrt())
}

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{FieldError, GridSpec, PeriodicScalarField, SymTensorField};

/// Trigonometric interpolant of `f` sampled on a finer grid over the same
/// torus. Every axis of `sizes` must be at least as large as the source
/// axis; the Nyquist mode is split evenly between `±n/2`, so the result is
/// real and restricts back to `f` exactly (up to rounding).
pub fn resample_spectral(
    f: &PeriodicScalarField,
    sizes: &[usize],
) -> Result<PeriodicScalarField, FieldError> {
    let src = f.spec();
    if sizes.len() != src.dim() {
        return Err(FieldError::InvalidGrid(format!(
            "{} target sizes for dimension {}",
            sizes.len(),
            src.dim()
        )));
    }
    if let Some((&n, &m)) = src.sizes().iter().zip(sizes).find(|(n, m)| m < n) {
        return Err(FieldError::InvalidGrid(format!(
            "cannot resample {n} points down to {m}"
        )));
    }
    let target = GridSpec::new(sizes.to_vec(), src.periods().to_vec())?;
    let mut planner = FftPlanner::new();
    let mut cur_sizes = src.sizes().to_vec();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for axis in 0..src.dim() {
        let (n, m) = (cur_sizes[axis], sizes[axis]);
        if n == m {
            continue;
        }
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(m);
        // Row-major with the last axis fastest.
        let inner: usize = cur_sizes[axis + 1..].iter().product();
        let outer: usize = cur_sizes[..axis].iter().product();
        let mut out = vec![Complex64::new(0.0, 0.0); outer * m * inner];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut wide = vec![Complex64::new(0.0, 0.0); m];
        let scale = 1.0 / n as f64;
        for o in 0..outer {
            for r in 0..inner {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[(o * n + j) * inner + r];
                }
                forward.process(&mut line);
                wide.iter_mut().for_each(|w| *w = Complex64::new(0.0, 0.0));
                for j in 0..n / 2 {
                    wide[j] = line[j] * scale;
                }
                for j in n / 2 + 1..n {
                    wide[m - (n - j)] = line[j] * scale;
                }
                let nyq = line[n / 2] * (0.5 * scale);
                wide[n / 2] += nyq;
                wide[m - n / 2] += nyq;
                inverse.process(&mut wide);
                for (j, w) in wide.iter().enumerate() {
                    out[(o * m + j) * inner + r] = *w;
                }
            }
        }
        data = out;
        cur_sizes[axis] = m;
    }
    Ok(PeriodicScalarField::from_raw(
        target,
        data.into_iter().map(|c| c.re).collect(),
    ))
}

/// [`resample_spectral`] applied to every component of a tensor field.
pub fn resample_tensor_spectral(
    f: &SymTensorField,
    sizes: &[usize],
) -> Result<SymTensorField, FieldError> {
    let mut spec = None;
    let mut components = Vec::with_capacity(f.components().len());
    for c in f.components() {
        let field = PeriodicScalarField::new(f.spec().clone(), c.clone())?;
        let fine = resample_spectral(&field, sizes)?;
        spec.get_or_insert_with(|| fine.spec().clone());
        components.push(fine.into_values());
    }
    let spec = match spec {
        Some(s) => s,
        None => GridSpec::new(sizes.to_vec(), f.spec().periods().to_vec())?,
    };
    SymTensorField::new(spec, f.rank(), components)
}

/// Removes every Fourier mode with `|k_a| > max_modes[a]` on some axis.
/// Rounding noise in pointwise products spreads over all modes; projecting
/// back onto the known band keeps later derivatives from amplifying it.
pub fn lowpass_spectral(
    f: &PeriodicScalarField,
    max_modes: &[usize],
) -> Result<PeriodicScalarField, FieldError> {
    let spec = f.spec();
    if max_modes.len() != spec.dim() {
        return Err(FieldError::InvalidGrid(format!(
            "{} mode limits for dimension {}",
            max_modes.len(),
            spec.dim()
        )));
    }
    let mut planner = FftPlanner::new();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let sizes = spec.sizes();
    for axis in 0..spec.dim() {
        let n = sizes[axis];
        let keep = max_modes[axis];
        if keep >= n / 2 {
            continue;
        }
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let inner: usize = sizes[axis + 1..].iter().product();
        let outer: usize = sizes[..axis].iter().product();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        for o in 0..outer {
            for r in 0..inner {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[(o * n + j) * inner + r];
                }
                forward.process(&mut line);
                for (j, l) in line.iter_mut().enumerate() {
                    let k = if j <= n / 2 { j } else { n - j };
                    *l = if k > keep {
                        Complex64::new(0.0, 0.0)
                    } else {
                        *l * scale
                    };
                }
                inverse.process(&mut line);
                for (j, l) in line.iter().enumerate() {
                    data[(o * n + j) * inner + r] = *l;
                }
            }
        }
    }
    Ok(PeriodicScalarField::from_raw(
        spec.clone(),
        data.into_iter().map(|c| c.re).collect(),
    ))
}

use super::{FieldError, PeriodicScalarField, SymTensorField};

const LEAF: usize = 16;

/// Pairwise (tree) summation with a split point that depends only on the
/// slice length, so the result is reproducible bit-for-bit.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        let mut s = 0.0;
        for &v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Maximum over the grid of the pointwise norm.
pub trait SupNorm {
    fn sup_norm(&self) -> f64;
}

impl SupNorm for PeriodicScalarField {
    fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl SupNorm for SymTensorField {
    fn sup_norm(&self) -> f64 {
        self.norm_sq()
            .values()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v))
            .sqrt()
    }
}

pub fn sup_norm<F: SupNorm + ?Sized>(field: &F) -> f64 {
    field.sup_norm()
}

/// `∫ f g w dV` by the rectangle rule (spectrally accurate for smooth
/// periodic integrands).
pub fn l2_pairing(
    f: &PeriodicScalarField,
    g: &PeriodicScalarField,
    weight: Option<&PeriodicScalarField>,
) -> Result<f64, FieldError> {
    if f.spec() != g.spec() {
        return Err(FieldError::SpecMismatch);
    }
    let products: Vec<f64> = match weight {
        Some(w) => {
            if w.spec() != f.spec() {
                return Err(FieldError::SpecMismatch);
            }
            f.values()
                .iter()
                .zip(g.values())
                .zip(w.values())
                .map(|((a, b), c)| a * b * c)
                .collect()
        }
        None => f
            .values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| a * b)
            .collect(),
    };
    Ok(pairwise_sum(&products) * f.spec().cell_volume())
}

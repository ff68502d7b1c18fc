use super::{CopError, Sense};

/// Percentage gap between an objective magnitude and a reference optimum
/// (or bound). Positive means worse than the reference.
pub fn optimality_gap(value: f64, reference: f64, sense: Sense) -> Result<f64, CopError> {
    if !(reference > 0.0) {
        return Err(CopError::NonPositiveReference(reference));
    }
    Ok(match sense {
        Sense::Minimize => 100.0 * (value - reference) / reference,
        Sense::Maximize => 100.0 * (reference - value) / reference,
    })
}

/// `ceil(total size / capacity)`, the trivial lower bound on bins used.
pub fn bin_lower_bound(sizes: &[f64], capacity: f64) -> f64 {
    (sizes.iter().sum::<f64>() / capacity).ceil()
}

//! Central finite differences for validating analytic gradients.

use crate::error::{Error, Result};

/// Step used by [`central_difference`] unless a caller picks its own.
pub const FD_STEP: f64 = 1e-5;

/// Gradients whose magnitude falls below this are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `(f(p + h e_i) - f(p - h e_i)) / 2h` for every coordinate `i`.
pub fn central_difference<F>(params: &[f64], h: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p)?;
        p[i] = orig - h;
        let down = f(&p)?;
        p[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Largest `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)` over all coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR))
        .fold(0.0, f64::max)
}

/// Copies a flat vector into consecutive parameter slices.
pub fn write_slices(slices: Vec<&mut [f64]>, flat: &[f64]) -> Result<()> {
    let total: usize = slices.iter().map(|s| s.len()).sum();
    crate::error::check_len("flat parameters", total, flat.len())?;
    let mut at = 0;
    for s in slices {
        let n = s.len();
        s.copy_from_slice(&flat[at..at + n]);
        at += n;
    }
    Ok(())
}

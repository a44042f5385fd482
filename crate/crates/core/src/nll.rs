//! Angular central Gaussian negative log-likelihood.
//!
//! For unit samples `x_1..x_n` and scatter `S`,
//!
//! ```text
//! L(X; S) = (p/2) Σ_i log(x_iᵀ S⁻¹ x_i) + (n/2) log det S
//! ```
//!
//! up to an additive constant that depends only on `p` and `n`. The loss is
//! invariant to `S → c·S`. Quadratic forms are divided by `x_iᵀ x_i` before the
//! logarithm, which changes nothing for unit vectors but makes `L(X; I)`
//! evaluate to exactly zero in floating point.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::ScatterMatrix;
use crate::samples::UnitSampleSet;

fn check_dims(x: &UnitSampleSet, s: &ScatterMatrix) -> Result<()> {
    if x.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: x.dim(),
        });
    }
    Ok(())
}

/// Negative log-likelihood of the whole sample.
pub fn acg_nll(x: &UnitSampleSet, s: &ScatterMatrix) -> Result<f64> {
    check_dims(x, s)?;
    let p = x.dim() as f64;
    let n = x.len() as f64;
    let q = s.quad_forms(x.columns())?;
    let log_q: f64 = q
        .iter()
        .zip(x.columns().column_iter())
        .map(|(qi, c)| (qi / c.norm_squared()).ln())
        .sum();
    Ok(0.5 * p * log_q + 0.5 * n * s.log_det())
}

/// Single-point loss `(p/2) log(xᵀ S⁻¹ x) + (1/2) log det S`.
pub fn point_loss(x: &DVector<f64>, s: &ScatterMatrix) -> Result<f64> {
    let q = s.quad_form(x)?;
    Ok(point_loss_from_parts(x.len(), q / x.norm_squared(), s.log_det()))
}

/// Single-point loss from a precomputed (norm-relative) quadratic form and log-determinant.
pub(crate) fn point_loss_from_parts(p: usize, quad: f64, log_det: f64) -> f64 {
    0.5 * p as f64 * quad.ln() + 0.5 * log_det
}

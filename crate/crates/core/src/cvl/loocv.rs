use nalgebra::DMatrix;

use crate::cvl::grid::loocv_lower_bound;
use crate::error::{Error, Result};
use crate::estimator::{
    alpha_lower_bound, rtme_fit_counted, weighted_scatter, weights, FitConfig, RfpiCounter,
};
use crate::linalg::{symmetrize, ScatterMatrix};
use crate::nll::{point_loss, point_loss_from_parts};
use crate::samples::UnitSampleSet;

fn check_alpha(alpha: f64, bound: f64) -> Result<()> {
    if !(alpha > bound && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "shrinkage {alpha} outside the admissible range ({bound}, 1]"
        )));
    }
    Ok(())
}

/// Exact leave-one-out loss: refits on every `X \ x_i`.
///
/// Returns the averaged loss and the number of fixed-point invocations (`n`).
/// Each leave-one-out fit starts from `cfg.init`, independently of any fit on
/// the full sample.
pub fn exact_cvl(x: &UnitSampleSet, alpha: f64, cfg: &FitConfig) -> Result<(f64, usize)> {
    let counter = RfpiCounter::new();
    let loss = exact_cvl_counted(x, alpha, cfg, &counter)?;
    Ok((loss, counter.get()))
}

pub(crate) fn exact_cvl_counted(
    x: &UnitSampleSet,
    alpha: f64,
    cfg: &FitConfig,
    counter: &RfpiCounter,
) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain("leave-one-out needs at least 2 samples".into()));
    }
    check_alpha(alpha, loocv_lower_bound(n, x.dim()))?;
    let cfg = cfg.with_alpha(alpha);
    let mut total = 0.0;
    for i in 0..n {
        let fit = rtme_fit_counted(&x.without(i), &cfg, counter).map_err(|e| Error::LeaveOneOut {
            index: i,
            source: Box::new(e),
        })?;
        total += point_loss(&x.sample(i), &fit.estimate)?;
    }
    Ok(total / n as f64)
}

/// Leave-one-out scatter built from the full-sample fit without iterating:
///
/// ```text
/// S̃_i = (1-α) p/(n-1) Σ_{j≠i} x_j x_jᵀ / ṽ_j + α T,   ṽ_j = x_jᵀ Ŝ⁻¹ x_j
/// ```
///
/// where `Ŝ = full_fit` is the converged estimate on all `n` samples.
pub fn approx_leave_one_out_scatter(
    x: &UnitSampleSet,
    i: usize,
    full_fit: &ScatterMatrix,
    alpha: f64,
    target: &ScatterMatrix,
) -> Result<ScatterMatrix> {
    let n = x.len();
    if i >= n {
        return Err(Error::Domain(format!("index {i} out of range for {n} samples")));
    }
    if n < 2 {
        return Err(Error::Domain("leave-one-out needs at least 2 samples".into()));
    }
    if target.dim() != x.dim() || full_fit.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: if target.dim() != x.dim() { target.dim() } else { full_fit.dim() },
        });
    }
    let rest = x.without(i);
    let v = weights(&rest, full_fit)?;
    let (sum, _) = weighted_scatter(rest.columns(), &v);
    let c = (1.0 - alpha) * x.dim() as f64 / (n - 1) as f64;
    ScatterMatrix::symmetrized(sum * c + target.entries() * alpha)
}

/// Approximate leave-one-out loss: one full-sample fit, then every
/// leave-one-out scatter follows from [`approx_leave_one_out_scatter`].
///
/// Returns the averaged loss and the number of fixed-point invocations (`1`).
///
/// All `S̃_i` share the matrix `A = (1-α) p/(n-1) Σ_j x_j x_jᵀ/ṽ_j + α T` and
/// differ from it by the rank-one term `-(1-α) p/(n-1) x_i x_iᵀ/ṽ_i`, so each
/// single-point loss is read off one factorization of `A` through the
/// Sherman-Morrison identity and the matrix determinant lemma.
pub fn approx_cvl(x: &UnitSampleSet, alpha: f64, cfg: &FitConfig) -> Result<(f64, usize)> {
    let counter = RfpiCounter::new();
    let loss = approx_cvl_counted(x, alpha, cfg, &counter)?;
    Ok((loss, counter.get()))
}

pub(crate) fn approx_cvl_counted(
    x: &UnitSampleSet,
    alpha: f64,
    cfg: &FitConfig,
    counter: &RfpiCounter,
) -> Result<f64> {
    let (p, n) = (x.dim(), x.len());
    if n < 2 {
        return Err(Error::Domain("leave-one-out needs at least 2 samples".into()));
    }
    check_alpha(alpha, alpha_lower_bound(n, p))?;
    let cfg = cfg.with_alpha(alpha);
    let target = cfg.target_for(p)?;
    let full = rtme_fit_counted(x, &cfg, counter)?.estimate;
    approx_losses(x, &full, alpha, &target).map(|l| l.iter().sum::<f64>() / n as f64)
}

/// Per-sample losses `L(x_i; S̃_i)` via the rank-one route.
pub(crate) fn approx_losses(
    x: &UnitSampleSet,
    full_fit: &ScatterMatrix,
    alpha: f64,
    target: &ScatterMatrix,
) -> Result<Vec<f64>> {
    let (p, n) = (x.dim(), x.len());
    let v = weights(x, full_fit)?;
    let (sum, _) = weighted_scatter(x.columns(), &v);
    let c = (1.0 - alpha) * p as f64 / (n - 1) as f64;
    let mut shared: DMatrix<f64> = sum * c + target.entries() * alpha;
    symmetrize(&mut shared);
    let shared = ScatterMatrix::new(shared)?;
    let q = shared.quad_forms(x.columns())?;
    let log_det_shared = shared.log_det();

    let mut losses = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x.columns().column(i);
        let d = c / v[i].max(crate::estimator::WEIGHT_FLOOR);
        let r = 1.0 - d * q[i];
        let loss = if r > 1e-8 {
            point_loss_from_parts(p, q[i] / r / xi.norm_squared(), log_det_shared + r.ln())
        } else {
            // downdate close to singular: build the matrix explicitly
            let s = approx_leave_one_out_scatter(x, i, full_fit, alpha, target)?;
            point_loss(&xi.into_owned(), &s)?
        };
        losses.push(loss);
    }
    Ok(losses)
}

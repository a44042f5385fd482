//! Tyler's M-estimator and its regularized form.
//!
//! Both estimators are fixed points of a reweighted sample scatter:
//!
//! ```text
//! TME:   S = (p/n) Σ_i x_i x_iᵀ / (x_iᵀ S⁻¹ x_i)
//! RTME:  S = (1-α)(p/n) Σ_i x_i x_iᵀ / (x_iᵀ S⁻¹ x_i) + α T
//! ```
//!
//! The plain estimator is only defined up to scale, so every iterate is
//! rescaled to trace `p`.
//!
//! The regularized equation has a unique solution for `α > max(0, 1 - n/p)`.
//! Multiplying it by `S⁻¹` and taking traces shows that the solution satisfies
//! `tr(S⁻¹ T) = p`. The plain iteration contracts the overall scale by only
//! `1 - α` per step, which is hopeless for small `α`, so each iterate is
//! rescaled to satisfy that identity. The rescaled map has the same unique
//! fixed point.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, ScatterMatrix};
use crate::samples::UnitSampleSet;

/// Quadratic forms below this are clamped and reported.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Smallest admissible shrinkage for `n` samples in dimension `p`: `max(0, 1 - n/p)`.
/// Admissible values are strictly greater.
pub fn alpha_lower_bound(n: usize, p: usize) -> f64 {
    (1.0 - n as f64 / p as f64).max(0.0)
}

/// Fit parameters. `alpha = 0` selects the plain estimator.
///
/// `alpha` relates to the penalty weight `β` of the penalized likelihood by
/// `α = β / (1 + β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub alpha: f64,
    /// Shrinkage target; identity when `None`.
    pub target: Option<ScatterMatrix>,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting iterate; identity when `None`.
    pub init: Option<ScatterMatrix>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            target: None,
            tol: 1e-9,
            max_iter: 500,
            init: None,
        }
    }
}

impl FitConfig {
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    pub fn target_for(&self, p: usize) -> Result<ScatterMatrix> {
        resolve(&self.target, p)
    }

    pub fn init_for(&self, p: usize) -> Result<ScatterMatrix> {
        resolve(&self.init, p)
    }
}

fn resolve(m: &Option<ScatterMatrix>, p: usize) -> Result<ScatterMatrix> {
    match m {
        None => Ok(ScatterMatrix::identity(p)),
        Some(m) if m.dim() == p => Ok(m.clone()),
        Some(m) => Err(Error::DimensionMismatch {
            expected: p,
            found: m.dim(),
        }),
    }
}

/// Outcome of a converged fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub estimate: ScatterMatrix,
    pub iterations: usize,
    pub final_step: f64,
    pub fixed_point_residual: f64,
    pub wall_time_ns: u64,
    pub warnings: Vec<String>,
    /// Frobenius step sizes of every iteration.
    #[serde(skip)]
    pub steps: Vec<f64>,
}

/// Counts invocations of the regularized fixed-point iteration.
#[derive(Debug, Default)]
pub struct RfpiCounter(AtomicUsize);

impl RfpiCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    pub(crate) fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }
}

/// `w_i = x_iᵀ S⁻¹ x_i` for every sample.
pub fn weights(x: &UnitSampleSet, s: &ScatterMatrix) -> Result<Vec<f64>> {
    s.quad_forms(x.columns())
}

/// `Σ_i x_i x_iᵀ / w_i` with the weights floored at [`WEIGHT_FLOOR`].
/// Returns the sum and the number of floored weights.
pub(crate) fn weighted_scatter(x: &DMatrix<f64>, w: &[f64]) -> (DMatrix<f64>, usize) {
    let mut floored = 0;
    let mut scaled = x.clone();
    for (mut col, &wi) in scaled.column_iter_mut().zip(w) {
        let wi = if wi < WEIGHT_FLOOR {
            floored += 1;
            WEIGHT_FLOOR
        } else {
            wi
        };
        col /= wi.sqrt();
    }
    let m = &scaled * scaled.transpose();
    (m, floored)
}

fn check_dims(x: &UnitSampleSet, m: &ScatterMatrix) -> Result<()> {
    if x.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: m.dim(),
        });
    }
    Ok(())
}

/// One application of the fixed-point map at `s`.
///
/// For `alpha = 0` the result is rescaled so its trace equals `trace_to`.
fn fixed_point_map(
    x: &UnitSampleSet,
    s: &ScatterMatrix,
    alpha: f64,
    target: &ScatterMatrix,
    trace_to: f64,
) -> Result<(DMatrix<f64>, usize)> {
    let p = x.dim() as f64;
    let n = x.len() as f64;
    let w = weights(x, s)?;
    let (sum, floored) = weighted_scatter(x.columns(), &w);
    let mut next = sum;
    if alpha == 0.0 {
        let tr = next.trace();
        next *= trace_to / tr;
    } else {
        let c = (1.0 - alpha) * p / n;
        next.zip_apply(target.entries(), |s, t| *s = *s * c + alpha * t);
    }
    symmetrize(&mut next);
    Ok((next, floored))
}

/// Frobenius distance between `s` and the fixed-point map evaluated at `s`.
/// For `alpha = 0` the map's output is trace-matched to `s`.
pub fn fixed_point_residual(
    x: &UnitSampleSet,
    s: &ScatterMatrix,
    alpha: f64,
    target: &ScatterMatrix,
) -> Result<f64> {
    check_dims(x, s)?;
    check_dims(x, target)?;
    let (rhs, _) = fixed_point_map(x, s, alpha, target, s.trace())?;
    Ok((s.entries() - rhs).norm())
}

/// Plain Tyler's M-estimator. Requires `n > p` and `cfg.alpha == 0`.
///
/// Convergence is only guaranteed for `n > p + 1` with samples in general
/// position; below that threshold a warning is attached to the report.
pub fn tme_fit(x: &UnitSampleSet, cfg: &FitConfig) -> Result<FitReport> {
    if cfg.alpha != 0.0 {
        return Err(Error::Domain(format!(
            "plain estimator requires alpha = 0, got {}",
            cfg.alpha
        )));
    }
    let (p, n) = (x.dim(), x.len());
    if p >= n {
        return Err(Error::NotDefined { p, n });
    }
    let mut warnings = Vec::new();
    if n <= p + 1 {
        warnings.push(format!(
            "n = {n} <= p + 1 = {}: convergence is not guaranteed",
            p + 1
        ));
    }
    iterate(x, cfg, 0.0, &ScatterMatrix::identity(p), warnings)
}

/// Regularized Tyler's M-estimator.
pub fn rtme_fit(x: &UnitSampleSet, cfg: &FitConfig) -> Result<FitReport> {
    let (p, n) = (x.dim(), x.len());
    let alpha = cfg.alpha;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "shrinkage must lie in (0, 1], got {alpha}"
        )));
    }
    let bound = alpha_lower_bound(n, p);
    if alpha <= bound {
        return Err(Error::Domain(format!(
            "shrinkage {alpha} must exceed 1 - n/p = {bound} for n = {n}, p = {p}"
        )));
    }
    let target = cfg.target_for(p)?;
    iterate(x, cfg, alpha, &target, Vec::new())
}

/// [`rtme_fit`] that records the invocation in `counter`.
pub fn rtme_fit_counted(
    x: &UnitSampleSet,
    cfg: &FitConfig,
    counter: &RfpiCounter,
) -> Result<FitReport> {
    counter.bump();
    rtme_fit(x, cfg)
}

/// Dispatches on `cfg.alpha`: zero runs the plain estimator.
pub fn fit(x: &UnitSampleSet, cfg: &FitConfig) -> Result<FitReport> {
    if cfg.alpha == 0.0 {
        tme_fit(x, cfg)
    } else {
        rtme_fit(x, cfg)
    }
}

fn iterate(
    x: &UnitSampleSet,
    cfg: &FitConfig,
    alpha: f64,
    target: &ScatterMatrix,
    mut warnings: Vec<String>,
) -> Result<FitReport> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    if cfg.max_iter == 0 {
        return Err(Error::Domain("max_iter must be at least 1".into()));
    }
    let start = Instant::now();
    let p = x.dim();
    let mut current = cfg.init_for(p)?;
    let mut steps = Vec::new();
    let mut floored_total = 0;
    let identity_target = target.is_identity();
    for _ in 0..cfg.max_iter {
        let (next, floored) = fixed_point_map(x, &current, alpha, target, p as f64)?;
        floored_total += floored;
        let mut next = ScatterMatrix::from_symmetric(next)?;
        if alpha > 0.0 && alpha < 1.0 {
            let tr = if identity_target {
                next.inv_factor().norm_squared()
            } else {
                next.trace_inv_product(target)
            };
            let c = tr / p as f64;
            next.scale_in_place(c);
        }
        let step = next.entries().metric_distance(current.entries());
        steps.push(step);
        current = next;
        if step < cfg.tol {
            if floored_total > 0 {
                warnings.push(format!(
                    "{floored_total} quadratic forms were clamped to {WEIGHT_FLOOR:e}; the problem is ill-conditioned"
                ));
            }
            let residual = fixed_point_residual(x, &current, alpha, target)?;
            return Ok(FitReport {
                estimate: current,
                iterations: steps.len(),
                final_step: step,
                fixed_point_residual: residual,
                wall_time_ns: start.elapsed().as_nanos() as u64,
                warnings,
                steps,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        last_step: steps.last().copied().unwrap_or(f64::NAN),
        last_iterate: Box::new(current),
    })
}

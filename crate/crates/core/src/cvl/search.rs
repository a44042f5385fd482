use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvl::grid::AlphaGrid;
use crate::cvl::loocv::{approx_cvl_counted, exact_cvl_counted};
use crate::cvl::{CvlCurve, CvlMethod, CvlPoint};
use crate::error::{Error, Result};
use crate::estimator::{alpha_lower_bound, FitConfig, RfpiCounter};
use crate::samples::UnitSampleSet;

/// How grid points are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parallelism {
    #[default]
    Serial,
    /// Grid points run on the current rayon pool; results keep grid order.
    PerAlpha,
}

fn evaluate(
    x: &UnitSampleSet,
    alpha: f64,
    cfg: &FitConfig,
    method: CvlMethod,
    shared: &RfpiCounter,
) -> Result<CvlPoint> {
    let local = RfpiCounter::new();
    let start = Instant::now();
    let loss = match method {
        CvlMethod::Exact => exact_cvl_counted(x, alpha, cfg, &local),
        CvlMethod::Approximate => approx_cvl_counted(x, alpha, cfg, &local),
    }
    .map_err(|e| Error::AtAlpha {
        alpha,
        source: Box::new(e),
    })?;
    let wall_time_ns = start.elapsed().as_nanos() as u64;
    let calls = local.get();
    for _ in 0..calls {
        shared.bump();
    }
    Ok(CvlPoint {
        alpha,
        loss,
        rfpi_calls: calls,
        wall_time_ns,
    })
}

/// Evaluates the chosen loss at every grid value and returns the curve.
pub fn select_alpha_grid(
    x: &UnitSampleSet,
    grid: &AlphaGrid,
    cfg: &FitConfig,
    method: CvlMethod,
    parallelism: Parallelism,
) -> Result<CvlCurve> {
    let counter = RfpiCounter::new();
    let points: Vec<Result<CvlPoint>> = match parallelism {
        Parallelism::Serial => grid
            .values()
            .iter()
            .map(|&a| evaluate(x, a, cfg, method, &counter))
            .collect(),
        Parallelism::PerAlpha => grid
            .values()
            .par_iter()
            .map(|&a| evaluate(x, a, cfg, method, &counter))
            .collect(),
    };
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let curve = CvlCurve::from_points(method, points);
    debug_assert_eq!(curve.total_rfpi_calls, counter.get());
    Ok(curve)
}

/// Result of the bracketing search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    pub alpha: f64,
    pub loss: f64,
    /// Bracket-halving steps taken.
    pub iterations: usize,
    /// Objective evaluations, including the final one at `alpha`.
    pub evaluations: usize,
    pub rfpi_calls: usize,
    /// Set when the sampled values were not unimodal and a grid pass chose `alpha`.
    pub fallback: bool,
    pub bracket: (f64, f64),
}

/// Points in the fallback grid pass.
const FALLBACK_POINTS: usize = 20;

/// Minimizes the approximate loss over `[lo, hi]`, assuming it is unimodal.
///
/// Each step evaluates the loss at `mid ± eps/8` and keeps the half that holds
/// the smaller value, so the bracket roughly halves per step and the search
/// stops once its width is below `eps`, after at most
/// `ceil(log2((hi - lo)/eps)) + 1` steps. If the values seen so far stop being
/// unimodal, a grid pass over the original bracket picks the answer instead.
pub fn select_alpha_bisection(
    x: &UnitSampleSet,
    bracket: (f64, f64),
    eps: f64,
    cfg: &FitConfig,
) -> Result<BisectionResult> {
    let (lo0, hi0) = bracket;
    let bound = alpha_lower_bound(x.len(), x.dim());
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if !(lo0 < hi0) {
        return Err(Error::Domain(format!("invalid bracket ({lo0}, {hi0})")));
    }
    if lo0 < bound || hi0 > 1.0 {
        return Err(Error::Domain(format!(
            "bracket ({lo0}, {hi0}) must lie within [{bound}, 1]"
        )));
    }

    let counter = RfpiCounter::new();
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let eval = |a: f64, seen: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = approx_cvl_counted(x, a, cfg, &counter).map_err(|e| Error::AtAlpha {
            alpha: a,
            source: Box::new(e),
        })?;
        seen.push((a, v));
        Ok(v)
    };

    let delta = eps / 8.0;
    let (mut lo, mut hi) = (lo0, hi0);
    let mut iterations = 0;
    let mut unimodal = true;
    while hi - lo >= eps {
        let mid = 0.5 * (lo + hi);
        let left = eval(mid - delta, &mut seen)?;
        let right = eval(mid + delta, &mut seen)?;
        iterations += 1;
        if left < right {
            hi = mid + delta;
        } else if left > right {
            lo = mid - delta;
        } else {
            lo = mid - delta;
            hi = mid + delta;
        }
        if !is_unimodal(&seen) {
            unimodal = false;
            break;
        }
    }

    if unimodal {
        let alpha = 0.5 * (lo + hi);
        let loss = eval(alpha, &mut seen)?;
        Ok(BisectionResult {
            alpha,
            loss,
            iterations,
            evaluations: seen.len(),
            rfpi_calls: counter.get(),
            fallback: false,
            bracket: (lo, hi),
        })
    } else {
        let h = (hi0 - lo0) / (FALLBACK_POINTS + 1) as f64;
        let values = (1..=FALLBACK_POINTS).map(|k| lo0 + h * k as f64).collect();
        let grid = AlphaGrid::new(values, bound)?;
        let curve =
            super::select_alpha_grid(x, &grid, cfg, CvlMethod::Approximate, Parallelism::Serial)?;
        Ok(BisectionResult {
            alpha: curve.argmin_alpha,
            loss: curve.argmin_loss,
            iterations,
            evaluations: seen.len() + grid.len(),
            rfpi_calls: counter.get() + curve.total_rfpi_calls,
            fallback: true,
            bracket: (lo0, hi0),
        })
    }
}

/// Sorted by `α`, values fall to a single minimum and then rise.
fn is_unimodal(points: &[(f64, f64)]) -> bool {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(k) = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(k, _)| k)
    else {
        return true;
    };
    let slack = |v: f64| 1e-12 * v.abs().max(1.0);
    pts[..=k].windows(2).all(|w| w[1].1 <= w[0].1 + slack(w[0].1))
        && pts[k..].windows(2).all(|w| w[1].1 >= w[0].1 - slack(w[0].1))
}

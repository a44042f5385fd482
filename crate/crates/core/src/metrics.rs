//! Accuracy against a known population scatter, and exact-versus-approximate
//! timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cvl::{select_alpha_grid, AlphaGrid, CvlMethod, Parallelism};
use crate::error::{Error, Result};
use crate::estimator::{rtme_fit, FitConfig};
use crate::linalg::ScatterMatrix;
use crate::samples::{normalize_samples, UnitSampleSet};
use crate::synth::{sample_elliptical, EllipticalSpec, RadialLaw};

/// `‖estimate - truth‖²_F / ‖truth‖²_F`, with no rescaling of either argument.
pub fn nmse(estimate: &ScatterMatrix, truth: &ScatterMatrix) -> Result<f64> {
    nmse_entries(estimate.entries(), truth.entries())
}

pub(crate) fn nmse_entries(
    estimate: &nalgebra::DMatrix<f64>,
    truth: &nalgebra::DMatrix<f64>,
) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows(),
            found: estimate.nrows(),
        });
    }
    Ok((estimate - truth).norm_squared() / truth.norm_squared())
}

/// NMSE after rescaling both matrices to trace `p`; used for the plain
/// estimator, whose scale is a convention.
pub fn nmse_trace_normalized(estimate: &ScatterMatrix, truth: &ScatterMatrix) -> Result<f64> {
    let p = truth.dim() as f64;
    let e = estimate.entries() * (p / estimate.trace());
    let t = truth.entries() * (p / truth.trace());
    nmse_entries(&e, &t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmsePoint {
    pub alpha: f64,
    /// Trace-normalized NMSE, the quantity the oracle minimizes.
    pub nmse: f64,
    /// NMSE of the estimate as returned, without rescaling.
    pub nmse_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedAlpha {
    pub label: String,
    pub alpha: f64,
    pub nmse: f64,
}

/// NMSE of the regularized fit across a grid, with overlay markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmseSweep {
    pub points: Vec<NmsePoint>,
    pub oracle_alpha: f64,
    pub oracle_nmse: f64,
    pub selected: Vec<SelectedAlpha>,
}

impl NmseSweep {
    pub fn selected(&self, label: &str) -> Option<&SelectedAlpha> {
        self.selected.iter().find(|s| s.label == label)
    }
}

/// Fits the regularized estimator at every grid value on one sampled dataset
/// and records the NMSE against the population scatter. The `acvl` marker is
/// the grid value chosen by the approximate cross-validated loss.
///
/// Both matrices are trace-normalized before comparison. The regularized
/// solution is unique, but its scale is set by `tr(S⁻¹T) = p` rather than by
/// the population, and the likelihood cannot see scale at all; the raw value
/// is kept in `nmse_raw`.
pub fn nmse_sweep(spec: &EllipticalSpec, grid: &AlphaGrid, cfg: &FitConfig) -> Result<NmseSweep> {
    let x = normalize_samples(&sample_elliptical(spec)?)?;
    nmse_sweep_on(&x, &spec.scatter, grid, cfg)
}

pub fn nmse_sweep_on(
    x: &UnitSampleSet,
    truth: &ScatterMatrix,
    grid: &AlphaGrid,
    cfg: &FitConfig,
) -> Result<NmseSweep> {
    let mut points = Vec::with_capacity(grid.len());
    for &alpha in grid.values() {
        let fit = rtme_fit(x, &cfg.with_alpha(alpha)).map_err(|e| Error::AtAlpha {
            alpha,
            source: Box::new(e),
        })?;
        points.push(NmsePoint {
            alpha,
            nmse: nmse_trace_normalized(&fit.estimate, truth)?,
            nmse_raw: nmse(&fit.estimate, truth)?,
        });
    }
    let mut best = 0;
    for (k, pt) in points.iter().enumerate() {
        if pt.nmse < points[best].nmse {
            best = k;
        }
    }
    let curve = select_alpha_grid(x, grid, cfg, CvlMethod::Approximate, Parallelism::Serial)?;
    let k = curve.argmin_index();
    Ok(NmseSweep {
        oracle_alpha: points[best].alpha,
        oracle_nmse: points[best].nmse,
        selected: vec![SelectedAlpha {
            label: "acvl".into(),
            alpha: points[k].alpha,
            nmse: points[k].nmse,
        }],
        points,
    })
}

/// Experimental setting of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSetting {
    pub p: usize,
    pub n: usize,
    pub gamma: Option<f64>,
    pub radial: RadialLaw,
    pub seed: u64,
    pub m: usize,
    /// `p / n`.
    pub ratio: f64,
}

/// Exact versus approximate selection on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub setting: BenchSetting,
    pub exact_time_ns: u64,
    pub approx_time_ns: u64,
    pub speedup: f64,
    pub exact_calls: usize,
    pub approx_calls: usize,
    pub argmin_exact: f64,
    pub argmin_approx: f64,
    pub grid_step: f64,
    pub parallelism: Parallelism,
}

/// Runs both selectors on the same sample and times them.
///
/// The timed region is the selector call only; one untimed approximate pass
/// runs first as a warm-up.
pub fn bench_exact_vs_approx(
    spec: &EllipticalSpec,
    grid: &AlphaGrid,
    cfg: &FitConfig,
    parallelism: Parallelism,
) -> Result<BenchReport> {
    let x = normalize_samples(&sample_elliptical(spec)?)?;
    let (p, n) = (x.dim(), x.len());

    select_alpha_grid(&x, grid, cfg, CvlMethod::Approximate, parallelism)?;

    let start = Instant::now();
    let exact = select_alpha_grid(&x, grid, cfg, CvlMethod::Exact, parallelism)?;
    let exact_time_ns = start.elapsed().as_nanos() as u64;

    let start = Instant::now();
    let approx = select_alpha_grid(&x, grid, cfg, CvlMethod::Approximate, parallelism)?;
    let approx_time_ns = start.elapsed().as_nanos() as u64;

    let m = grid.len();
    assert_eq!(exact.total_rfpi_calls, m * n);
    assert_eq!(approx.total_rfpi_calls, m);
    Ok(BenchReport {
        setting: BenchSetting {
            p,
            n,
            gamma: spec.gamma,
            radial: spec.radial_law,
            seed: spec.seed,
            m,
            ratio: p as f64 / n as f64,
        },
        exact_time_ns,
        approx_time_ns,
        speedup: exact_time_ns as f64 / approx_time_ns.max(1) as f64,
        exact_calls: exact.total_rfpi_calls,
        approx_calls: approx.total_rfpi_calls,
        argmin_exact: exact.argmin_alpha,
        argmin_approx: approx.argmin_alpha,
        grid_step: grid.step(),
        parallelism,
    })
}

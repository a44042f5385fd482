//! Choosing the shrinkage coefficient by cross-validated likelihood.
//!
//! The cross-validated loss of a coefficient `α` is the average, over every
//! sample `x_i`, of the single-point loss of `x_i` under a scatter estimated
//! without `x_i`. [`exact_cvl`] refits the regularized estimator on each
//! leave-one-out subset, `n` fits per coefficient. [`approx_cvl`] fits once on
//! the full sample and reuses its quadratic forms as the weights of every
//! leave-one-out estimate, which then needs no iteration.

mod grid;
mod loocv;
mod search;

pub use grid::{loocv_lower_bound, AlphaGrid};
pub use loocv::{approx_cvl, approx_leave_one_out_scatter, exact_cvl};
pub use search::{select_alpha_bisection, select_alpha_grid, BisectionResult, Parallelism};

use serde::{Deserialize, Serialize};

/// Which cross-validated loss to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvlMethod {
    Exact,
    Approximate,
}

impl std::str::FromStr for CvlMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "exact" => Ok(CvlMethod::Exact),
            "approx" | "approximate" => Ok(CvlMethod::Approximate),
            other => Err(crate::Error::Domain(format!("unknown method: {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvlPoint {
    pub alpha: f64,
    pub loss: f64,
    pub rfpi_calls: usize,
    pub wall_time_ns: u64,
}

/// Loss evaluated over a grid of coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvlCurve {
    pub method: CvlMethod,
    pub points: Vec<CvlPoint>,
    pub argmin_alpha: f64,
    pub argmin_loss: f64,
    pub total_rfpi_calls: usize,
    pub total_wall_time_ns: u64,
}

impl CvlCurve {
    /// Builds the curve and its argmin; ties go to the smallest `α`.
    pub fn from_points(method: CvlMethod, points: Vec<CvlPoint>) -> Self {
        let mut best = 0;
        for (k, pt) in points.iter().enumerate() {
            if pt.loss < points[best].loss {
                best = k;
            }
        }
        let total_rfpi_calls = points.iter().map(|p| p.rfpi_calls).sum();
        let total_wall_time_ns = points.iter().map(|p| p.wall_time_ns).sum();
        Self {
            method,
            argmin_alpha: points.get(best).map_or(f64::NAN, |p| p.alpha),
            argmin_loss: points.get(best).map_or(f64::NAN, |p| p.loss),
            points,
            total_rfpi_calls,
            total_wall_time_ns,
        }
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.alpha).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.loss).collect()
    }

    pub fn argmin_index(&self) -> usize {
        self.points
            .iter()
            .position(|p| p.alpha == self.argmin_alpha)
            .unwrap_or(0)
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::alpha_lower_bound;

/// Smallest admissible coefficient when every leave-one-out subset of `n`
/// samples must be fittable: `max(0, 1 - (n-1)/p)`.
pub fn loocv_lower_bound(n: usize, p: usize) -> f64 {
    alpha_lower_bound(n.saturating_sub(1), p)
}

/// Strictly increasing coefficients above an admissibility bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    values: Vec<f64>,
    lower_bound: f64,
}

impl AlphaGrid {
    pub fn new(values: Vec<f64>, lower_bound: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain(format!(
                "a grid needs at least 2 points, got {}",
                values.len()
            )));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("grid values must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|&&v| !(v > lower_bound && v < 1.0)) {
            return Err(Error::Domain(format!(
                "grid value {v} outside ({lower_bound}, 1)"
            )));
        }
        Ok(Self {
            values,
            lower_bound,
        })
    }

    /// `m` evenly spaced values from `lower_bound + delta` to `1 - delta`.
    pub fn uniform(lower_bound: f64, m: usize, delta: f64) -> Result<Self> {
        Self::spanning(lower_bound, lower_bound + delta, 1.0 - delta, m)
    }

    /// `m` evenly spaced values from `first` to `last`, both included.
    pub fn spanning(lower_bound: f64, first: f64, last: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!("a grid needs at least 2 points, got {m}")));
        }
        if !(first < last) {
            return Err(Error::Domain(format!("empty grid range [{first}, {last}]")));
        }
        let h = (last - first) / (m - 1) as f64;
        let mut values: Vec<f64> = (0..m).map(|k| first + h * k as f64).collect();
        values[m - 1] = last;
        Self::new(values, lower_bound)
    }

    /// 50 points on `(max(0, 1 - n/p) + 1e-3, 1 - 1e-3)`.
    pub fn default_for(n: usize, p: usize) -> Result<Self> {
        Self::uniform(alpha_lower_bound(n, p), 50, 1e-3)
    }

    /// `m` points up to `1 - delta`, kept away from the bound when it is
    /// positive: the first point is `lb + max(delta, (1 - lb) / 10)`.
    ///
    /// Close to a positive bound the fixed-point map contracts by roughly
    /// `1 - (α - lb) p / n` per step, so leave-one-out fits there need
    /// thousands of iterations.
    pub fn for_comparison(n: usize, p: usize, m: usize, delta: f64) -> Result<Self> {
        let lb = loocv_lower_bound(n, p);
        let first = if lb > 0.0 {
            lb + delta.max(0.1 * (1.0 - lb))
        } else {
            delta
        };
        Self::spanning(lb, first, 1.0 - delta, m)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest gap between neighbouring values.
    pub fn step(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

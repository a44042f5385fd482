//! Unit-norm direction samples.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::synth::RawSampleSet;

/// Rows with norm below this are treated as lying at the origin.
pub const ZERO_NORM: f64 = 1e-300;

/// `n` unit vectors in dimension `p`, stored as the columns of a `p x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSampleSet {
    columns: DMatrix<f64>,
    dropped: usize,
}

impl UnitSampleSet {
    /// Wraps columns that are already unit norm (checked to `1e-12`).
    pub fn from_columns(columns: DMatrix<f64>) -> Result<Self> {
        if columns.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        for (i, c) in columns.column_iter().enumerate() {
            let norm = c.norm();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "sample {} has norm {norm}, expected 1",
                    i + 1
                )));
            }
        }
        Ok(Self {
            columns,
            dropped: 0,
        })
    }

    /// Normalizes each row of `rows`; see [`normalize_samples`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        normalize_samples(&RawSampleSet::from_rows(rows.to_vec())?)
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    /// Number of zero rows dropped during normalization.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.columns.column(i).into_owned()
    }

    /// The sample with the `i`-th point removed.
    pub fn without(&self, i: usize) -> Self {
        Self {
            columns: self.columns.clone().remove_column(i),
            dropped: self.dropped,
        }
    }

    /// Applies the same coordinate permutation to every sample:
    /// output coordinate `k` is input coordinate `perm[k]`.
    pub fn permute_coordinates(&self, perm: &[usize]) -> Self {
        let p = self.dim();
        assert_eq!(perm.len(), p);
        Self {
            columns: DMatrix::from_fn(p, self.len(), |k, i| self.columns[(perm[k], i)]),
            dropped: self.dropped,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.columns
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }
}

/// Projects every row onto the unit sphere and drops rows at the origin.
///
/// Each row is first divided by its largest-magnitude entry and then by the
/// Euclidean norm of the result. For rows that are exact floating-point
/// multiples of one another the first division produces identical vectors, so
/// the output does not depend on the row's scale at all.
pub fn normalize_samples(raw: &RawSampleSet) -> Result<UnitSampleSet> {
    let p = raw.dim();
    let mut data = Vec::with_capacity(raw.len() * p);
    let mut dropped = 0;
    for row in raw.rows() {
        match unit_direction(row) {
            Some(x) => data.extend_from_slice(&x),
            None => dropped += 1,
        }
    }
    let n = data.len() / p;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(UnitSampleSet {
        columns: DMatrix::from_vec(p, n, data),
        dropped,
    })
}

fn unit_direction(row: &[f64]) -> Option<Vec<f64>> {
    let pivot = row
        .iter()
        .copied()
        .fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
    let scale = pivot.abs();
    if scale < ZERO_NORM {
        return None;
    }
    let ratios: Vec<f64> = row.iter().map(|v| v / scale).collect();
    let norm = ratios.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm * scale < ZERO_NORM {
        return None;
    }
    Some(ratios.into_iter().map(|v| v / norm).collect())
}

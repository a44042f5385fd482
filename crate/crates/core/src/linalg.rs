//! Symmetric positive-definite matrices with a cached Cholesky factor.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric positive-definite `p x p` matrix.
///
/// The lower-triangular factor `L` with `S = L Lᵀ` is computed at most once and
/// shared by every reader. `S⁻¹` itself is never formed. Single quadratic
/// forms use a triangular solve; batches use a cached `L⁻¹`, so that all `n`
/// of them cost one matrix product.
#[derive(Debug, Clone)]
pub struct ScatterMatrix {
    entries: DMatrix<f64>,
    factor: OnceLock<DMatrix<f64>>,
    inv_factor: OnceLock<DMatrix<f64>>,
}

impl ScatterMatrix {
    /// Validates symmetry and positive definiteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(Error::Domain("matrix dimension must be at least 1".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let p = entries.nrows();
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::Domain(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let m = Self {
            entries,
            factor: OnceLock::new(),
            inv_factor: OnceLock::new(),
        };
        m.try_factor()?;
        Ok(m)
    }

    /// Factors a matrix the caller has just symmetrized, skipping the
    /// symmetry scan.
    pub(crate) fn from_symmetric(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let m = Self {
            entries,
            factor: OnceLock::new(),
            inv_factor: OnceLock::new(),
        };
        m.try_factor()?;
        Ok(m)
    }

    /// Symmetrizes `entries` as `(A + Aᵀ)/2` before validating.
    pub fn symmetrized(mut entries: DMatrix<f64>) -> Result<Self> {
        symmetrize(&mut entries);
        Self::new(entries)
    }

    pub fn identity(p: usize) -> Self {
        let entries = DMatrix::identity(p, p);
        let factor = OnceLock::new();
        let _ = factor.set(DMatrix::identity(p, p));
        let inv_factor = OnceLock::new();
        let _ = inv_factor.set(DMatrix::identity(p, p));
        Self {
            entries,
            factor,
            inv_factor,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Ragged {
                    row: i + 1,
                    expected: p,
                    found: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// Lower-triangular Cholesky factor.
    pub fn factor(&self) -> &DMatrix<f64> {
        self.factor
            .get()
            .expect("factor is populated at construction")
    }

    /// `L⁻¹`, computed on first use.
    pub fn inv_factor(&self) -> &DMatrix<f64> {
        self.inv_factor
            .get_or_init(|| lower_triangular_inverse(self.factor()))
    }

    fn try_factor(&self) -> Result<&DMatrix<f64>> {
        if let Some(l) = self.factor.get() {
            return Ok(l);
        }
        let l = cholesky_lower(&self.entries)?;
        Ok(self.factor.get_or_init(|| l))
    }

    /// `log det S = 2 Σ log L_kk`.
    pub fn log_det(&self) -> f64 {
        let l = self.factor();
        2.0 * (0..self.dim()).map(|k| l[(k, k)].ln()).sum::<f64>()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `xᵀ S⁻¹ x` for a single vector.
    pub fn quad_form(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut y = x.clone();
        forward_substitute(self.factor(), y.as_mut_slice());
        Ok(y.norm_squared())
    }

    /// `x_iᵀ S⁻¹ x_i` for every column `x_i` of `columns`.
    pub fn quad_forms(&self, columns: &DMatrix<f64>) -> Result<Vec<f64>> {
        if columns.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: columns.nrows(),
            });
        }
        let y = self.inv_factor() * columns;
        Ok(y.column_iter().map(|c| c.norm_squared()).collect())
    }

    /// `tr(S⁻¹ M)` for another positive-definite `M`, as `‖L⁻¹ R‖²_F` with `M = R Rᵀ`.
    pub fn trace_inv_product(&self, m: &ScatterMatrix) -> f64 {
        if m.is_identity() {
            return self.inv_factor().norm_squared();
        }
        (self.inv_factor() * m.factor()).norm_squared()
    }

    pub(crate) fn is_identity(&self) -> bool {
        self.entries.column_iter().enumerate().all(|(j, col)| {
            col.iter()
                .enumerate()
                .all(|(i, &v)| v == if i == j { 1.0 } else { 0.0 })
        })
    }

    /// Multiplies by `c > 0`, rescaling the cached factor by `sqrt(c)`.
    pub(crate) fn scale_in_place(&mut self, c: f64) {
        let root = c.sqrt();
        self.entries *= c;
        if let Some(l) = self.factor.get_mut() {
            *l *= root;
        }
        if let Some(li) = self.inv_factor.get_mut() {
            *li /= root;
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.entries * c)
    }

    pub fn frobenius_distance(&self, other: &ScatterMatrix) -> f64 {
        (&self.entries - &other.entries).norm()
    }
}

impl PartialEq for ScatterMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Serialize for ScatterMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScatterMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        ScatterMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Column-oriented Cholesky. Fails unless every pivot is strictly positive.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    let mut l = a.lower_triangle();
    let data = l.as_mut_slice();
    for j in 0..p {
        let (done, rest) = data.split_at_mut(j * p);
        let col = &mut rest[..p];
        for k in 0..j {
            let prev = &done[k * p..(k + 1) * p];
            let ljk = prev[j];
            if ljk != 0.0 {
                for (c, &v) in col[j..].iter_mut().zip(&prev[j..]) {
                    *c -= v * ljk;
                }
            }
        }
        let d = col[j];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        col[j] = d;
        for c in &mut col[j + 1..] {
            *c /= d;
        }
    }
    Ok(l)
}

fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let data = l.as_slice();
    let recip: Vec<f64> = (0..p).map(|j| 1.0 / data[j * p + j]).collect();
    let mut inv = DMatrix::zeros(p, p);
    for (c, mut out) in inv.column_iter_mut().enumerate() {
        // Column c of L⁻¹ is zero above row c.
        let b = out.as_mut_slice();
        b[c] = 1.0;
        for j in c..p {
            let yj = b[j] * recip[j];
            b[j] = yj;
            let col = &data[j * p..(j + 1) * p];
            for (bi, &lij) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
                *bi -= lij * yj;
            }
        }
    }
    inv
}

/// Solves `L y = b` in place.
pub(crate) fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let p = b.len();
    let data = l.as_slice();
    for j in 0..p {
        let col = &data[j * p..(j + 1) * p];
        let yj = b[j] / col[j];
        b[j] = yj;
        if yj != 0.0 {
            for (bi, &lij) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
                *bi -= lij * yj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 2.0, 0.5, 0.6, 0.5, 3.0])
    }

    #[test]
    fn factor_reconstructs() {
        let a = spd3();
        let s = ScatterMatrix::new(a.clone()).unwrap();
        let l = s.factor();
        assert!((l * l.transpose() - a).norm() < 1e-12);
        for i in 0..3 {
            for j in i + 1..3 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            ScatterMatrix::new(bad),
            Err(Error::NotPositiveDefinite)
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(ScatterMatrix::new(asym), Err(Error::Domain(_))));
        let zero = DMatrix::zeros(2, 2);
        assert!(ScatterMatrix::new(zero).is_err());
    }

    #[test]
    fn log_det_and_quad_form_match_dense_inverse() {
        let a = spd3();
        let s = ScatterMatrix::new(a.clone()).unwrap();
        let inv = a.clone().try_inverse().unwrap();
        assert!((s.log_det() - a.determinant().ln()).abs() < 1e-12);
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let expect = (x.transpose() * &inv * &x)[(0, 0)];
        assert!((s.quad_form(&x).unwrap() - expect).abs() < 1e-12);
        let cols = DMatrix::from_columns(&[x.clone(), x * 2.0]);
        let q = s.quad_forms(&cols).unwrap();
        assert!((q[1] - 4.0 * expect).abs() < 1e-11);
    }

    #[test]
    fn trace_of_inverse_product() {
        let a = ScatterMatrix::new(spd3()).unwrap();
        let b = ScatterMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 1.5])).unwrap();
        let dense = (a.entries().clone().try_inverse().unwrap() * b.entries()).trace();
        assert!((a.trace_inv_product(&b) - dense).abs() < 1e-12);
        let mut c = a.clone();
        c.scale_in_place(4.0);
        assert!((c.factor() * c.factor().transpose() - a.entries() * 4.0).norm() < 1e-12);
    }

    #[test]
    fn identity_is_exact() {
        let s = ScatterMatrix::identity(4);
        assert_eq!(s.log_det(), 0.0);
        let x = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]);
        assert_eq!(s.quad_form(&x).unwrap(), x.norm_squared());
    }

    #[test]
    fn serde_round_trip() {
        let s = ScatterMatrix::new(spd3()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: ScatterMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}

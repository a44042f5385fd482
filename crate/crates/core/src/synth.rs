//! Synthetic samples from the zero-mean elliptical model `z = u · S^{1/2} · y`.
//!
//! `y` is uniform on the unit sphere (a standard Gaussian draw divided by its
//! norm), `S^{1/2}` is the lower Cholesky factor of the population scatter and
//! `u ≥ 0` is the radial variable. Directions and radial draws come from
//! separate named streams (see [`crate::rng`]).
//!
//! Rows are stored as exact floating-point multiples of their direction: the
//! direction `L·y` keeps 41 significant bits and `u` keeps 12, so `u · (L·y)`
//! is computed without rounding. Combined with the scale-exact normalization in
//! [`crate::samples`], two datasets that share a seed but differ in radial law
//! normalize to bit-identical unit samples.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ScatterMatrix;
use crate::rng::{SeedStreams, Stream};

/// Significant bits kept in each direction coordinate.
const DIRECTION_BITS: u32 = 41;
/// Significant bits kept in each radial magnitude. `DIRECTION_BITS + RADIAL_BITS = 53`.
const RADIAL_BITS: u32 = 12;

/// Distribution of the radial variable `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum RadialLaw {
    /// `u = 1`; rows are Gaussian `N(0, S)` directions.
    Constant,
    /// `u = sqrt(d / χ²_d)`.
    StudentT { dof: f64 },
    /// `|Laplace(0, 1)|`.
    Laplace,
    /// `|Cauchy(0, 1)|`.
    Cauchy,
}

impl RadialLaw {
    pub fn stream(&self) -> Stream {
        match self {
            RadialLaw::Constant => Stream::RadialConstant,
            RadialLaw::StudentT { .. } => Stream::RadialStudentT,
            RadialLaw::Laplace => Stream::RadialLaplace,
            RadialLaw::Cauchy => Stream::RadialCauchy,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RadialLaw::StudentT { dof } if !(*dof > 0.0 && dof.is_finite()) => Err(Error::Domain(
                format!("Student-t degrees of freedom must be positive, got {dof}"),
            )),
            _ => Ok(()),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            RadialLaw::Constant => 1.0,
            RadialLaw::StudentT { dof } => {
                let chi = ChiSquared::new(dof).expect("validated dof");
                (dof / chi.sample(rng)).sqrt()
            }
            RadialLaw::Laplace => {
                // inverse CDF of Laplace(0, 1) at U ∈ (0, 1)
                let v: f64 = open_unit(rng) - 0.5;
                (-(1.0 - 2.0 * v.abs()).ln()).abs()
            }
            RadialLaw::Cauchy => {
                let v = open_unit(rng) - 0.5;
                (std::f64::consts::PI * v).tan().abs()
            }
        }
    }
}

impl fmt::Display for RadialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialLaw::Constant => write!(f, "gaussian"),
            RadialLaw::StudentT { dof } => write!(f, "student:{dof}"),
            RadialLaw::Laplace => write!(f, "laplace"),
            RadialLaw::Cauchy => write!(f, "cauchy"),
        }
    }
}

impl FromStr for RadialLaw {
    type Err = Error;

    /// Accepts `gaussian`, `student:<d>`, `laplace` and `cauchy`.
    fn from_str(s: &str) -> Result<Self> {
        let law = match s {
            "gaussian" | "constant" => RadialLaw::Constant,
            "laplace" => RadialLaw::Laplace,
            "cauchy" => RadialLaw::Cauchy,
            other => match other.strip_prefix("student:") {
                Some(d) => RadialLaw::StudentT {
                    dof: d
                        .parse()
                        .map_err(|_| Error::Domain(format!("bad degrees of freedom: {d}")))?,
                },
                None => return Err(Error::Domain(format!("unknown radial law: {other}"))),
            },
        };
        law.validate()?;
        Ok(law)
    }
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Generative model description.
#[derive(Debug, Clone)]
pub struct EllipticalSpec {
    pub sample_count: usize,
    pub scatter: ScatterMatrix,
    pub radial_law: RadialLaw,
    pub seed: u64,
    /// Set when `scatter` was built by [`toeplitz_scatter`].
    pub gamma: Option<f64>,
}

impl EllipticalSpec {
    pub fn new(
        sample_count: usize,
        scatter: ScatterMatrix,
        radial_law: RadialLaw,
        seed: u64,
    ) -> Self {
        Self {
            sample_count,
            scatter,
            radial_law,
            seed,
            gamma: None,
        }
    }

    /// Toeplitz scatter `γ^{|i-j|}` of dimension `p`.
    pub fn toeplitz(
        p: usize,
        n: usize,
        gamma: f64,
        radial_law: RadialLaw,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            gamma: Some(gamma),
            ..Self::new(n, toeplitz_scatter(p, gamma)?, radial_law, seed)
        })
    }

    pub fn dimension(&self) -> usize {
        self.scatter.dim()
    }

    pub fn with_radial_law(&self, radial_law: RadialLaw) -> Self {
        Self {
            radial_law,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Where a raw sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Synthetic { seed: u64 },
    File { path: String },
    Memory,
}

/// `n` finite rows of dimension `p`, arbitrary norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSampleSet {
    rows: Vec<Vec<f64>>,
    dim: usize,
    pub origin: Origin,
}

impl RawSampleSet {
    pub fn new(rows: Vec<Vec<f64>>, origin: Origin) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        if dim == 0 {
            return Err(Error::Domain("rows must have at least one column".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Ragged {
                    row: i + 1,
                    expected: dim,
                    found: r.len(),
                });
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: j + 1,
                    message: "non-finite value".into(),
                });
            }
        }
        Ok(Self { rows, dim, origin })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows, Origin::Memory)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Subtracts the per-column mean.
    pub fn centered(&self) -> Self {
        let n = self.rows.len() as f64;
        let means: Vec<f64> = (0..self.dim)
            .map(|j| self.rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().zip(&means).map(|(v, m)| v - m).collect())
            .collect();
        Self {
            rows,
            dim: self.dim,
            origin: self.origin.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v * c).collect())
                .collect(),
            dim: self.dim,
            origin: self.origin.clone(),
        }
    }
}

/// Toeplitz matrix with entries `γ^{|i-j|}`, positive definite for `0 ≤ γ < 1`.
pub fn toeplitz_scatter(p: usize, gamma: f64) -> Result<ScatterMatrix> {
    if p == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    let powers: Vec<f64> = (0..p).map(|k| gamma.powi(k as i32)).collect();
    ScatterMatrix::new(DMatrix::from_fn(p, p, |i, j| powers[i.abs_diff(j)]))
}

/// Draws `n` rows `u_i · L · y_i`.
pub fn sample_elliptical(spec: &EllipticalSpec) -> Result<RawSampleSet> {
    spec.radial_law.validate()?;
    let p = spec.dimension();
    let n = spec.sample_count;
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let streams = SeedStreams::new(spec.seed);
    let mut dir_rng = streams.stream(Stream::Directions);
    let mut radial_rng = streams.stream(spec.radial_law.stream());
    let l = spec.scatter.factor();

    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let g = DVector::<f64>::from_fn(p, |_, _| dir_rng.sample(StandardNormal));
        let norm = g.norm();
        let y = if norm > 0.0 { g / norm } else { g };
        let w = l * y;
        let u = truncate_bits(spec.radial_law.draw(&mut radial_rng), RADIAL_BITS);
        rows.push(
            w.iter()
                .map(|&v| u * truncate_bits(v, DIRECTION_BITS))
                .collect(),
        );
    }
    RawSampleSet::new(rows, Origin::Synthetic { seed: spec.seed })
}

/// Keeps the leading `bits` significant bits of `x` (round toward zero).
fn truncate_bits(x: f64, bits: u32) -> f64 {
    if !x.is_normal() {
        return x;
    }
    let drop = 53 - bits;
    f64::from_bits(x.to_bits() & !((1u64 << drop) - 1))
}

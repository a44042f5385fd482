//! Robust scatter estimation for heavy-tailed, high-dimensional data.
//!
//! The crate fits Tyler's M-estimator and its regularized (shrinkage) form,
//! and selects the shrinkage coefficient by leave-one-out cross-validated
//! likelihood, either exactly (one refit per left-out sample) or through a
//! reweighting approximation that needs a single fit per coefficient.
//!
//! ```
//! use rtme::{sample_elliptical, normalize_samples, EllipticalSpec, RadialLaw, FitConfig, rtme_fit};
//!
//! let spec = EllipticalSpec::toeplitz(5, 40, 0.5, RadialLaw::Cauchy, 1).unwrap();
//! let x = normalize_samples(&sample_elliptical(&spec).unwrap()).unwrap();
//! let report = rtme_fit(&x, &FitConfig::default().with_alpha(0.3)).unwrap();
//! assert!(report.fixed_point_residual < 1e-6);
//! ```
//!
//! The guide in `book/` walks through the model and the estimators.

pub mod cvl;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod nll;
pub mod reproduce;
pub mod rng;
pub mod samples;
pub mod synth;

#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    pub mod estimators {}
    #[doc = include_str!("../../../book/src/cross-validation.md")]
    pub mod cross_validation {}
    #[doc = include_str!("../../../book/src/selection.md")]
    pub mod selection {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
}

pub use cvl::{
    approx_cvl, approx_leave_one_out_scatter, exact_cvl, select_alpha_bisection,
    select_alpha_grid, AlphaGrid, BisectionResult, CvlCurve, CvlMethod, CvlPoint, Parallelism,
};
pub use error::{Error, Result};
pub use estimator::{
    alpha_lower_bound, fit, fixed_point_residual, rtme_fit, rtme_fit_counted, tme_fit, weights,
    FitConfig, FitReport, RfpiCounter,
};
pub use linalg::ScatterMatrix;
pub use metrics::{bench_exact_vs_approx, nmse, nmse_sweep, BenchReport, NmseSweep};
pub use nll::{acg_nll, point_loss};
pub use samples::{normalize_samples, UnitSampleSet};
pub use synth::{sample_elliptical, toeplitz_scatter, EllipticalSpec, Origin, RadialLaw, RawSampleSet};

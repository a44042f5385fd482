//! Batch runs over the 3×3 setting matrix (three `n` regimes times three
//! Toeplitz correlations) with per-setting artifacts, a summary and a check
//! file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cvl::{select_alpha_grid, AlphaGrid, CvlCurve, CvlMethod, Parallelism};
use crate::error::{Error, Result};
use crate::estimator::FitConfig;
use crate::io::{write_csv_table, write_json, write_text, RunManifest, WithManifest};
use crate::metrics::{bench_exact_vs_approx, nmse_sweep_on};
use crate::rng::SeedStreams;
use crate::samples::normalize_samples;
use crate::synth::{sample_elliptical, EllipticalSpec, RadialLaw};

/// Relative sup-distance allowed between the two loss curves.
pub const CURVE_GAP_LIMIT: f64 = 0.05;
/// Allowed ratio of the selected NMSE to the grid minimum.
pub const NMSE_RATIO_LIMIT: f64 = 1.2;
/// Minimum exact/approximate wall-time ratio when `n = 2p`.
pub const SPEEDUP_FLOOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Curves,
    Nmse,
    Speedup,
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recipe::Curves => "curves",
            Recipe::Nmse => "nmse",
            Recipe::Speedup => "speedup",
        })
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curves" => Ok(Recipe::Curves),
            "nmse" => Ok(Recipe::Nmse),
            "speedup" => Ok(Recipe::Speedup),
            _ => Err(Error::Domain(format!(
                "unknown recipe `{s}` (expected curves, nmse or speedup)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceConfig {
    pub p: usize,
    pub ns: Vec<usize>,
    pub gammas: Vec<f64>,
    pub radial: RadialLaw,
    pub seed: u64,
    /// Grid size.
    pub m: usize,
    /// Distance of the grid ends from the admissibility bound and from 1.
    pub delta: f64,
    pub fit: FitConfig,
    pub parallelism: Parallelism,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        Self {
            p: 50,
            ns: vec![100, 50, 25],
            gammas: vec![0.1, 0.5, 0.85],
            radial: RadialLaw::Cauchy,
            seed: 1,
            m: 20,
            delta: 1e-3,
            fit: FitConfig::default(),
            parallelism: Parallelism::Serial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub index: usize,
    pub p: usize,
    pub n: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Setting {
    fn stem(&self) -> String {
        format!("p{}_n{}_g{}", self.p, self.n, self.gamma)
    }
}

impl ReproduceConfig {
    /// Settings in `n`-major order. Each draws its seed from the root seed,
    /// so adding a setting never changes the data of another.
    pub fn settings(&self) -> Vec<Setting> {
        let root = SeedStreams::new(self.seed);
        let mut out = Vec::new();
        for &n in &self.ns {
            for &gamma in &self.gammas {
                let index = out.len();
                out.push(Setting {
                    index,
                    p: self.p,
                    n,
                    gamma,
                    seed: root.child(index as u64).seed(),
                });
            }
        }
        out
    }

    fn grid(&self, n: usize) -> Result<AlphaGrid> {
        AlphaGrid::for_comparison(n, self.p, self.m, self.delta)
    }

    fn spec(&self, s: &Setting) -> Result<EllipticalSpec> {
        EllipticalSpec::toeplitz(s.p, s.n, s.gamma, self.radial, s.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingOutcome {
    pub setting: Setting,
    pub files: Vec<PathBuf>,
    /// Headline number: relative curve gap, NMSE ratio or speedup.
    pub metric: Option<f64>,
    pub passed: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub recipe: Recipe,
    pub outcomes: Vec<SettingOutcome>,
    pub checks: Vec<Check>,
    pub failures: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Relative sup-distance between two loss curves on the same grid,
/// normalized by the range of the first.
pub fn relative_curve_gap(exact: &CvlCurve, approx: &CvlCurve) -> f64 {
    let e = exact.losses();
    let a = approx.losses();
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let sup = e
        .iter()
        .zip(&a)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    sup / (hi - lo)
}

/// Runs one recipe and writes its artifacts into `out_dir`.
///
/// A failing setting is recorded with its error and the run moves on; the
/// summary and check file are written either way.
pub fn reproduce(recipe: Recipe, cfg: &ReproduceConfig, out_dir: &Path) -> Result<ReproduceSummary> {
    std::fs::create_dir_all(out_dir)?;
    let params = serde_json::to_value(cfg)?;
    let manifest = RunManifest::start("reproduce", params, Some(cfg.seed));
    let mut outcomes = Vec::new();
    for s in cfg.settings() {
        let res = match recipe {
            Recipe::Curves => run_curves(cfg, &s, out_dir),
            Recipe::Nmse => run_nmse(cfg, &s, out_dir),
            Recipe::Speedup => run_speedup(cfg, &s, out_dir),
        };
        outcomes.push(match res {
            Ok((files, metric, passed)) => SettingOutcome {
                setting: s,
                files,
                metric: Some(metric),
                passed,
                error: None,
            },
            Err(e) => SettingOutcome {
                setting: s,
                files: Vec::new(),
                metric: None,
                passed: Some(false),
                error: Some(e.to_string()),
            },
        });
    }

    let mut checks: Vec<Check> = outcomes
        .iter()
        .filter_map(|o| {
            let passed = o.passed?;
            let detail = match (&o.error, o.metric) {
                (Some(e), _) => format!("error: {e}"),
                (None, Some(v)) => format!("{} = {v:.4}", metric_name(recipe)),
                (None, None) => String::new(),
            };
            Some(Check {
                name: format!("{recipe} {}", o.setting.stem()),
                passed,
                detail,
            })
        })
        .collect();
    if recipe == Recipe::Speedup {
        checks.extend(speedup_growth(&outcomes));
    }

    let summary = ReproduceSummary {
        recipe,
        failures: checks.iter().filter(|c| !c.passed).count(),
        errors: outcomes.iter().filter(|o| o.error.is_some()).count(),
        outcomes,
        checks,
    };
    write_json(
        &out_dir.join(format!("{recipe}_summary.json")),
        &WithManifest {
            body: &summary,
            manifest: manifest.finish(),
        },
    )?;
    let mut text = String::new();
    for c in &summary.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!("{verdict} {} {}\n", c.name, c.detail));
    }
    write_text(&out_dir.join(format!("{recipe}_checks.txt")), &text)?;
    Ok(summary)
}

fn metric_name(recipe: Recipe) -> &'static str {
    match recipe {
        Recipe::Curves => "relative gap",
        Recipe::Nmse => "nmse ratio",
        Recipe::Speedup => "speedup",
    }
}

type SettingResult = Result<(Vec<PathBuf>, f64, Option<bool>)>;

fn run_curves(cfg: &ReproduceConfig, s: &Setting, out_dir: &Path) -> SettingResult {
    let x = normalize_samples(&sample_elliptical(&cfg.spec(s)?)?)?;
    let grid = cfg.grid(s.n)?;
    let exact = select_alpha_grid(&x, &grid, &cfg.fit, CvlMethod::Exact, cfg.parallelism)?;
    let approx = select_alpha_grid(&x, &grid, &cfg.fit, CvlMethod::Approximate, cfg.parallelism)?;
    let rows: Vec<Vec<String>> = exact
        .points
        .iter()
        .zip(&approx.points)
        .map(|(e, a)| vec![format!("{:?}", e.alpha), format!("{:?}", e.loss), format!("{:?}", a.loss)])
        .collect();
    let path = out_dir.join(format!("curves_{}.csv", s.stem()));
    write_csv_table(&path, &["alpha", "exact_loss", "approx_loss"], &rows)?;
    let gap = relative_curve_gap(&exact, &approx);
    let argmins_close = (exact.argmin_alpha - approx.argmin_alpha).abs() <= grid.step() * (1.0 + 1e-9);
    Ok((vec![path], gap, Some(gap < CURVE_GAP_LIMIT && argmins_close)))
}

fn run_nmse(cfg: &ReproduceConfig, s: &Setting, out_dir: &Path) -> SettingResult {
    let spec = cfg.spec(s)?;
    let x = normalize_samples(&sample_elliptical(&spec)?)?;
    let sweep = nmse_sweep_on(&x, &spec.scatter, &cfg.grid(s.n)?, &cfg.fit)?;
    let acvl = sweep
        .selected("acvl")
        .expect("sweep always carries the acvl marker")
        .clone();
    let rows: Vec<Vec<String>> = sweep
        .points
        .iter()
        .map(|pt| {
            vec![
                format!("{:?}", pt.alpha),
                format!("{:?}", pt.nmse),
                format!("{:?}", pt.nmse_raw),
                u8::from(pt.alpha == acvl.alpha).to_string(),
                u8::from(pt.alpha == sweep.oracle_alpha).to_string(),
            ]
        })
        .collect();
    let csv = out_dir.join(format!("nmse_{}.csv", s.stem()));
    write_csv_table(&csv, &["alpha", "nmse", "nmse_raw", "acvl", "oracle"], &rows)?;
    let json = out_dir.join(format!("nmse_{}.json", s.stem()));
    write_json(&json, &sweep)?;
    let ratio = acvl.nmse / sweep.oracle_nmse;
    Ok((vec![csv, json], ratio, Some(ratio <= NMSE_RATIO_LIMIT)))
}

fn run_speedup(cfg: &ReproduceConfig, s: &Setting, out_dir: &Path) -> SettingResult {
    let report = bench_exact_vs_approx(&cfg.spec(s)?, &cfg.grid(s.n)?, &cfg.fit, cfg.parallelism)?;
    let path = out_dir.join(format!("bench_{}.json", s.stem()));
    write_json(&path, &report)?;
    let check = (s.n == 2 * s.p).then_some(report.speedup >= SPEEDUP_FLOOR);
    Ok((vec![path], report.speedup, check))
}

/// Speedup at the largest `n` must not fall below that at the smallest, per γ.
fn speedup_growth(outcomes: &[SettingOutcome]) -> Vec<Check> {
    let mut gammas: Vec<f64> = outcomes.iter().map(|o| o.setting.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    gammas
        .into_iter()
        .filter_map(|g| {
            let mut at: Vec<(usize, f64)> = outcomes
                .iter()
                .filter(|o| o.setting.gamma == g)
                .filter_map(|o| Some((o.setting.n, o.metric?)))
                .collect();
            at.sort_by_key(|&(n, _)| n);
            let (&(n_lo, lo), &(n_hi, hi)) = (at.first()?, at.last()?);
            (n_lo != n_hi).then(|| Check {
                name: format!("speedup growth g{g}"),
                passed: hi >= lo,
                detail: format!("n={n_lo}: {lo:.1}x, n={n_hi}: {hi:.1}x"),
            })
        })
        .collect()
}

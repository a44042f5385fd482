use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use rtme::cvl::loocv_lower_bound;
use rtme::io::{format_csv_rows, load_csv_samples, write_csv_table, RunManifest, WithManifest};
use rtme::metrics::nmse_sweep_on;
use rtme::reproduce::{reproduce, Recipe, ReproduceConfig};
use rtme::{
    bench_exact_vs_approx, fit, normalize_samples, sample_elliptical, select_alpha_bisection,
    select_alpha_grid, AlphaGrid, CvlMethod, EllipticalSpec, Error, FitConfig, Parallelism,
    RadialLaw, UnitSampleSet,
};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_IO: u8 = 4;

/// Largest `n` that `bench` accepts without `--force`; the exact selector
/// costs `m·n` fits.
const BENCH_GUARD: usize = 1000;

#[derive(Parser)]
#[command(name = "rtme", version, about = "Regularized Tyler scatter estimation with cross-validated shrinkage")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; above 1, grid points are evaluated in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output path (file, file stem or directory depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an elliptical sample and write it as CSV.
    Generate(SynthArgs),
    /// Fit the plain (alpha = 0) or regularized estimator to a CSV file.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Choose the shrinkage coefficient by cross-validated likelihood.
    SelectAlpha {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "approx")]
        method: CvlMethod,
        /// Grid size, or a comma-separated list of coefficients.
        #[arg(long, default_value = "50")]
        grid: String,
        /// Search by bisection on [lo, hi] instead of a grid (approximate loss).
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        bisect: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// NMSE of the regularized fit against the population scatter across a grid.
    NmseSweep {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value = "20")]
        grid: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Time exact against approximate selection on one synthetic sample.
    Bench {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value = "20")]
        grid: String,
        /// Allow n above the guard.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run a recipe over the 3x3 setting matrix.
    Reproduce {
        recipe: Recipe,
        #[arg(long, default_value_t = 50)]
        p: usize,
        #[arg(long, value_delimiter = ',', default_value = "100,50,25")]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.85")]
        gammas: Vec<f64>,
        #[arg(long, default_value = "cauchy")]
        radial: RadialLaw,
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args, Clone)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    p: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Toeplitz correlation of the population scatter.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// gaussian, student:<dof>, laplace or cauchy.
    #[arg(long, default_value = "cauchy")]
    radial: RadialLaw,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// CSV file, one sample per row.
    #[arg(long)]
    input: PathBuf,
    /// Skip the first row.
    #[arg(long)]
    header: bool,
    /// Subtract the column means.
    #[arg(long)]
    center: bool,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file; a synthetic sample is drawn when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    header: bool,
    #[arg(long, requires = "input")]
    center: bool,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_io() {
            EXIT_IO
        } else if e.is_numeric() {
            EXIT_NUMERIC
        } else {
            EXIT_USAGE
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let parallelism = if cli.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
        Parallelism::PerAlpha
    } else {
        Parallelism::Serial
    };
    let seed = cli.seed;
    let out = cli.out.as_deref();

    match cli.command {
        Command::Generate(s) => {
            let spec = synth_spec(&s, seed)?;
            let raw = sample_elliptical(&spec)?;
            emit_text(out, &format_csv_rows(raw.rows()))
        }
        Command::Fit {
            input,
            alpha,
            solver,
        } => {
            let params = json!({ "input": input.input, "header": input.header, "center": input.center,
                "alpha": alpha, "tol": solver.tol, "max_iter": solver.max_iter });
            let manifest = RunManifest::start("fit", params, None).with_input(&input.input)?;
            let x = normalize_samples(&load_csv_samples(&input.input, input.center, input.header)?)?;
            let report = fit(&x, &solver.config().with_alpha(alpha))?;
            emit_json(out, &report, manifest)
        }
        Command::SelectAlpha {
            data,
            method,
            grid,
            bisect,
            eps,
            solver,
        } => {
            let params = json!({ "input": data.input, "header": data.header, "center": data.center,
                "p": data.synth.p, "n": data.synth.n, "gamma": data.synth.gamma,
                "radial": data.synth.radial.to_string(), "method": method, "grid": grid,
                "bisect": bisect, "eps": eps, "tol": solver.tol, "max_iter": solver.max_iter });
            let (x, manifest) = load_data(&data, seed, RunManifest::start("select-alpha", params, Some(seed)))?;
            let cfg = solver.config();
            match bisect {
                Some(b) => {
                    let res = select_alpha_bisection(&x, (b[0], b[1]), eps, &cfg)?;
                    emit_json(out, &res, manifest)
                }
                None => {
                    let grid = parse_grid(&grid, x.len(), x.dim())?;
                    let curve = select_alpha_grid(&x, &grid, &cfg, method, parallelism)?;
                    emit_json(out, &curve, manifest)
                }
            }
        }
        Command::NmseSweep {
            synth,
            grid,
            solver,
        } => {
            let params = json!({ "p": synth.p, "n": synth.n, "gamma": synth.gamma,
                "radial": synth.radial.to_string(), "grid": grid, "tol": solver.tol,
                "max_iter": solver.max_iter });
            let manifest = RunManifest::start("nmse-sweep", params, Some(seed));
            let spec = synth_spec(&synth, seed)?;
            let grid = parse_grid(&grid, synth.n, synth.p)?;
            let x = normalize_samples(&sample_elliptical(&spec)?)?;
            let sweep = nmse_sweep_on(&x, &spec.scatter, &grid, &solver.config())?;
            match out {
                Some(stem) => {
                    let acvl = sweep.selected("acvl").map(|s| s.alpha);
                    let rows: Vec<Vec<String>> = sweep
                        .points
                        .iter()
                        .map(|pt| {
                            vec![
                                format!("{:?}", pt.alpha),
                                format!("{:?}", pt.nmse),
                                format!("{:?}", pt.nmse_raw),
                                u8::from(Some(pt.alpha) == acvl).to_string(),
                            ]
                        })
                        .collect();
                    write_csv_table(&stem.with_extension("csv"), &["alpha", "nmse", "nmse_raw", "acvl"], &rows)?;
                    emit_json(Some(&stem.with_extension("json")), &sweep, manifest)
                }
                None => emit_json(None, &sweep, manifest),
            }
        }
        Command::Bench {
            synth,
            grid,
            force,
            solver,
        } => {
            if synth.n > BENCH_GUARD && !force {
                return Err(Failure::usage(format!(
                    "n = {} exceeds the guard of {BENCH_GUARD}; the exact selector needs m·n fits (pass --force)",
                    synth.n
                )));
            }
            let params = json!({ "p": synth.p, "n": synth.n, "gamma": synth.gamma,
                "radial": synth.radial.to_string(), "grid": grid, "threads": cli.threads,
                "tol": solver.tol, "max_iter": solver.max_iter });
            let manifest = RunManifest::start("bench", params, Some(seed));
            let spec = synth_spec(&synth, seed)?;
            let grid = parse_grid(&grid, synth.n, synth.p)?;
            let report = bench_exact_vs_approx(&spec, &grid, &solver.config(), parallelism)?;
            emit_json(out, &report, manifest)
        }
        Command::Reproduce {
            recipe,
            p,
            ns,
            gammas,
            radial,
            m,
            solver,
        } => {
            let cfg = ReproduceConfig {
                p,
                ns,
                gammas,
                radial,
                seed,
                m,
                fit: solver.config(),
                parallelism,
                ..ReproduceConfig::default()
            };
            let dir = out.unwrap_or(Path::new("reproduce-out"));
            let summary = reproduce(recipe, &cfg, dir)?;
            for c in &summary.checks {
                println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for o in summary.outcomes.iter().filter(|o| o.error.is_some()) {
                eprintln!("setting {} failed: {}", o.setting.index, o.error.as_deref().unwrap_or(""));
            }
            println!("artifacts in {}", dir.display());
            Ok(())
        }
    }
}

fn synth_spec(s: &SynthArgs, seed: u64) -> Result<EllipticalSpec, Failure> {
    Ok(EllipticalSpec::toeplitz(s.p, s.n, s.gamma, s.radial, seed)?)
}

fn load_data(
    data: &DataArgs,
    seed: u64,
    manifest: RunManifest,
) -> Result<(UnitSampleSet, RunManifest), Failure> {
    match &data.input {
        Some(path) => {
            let manifest = manifest.with_input(path)?;
            let raw = load_csv_samples(path, data.center, data.header)?;
            Ok((normalize_samples(&raw)?, manifest))
        }
        None => {
            let raw = sample_elliptical(&synth_spec(&data.synth, seed)?)?;
            Ok((normalize_samples(&raw)?, manifest))
        }
    }
}

/// `"20"` is a 20-point grid kept clear of the leave-one-out bound;
/// `"0.2,0.5,0.8"` is taken literally.
fn parse_grid(text: &str, n: usize, p: usize) -> Result<AlphaGrid, Failure> {
    if text.contains(',') {
        let values = text
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::usage(format!("bad grid value: {e}")))?;
        return Ok(AlphaGrid::new(values, loocv_lower_bound(n, p))?);
    }
    let m: usize = text
        .parse()
        .map_err(|_| Failure::usage(format!("--grid expects a count or a list, got `{text}`")))?;
    Ok(AlphaGrid::for_comparison(n, p, m, 1e-3)?)
}

fn emit_json<T: Serialize>(out: Option<&Path>, body: &T, manifest: RunManifest) -> Result<(), Failure> {
    let doc = WithManifest {
        body,
        manifest: manifest.finish(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure {
        code: EXIT_IO,
        message: e.to_string(),
    })?;
    emit_text(out, &(text + "\n"))
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => Ok(rtme::io::write_text(path, text)?),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

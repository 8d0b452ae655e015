//! Command-line front end for the seasonal Lotka-Volterra laboratory.
//!
//! Every subcommand reads a model file (`--model`), runs one library operation
//! and writes JSON records or CSV sequences. Without `--out` the primary
//! artifact goes to stdout; with `--out DIR` files are written atomically into
//! `DIR`. Errors are reported on stderr as `{"error": .., "detail": ..}` with
//! exit code 1 for invalid input and 2 for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use seasonal_lv::classify::dynamics_verdict;
use seasonal_lv::csv::row;
use seasonal_lv::fixedpoints::{autonomous_positive_equilibrium, fixed_point_census, PositiveSearchOptions};
use seasonal_lv::flow::{seasonal_samples, DEFAULT_TOL};
use seasonal_lv::linalg::Vec3;
use seasonal_lv::orbits::{
    default_orbit_seed, find_periodic_orbit, minimal_period_and_eta, OrbitOptions,
};
use seasonal_lv::simplex::{approximate_carrying_simplex, sample_portrait, DEFAULT_RAYS};
use seasonal_lv::verify::{all_passed, format_table, multiplicity_report, run_suite, SuiteOptions};
use seasonal_lv::{DerivedConstants, Error, ModelSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SEASONAL_LV_THREADS";

#[derive(Debug, Parser)]
#[command(name = "seasonal-lv", version, about = "Poincaré-map laboratory for seasonal Lotka-Volterra competition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form constants r, l, rho_star, rho_hat.
    Derive(Common),
    /// Class label and predicted dynamics.
    Classify(Common),
    /// Origin, axial, planar and positive fixed points with spectra.
    FixedPoints(Common),
    /// Seasonal trajectory as CSV over `--k` seasons with `--n` samples per season.
    Simulate(Common),
    /// Fates of `--n` random orbits iterated at most `--k` times.
    Portrait(Common),
    /// Periodic orbit of the flow around the positive equilibrium.
    PeriodicOrbit(Common),
    /// Resonant season length with a curve of fixed points, and its verification.
    ConstructMultiplicity(Common),
    /// Identity checks with a pass/fail table.
    Verify(Common),
    /// Carrying simplex mesh along `--n` rays.
    Simplex(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Model file: {"A": [[..],[..],[..]], "b": .., "mu": .., "phi": .., "omega": ..}.
    #[arg(long)]
    model: PathBuf,
    /// Output directory; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrator tolerance (absolute and relative).
    #[arg(long)]
    tol: Option<f64>,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration or season count.
    #[arg(long)]
    k: Option<usize>,
    /// Sample, orbit or ray count.
    #[arg(long)]
    n: Option<usize>,
    /// Initial point "x1,x2,x3" for `simulate` or seed for `periodic-orbit`.
    #[arg(long, value_parser = parse_point)]
    x0: Option<Point>,
    /// Saved `derive` output used in place of the computed constants.
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Point([f64; 3]);

fn parse_point(s: &str) -> Result<Point, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b, c] => Ok(Point([*a, *b, *c])),
        _ => Err(format!("expected three comma-separated numbers, got {}", parts.len())),
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    error: String,
    detail: String,
}

impl Failure {
    fn invalid(error: &str, detail: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            error: error.into(),
            detail: detail.into(),
        }
    }

    fn numerical(error: &str, detail: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            error: error.into(),
            detail: detail.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_validation() { EXIT_INVALID } else { EXIT_NUMERICAL },
            error: e.kind().into(),
            detail: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            return report(err, &Failure::invalid("usage", e.to_string().trim_end()));
        }
    };
    if let Err(f) = configure_threads() {
        return report(err, &f);
    }
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => report(err, &f),
    }
}

fn report(err: &mut dyn Write, f: &Failure) -> i32 {
    let _ = writeln!(err, "{}", json!({ "error": f.error, "detail": f.detail }));
    f.code
}

fn configure_threads() -> CmdResult {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::invalid("invalid_environment", format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    // the global pool can only be set once per process; later calls keep the first size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_spec(c: &Common) -> Result<ModelSpec, Failure> {
    let text = std::fs::read_to_string(&c.model)
        .map_err(|e| Failure::invalid("io", format!("{}: {e}", c.model.display())))?;
    let spec = ModelSpec::from_json(&text)?;
    match &c.constants {
        None => Ok(spec),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::invalid("io", format!("{}: {e}", path.display())))?;
            let constants: DerivedConstants = serde_json::from_str(&text)
                .map_err(|e| Failure::invalid("invalid_parameter", format!("{}: {e}", path.display())))?;
            Ok(spec.with_constants(constants)?)
        }
    }
}

fn tol(c: &Common) -> Result<f64, Failure> {
    match c.tol {
        None => Ok(DEFAULT_TOL),
        Some(t) if t > 0.0 && t < 1.0 => Ok(t),
        Some(t) => Err(Failure::invalid("invalid_parameter", format!("--tol {t} must lie in (0, 1)"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("records serialize");
    s.push('\n');
    s
}

/// Writes `contents` to `dir/name` via a temporary file and rename.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> CmdResult {
    let io = |e: std::io::Error| Failure::numerical("io", format!("{}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}

/// The primary artifact: a file under `--out`, else stdout.
fn emit(c: &Common, out: &mut dyn Write, name: &str, contents: &str) -> CmdResult {
    match &c.out {
        Some(dir) => write_atomic(dir, name, contents),
        None => out
            .write_all(contents.as_bytes())
            .map_err(|e| Failure::numerical("io", e.to_string())),
    }
}

fn say(out: &mut dyn Write, s: &str) -> CmdResult {
    out.write_all(s.as_bytes())
        .map_err(|e| Failure::numerical("io", e.to_string()))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Derive(c) => {
            let spec = load_spec(&c)?;
            emit(&c, out, "constants.json", &to_json(spec.constants()))
        }
        Command::Classify(c) => {
            let spec = load_spec(&c)?;
            emit(&c, out, "verdict.json", &to_json(&dynamics_verdict(&spec).record()))
        }
        Command::FixedPoints(c) => {
            let spec = load_spec(&c)?;
            let opts = PositiveSearchOptions {
                tol: tol(&c)?,
                samples_per_orbit: c.n.unwrap_or(8),
                ..PositiveSearchOptions::default()
            };
            let census = fixed_point_census(&spec, &opts)?;
            emit(&c, out, "fixed-points.json", &to_json(&census))
        }
        Command::Simulate(c) => simulate(&c, out),
        Command::Portrait(c) => {
            let spec = load_spec(&c)?;
            let n = c.n.unwrap_or(100);
            if n == 0 {
                return Err(Failure::invalid("invalid_parameter", "--n must be at least 1"));
            }
            let portrait = sample_portrait(&spec, n, c.k.unwrap_or(5000), c.seed, tol(&c)?)?;
            emit(&c, out, "portrait.csv", &portrait.to_csv())?;
            if c.out.is_some() {
                say(out, &to_json(&portrait.counts))?;
            }
            Ok(())
        }
        Command::PeriodicOrbit(c) => periodic_orbit(&c, out),
        Command::ConstructMultiplicity(c) => {
            let spec = load_spec(&c)?;
            let tol = tol(&c)?;
            let report = multiplicity_report(&spec, c.n.unwrap_or(8), tol)?;
            let resonant = spec.with_omega(report.omega_star)?;
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
            write_atomic(&dir, "resonant-model.json", &to_json(resonant.params()))?;
            write_atomic(&dir, "multiplicity-report.json", &to_json(&report))?;
            say(out, &to_json(&report))
        }
        Command::Verify(c) => {
            let spec = load_spec(&c)?;
            let opts = SuiteOptions {
                tol: tol(&c)?,
                seed: c.seed,
                simplex_rays: c.n.unwrap_or(SuiteOptions::default().simplex_rays),
                simplex_iters: c.k,
                ..SuiteOptions::default()
            };
            let checks = run_suite(&spec, &opts);
            let table = format_table(&checks);
            if let Some(dir) = &c.out {
                write_atomic(dir, "verify.json", &to_json(&checks))?;
            }
            say(out, &table)?;
            if all_passed(&checks) {
                Ok(())
            } else {
                let failed: Vec<&str> = checks
                    .iter()
                    .filter(|c| c.status == seasonal_lv::verify::Status::Fail)
                    .map(|c| c.name)
                    .collect();
                Err(Failure::numerical("check_failed", failed.join(", ")))
            }
        }
        Command::Simplex(c) => {
            let spec = load_spec(&c)?;
            let mesh = approximate_carrying_simplex(&spec, c.n.unwrap_or(DEFAULT_RAYS), c.k, tol(&c)?)?;
            emit(&c, out, "simplex.csv", &mesh.to_csv())?;
            if !mesh.failures.is_empty() {
                // skipped rays are logged, not fatal
                eprintln!("{}", json!({ "skipped_rays": mesh.failures }));
            }
            Ok(())
        }
    }
}

fn simulate(c: &Common, out: &mut dyn Write) -> CmdResult {
    let spec = load_spec(c)?;
    let x0 = match c.x0 {
        Some(Point(p)) => Vec3::from(p),
        None => Vec3::new(0.1, 0.2, 0.3),
    };
    let seasons = c.k.unwrap_or(10);
    let per_season = c.n.unwrap_or(50);
    if seasons == 0 || per_season == 0 {
        return Err(Failure::invalid("invalid_parameter", "--k and --n must be at least 1"));
    }
    let dt = spec.omega() / per_season as f64;
    let samples = seasonal_samples(&spec, &x0, seasons as f64 * spec.omega(), dt, tol(c)?)?;
    let mut csv = String::from("t,x1,x2,x3\n");
    for (t, x) in samples {
        csv.push_str(&row(&[t, x[0], x[1], x[2]]));
    }
    emit(c, out, "trajectory.csv", &csv)
}

fn periodic_orbit(c: &Common, out: &mut dyn Write) -> CmdResult {
    let spec = load_spec(c)?;
    let x_hat = autonomous_positive_equilibrium(spec.a(), spec.b())?
        .ok_or_else(|| Failure::invalid("precondition_failed", "no positive equilibrium"))?;
    let seed = match c.x0 {
        Some(Point(p)) => Vec3::from(p),
        None => default_orbit_seed(&x_hat),
    };
    let opts = OrbitOptions {
        tol: tol(c)?,
        samples: c.n.unwrap_or(256),
        ..OrbitOptions::default()
    };
    let orbit = find_periodic_orbit(spec.a(), spec.b(), &seed, &opts)?;
    let class = minimal_period_and_eta(&spec, &orbit);
    let header = json!({
        "T_gamma": orbit.t_gamma,
        "residual": orbit.residual,
        "minimal": orbit.minimal,
        "curve": class,
    });
    let mut csv = String::from("t,x1,x2,x3\n");
    for (t, x) in orbit.times.iter().zip(&orbit.points) {
        csv.push_str(&row(&[*t, x[0], x[1], x[2]]));
    }
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    write_atomic(&dir, "orbit.csv", &csv)?;
    write_atomic(&dir, "orbit.json", &to_json(&header))?;
    say(out, &to_json(&header))
}

//! Command-line frontend: verify canonical inequalities, sweep the tilt
//! angle, run the weak-measurement simulation, cross-check the LHV
//! construction, exercise the witness polynomial suite, and search for
//! violations. JSON reports go to stdout, CSV artifacts to files.
//!
//! Exit codes: 0 expected outcome, 1 unexpected verdict, 2 usage error,
//! 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use bellmoment::error::Error;
use bellmoment::inequalities::{
    eval_cfrd, eval_in33, eval_in33_clamped, eval_in33r, eval_ine22, eval_ine22_clamped,
};
use bellmoment::lhv;
use bellmoment::scenarios::{bell_three_choices, sweep_ine22, tilted_two_choices};
use bellmoment::search::{bell_three_params, multi_start, tilted_params, NmOptions, SearchSpace};
use bellmoment::sospoly;
use bellmoment::table::MomentTable;
use bellmoment::weakmeas::{table_from_weak, Scheme, WeakConfig};

/// In33 on the null-mixed Bell table has margin 1 − (9/8)·r, so the
/// violation only survives above this entanglement rate.
const IN33_NULL_CROSSOVER: f64 = 8.0 / 9.0;

const OUT_DIR_ENV: &str = "BELLMOMENT_OUT_DIR";

#[derive(Parser)]
#[command(name = "bellmoment", version, about = "Moment-based tests of local realism")]
struct Cli {
    /// JSON config file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for CSV artifacts (default: $BELLMOMENT_OUT_DIR or ".")
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a canonical inequality and compare against the expected verdict
    Verify {
        /// One of: in33, in33r, ine22, cfrd
        name: String,
        /// Mix the table with a null event at rate 1−r (r = entanglement rate)
        #[arg(long)]
        null_rate: Option<f64>,
        /// Tilt angle for ine22 (radians, default π/6)
        #[arg(long)]
        phi: Option<f64>,
    },
    /// Sweep the tilt-angle inequality over a φ grid, emit CSV
    Sweep {
        #[arg(long)]
        phi_start: Option<f64>,
        #[arg(long)]
        phi_end: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// CSV output file (default: sweep.csv in the output directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate weak measurements of a canonical scenario
    Simulate {
        /// One of: bell, tilted
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        phi: Option<f64>,
        /// Measurement strength
        #[arg(long)]
        g: Option<f64>,
        /// One of: subtract, twin
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output file for the estimated table
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-input cross-check of the LHV construction
    LhvCheck {
        /// Schmidt dimension
        #[arg(long)]
        n: Option<usize>,
        /// A-side operator dimension (default: n)
        #[arg(long)]
        dim_a: Option<usize>,
        /// B-side operator dimension (default: n)
        #[arg(long)]
        dim_b: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Witness polynomial suite: minimization scan plus SOS infeasibility
    Poly {
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of independent scan rows in the CSV
        #[arg(long)]
        scans: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-start violation search
    Search {
        /// One of: in33, ine22, cfrd
        name: String,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        projectors_only: bool,
        #[arg(long)]
        max_evals: Option<usize>,
        /// CSV output file for per-start margins
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Optional config file; any field present here is a default that
/// command-line flags override.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    threads: Option<usize>,
    out_dir: Option<PathBuf>,
    null_rate: Option<f64>,
    phi: Option<f64>,
    g: Option<f64>,
    scheme: Option<String>,
    samples: Option<usize>,
    seed: Option<u64>,
    steps: Option<usize>,
    trials: Option<usize>,
    restarts: Option<usize>,
    scans: Option<usize>,
    starts: Option<usize>,
    max_evals: Option<usize>,
}

fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownInequality(_)
            | Error::InvalidConfig(_)
            | Error::PhiOutOfRange(_)
            | Error::RateOutOfRange(_) => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("io: {e}"))
    }
}

fn out_path(out_dir: &Path, file: Option<PathBuf>, default_name: &str) -> PathBuf {
    match file {
        Some(p) if p.is_absolute() => p,
        Some(p) => out_dir.join(p),
        None => out_dir.join(default_name),
    }
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn emit(report: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(report).unwrap());
}

fn cmd_verify(
    name: &str,
    null_rate: Option<f64>,
    phi: f64,
) -> Result<(serde_json::Value, bool), CliError> {
    let bell_table = || -> Result<MomentTable, Error> { bell_three_choices().table() };
    let (report, expect_violated) = match name {
        "in33" => {
            let mut t = bell_table()?;
            if let Some(r) = null_rate {
                t = t.null_mix(r)?;
            }
            let expect = null_rate.is_none_or(|r| r > IN33_NULL_CROSSOVER);
            (eval_in33(&t)?, expect)
        }
        "in33r" => {
            let r = null_rate.unwrap_or(1.0);
            let t = bell_table()?.null_mix(r)?;
            (eval_in33r(&t, r)?, true)
        }
        "ine22" => {
            let t = tilted_two_choices(phi)?.table()?;
            let expect = phi > 0.0 && phi < std::f64::consts::FRAC_PI_4;
            (eval_ine22(&t)?, expect)
        }
        "cfrd" => {
            let mut t = bell_table()?;
            if let Some(r) = null_rate {
                t = t.null_mix(r)?;
            }
            (eval_cfrd(&t)?, false)
        }
        other => return Err(Error::UnknownInequality(other.to_string()).into()),
    };
    let as_expected = report.satisfied != expect_violated;
    let value = json!({
        "command": "verify",
        "config": { "name": name, "null_rate": null_rate, "phi": phi },
        "report": report,
        "expected_violated": expect_violated,
        "as_expected": as_expected,
    });
    Ok((value, as_expected))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let file_cfg: FileConfig = match &cli.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Usage(format!("config file: {e}")))?,
        None => FileConfig::default(),
    };
    if let Some(threads) = cli.threads.or(file_cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("threads: {e}")))?;
    }
    let out_dir = cli
        .out_dir
        .clone()
        .or(file_cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    match cli.cmd {
        Cmd::Verify { name, null_rate, phi } => {
            let null_rate = null_rate.or(file_cfg.null_rate);
            let phi = pick(phi, file_cfg.phi, std::f64::consts::FRAC_PI_6);
            let (value, ok) = cmd_verify(&name, null_rate, phi)?;
            emit(&value);
            Ok(ok)
        }
        Cmd::Sweep { phi_start, phi_end, steps, out } => {
            let phi_start = phi_start.unwrap_or(0.0);
            let phi_end = phi_end.unwrap_or(std::f64::consts::FRAC_PI_4);
            let steps = pick(steps, file_cfg.steps, 100);
            if steps < 2 {
                return Err(CliError::Usage("steps must be >= 2".into()));
            }
            let grid: Vec<f64> = (0..steps)
                .map(|i| phi_start + (phi_end - phi_start) * i as f64 / (steps - 1) as f64)
                .collect();
            let points = sweep_ine22(&grid)?;
            let rows: Vec<String> = points
                .iter()
                .map(|p| {
                    format!("{},{},{},{}", fmt17(p.phi), fmt17(p.lhs), fmt17(p.rhs), fmt17(p.margin))
                })
                .collect();
            let path = out_path(&out_dir, out, "sweep.csv");
            write_csv(&path, "phi,lhs,rhs,margin", &rows)?;
            let best = points
                .iter()
                .min_by(|a, b| a.margin.total_cmp(&b.margin))
                .unwrap();
            emit(&json!({
                "command": "sweep",
                "config": { "phi_start": phi_start, "phi_end": phi_end, "steps": steps },
                "csv": path,
                "min_margin": best.margin,
                "argmin_phi": best.phi,
            }));
            Ok(true)
        }
        Cmd::Simulate { scenario, phi, g, scheme, samples, seed, out } => {
            let scenario_name = scenario.unwrap_or_else(|| "bell".into());
            let phi = pick(phi, file_cfg.phi, std::f64::consts::FRAC_PI_6);
            let scheme = match pick(scheme, file_cfg.scheme, "twin".into()).as_str() {
                "subtract" => Scheme::Subtract,
                "twin" => Scheme::Twin,
                other => return Err(CliError::Usage(format!("unknown scheme '{other}'"))),
            };
            let cfg = WeakConfig {
                g: pick(g, file_cfg.g, 0.5),
                scheme,
                samples: pick(samples, file_cfg.samples, 100_000),
                seed: pick(seed, file_cfg.seed, 0),
            };
            let s = match scenario_name.as_str() {
                "bell" => bell_three_choices(),
                "tilted" => tilted_two_choices(phi)?,
                other => return Err(CliError::Usage(format!("unknown scenario '{other}'"))),
            };
            let weak = table_from_weak(&s, &cfg)?;
            let mut verdicts = Vec::new();
            if scenario_name == "bell" {
                let (m, sig) =
                    weak.margin_with_sigma(|t| eval_in33_clamped(t, bellmoment::consts::NOISE_CLAMP))?;
                verdicts.push(json!({ "inequality": "in33", "margin": m, "sigma": sig }));
                let (m, sig) = weak.margin_with_sigma(eval_cfrd)?;
                verdicts.push(json!({ "inequality": "cfrd", "margin": m, "sigma": sig }));
            } else {
                let (m, sig) =
                    weak.margin_with_sigma(|t| eval_ine22_clamped(t, bellmoment::consts::NOISE_CLAMP))?;
                verdicts.push(json!({ "inequality": "ine22", "margin": m, "sigma": sig }));
            }
            let path = out_path(&out_dir, out, "simulate.csv");
            fs::write(&path, weak.table.to_csv())?;
            emit(&json!({
                "command": "simulate",
                "config": { "scenario": scenario_name, "phi": phi, "g": cfg.g,
                            "scheme": cfg.scheme, "samples": cfg.samples, "seed": cfg.seed },
                "csv": path,
                "verdicts": verdicts,
            }));
            Ok(true)
        }
        Cmd::LhvCheck { n, dim_a, dim_b, trials, seed } => {
            let n = n.unwrap_or(2);
            if n < 2 {
                return Err(CliError::Usage("n must be >= 2".into()));
            }
            let dim_a = dim_a.unwrap_or(n);
            let dim_b = dim_b.unwrap_or(n);
            if dim_a < n || dim_b < n {
                return Err(CliError::Usage("dims must be >= n".into()));
            }
            let trials = pick(trials, file_cfg.trials, 100);
            let seed = pick(seed, file_cfg.seed, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst = 0.0f64;
            let mut c_branches = 0usize;
            for _ in 0..trials {
                let ap = random_hermitian(&mut rng, dim_a);
                let am = random_hermitian(&mut rng, dim_a);
                let bs = vec![random_hermitian(&mut rng, dim_b), random_hermitian(&mut rng, dim_b)];
                let model = lhv::build_lhv(n, &ap, &am, &bs)?;
                c_branches += model.c_positive_branches;
                let got = lhv::lhv_moments(&model)?;
                let want = lhv::quantum_reference_table(n, &ap, &am, &bs)?;
                worst = worst.max(lhv::max_moment_discrepancy(&got, &want));
            }
            let ok = worst <= 1e-9;
            emit(&json!({
                "command": "lhv-check",
                "config": { "n": n, "dim_a": dim_a, "dim_b": dim_b, "trials": trials, "seed": seed },
                "max_discrepancy": worst,
                "c_positive_branches": c_branches,
                "all_within_tolerance": ok,
            }));
            Ok(ok)
        }
        Cmd::Poly { restarts, seed, scans, out } => {
            let restarts = pick(restarts, file_cfg.restarts, 100);
            let seed = pick(seed, file_cfg.seed, 0);
            let scans = pick(scans, file_cfg.scans, 10);
            let mut rows = Vec::new();
            let mut global_min = f64::INFINITY;
            for i in 0..scans {
                let (v, p) = sospoly::min_w(restarts, seed + i as u64);
                global_min = global_min.min(v);
                rows.push(format!(
                    "{},{},{},{},{},{}",
                    seed + i as u64,
                    fmt17(v),
                    fmt17(p.a1),
                    fmt17(p.a2),
                    fmt17(p.b1),
                    fmt17(p.b2)
                ));
            }
            let path = out_path(&out_dir, out, "poly_scan.csv");
            write_csv(&path, "seed,min_value,a1,a2,b1,b2", &rows)?;
            let cert = sospoly::non_sos_certificate();
            let ok = global_min >= -1e-8 && cert.infeasible;
            emit(&json!({
                "command": "poly",
                "config": { "restarts": restarts, "seed": seed, "scans": scans },
                "csv": path,
                "min_value": global_min,
                "certificate": cert,
            }));
            Ok(ok)
        }
        Cmd::Search { name, starts, seed, projectors_only, max_evals, out } => {
            let starts = pick(starts, file_cfg.starts, 100);
            let seed = pick(seed, file_cfg.seed, 0);
            let (m_a, m_b) = if name == "in33" { (3, 3) } else { (2, 2) };
            let space = SearchSpace { m_a, m_b, projectors_only };
            let opts = NmOptions {
                max_evals: pick(max_evals, file_cfg.max_evals, 4000),
                ..Default::default()
            };
            let extra: Vec<Vec<f64>> = match name.as_str() {
                "in33" if !projectors_only => vec![bell_three_params()],
                "ine22" if !projectors_only => {
                    vec![tilted_params(std::f64::consts::FRAC_PI_6)?]
                }
                _ => Vec::new(),
            };
            let result = multi_start(&space, &name, starts, seed, &opts, &extra)?;
            let rows: Vec<String> = result
                .start_margins
                .iter()
                .enumerate()
                .map(|(i, m)| format!("{i},{}", fmt17(*m)))
                .collect();
            let path = out_path(&out_dir, out, "search.csv");
            write_csv(&path, "start,margin", &rows)?;
            emit(&json!({
                "command": "search",
                "config": { "name": name, "starts": starts, "seed": seed,
                            "projectors_only": projectors_only, "max_evals": opts.max_evals },
                "csv": path,
                "result": result,
            }));
            Ok(true)
        }
    }
}

/// Seeded dense Hermitian test input for lhv-check.
fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> bellmoment::ComplexMatrix {
    use num_complex::Complex64;
    use rand::Rng;
    let mut m = bellmoment::ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(rng.random_range(-1.5..1.5), 0.0);
        for j in (i + 1)..dim {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

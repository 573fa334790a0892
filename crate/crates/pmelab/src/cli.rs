//! Batch command-line front end.
//!
//! Exit codes: 0 on success, 1 on validation failures (arguments, config),
//! 2 on runtime failures (solver breakdown, failed checks). Diagnostics go
//! to standard error; data goes to files only.

use crate::experiments::{emit_certificate, emit_csv, run_scenario, Scenario};
use crate::inequality::{
    local_expansion_check, region_scan_ab, region_scan_alphabeta, sbp_inequality_check, ABPoint,
    AxisSpec, InequalityConfig, LogGrid, ScanOptions,
};
use crate::{Error, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "pmelab",
    about = "Entropy-decay laboratory for an implicit porous-medium scheme",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario config and emit per-step CSV tables plus certificates.
    Simulate(RunArgs),
    /// Run a scenario config and emit decay certificates only.
    Analyze(RunArgs),
    /// Scan the (A, B) exponent plane and emit a region CSV.
    ScanAb(ScanAbArgs),
    /// Scan the (alpha, beta) plane through the exponent map.
    ScanAlphabeta(ScanAlphaBetaArgs),
    /// Randomized vector-level summation-by-parts check at one (A, B).
    CheckSbp(CheckSbpArgs),
    /// Local expansion convergence report at one (A, B).
    CheckLocal(CheckLocalArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario config file (TOML key-value format).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// key=value overrides applied after the config is parsed.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct ScanCommonArgs {
    #[arg(long)]
    eps: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker-count hint for the scan (0 = default).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Relative admissibility tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Pointwise (X, Y) domain as min:max:count, log-spaced.
    #[arg(long)]
    domain: Option<String>,
}

#[derive(Debug, Args)]
struct ScanAbArgs {
    /// A axis as lo:hi:count (cells over (lo, hi]).
    #[arg(long, allow_hyphen_values = true)]
    a: AxisSpec,
    /// B axis as lo:hi:count.
    #[arg(long, allow_hyphen_values = true)]
    b: AxisSpec,
    #[command(flatten)]
    common: ScanCommonArgs,
}

#[derive(Debug, Args)]
struct ScanAlphaBetaArgs {
    /// alpha axis as lo:hi:count.
    #[arg(long, allow_hyphen_values = true)]
    alpha: AxisSpec,
    /// beta axis as lo:hi:count.
    #[arg(long, allow_hyphen_values = true)]
    beta: AxisSpec,
    #[command(flatten)]
    common: ScanCommonArgs,
}

#[derive(Debug, Args)]
struct CheckSbpArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    /// kappa = eps * A.
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Where to write counterexample vectors, if any are found.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value overrides: samples, n, delta, zeros, seed.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct CheckLocalArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    /// Use kappa = eps * A; defaults to the continuous-optimal kappa.
    #[arg(long)]
    eps: Option<f64>,
    /// Output directory for the convergence report.
    #[arg(long)]
    out: PathBuf,
}

/// Parse and run; returns the process exit status.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pmelab: {e}");
            match e {
                Error::NonConvergence { .. } | Error::StepFailed { .. } | Error::Io { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Simulate(args) => run_scenario_command(args, true),
        Command::Analyze(args) => run_scenario_command(args, false),
        Command::ScanAb(args) => scan_ab_command(args),
        Command::ScanAlphabeta(args) => scan_alphabeta_command(args),
        Command::CheckSbp(args) => check_sbp_command(args),
        Command::CheckLocal(args) => check_local_command(args),
    }
}

fn load_scenario(args: &RunArgs) -> Result<Scenario> {
    if !args.config.exists() {
        return Err(Error::Config(format!(
            "config file not found: {}",
            args.config.display()
        )));
    }
    let mut scenario = Scenario::from_toml_file(&args.config)?;
    for ov in &args.overrides {
        let (key, value) = ov.split_once('=').ok_or_else(|| {
            Error::Config(format!("override must be key=value, got '{ov}'"))
        })?;
        scenario.apply_override(key, value)?;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn run_scenario_command(args: RunArgs, emit_tables: bool) -> Result<i32> {
    // Validate everything before any file is created.
    let scenario = load_scenario(&args)?;
    let mut artifacts = run_scenario(&scenario)?;
    ensure_dir(&args.out)?;
    for artifact in &mut artifacts {
        if emit_tables {
            let p = emit_csv(artifact, &args.out)?;
            eprintln!("wrote {}", p.display());
        }
        let p = emit_certificate(artifact, &args.out)?;
        eprintln!("wrote {}", p.display());
        let cert = &artifact.certificate;
        eprintln!(
            "{} N={} tau={:e}: a1={} a2={} a3={} bound={} fitted_rate={:?}",
            artifact.scenario_name,
            artifact.n_cells,
            artifact.tau,
            cert.a1_pass,
            cert.a2_pass,
            cert.a3_pass,
            cert.bound_pass,
            cert.fitted_rate
        );
    }
    Ok(0)
}

fn parse_domain(spec: &Option<String>) -> Result<LogGrid> {
    match spec {
        None => Ok(LogGrid::default_domain()),
        Some(s) => {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::invalid(format!(
                    "domain must be min:max:count, got '{s}'"
                )));
            }
            let min: f64 = parts[0]
                .parse()
                .map_err(|_| Error::invalid("bad domain min"))?;
            let max: f64 = parts[1]
                .parse()
                .map_err(|_| Error::invalid("bad domain max"))?;
            let n: usize = parts[2]
                .parse()
                .map_err(|_| Error::invalid("bad domain count"))?;
            LogGrid::new(min, max, n)
        }
    }
}

fn scan_ab_command(args: ScanAbArgs) -> Result<i32> {
    let domain = parse_domain(&args.common.domain)?;
    let opts = ScanOptions {
        workers: args.common.workers,
        tol_rel: args.common.tol,
    };
    let scan = region_scan_ab(args.a, args.b, args.common.eps, &domain, &opts)?;
    ensure_dir(&args.common.out)?;
    let path = args
        .common
        .out
        .join(format!("region_ab_eps{:e}.csv", args.common.eps));
    scan.write_csv(&path)?;
    eprintln!(
        "wrote {} ({} admissible of {} cells)",
        path.display(),
        scan.admissible_count(),
        scan.cells().len()
    );
    Ok(0)
}

fn scan_alphabeta_command(args: ScanAlphaBetaArgs) -> Result<i32> {
    let domain = parse_domain(&args.common.domain)?;
    let opts = ScanOptions {
        workers: args.common.workers,
        tol_rel: args.common.tol,
    };
    let scan = region_scan_alphabeta(args.alpha, args.beta, args.common.eps, &domain, &opts)?;
    ensure_dir(&args.common.out)?;
    let path = args
        .common
        .out
        .join(format!("region_alphabeta_eps{:e}.csv", args.common.eps));
    scan.write_csv(&path)?;
    eprintln!(
        "wrote {} ({} admissible of {} cells)",
        path.display(),
        scan.admissible_count(),
        scan.cells().len()
    );
    Ok(0)
}

struct SbpSettings {
    samples: usize,
    n: usize,
    delta: f64,
    zeros: f64,
    seed: u64,
}

impl SbpSettings {
    fn from_overrides(overrides: &[String]) -> Result<Self> {
        let mut s = SbpSettings {
            samples: 10_000,
            n: 16,
            delta: 0.05,
            zeros: 0.0,
            seed: 42,
        };
        for ov in overrides {
            let (key, value) = ov.split_once('=').ok_or_else(|| {
                Error::Config(format!("override must be key=value, got '{ov}'"))
            })?;
            let bad = || Error::Config(format!("bad override {ov}"));
            match key {
                "samples" => s.samples = value.parse().map_err(|_| bad())?,
                "n" => s.n = value.parse().map_err(|_| bad())?,
                "delta" => s.delta = value.parse().map_err(|_| bad())?,
                "zeros" => s.zeros = value.parse().map_err(|_| bad())?,
                "seed" => s.seed = value.parse().map_err(|_| bad())?,
                _ => return Err(Error::Config(format!("unknown override key '{key}'"))),
            }
        }
        if s.n < 2 {
            return Err(Error::Config("n must be >= 2".into()));
        }
        Ok(s)
    }
}

fn check_sbp_command(args: CheckSbpArgs) -> Result<i32> {
    let settings = SbpSettings::from_overrides(&args.overrides)?;
    if !(args.eps > 0.0 && args.eps <= 1.0) {
        return Err(Error::invalid(format!(
            "eps must lie in (0, 1], got {}",
            args.eps
        )));
    }
    let ab = ABPoint::new(args.a, args.b);
    let kappa = args.eps * args.a;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut failures: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for _ in 0..settings.samples {
        let w: Vec<f64> = (0..settings.n)
            .map(|_| {
                if settings.zeros > 0.0 && rng.gen::<f64>() < settings.zeros {
                    0.0
                } else {
                    1.0 + settings.delta * (2.0 * rng.gen::<f64>() - 1.0)
                }
            })
            .collect();
        let check = sbp_inequality_check(&w, ab, kappa)?;
        if !check.holds {
            failures.push((w, check.lhs, check.rhs));
        }
    }
    eprintln!(
        "sbp check at (A, B) = ({}, {}), kappa = {kappa}: {} failures in {} samples",
        args.a,
        args.b,
        failures.len(),
        settings.samples
    );
    if failures.is_empty() {
        return Ok(0);
    }
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let path = dir.join(format!("sbp_counterexamples_A{}_B{}.csv", args.a, args.b));
        let mut f = std::fs::File::create(&path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        writeln!(f, "lhs,rhs,w").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        for (w, lhs, rhs) in &failures {
            let ws: Vec<String> = w.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(f, "{lhs:.16e},{rhs:.16e},{}", ws.join(";")).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
        eprintln!("wrote {}", path.display());
    }
    Ok(2)
}

fn check_local_command(args: CheckLocalArgs) -> Result<i32> {
    let ab = ABPoint::new(args.a, args.b);
    let kappa = match args.eps {
        Some(eps) => {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
            }
            eps * args.a
        }
        None => crate::inequality::kappa_c(ab)?,
    };
    let cfg = InequalityConfig::from_parts(
        ab,
        kappa,
        crate::inequality::c_shift(ab, kappa),
        (ab.a + ab.b + 1.0) / 3.0,
        crate::inequality::MeanKind::Canonical,
    )?;
    let h_values: Vec<f64> = (0..8).map(|j| 1e-2 / f64::from(1u32 << j)).collect();
    let offsets: Vec<(f64, f64)> = vec![
        (0.6, 0.0),
        (-0.6, 0.0),
        (0.0, 0.6),
        (0.5, 0.5),
        (-0.5, 0.5),
        (1.0, -1.0),
        (-1.0, 1.0),
        (0.25, -0.75),
    ];
    ensure_dir(&args.out)?;
    let path = args
        .out
        .join(format!("local_expansion_A{}_B{}.csv", args.a, args.b));
    let mut body = String::from("u,v,h,t_over_h4,q_target,error,order\n");
    let mut all_ok = true;
    for (u, v) in offsets {
        let report = local_expansion_check(ab, cfg.kappa(), cfg.c(), cfg.rho(), u, v, &h_values)?;
        let order = report
            .order
            .map(|o| format!("{o:.6}"))
            .unwrap_or_else(|| "floor".into());
        for e in &report.entries {
            body.push_str(&format!(
                "{u:.3},{v:.3},{:.6e},{:.16e},{:.16e},{:.6e},{order}\n",
                e.h, e.t_over_h4, report.q_target, e.error
            ));
        }
        if !report.converges(0.8) || report.q_target < -1e-8 {
            all_ok = false;
            eprintln!(
                "divergent expansion at (u, v) = ({u}, {v}): q = {}, order = {order}",
                report.q_target
            );
        }
    }
    std::fs::write(&path, body).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    eprintln!("wrote {}", path.display());
    Ok(if all_ok { 0 } else { 2 })
}

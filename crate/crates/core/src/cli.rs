//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 failed
//! self-check.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::thread;

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};

use crate::config;
use crate::cruise_law::LawKind;
use crate::error::{Error, Result};
use crate::report;
use crate::simulation::{simulate, SimulationResult};
use crate::types::ScenarioConfig;

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    ModelBased,
    PlantOptimal,
    Both,
}

/// Simulates model-based and plant-optimal cruise control and compares them.
#[derive(Debug, Parser)]
#[command(name = "pmp-cruise", version)]
pub struct Args {
    /// Scenario file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    pub mode: Mode,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the sampling interval
    #[arg(long)]
    pub dt: Option<f64>,
    /// Override the horizon length
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Run self-checks (implies both modes); exit 3 if any fails
    #[arg(long)]
    pub check: bool,
    /// Seed for the randomized self-checks
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        e if e.is_config_error() => EXIT_CONFIG,
        Error::Io { .. } | Error::Csv(_) => EXIT_IO,
        // numerical failures only arise inside the self-checks
        _ => EXIT_CHECK,
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match execute(&args) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn scenario(args: &Args) -> Result<ScenarioConfig> {
    // overrides apply before validation
    let text = fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let mut cfg = config::parse(&text)?;
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t) = args.horizon {
        cfg.horizon_t = t;
    }
    if let Some(b) = args.beta1 {
        cfg.penalty.beta1 = b;
    }
    if let Some(b) = args.beta2 {
        cfg.penalty.beta2 = b;
    }
    cfg.validate()
}

fn run_modes(
    cfg: &ScenarioConfig,
    mode: Mode,
) -> Result<(Option<SimulationResult>, Option<SimulationResult>)> {
    match mode {
        Mode::ModelBased => Ok((Some(simulate(cfg, LawKind::ModelBased)?), None)),
        Mode::PlantOptimal => Ok((None, Some(simulate(cfg, LawKind::PlantOptimal)?))),
        Mode::Both => thread::scope(|s| {
            let mb = s.spawn(|| simulate(cfg, LawKind::ModelBased));
            let opt = s.spawn(|| simulate(cfg, LawKind::PlantOptimal));
            let mb = mb.join().expect("model-based run panicked")?;
            let opt = opt.join().expect("plant-optimal run panicked")?;
            Ok((Some(mb), Some(opt)))
        }),
    }
}

fn print_run(res: &SimulationResult) {
    out!(
        "{}: switch_time={} max_constraint_violation={} j_act={} j_mod={}",
        res.kind.name(),
        res.switch_time
            .map_or_else(|| "none".into(), |t| report::format_sig(t, 9)),
        report::format_sig(res.max_constraint_violation, 9),
        report::format_sig(res.j_act, 9),
        report::format_sig(res.j_mod, 9),
    );
}

/// Returns `Ok(false)` when a self-check failed.
fn execute(args: &Args) -> Result<bool> {
    let cfg = scenario(args)?;
    // the self-checks compare both strategies
    let mode = if args.check { Mode::Both } else { args.mode };
    let (mb, opt) = run_modes(&cfg, mode)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    for res in [&mb, &opt].into_iter().flatten() {
        let path = args.out.join(format!("{}.csv", res.kind.name()));
        report::write_trajectory_csv(res, &path)?;
        print_run(res);
    }

    let (Some(mb), Some(opt)) = (&mb, &opt) else {
        return Ok(true);
    };
    let path = args.out.join("equivalence.txt");
    let analysis = report::write_equivalence_report(mb, opt, &cfg, &path)?;
    out!(
        "coincidence_fraction={} report={}",
        report::format_sig(analysis.coincidence_fraction, 9),
        path.display()
    );

    if !args.check {
        return Ok(true);
    }
    let mut all = true;
    for c in report::self_check(&cfg, mb, opt, args.seed)? {
        out!(
            "check {:<36} {}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
        all &= c.passed;
    }
    Ok(all)
}

//! Command-line front end: `bounds`, `simulate` and `sweep`.
//!
//! Exit statuses: 0 success, 2 usage error, 3 invalid parameters or
//! settings, 4 liveness failure (cars left on the road at the horizon),
//! 5 I/O failure. Data goes to standard output, progress and diagnostics
//! to standard error. Every output directory receives `manifest.toml`, a
//! resolved config that reproduces the run when passed back as `--config`.

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::bounds;
use crate::config::RunConfig;
use crate::controllers::ControllerKind;
use crate::experiments::{self, Aggregate};
use crate::sim::{self, SimResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_LIVENESS: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const BOUNDS_FILE: &str = "bounds.json";
pub const RESULT_FILE: &str = "result.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";

#[derive(Debug, Parser)]
#[command(name = "intersection-qos", version, about = "Sojourn-time bounds and traffic-light controller comparison")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the analytic sojourn bounds.
    Bounds(Common),
    /// Run one simulation.
    Simulate(Common),
    /// Run a controller comparison over R values and seeds.
    Sweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config; missing sections take the baseline values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// adaptive_deadline, fixed_cycle_1 or fixed_cycle_2 (aliases: adaptive, fixed1, fixed2).
    #[arg(long, value_name = "NAME")]
    controller: Option<ControllerKind>,
    /// Simulation seed; for sweeps, the seed of the first replication.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Replications per sweep cell.
    #[arg(long, value_name = "INT")]
    seeds: Option<u64>,
    /// Comma-separated ratios M1/M2.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    r_values: Option<Vec<f64>>,
    /// Simulation step (s).
    #[arg(long, value_name = "FLOAT")]
    dt: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print structured output instead of text.
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

/// Runs the tool with `args` (including the program name) and returns the
/// exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Bounds(c) => cmd_bounds(&c, stdout),
        Command::Simulate(c) => cmd_simulate(&c, stdout, stderr),
        Command::Sweep(c) => cmd_sweep(&c, stdout, stderr),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn resolve_config(c: &Common, subcommand: &str) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            crate::config::ConfigError::Read { .. } => Failure::new(EXIT_IO, e.to_string()),
            _ => Failure::new(EXIT_INVALID, e.to_string()),
        })?,
        None => RunConfig::default(),
    };
    cfg.tool_version = None;
    if let Some(kind) = c.controller {
        cfg.controller.kind = kind;
        cfg.sweep.controllers = vec![kind];
    }
    if let Some(seed) = c.seed {
        cfg.sim.seed = seed;
        cfg.sweep.base_seed = seed;
    }
    if let Some(n) = c.seeds {
        cfg.sweep.seeds = n;
    }
    if let Some(rs) = &c.r_values {
        if subcommand == "simulate" {
            match rs.as_slice() {
                [r] => cfg.scenario.r = *r,
                _ => return Err(Failure::new(EXIT_USAGE, "simulate takes a single --r-values entry")),
            }
        } else {
            cfg.sweep.r_values = rs.clone();
        }
    }
    if let Some(dt) = c.dt {
        cfg.sim.dt = dt;
    }
    Ok(cfg)
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_INVALID, e.to_string())
}

/// Writes `bytes` to `dir/name` via a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, dir.join(name)));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(dir, name, bytes).map_err(|e| Failure::io(&dir.join(name), e))
}

fn emit(stdout: &mut dyn Write, text: &str) -> Result<(), Failure> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))
}

fn cmd_bounds(c: &Common, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = resolve_config(c, "bounds")?;
    let params = cfg.validated_params().map_err(invalid)?;
    let report = bounds::bounds_report(&*params);
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(dir) = &c.out {
        write_out(dir, BOUNDS_FILE, json.as_bytes())?;
        write_out(dir, MANIFEST_FILE, cfg.manifest().as_bytes())?;
    }
    if c.json {
        emit(stdout, &json)?;
    } else {
        let n = params.capacity();
        let text = format!(
            "D_min = {:.2} s ({:.4})\nD_max = {:.2} s ({:.4})\nT_1 = {:.4} s\nT_N = {:.4} s (N = {n})\nDeltaT_w = {:.4} s\nDeltaT_t = {:.4} s\nmu_max = {:.4} cars/s\n",
            report.d_min,
            report.d_min,
            report.d_max,
            report.d_max,
            report.t_1,
            report.t_n,
            report.delta_t_w,
            report.delta_t_t,
            report.mu_max
        );
        emit(stdout, &text)?;
    }
    Ok(EXIT_OK)
}

#[derive(serde::Serialize)]
struct SimSummary<'a> {
    controller: ControllerKind,
    mean_sojourn: Option<f64>,
    worst_avg: Option<f64>,
    max_sojourn: [Option<f64>; 2],
    unfinished: &'a [u32],
    end_time: f64,
}

fn cmd_simulate(c: &Common, stdout: &mut dyn Write, stderr: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    let cfg = resolve_config(c, "simulate")?;
    let params = cfg.validated_params().map_err(invalid)?;
    cfg.sim.check().map_err(invalid)?;
    let mut controller = cfg.controller.resolve(&params).map_err(invalid)?;
    let init = cfg
        .scenario
        .initial_state(&params, cfg.sim.seed)
        .map_err(invalid)?;
    let _ = writeln!(
        stderr,
        "simulating {} cars under {}",
        init.total(),
        cfg.controller.kind
    );
    let result = sim::run(&params, &init, &mut controller, &cfg.sim).map_err(invalid)?;

    if let Some(dir) = &c.out {
        let mut trace = Vec::new();
        result.write_trace(&mut trace).expect("in-memory write");
        let stored = SimResult {
            events: Vec::new(),
            ..result.clone()
        };
        write_out(dir, RESULT_FILE, (stored.to_json() + "\n").as_bytes())?;
        if cfg.sim.record_trace {
            write_out(dir, TRACE_FILE, &trace)?;
        }
        write_out(dir, MANIFEST_FILE, cfg.manifest().as_bytes())?;
    }

    let summary = SimSummary {
        controller: cfg.controller.kind,
        mean_sojourn: result.mean_sojourn,
        worst_avg: result.worst_avg(),
        max_sojourn: result.max_sojourn,
        unfinished: &result.liveness_failures,
        end_time: result.end_time,
    };
    if c.json {
        emit(stdout, &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    } else {
        let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.2} s"));
        let text = format!(
            "mean_sojourn = {}\nworst_avg = {}\nmax_sojourn queue 1 = {}\nmax_sojourn queue 2 = {}\n",
            fmt(summary.mean_sojourn),
            fmt(summary.worst_avg),
            fmt(summary.max_sojourn[0]),
            fmt(summary.max_sojourn[1]),
        );
        emit(stdout, &text)?;
    }
    if result.is_live() {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(
            stderr,
            "liveness failure: {} car(s) still on the road at t = {}",
            result.liveness_failures.len(),
            result.end_time
        );
        Ok(EXIT_LIVENESS)
    }
}

/// Aligned text table of per-cell means and standard deviations.
pub fn aggregate_text(agg: &Aggregate) -> String {
    let mut s = format!(
        "{:<18} {:>5} {:>4} {:>14} {:>14} {:>6}\n",
        "controller", "R", "n", "mean_sojourn", "worst_avg", "failed"
    );
    for c in &agg.cells {
        let _ = writeln!(
            s,
            "{:<18} {:>5} {:>4} {:>7.2} ±{:>5.2} {:>7.2} ±{:>5.2} {:>6}",
            c.controller.name(),
            c.r,
            c.n,
            c.mean_sojourn.mean,
            c.mean_sojourn.sd,
            c.worst_avg.mean,
            c.worst_avg.sd,
            c.unfinished_runs
        );
    }
    s
}

fn cmd_sweep(c: &Common, stdout: &mut dyn Write, stderr: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    let cfg = resolve_config(c, "sweep")?;
    let params = cfg.validated_params().map_err(invalid)?;
    cfg.sim.check().map_err(invalid)?;
    let spec = cfg.sweep_spec();
    let scenario = cfg.scenario.spec();
    let total = spec.controllers.len() * spec.r_values.len() * spec.seeds as usize;
    let _ = writeln!(stderr, "sweep: {total} cells");
    let step = (total / 10).max(1);
    let log = std::sync::Mutex::new(&mut *stderr);
    let table = experiments::run_sweep(&params, &scenario, &spec, &cfg.sim, &|done, total| {
        if done % step == 0 || done == total {
            if let Ok(mut w) = log.lock() {
                let _ = writeln!(w, "  {done}/{total}");
            }
        }
    })
    .map_err(invalid)?;
    let agg = experiments::aggregate(&table).map_err(invalid)?;
    let csv = table.to_csv();

    match &c.out {
        Some(dir) => {
            write_out(dir, METRICS_FILE, csv.as_bytes())?;
            write_out(dir, AGGREGATE_FILE, (agg.to_json() + "\n").as_bytes())?;
            write_out(dir, MANIFEST_FILE, cfg.manifest().as_bytes())?;
            if c.json {
                emit(stdout, &(agg.to_json() + "\n"))?;
            } else {
                emit(stdout, &aggregate_text(&agg))?;
            }
        }
        None if c.json => emit(stdout, &(agg.to_json() + "\n"))?,
        None => emit(stdout, &csv)?,
    }
    let failed = table.failed_cells().count();
    if failed == 0 {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(stderr, "liveness failure in {failed} of {total} cells");
        Ok(EXIT_LIVENESS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("intersection-qos").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn bounds_text_report() {
        let (code, out, _) = call(&["bounds"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("D_min = 9.40 s (9.3985)"), "{out}");
        assert!(out.contains("D_max = 31.05"), "{out}");
    }

    #[test]
    fn unknown_controller_is_usage_error() {
        let (code, _, err) = call(&["simulate", "--controller", "greedy"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("greedy"));
    }

    #[test]
    fn missing_subcommand_is_usage_error() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("sweep"));
    }

    #[test]
    fn missing_config_is_io_error() {
        let (code, _, _) = call(&["bounds", "--config", "/nonexistent/config.toml"]);
        assert_eq!(code, EXIT_IO);
    }

    #[test]
    fn bad_dt_is_validation_error() {
        let (code, _, err) = call(&["simulate", "--dt=-1"]);
        assert_eq!(code, EXIT_INVALID, "{err}");
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", b"one").unwrap();
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.txt")).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

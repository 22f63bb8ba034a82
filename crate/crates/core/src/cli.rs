//! `minilb` command line: run, validate, bench, pp.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
//! Machine-readable lines start with `MLUPS=`, `PP=` or `L2=`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::cases::{self, CaseKind, CaseSpec};
use crate::engine::{FileHooks, NoHooks, RunConfig, RunHooks, Simulation};
use crate::error::{Error, Result};
use crate::field::Layout;
use crate::io::bench_csv::write_bench_csv;
use crate::io::config::{parse_run_config, RunArgs, DEFAULT_TILE};
use crate::kernel::Schedule;
use crate::perfport::{bench_sweep, pp_metric, read_pp_csv};
use crate::precision::PrecisionMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "minilb", version, about = "D2Q9 lattice-Boltzmann mini-app")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and report throughput.
    Run(RunArgs),
    /// Physics checks: tgv convergence, ldc fixed point, vks shedding.
    Validate(ValidateArgs),
    /// Sweep precision x layout x schedule and write a CSV.
    Bench(BenchArgs),
    /// Performance-portability metric from a platform,efficiency CSV.
    Pp(PpArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub case: String,
    /// Grid sizes for tgv (two), cavity size for ldc, diameter for vks.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value = "double")]
    pub precision: String,
    /// Step count override for ldc and vks.
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub base: RunArgs,
    /// Axis lists such as `precision=single,double layout=row,col schedule=auto,tiled`.
    #[arg(long, num_args = 1..)]
    pub axes: Vec<String>,
    /// TOML file with `precision`, `layout` and `schedule` lists.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PpArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

/// Parses `args` (program name first) and executes the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
                    if e.exit_code() == 0 =>
                {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::Validate(a) => cmd_validate(&a, out),
        Command::Bench(a) => cmd_bench(&a, out, err),
        Command::Pp(a) => cmd_pp(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() || matches!(e, Error::NoShedding { .. }) {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let config = parse_run_config(args)?;
    let mut sim = Simulation::new(&config)?;
    let stats = if config.output_every > 0 || config.checkpoint_every > 0 {
        let mut hooks = FileHooks::new(&config.out_dir)?;
        let s = sim.run(&config, &mut hooks as &mut dyn RunHooks)?;
        emit(out, format_args!("wrote {} files to {}", hooks.written.len(), config.out_dir.display()))?;
        s
    } else {
        sim.run(&config, &mut NoHooks)?
    };
    emit(
        out,
        format_args!(
            "case={} nx={} ny={} precision={} layout={} schedule={} steps={} seconds={:.3}",
            config.case.kind,
            config.case.nx,
            config.case.ny,
            config.precision,
            config.layout,
            config.schedule,
            stats.steps,
            stats.elapsed_seconds
        ),
    )?;
    emit(out, format_args!("MLUPS={:.3}", stats.mlups))?;
    Ok(EXIT_OK)
}

/// Diffusive scaling used by the convergence study: fixed viscosity,
/// `u0 ~ 1/N`, steps `~ N^2`, so every size reaches the same decay.
pub fn tgv_convergence_setup(n: usize) -> (CaseSpec, u64) {
    let s = n as f64 / 32.0;
    let u0 = 0.04 / s;
    let nu = 0.05;
    let spec = CaseSpec::tgv(n, u0 * n as f64 / nu, u0).with_viscosity(nu);
    (spec, (200.0 * s * s).round() as u64)
}

/// L2 velocity error of a diffusively scaled vortex after its scaled run.
pub fn tgv_convergence_error(n: usize, mode: PrecisionMode) -> Result<f64> {
    let (spec, steps) = tgv_convergence_setup(n);
    let state = cases::init(&spec, mode, Layout::default())?;
    let mut sim = Simulation::from_state(state, Schedule::Auto, 0)?;
    sim.advance(steps)?;
    if !sim.state().populations().all_finite() {
        return Err(Error::Divergence { step: steps });
    }
    Ok(cases::l2_velocity_error(sim.state(), &spec))
}

fn verdict(out: &mut dyn Write, name: &str, pass: bool) -> Result<bool> {
    emit(out, format_args!("{} {name}", if pass { "PASS" } else { "FAIL" }))?;
    Ok(pass)
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32> {
    let kind: CaseKind = args.case.parse()?;
    let mode: PrecisionMode = args.precision.parse()?;
    let pass = match kind {
        CaseKind::Tgv => {
            let sizes = match args.sizes.as_slice() {
                [] => vec![32, 64],
                [a, b] if a < b && *a >= 4 => vec![*a, *b],
                _ => return Err(Error::config("tgv needs two increasing sizes, e.g. --sizes 32,64")),
            };
            let mut errs = Vec::new();
            for &n in &sizes {
                let e = tgv_convergence_error(n, mode)?;
                emit(out, format_args!("L2={e:.6e} n={n}"))?;
                errs.push(e);
            }
            let ratio = errs[0] / errs[1];
            let expected = (sizes[1] as f64 / sizes[0] as f64).powi(2);
            emit(out, format_args!("L2_RATIO={ratio:.4} expected={expected:.1}"))?;
            verdict(out, "convergence", ratio >= 0.75 * expected && ratio <= 1.25 * expected)?
        }
        CaseKind::Ldc => {
            let n = args.sizes.first().copied().unwrap_or(32);
            let steps = args.steps.unwrap_or(100);
            let spec = CaseSpec::ldc(n, 100.0, 0.0).with_viscosity(1.0 / 6.0);
            let state = cases::init(&spec, mode, Layout::default())?;
            let initial = state.populations().clone();
            let m0 = state.total_mass();
            let mut sim = Simulation::from_state(state, Schedule::Auto, 0)?;
            sim.advance(steps)?;
            let drift = ((sim.state().total_mass() - m0) / m0).abs();
            emit(out, format_args!("MASS_DRIFT={drift:.3e}"))?;
            verdict(out, "fixed-point", sim.state().populations().same_values(&initial))?
        }
        CaseKind::Vks => {
            let d = args.sizes.first().copied().unwrap_or(20);
            let steps = args.steps.unwrap_or((40_000 * d as u64).div_ceil(20));
            let spec = CaseSpec::vks(d, 150.0, 0.1);
            let wake = cases::record_wake(&spec, mode, Layout::default(), Schedule::Auto, steps)?;
            let tail = wake.probe.since(steps / 2);
            let crossings = tail.zero_crossings().len();
            emit(out, format_args!("CROSSINGS={crossings}"))?;
            match cases::strouhal(&tail, d as f64, spec.u0) {
                Ok(s) => {
                    emit(out, format_args!("ST={:.4}", s.strouhal))?;
                    verdict(
                        out,
                        "shedding",
                        crossings >= 20 && (0.1..=0.3).contains(&s.strouhal),
                    )?
                }
                Err(Error::NoShedding { .. }) => verdict(out, "shedding", false)?,
                Err(e) => return Err(e),
            }
        }
    };
    Ok(if pass { EXIT_OK } else { EXIT_NUMERICAL })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    precision: Option<Vec<String>>,
    layout: Option<Vec<String>>,
    schedule: Option<Vec<String>>,
}

/// Splits on commas outside parentheses, so `auto,tiled(4,8)` has two items.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut depth = 0i32;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(String::new());
                continue;
            }
            _ => {}
        }
        out.last_mut().expect("non-empty").push(ch);
    }
    out.into_iter().map(|v| v.trim().to_string()).collect()
}

/// Cartesian product of the axes around `base`. Unlisted axes keep the base
/// value. Configurations are not validated here; bad ones fail in the sweep.
pub fn expand_axes(base: &RunConfig, axes: &[String], file: Option<&PathBuf>) -> Result<Vec<RunConfig>> {
    let mut m = match file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<MatrixFile>(&text)
                .map_err(|e| Error::config(format!("{}: {}", p.display(), e.message())))?
        }
        None => MatrixFile::default(),
    };
    for a in axes {
        let (key, values) = a
            .split_once('=')
            .ok_or_else(|| Error::config(format!("axis '{a}' is not key=v1,v2")))?;
        let values = split_top_level(values);
        if values.iter().any(String::is_empty) {
            return Err(Error::config(format!("axis '{a}' has an empty value")));
        }
        match key.trim() {
            "precision" => m.precision = Some(values),
            "layout" => m.layout = Some(values),
            "schedule" => m.schedule = Some(values),
            other => return Err(Error::config(format!("unknown axis '{other}'"))),
        }
    }

    let precisions = match m.precision {
        Some(v) => v.iter().map(|s| s.parse()).collect::<Result<Vec<PrecisionMode>>>()?,
        None => vec![base.precision],
    };
    let layouts = match m.layout {
        Some(v) => v.iter().map(|s| s.parse()).collect::<Result<Vec<Layout>>>()?,
        None => vec![base.layout],
    };
    let base_tile = base.schedule.tile().unwrap_or((
        DEFAULT_TILE.min(base.case.nx),
        DEFAULT_TILE.min(base.case.ny),
    ));
    let schedules = match m.schedule {
        Some(v) => v
            .iter()
            .map(|s| match s.to_ascii_lowercase().as_str() {
                "tiled" => Ok(Schedule::Tiled {
                    tx: base_tile.0,
                    ty: base_tile.1,
                }),
                other => other.parse(),
            })
            .collect::<Result<Vec<Schedule>>>()?,
        None => vec![base.schedule],
    };

    let mut out = Vec::new();
    for &precision in &precisions {
        for &layout in &layouts {
            for &schedule in &schedules {
                out.push(RunConfig {
                    precision,
                    layout,
                    schedule,
                    ..base.clone()
                });
            }
        }
    }
    Ok(out)
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if args.reps == 0 {
        return Err(Error::config("--reps must be >= 1"));
    }
    if args.reps == 1 {
        let _ = writeln!(err, "warning: --reps 1 reports a single timing with no median");
    }
    let mut base_args = args.base.clone();
    base_args.steps = base_args.steps.or(Some(100));
    let base = parse_run_config(&base_args)?;
    let matrix = expand_axes(&base, &args.axes, args.matrix.as_ref())?;
    let records = bench_sweep(&matrix, args.reps)?;
    for r in &records {
        emit(
            out,
            format_args!(
                "MLUPS={:.3} precision={} layout={} schedule={} status={}",
                r.mlups, r.precision, r.layout, r.schedule, r.status
            ),
        )?;
    }
    write_bench_csv(&records, &args.out)?;
    emit(out, format_args!("wrote {} rows to {}", records.len(), args.out.display()))?;
    Ok(EXIT_OK)
}

pub fn cmd_pp(args: &PpArgs, out: &mut dyn Write) -> Result<i32> {
    let entries = read_pp_csv(&args.input)?;
    let pp = pp_metric(&entries)?;
    if pp.unsupported.is_empty() {
        emit(out, format_args!("PP={:.1}%", 100.0 * pp.value))?;
    } else {
        emit(
            out,
            format_args!("PP=0.0% (unsupported platform: {})", pp.unsupported.join(", ")),
        )?;
    }
    Ok(EXIT_OK)
}

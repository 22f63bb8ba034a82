//! Run configuration from command-line flags and an optional TOML file.
//!
//! The file uses the flag names as keys (`tile-x = 4`, `precision = "mixed1"`).
//! Flags win over file values, file values win over defaults.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use crate::cases::{CaseKind, CaseSpec};
use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::field::Layout;
use crate::kernel::Schedule;
use crate::precision::PrecisionMode;

pub const DEFAULT_TILE: usize = 8;

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunArgs {
    /// Flow case: ldc, tgv or vks.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Reynolds number.
    #[arg(long)]
    pub re: Option<f64>,
    /// Characteristic lattice velocity (lid, vortex amplitude or inflow).
    #[arg(long)]
    pub u0: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    /// single, double, mixed1 or mixed2.
    #[arg(long)]
    pub precision: Option<String>,
    /// row or col.
    #[arg(long)]
    pub layout: Option<String>,
    /// auto or tiled.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long = "tile-x")]
    pub tile_x: Option<usize>,
    #[arg(long = "tile-y")]
    pub tile_y: Option<usize>,
    /// Worker threads, 0 for the runtime default.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Steps between VTK snapshots, 0 disables output.
    #[arg(long = "output-every")]
    pub output_every: Option<u64>,
    /// Steps between checkpoints, 0 disables them.
    #[arg(long = "checkpoint-every")]
    pub checkpoint_every: Option<u64>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// TOML file with any of the keys above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    fn merged_over(self, base: RunArgs) -> RunArgs {
        RunArgs {
            case: self.case.or(base.case),
            nx: self.nx.or(base.nx),
            ny: self.ny.or(base.ny),
            re: self.re.or(base.re),
            u0: self.u0.or(base.u0),
            steps: self.steps.or(base.steps),
            precision: self.precision.or(base.precision),
            layout: self.layout.or(base.layout),
            schedule: self.schedule.or(base.schedule),
            tile_x: self.tile_x.or(base.tile_x),
            tile_y: self.tile_y.or(base.tile_y),
            threads: self.threads.or(base.threads),
            output_every: self.output_every.or(base.output_every),
            checkpoint_every: self.checkpoint_every.or(base.checkpoint_every),
            out_dir: self.out_dir.or(base.out_dir),
            config: self.config,
        }
    }
}

fn load_file(path: &PathBuf) -> Result<RunArgs> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {}", path.display(), e.message())))
}

/// Builds the case from the merged arguments. A channel uses D = ny / 8.
pub fn case_from(kind: CaseKind, nx: Option<usize>, ny: Option<usize>, re: f64, u0: f64) -> Result<CaseSpec> {
    Ok(match kind {
        CaseKind::Ldc => {
            let nx = nx.or(ny).unwrap_or(128);
            CaseSpec {
                nx,
                ny: ny.unwrap_or(nx),
                ..CaseSpec::ldc(nx, re, u0)
            }
        }
        CaseKind::Tgv => {
            let nx = nx.or(ny).unwrap_or(64);
            CaseSpec {
                nx,
                ny: ny.unwrap_or(nx),
                ..CaseSpec::tgv(nx, re, u0)
            }
        }
        CaseKind::Vks => {
            let ny = ny.unwrap_or(160);
            let nx = nx.unwrap_or(3 * ny);
            let d = ny / 8;
            if d == 0 {
                return Err(Error::config(format!(
                    "channel height {ny} too small: the cylinder diameter is ny / 8"
                )));
            }
            CaseSpec::vks_in_channel(nx, ny, d, re, u0)
        }
    })
}

/// Validated run configuration. Defaults: lid-driven cavity, single
/// precision, column-major layout, auto schedule.
pub fn parse_run_config(args: &RunArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => load_file(p)?,
        None => RunArgs::default(),
    };
    let a = args.clone().merged_over(file);

    let kind = match &a.case {
        Some(c) => c.parse::<CaseKind>()?,
        None => CaseKind::Ldc,
    };
    let re = a.re.unwrap_or(100.0);
    let u0 = a.u0.unwrap_or(0.1);
    let case = case_from(kind, a.nx, a.ny, re, u0)?;

    let precision = match &a.precision {
        Some(p) => p.parse::<PrecisionMode>()?,
        None => PrecisionMode::Single,
    };
    let layout = match &a.layout {
        Some(l) => l.parse::<Layout>()?,
        None => Layout::ColumnMajor,
    };
    let tiles_given = a.tile_x.is_some() || a.tile_y.is_some();
    let schedule = match a.schedule.as_deref().map(str::to_ascii_lowercase).as_deref() {
        Some("auto") if tiles_given => {
            return Err(Error::config(
                "--tile-x/--tile-y only apply to --schedule tiled",
            ))
        }
        Some("auto") => Schedule::Auto,
        Some("tiled") | None if tiles_given || a.schedule.is_some() => Schedule::Tiled {
            tx: a.tile_x.unwrap_or(DEFAULT_TILE.min(case.nx)),
            ty: a.tile_y.unwrap_or(DEFAULT_TILE.min(case.ny)),
        },
        None => Schedule::Auto,
        Some(other) => other.parse::<Schedule>()?,
    };

    let config = RunConfig {
        case,
        steps: a.steps.unwrap_or(1000),
        precision,
        layout,
        schedule,
        output_every: a.output_every.unwrap_or(0),
        checkpoint_every: a.checkpoint_every.unwrap_or(0),
        threads: a.threads.unwrap_or(0),
        out_dir: a.out_dir.unwrap_or_else(|| PathBuf::from(".")),
    };
    config.validate()?;
    Ok(config)
}

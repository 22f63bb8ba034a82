//! Throughput, roofline and performance-portability arithmetic.
//!
//! FLOPs per fused cell update are counted analytically from the kernel
//! expression (see `lattice::cell`):
//!
//! | stage                                   | add/sub | mul | div |
//! |-----------------------------------------|--------:|----:|----:|
//! | density and momentum sums               |      18 |     |     |
//! | velocity `j * (1 / rho)`                |         |   2 |   1 |
//! | `w * rho` for the three weight classes  |         |   3 |     |
//! | `1 - 1.5 |u|^2`                         |       2 |   3 |     |
//! | rest population                         |         |   1 |     |
//! | 4 opposite pairs, 2 of them diagonal    |  4*3+2  | 4*5 |     |
//! | relaxation `f - w (f - f_eq)`, 9 times  |      18 |   9 |     |
//! | **total**                               |  **52** |**38**| **1** |
//!
//! Boundary corrections are excluded; they only touch wall-adjacent cells.
//! Memory traffic assumes the compulsory 9 reads and 9 writes per cell.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{NoHooks, RunConfig, Simulation};
use crate::error::{Error, Result};
use crate::precision::{PrecisionMode, StoragePrecision};

pub const FLOPS_PER_CELL: u64 = 91;

/// Million lattice updates per second.
pub fn mlups(nx: usize, ny: usize, steps: u64, seconds: f64) -> Result<f64> {
    if !(seconds > 0.0) {
        return Err(Error::Measurement(format!("elapsed time {seconds} s must be positive")));
    }
    Ok(nx as f64 * ny as f64 * steps as f64 / (seconds * 1e6))
}

/// Floating-point operations in one fused cell update. The count does not
/// depend on the layout, the schedule or the compute width.
pub fn flops_per_cell(_mode: PrecisionMode) -> u64 {
    FLOPS_PER_CELL
}

/// Compulsory bytes moved per cell update: 9 loads and 9 stores.
pub fn bytes_per_cell(storage: StoragePrecision) -> u64 {
    18 * storage.bytes() as u64
}

pub fn arithmetic_intensity(flops: f64, bytes: f64) -> Result<f64> {
    if !(bytes > 0.0) {
        return Err(Error::Measurement(format!("byte count {bytes} must be positive")));
    }
    if !(flops > 0.0) {
        return Err(Error::Measurement(format!("flop count {flops} must be positive")));
    }
    Ok(flops / bytes)
}

/// Roofline ceiling `min(compute peak, bandwidth * AI)`. Units follow the
/// inputs: GFLOP/s with GB/s gives GFLOP/s.
pub fn roofline_peak(fr_peak: f64, bw_peak: f64, ai: f64) -> Result<f64> {
    if !(fr_peak > 0.0 && bw_peak > 0.0 && ai >= 0.0) {
        return Err(Error::Measurement(format!(
            "roofline inputs must be positive (FR {fr_peak}, BW {bw_peak}, AI {ai})"
        )));
    }
    Ok(fr_peak.min(bw_peak * ai))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RooflineInput {
    pub fr_peak: f64,
    pub bw_peak: f64,
    pub ai: f64,
    pub achieved: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RooflineEfficiency {
    pub efficiency: f64,
    /// Achieved rate above the ceiling: the inputs disagree.
    pub inconsistent: bool,
}

pub fn roofline_efficiency(achieved: f64, peak: f64) -> Result<RooflineEfficiency> {
    if !(peak > 0.0) {
        return Err(Error::Measurement(format!("roofline peak {peak} must be positive")));
    }
    if !(achieved > 0.0) {
        return Err(Error::Measurement(format!("achieved rate {achieved} must be positive")));
    }
    let efficiency = achieved / peak;
    Ok(RooflineEfficiency {
        efficiency,
        inconsistent: efficiency > 1.0,
    })
}

impl RooflineInput {
    pub fn peak(&self) -> Result<f64> {
        roofline_peak(self.fr_peak, self.bw_peak, self.ai)
    }

    pub fn efficiency(&self) -> Result<RooflineEfficiency> {
        roofline_efficiency(self.achieved, self.peak()?)
    }
}

/// FLOP rate of a platform without counters, from a reference platform's
/// rate and the two kernel times: total FLOPs are the same everywhere, so
/// the rate scales with `time_ref / time_other`.
pub fn estimate_cross_platform_flop_rate(fr_ref: f64, time_ref: f64, time_other: f64) -> Result<f64> {
    if !(time_ref > 0.0 && time_other > 0.0) {
        return Err(Error::Measurement(format!(
            "kernel times must be positive ({time_ref}, {time_other})"
        )));
    }
    Ok(fr_ref * time_ref / time_other)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformEfficiency {
    pub platform: String,
    /// `None` marks an unsupported platform.
    pub efficiency: Option<f64>,
}

impl PlatformEfficiency {
    pub fn supported(platform: impl Into<String>, e: f64) -> Self {
        Self {
            platform: platform.into(),
            efficiency: Some(e),
        }
    }

    pub fn unsupported(platform: impl Into<String>) -> Self {
        Self {
            platform: platform.into(),
            efficiency: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpResult {
    pub value: f64,
    pub unsupported: Vec<String>,
}

/// Harmonic mean of per-platform efficiencies, or 0 when any platform is
/// unsupported.
pub fn pp_metric(entries: &[PlatformEfficiency]) -> Result<PpResult> {
    if entries.is_empty() {
        return Err(Error::Measurement("platform set is empty".into()));
    }
    let unsupported: Vec<String> = entries
        .iter()
        .filter(|e| e.efficiency.is_none())
        .map(|e| e.platform.clone())
        .collect();
    if !unsupported.is_empty() {
        return Ok(PpResult {
            value: 0.0,
            unsupported,
        });
    }
    let mut inv = 0.0;
    for e in entries {
        let v = e.efficiency.expect("checked above");
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Measurement(format!(
                "efficiency {v} of platform '{}' outside (0, 1]",
                e.platform
            )));
        }
        inv += 1.0 / v;
    }
    Ok(PpResult {
        value: entries.len() as f64 / inv,
        unsupported,
    })
}

#[derive(Debug, Deserialize)]
struct PpRow {
    platform: String,
    efficiency: String,
}

/// Reads `platform,efficiency` rows; `NA` marks an unsupported platform.
pub fn read_pp_csv(path: &Path) -> Result<Vec<PlatformEfficiency>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Measurement(format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<PpRow>() {
        let row = row?;
        if row.efficiency.eq_ignore_ascii_case("na") {
            out.push(PlatformEfficiency::unsupported(row.platform));
        } else {
            let e: f64 = row.efficiency.parse().map_err(|_| {
                Error::Measurement(format!(
                    "efficiency '{}' of platform '{}' is not a number",
                    row.efficiency, row.platform
                ))
            })?;
            out.push(PlatformEfficiency::supported(row.platform, e));
        }
    }
    Ok(out)
}

/// One benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub case: String,
    pub nx: usize,
    pub ny: usize,
    pub precision: String,
    pub layout: String,
    pub schedule: String,
    pub tx: usize,
    pub ty: usize,
    pub steps: u64,
    pub seconds: f64,
    pub mlups: f64,
    pub flops_per_cell: u64,
    pub bytes_per_cell: u64,
    pub ai: f64,
    /// `OK`, or `ERROR: <reason>` for a failed configuration.
    pub status: String,
}

impl PerfRecord {
    fn skeleton(config: &RunConfig) -> Self {
        let (tx, ty) = config.schedule.tile().unwrap_or((0, 0));
        let flops = flops_per_cell(config.precision);
        let bytes = bytes_per_cell(config.precision.storage());
        Self {
            case: config.case.kind.to_string(),
            nx: config.case.nx,
            ny: config.case.ny,
            precision: config.precision.to_string(),
            layout: config.layout.to_string(),
            schedule: config.schedule.name().to_string(),
            tx,
            ty,
            steps: config.steps,
            seconds: 0.0,
            mlups: 0.0,
            flops_per_cell: flops,
            bytes_per_cell: bytes,
            ai: flops as f64 / bytes as f64,
            status: "OK".into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "OK"
    }

    /// Achieved GFLOP/s implied by the record.
    pub fn gflops(&self) -> f64 {
        self.mlups * 1e6 * self.flops_per_cell as f64 / 1e9
    }
}

fn timed_run(config: &RunConfig) -> Result<f64> {
    let mut sim = Simulation::new(config)?;
    Ok(sim.run(config, &mut NoHooks)?.elapsed_seconds)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs each configuration once to warm up and then `repetitions` times,
/// keeping the median kernel time. Failures are recorded, not raised.
/// Output and checkpoint periods are ignored so that only the kernel runs.
pub fn bench_sweep(matrix: &[RunConfig], repetitions: usize) -> Result<Vec<PerfRecord>> {
    if matrix.is_empty() {
        return Err(Error::config("benchmark matrix is empty"));
    }
    if repetitions == 0 {
        return Err(Error::config("repetitions must be >= 1"));
    }
    let mut out = Vec::with_capacity(matrix.len());
    for config in matrix {
        let mut config = config.clone();
        config.output_every = 0;
        config.checkpoint_every = 0;
        let mut rec = PerfRecord::skeleton(&config);
        let result = (|| {
            timed_run(&config)?;
            let times = (0..repetitions)
                .map(|_| timed_run(&config))
                .collect::<Result<Vec<_>>>()?;
            let seconds = median(times);
            Ok::<_, Error>((seconds, mlups(config.case.nx, config.case.ny, config.steps, seconds)?))
        })();
        match result {
            Ok((seconds, m)) => {
                rec.seconds = seconds;
                rec.mlups = m;
            }
            Err(e) => rec.status = format!("ERROR: {e}"),
        }
        out.push(rec);
    }
    Ok(out)
}

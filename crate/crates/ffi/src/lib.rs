//! C ABI over the `minilb` solver.
//!
//! Every function returns an [`MlbStatus`]; on failure the message is kept
//! per thread and can be fetched with [`mlb_last_error_message`]. Simulations
//! are opaque [`MlbSim`] handles created by [`mlb_sim_new`] or
//! [`mlb_sim_restore`] and released with [`mlb_sim_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use minilb::cases::{self, CaseKind, CaseSpec};
use minilb::checkpoint;
use minilb::io::config::case_from;
use minilb::io::vtk::write_vtk;
use minilb::perfport::{self, PlatformEfficiency};
use minilb::{Error, Layout, PrecisionMode, Schedule, Simulation};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Checkpoint = 5,
    Panic = 6,
}

/// Flow case selector for [`MlbConfig::case_kind`].
pub const MLB_CASE_LDC: u32 = 0;
pub const MLB_CASE_TGV: u32 = 1;
pub const MLB_CASE_VKS: u32 = 2;

/// Layout codes for [`MlbConfig::layout`].
pub const MLB_LAYOUT_ROW: u32 = 0;
pub const MLB_LAYOUT_COL: u32 = 1;

/// Precision codes for [`MlbConfig::precision`]: single, double, mixed1
/// (half storage, single compute), mixed2 (single storage, double compute).
pub const MLB_PRECISION_SINGLE: u32 = 0;
pub const MLB_PRECISION_DOUBLE: u32 = 1;
pub const MLB_PRECISION_MIXED1: u32 = 2;
pub const MLB_PRECISION_MIXED2: u32 = 3;

/// Simulation setup. `tile_x = tile_y = 0` selects the auto schedule.
/// For the cylinder case the diameter is `ny / 8`. `threads = 0` uses the
/// runtime default.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlbConfig {
    pub case_kind: u32,
    pub nx: u32,
    pub ny: u32,
    pub reynolds: f64,
    pub u0: f64,
    pub precision: u32,
    pub layout: u32,
    pub tile_x: u32,
    pub tile_y: u32,
    pub threads: u32,
}

/// Opaque simulation handle.
pub struct MlbSim {
    sim: Simulation,
    spec: Option<CaseSpec>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MlbStatus {
    match e {
        Error::NonFinitePopulation
        | Error::Divergence { .. }
        | Error::Overflow { .. }
        | Error::NoShedding { .. } => MlbStatus::Numerical,
        Error::Io { .. } | Error::Csv(_) => MlbStatus::Io,
        Error::CorruptCheckpoint { .. }
        | Error::CheckpointVersion { .. }
        | Error::CheckpointShape(_) => MlbStatus::Checkpoint,
        _ => MlbStatus::InvalidArgument,
    }
}

struct Fail(MlbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MlbStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(MlbStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MlbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MlbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MlbStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn sim_ref<'a>(sim: *const MlbSim) -> Result<&'a MlbSim, Fail> {
    sim.as_ref().ok_or_else(|| null("simulation handle"))
}

unsafe fn sim_mut<'a>(sim: *mut MlbSim) -> Result<&'a mut MlbSim, Fail> {
    sim.as_mut().ok_or_else(|| null("simulation handle"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn schedule_of(tile_x: u32, tile_y: u32) -> Result<Schedule, Fail> {
    match (tile_x, tile_y) {
        (0, 0) => Ok(Schedule::Auto),
        (0, _) | (_, 0) => Err(invalid("tile_x and tile_y must both be 0 (auto) or both >= 1")),
        (tx, ty) => Ok(Schedule::Tiled {
            tx: tx as usize,
            ty: ty as usize,
        }),
    }
}

fn precision_of(code: u32) -> Result<PrecisionMode, Fail> {
    u8::try_from(code)
        .ok()
        .and_then(PrecisionMode::from_code)
        .ok_or_else(|| invalid(format!("unknown precision code {code}")))
}

fn layout_of(code: u32) -> Result<Layout, Fail> {
    u8::try_from(code)
        .ok()
        .and_then(Layout::from_code)
        .ok_or_else(|| invalid(format!("unknown layout code {code}")))
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn mlb_status_string(status: MlbStatus) -> *const c_char {
    let s: &'static CStr = match status {
        MlbStatus::Ok => c"ok",
        MlbStatus::NullPointer => c"null pointer argument",
        MlbStatus::InvalidArgument => c"invalid argument or configuration",
        MlbStatus::Numerical => c"numerical failure",
        MlbStatus::Io => c"i/o error",
        MlbStatus::Checkpoint => c"corrupt or incompatible checkpoint",
        MlbStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Message of the last failed call on this thread, or null after a
/// successful call. Valid until the next `mlb_*` call on the same thread.
#[no_mangle]
pub extern "C" fn mlb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Fills `out` with the defaults: 128x128 cavity, Re 100, u0 0.1, single
/// precision, column-major, auto schedule.
///
/// # Safety
/// `out` must be null or point to writable memory for one `MlbConfig`.
#[no_mangle]
pub unsafe extern "C" fn mlb_config_default(out: *mut MlbConfig) -> MlbStatus {
    guard(|| {
        *out_ref(out, "out")? = MlbConfig {
            case_kind: MLB_CASE_LDC,
            nx: 128,
            ny: 128,
            reynolds: 100.0,
            u0: 0.1,
            precision: MLB_PRECISION_SINGLE,
            layout: MLB_LAYOUT_COL,
            tile_x: 0,
            tile_y: 0,
            threads: 0,
        };
        Ok(())
    })
}

/// Creates an initialized simulation at timestep 0.
///
/// # Safety
/// `config` must be null or point to a valid `MlbConfig`; `out` must be null
/// or point to writable storage for one pointer. On success `*out` owns a
/// handle that must be released with [`mlb_sim_free`].
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_new(config: *const MlbConfig, out: *mut *mut MlbSim) -> MlbStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let kind = match cfg.case_kind {
            MLB_CASE_LDC => CaseKind::Ldc,
            MLB_CASE_TGV => CaseKind::Tgv,
            MLB_CASE_VKS => CaseKind::Vks,
            k => return Err(invalid(format!("unknown case code {k}"))),
        };
        let spec = case_from(
            kind,
            Some(cfg.nx as usize),
            Some(cfg.ny as usize),
            cfg.reynolds,
            cfg.u0,
        )?;
        spec.validate()?;
        let schedule = schedule_of(cfg.tile_x, cfg.tile_y)?;
        let state = cases::init(&spec, precision_of(cfg.precision)?, layout_of(cfg.layout)?)?;
        let sim = Simulation::from_state(state, schedule, cfg.threads as usize)?;
        *out = Box::into_raw(Box::new(MlbSim {
            sim,
            spec: Some(spec),
        }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_free(sim: *mut MlbSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `steps` timesteps. Fails with `Numerical` if the populations
/// stop being finite; the state is then left at the failing step.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_step(sim: *mut MlbSim, steps: u64) -> MlbStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        s.sim.advance(steps)?;
        if !s.sim.state().populations().all_finite() {
            return Err(Error::Divergence {
                step: s.sim.state().timestep(),
            }
            .into());
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_timestep(sim: *const MlbSim, out: *mut u64) -> MlbStatus {
    guard(|| {
        *out_ref(out, "out")? = sim_ref(sim)?.sim.state().timestep();
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a live handle; `nx` and `ny` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_dims(sim: *const MlbSim, nx: *mut u32, ny: *mut u32) -> MlbStatus {
    guard(|| {
        let s = sim_ref(sim)?.sim.state();
        *out_ref(nx, "nx")? = s.nx() as u32;
        *out_ref(ny, "ny")? = s.ny() as u32;
        Ok(())
    })
}

/// Copies density and velocity into caller arrays of `len = nx * ny`
/// doubles, indexed `y * nx + x`. Any of the three arrays may be null to
/// skip it.
///
/// # Safety
/// `sim` must be null or a live handle; each non-null array must hold `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_macros(
    sim: *const MlbSim,
    rho: *mut f64,
    ux: *mut f64,
    uy: *mut f64,
    len: usize,
) -> MlbStatus {
    guard(|| {
        let m = sim_ref(sim)?.sim.state().macro_fields();
        if len != m.rho.len() {
            return Err(invalid(format!("len {len} != nx * ny = {}", m.rho.len())));
        }
        for (dst, src) in [(rho, &m.rho), (ux, &m.ux), (uy, &m.uy)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, len).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// Sum of all populations over the grid.
///
/// # Safety
/// `sim` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_total_mass(sim: *const MlbSim, out: *mut f64) -> MlbStatus {
    guard(|| {
        *out_ref(out, "out")? = sim_ref(sim)?.sim.state().total_mass();
        Ok(())
    })
}

/// L2 velocity error against the analytic vortex. Only for handles created
/// from a tgv configuration.
///
/// # Safety
/// `sim` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_tgv_error(sim: *const MlbSim, out: *mut f64) -> MlbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let spec = s
            .spec
            .as_ref()
            .filter(|c| c.kind == CaseKind::Tgv)
            .ok_or_else(|| invalid("handle is not a tgv case"))?;
        *out_ref(out, "out")? = cases::l2_velocity_error(s.sim.state(), spec);
        Ok(())
    })
}

/// Writes a legacy VTK snapshot of the current state.
///
/// # Safety
/// `sim` must be null or a live handle; `path` null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_write_vtk(sim: *const MlbSim, path: *const c_char) -> MlbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        write_vtk(s.sim.state(), &path_arg(path)?)?;
        Ok(())
    })
}

/// Serializes the full state to `path`.
///
/// # Safety
/// `sim` must be null or a live handle; `path` null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_checkpoint(sim: *const MlbSim, path: *const c_char) -> MlbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        checkpoint::write_checkpoint(s.sim.state(), &path_arg(path)?)?;
        Ok(())
    })
}

/// Rebuilds a simulation from a checkpoint. The schedule and thread count
/// are chosen here since they do not affect results.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_sim_restore(
    path: *const c_char,
    tile_x: u32,
    tile_y: u32,
    threads: u32,
    out: *mut *mut MlbSim,
) -> MlbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let state = checkpoint::restore(&path_arg(path)?)?;
        let sim = Simulation::from_state(state, schedule_of(tile_x, tile_y)?, threads as usize)?;
        *out = Box::into_raw(Box::new(MlbSim { sim, spec: None }));
        Ok(())
    })
}

/// Harmonic-mean portability over `n` efficiencies in (0, 1]. A NaN entry
/// marks an unsupported platform and makes the result 0.
///
/// # Safety
/// `efficiencies` must point to `n` readable doubles; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_pp_metric(efficiencies: *const f64, n: usize, out: *mut f64) -> MlbStatus {
    guard(|| {
        if efficiencies.is_null() {
            return Err(null("efficiencies"));
        }
        let es = std::slice::from_raw_parts(efficiencies, n);
        let entries: Vec<_> = es
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                if e.is_nan() {
                    PlatformEfficiency::unsupported(format!("#{i}"))
                } else {
                    PlatformEfficiency::supported(format!("#{i}"), e)
                }
            })
            .collect();
        *out_ref(out, "out")? = perfport::pp_metric(&entries)?.value;
        Ok(())
    })
}

/// `min(fr_peak, bw_peak * ai)`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_roofline_peak(fr_peak: f64, bw_peak: f64, ai: f64, out: *mut f64) -> MlbStatus {
    guard(|| {
        *out_ref(out, "out")? = perfport::roofline_peak(fr_peak, bw_peak, ai)?;
        Ok(())
    })
}

/// `achieved / peak`; `inconsistent` is set when the ratio exceeds 1.
///
/// # Safety
/// `out` must be null or writable; `inconsistent` may be null.
#[no_mangle]
pub unsafe extern "C" fn mlb_roofline_efficiency(
    achieved: f64,
    peak: f64,
    out: *mut f64,
    inconsistent: *mut bool,
) -> MlbStatus {
    guard(|| {
        let r = perfport::roofline_efficiency(achieved, peak)?;
        *out_ref(out, "out")? = r.efficiency;
        if let Some(flag) = inconsistent.as_mut() {
            *flag = r.inconsistent;
        }
        Ok(())
    })
}

/// Million lattice updates per second.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn mlb_mlups(nx: u32, ny: u32, steps: u64, seconds: f64, out: *mut f64) -> MlbStatus {
    guard(|| {
        *out_ref(out, "out")? = perfport::mlups(nx as usize, ny as usize, steps, seconds)?;
        Ok(())
    })
}

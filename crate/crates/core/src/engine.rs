//! Time stepping: fused pass, open-boundary post-pass, swap.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::boundaries::{apply_inlet_outlet, CellMask};
use crate::cases::{self, CaseSpec};
use crate::error::{Error, Result};
use crate::field::{Layout, PopulationField};
use crate::kernel::{fused_collide_stream, KernelMode, Schedule};
use crate::lattice::{cell, RelaxationParams, Q};
use crate::perfport;
use crate::precision::PrecisionMode;

/// Everything needed to launch a simulation: one point of the tuning matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseSpec,
    pub steps: u64,
    pub precision: PrecisionMode,
    pub layout: Layout,
    pub schedule: Schedule,
    /// Steps between VTK dumps, 0 = off. Also the divergence-check period.
    pub output_every: u64,
    /// Steps between checkpoints, 0 = off.
    pub checkpoint_every: u64,
    /// Worker threads, 0 = runtime default.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: CaseSpec::ldc(128, 100.0, 0.1),
            steps: 1000,
            precision: PrecisionMode::Single,
            layout: Layout::ColumnMajor,
            schedule: Schedule::Auto,
            output_every: 0,
            checkpoint_every: 0,
            threads: 0,
            out_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("steps must be >= 1"));
        }
        self.case.validate()?;
        self.schedule.validate(self.case.nx, self.case.ny)?;
        Ok(())
    }
}

/// Density and velocity per cell, indexed `y * nx + x` regardless of the
/// population layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroFields {
    pub nx: usize,
    pub ny: usize,
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl MacroFields {
    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.nx + x
    }
}

/// Pre/post populations, mask, relaxation parameters and the step counter.
#[derive(Debug, Clone)]
pub struct SimState {
    pre: PopulationField,
    post: PopulationField,
    mask: CellMask,
    params: RelaxationParams,
    t: u64,
}

impl SimState {
    pub fn new(pre: PopulationField, mask: CellMask, params: RelaxationParams) -> Result<Self> {
        Self::at_timestep(pre, mask, params, 0)
    }

    pub fn at_timestep(
        pre: PopulationField,
        mask: CellMask,
        params: RelaxationParams,
        t: u64,
    ) -> Result<Self> {
        if mask.grid() != pre.grid() {
            return Err(Error::DimensionMismatch("mask grid differs from field grid".into()));
        }
        params.validate()?;
        mask.validate()?;
        let post = PopulationField::new(pre.grid(), pre.mode());
        Ok(Self {
            pre,
            post,
            mask,
            params,
            t,
        })
    }

    /// Current populations (the pre-collision field of the next step).
    pub fn populations(&self) -> &PopulationField {
        &self.pre
    }

    pub fn populations_mut(&mut self) -> &mut PopulationField {
        &mut self.pre
    }

    pub fn mask(&self) -> &CellMask {
        &self.mask
    }

    pub fn params(&self) -> &RelaxationParams {
        &self.params
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn precision(&self) -> PrecisionMode {
        self.pre.mode()
    }

    pub fn nx(&self) -> usize {
        self.pre.nx()
    }

    pub fn ny(&self) -> usize {
        self.pre.ny()
    }

    /// Moments of every cell, evaluated in f64 from the stored values.
    pub fn macro_fields(&self) -> MacroFields {
        let (nx, ny) = (self.nx(), self.ny());
        let mut m = MacroFields {
            nx,
            ny,
            rho: vec![0.0; nx * ny],
            ux: vec![0.0; nx * ny],
            uy: vec![0.0; nx * ny],
        };
        for y in 0..ny {
            for x in 0..nx {
                let (rho, ux, uy) = cell::moments(&self.pre.cell(x, y));
                let k = y * nx + x;
                m.rho[k] = rho;
                m.ux[k] = ux;
                m.uy[k] = uy;
            }
        }
        m
    }

    /// Total mass over active cells, summed per fixed-size chunk and combined
    /// in chunk order so the result does not depend on the thread count.
    pub fn total_mass(&self) -> f64 {
        const CHUNK: usize = 4096;
        let cells = self.pre.grid().cells();
        let partial: Vec<f64> = (0..cells.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut s = 0.0;
                for idx in c * CHUNK..((c + 1) * CHUNK).min(cells) {
                    if self.mask.get_flat(idx).is_active() {
                        for i in 0..Q {
                            s += self.pre.get_flat(i, idx);
                        }
                    }
                }
                s
            })
            .collect();
        partial.iter().sum()
    }

    /// Bitwise comparison of populations, mask and step counter.
    pub fn same_as(&self, other: &SimState) -> bool {
        self.t == other.t && self.mask == other.mask && self.pre.same_values(&other.pre)
    }

    #[cfg(test)]
    pub(crate) fn into_parts(self) -> (PopulationField, CellMask, RelaxationParams, u64) {
        (self.pre, self.mask, self.params, self.t)
    }
}

/// One timestep on the current rayon pool.
pub fn step(state: &mut SimState, schedule: Schedule) -> Result<()> {
    step_with(state, schedule, KernelMode::CollideStream)
}

pub fn step_with(state: &mut SimState, schedule: Schedule, mode: KernelMode) -> Result<()> {
    fused_collide_stream(
        &state.pre,
        &mut state.post,
        &state.params,
        &state.mask,
        schedule,
        mode,
    )?;
    if state.mask.has_open_boundaries() {
        apply_inlet_outlet(&mut state.post, &state.mask)?;
    }
    std::mem::swap(&mut state.pre, &mut state.post);
    state.t += 1;
    Ok(())
}

/// Callbacks fired between steps. Time spent here is excluded from MLUPs.
pub trait RunHooks {
    fn on_output(&mut self, _state: &SimState) -> Result<()> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _state: &SimState) -> Result<()> {
        Ok(())
    }

    /// Called after every step.
    fn on_step(&mut self, _state: &SimState) -> Result<()> {
        Ok(())
    }
}

pub struct NoHooks;

impl RunHooks for NoHooks {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    /// Kernel-loop wall time only.
    pub elapsed_seconds: f64,
    pub steps: u64,
    pub cells_updated: u64,
    pub mlups: f64,
}

/// A state bound to a schedule and an optional dedicated thread pool.
pub struct Simulation {
    state: SimState,
    schedule: Schedule,
    pool: Option<rayon::ThreadPool>,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let state = cases::init(&config.case, config.precision, config.layout)?;
        Self::from_state(state, config.schedule, config.threads)
    }

    pub fn from_state(state: SimState, schedule: Schedule, threads: usize) -> Result<Self> {
        schedule.validate(state.nx(), state.ny())?;
        let pool = if threads > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            state,
            schedule,
            pool,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn step(&mut self) -> Result<()> {
        let (state, schedule) = (&mut self.state, self.schedule);
        match &self.pool {
            Some(pool) => pool.install(|| step(state, schedule)),
            None => step(state, schedule),
        }
    }

    pub fn advance(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Runs `config.steps` steps, firing hooks on the configured periods.
    pub fn run(&mut self, config: &RunConfig, hooks: &mut dyn RunHooks) -> Result<RunStats> {
        if config.steps == 0 {
            return Err(Error::config("steps must be >= 1"));
        }
        let mut kernel = Duration::ZERO;
        for k in 1..=config.steps {
            let start = Instant::now();
            self.step()?;
            kernel += start.elapsed();

            let t = self.state.t;
            hooks.on_step(&self.state)?;
            let check = if config.output_every > 0 {
                k % config.output_every == 0 || k == config.steps
            } else {
                k == config.steps
            };
            if check && !self.state.pre.all_finite() {
                return Err(Error::Divergence { step: t });
            }
            if config.output_every > 0 && k % config.output_every == 0 {
                hooks.on_output(&self.state)?;
            }
            if config.checkpoint_every > 0 && k % config.checkpoint_every == 0 {
                hooks.on_checkpoint(&self.state)?;
            }
        }
        let seconds = kernel.as_secs_f64().max(f64::MIN_POSITIVE);
        let (nx, ny) = (self.state.nx(), self.state.ny());
        Ok(RunStats {
            elapsed_seconds: seconds,
            steps: config.steps,
            cells_updated: (nx * ny) as u64 * config.steps,
            mlups: perfport::mlups(nx, ny, config.steps, seconds)?,
        })
    }
}

/// Writes VTK snapshots and checkpoints into a directory.
pub struct FileHooks {
    pub out_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl FileHooks {
    pub fn new(out_dir: impl Into<PathBuf>) -> Result<Self> {
        let out_dir = out_dir.into();
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(Self {
            out_dir,
            written: Vec::new(),
        })
    }
}

impl RunHooks for FileHooks {
    fn on_output(&mut self, state: &SimState) -> Result<()> {
        let path = self.out_dir.join(format!("minilb_{:08}.vtk", state.timestep()));
        crate::io::vtk::write_vtk(state, &path)?;
        self.written.push(path);
        Ok(())
    }

    fn on_checkpoint(&mut self, state: &SimState) -> Result<()> {
        let path = self.out_dir.join(format!("checkpoint_{:08}.mlb", state.timestep()));
        crate::checkpoint::write_checkpoint(state, &path)?;
        self.written.push(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Default)]
    struct Recorder {
        outputs: Vec<u64>,
        checkpoints: Vec<u64>,
    }

    impl RunHooks for Recorder {
        fn on_output(&mut self, s: &SimState) -> Result<()> {
            self.outputs.push(s.timestep());
            Ok(())
        }
        fn on_checkpoint(&mut self, s: &SimState) -> Result<()> {
            self.checkpoints.push(s.timestep());
            Ok(())
        }
    }

    fn tgv_config(n: usize, steps: u64) -> RunConfig {
        RunConfig {
            case: CaseSpec::tgv(n, 100.0, 0.05),
            steps,
            precision: PrecisionMode::Double,
            ..RunConfig::default()
        }
    }

    #[test]
    fn hooks_fire_on_schedule() {
        let mut cfg = tgv_config(8, 10);
        cfg.output_every = 3;
        cfg.checkpoint_every = 5;
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut rec = Recorder::default();
        let stats = sim.run(&cfg, &mut rec).unwrap();
        assert_eq!(rec.outputs, vec![3, 6, 9]);
        assert_eq!(rec.checkpoints, vec![5, 10]);
        assert_eq!(rec.checkpoints.iter().filter(|&&t| t < cfg.steps).count(), 1);
        assert_eq!(stats.steps, 10);
        assert_eq!(stats.cells_updated, 640);
        assert!(stats.mlups > 0.0);
        let recomputed = perfport::mlups(8, 8, 10, stats.elapsed_seconds).unwrap();
        assert_eq!(recomputed, stats.mlups);
    }

    #[test]
    fn zero_steps_rejected() {
        let cfg = tgv_config(8, 0);
        assert!(cfg.validate().is_err());
        let mut sim = Simulation::new(&tgv_config(8, 1)).unwrap();
        assert!(sim.run(&cfg, &mut NoHooks).is_err());
    }

    #[test]
    fn timestep_counts_up() {
        let mut sim = Simulation::new(&tgv_config(8, 1)).unwrap();
        for k in 1..=5 {
            sim.step().unwrap();
            assert_eq!(sim.state().timestep(), k);
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let mut cfg = tgv_config(8, 4);
        cfg.output_every = 2;
        let mut sim = Simulation::new(&cfg).unwrap();
        sim.state.pre.set(3, 2, 2, f64::NAN);
        let err = sim.run(&cfg, &mut NoHooks).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 2 }), "{err}");
        assert!(err.is_numerical());
    }

    #[test]
    fn quiescent_cavity_step_is_identity() {
        let spec = CaseSpec::ldc(12, 100.0, 0.0).with_viscosity(0.05);
        for mode in PrecisionMode::ALL {
            let mut s = cases::init_ldc(&spec, mode, Layout::ColumnMajor).unwrap();
            let before = s.clone();
            step(&mut s, Schedule::Auto).unwrap();
            assert_eq!(s.timestep(), 1);
            assert!(s.populations().same_values(before.populations()), "{mode}");
        }
    }
}

//! Lid-driven cavity, Taylor-Green vortex and von Karman street setups,
//! plus the analytic and signal-processing oracles used to validate them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boundaries::{CellKind, CellMask};
use crate::engine::SimState;
use crate::error::{Error, Result};
use crate::field::{Grid, Layout, PopulationField};
use crate::kernel::{fused_collide_stream, KernelMode, Schedule};
use crate::lattice::{self, omega_from_reynolds, RelaxationParams, SOUND_SPEED_SQ, WEIGHTS};
use crate::precision::PrecisionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    #[default]
    Ldc,
    Tgv,
    Vks,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Ldc => "ldc",
            CaseKind::Tgv => "tgv",
            CaseKind::Vks => "vks",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ldc" => Ok(CaseKind::Ldc),
            "tgv" => Ok(CaseKind::Tgv),
            "vks" => Ok(CaseKind::Vks),
            _ => Err(Error::config(format!("unknown case '{s}' (expected ldc, tgv or vks)"))),
        }
    }
}

/// Cylinder geometry in cell units. Cell `(x, y)` has its centre at
/// `(x + 0.5, y + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub cx: f64,
    pub cy: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub kind: CaseKind,
    pub nx: usize,
    pub ny: usize,
    pub reynolds: f64,
    /// Characteristic lattice velocity.
    pub u0: f64,
    pub cylinder: Option<Cylinder>,
    /// Overrides the Reynolds-number mapping when set.
    pub viscosity: Option<f64>,
    /// VKS only: add the symmetry-breaking initial perturbation.
    pub perturb: bool,
}

const MAX_MACH_SPEED: f64 = 0.3;

impl CaseSpec {
    pub fn ldc(n: usize, reynolds: f64, u0: f64) -> Self {
        Self {
            kind: CaseKind::Ldc,
            nx: n,
            ny: n,
            reynolds,
            u0,
            cylinder: None,
            viscosity: None,
            perturb: false,
        }
    }

    pub fn tgv(n: usize, reynolds: f64, u0: f64) -> Self {
        Self {
            kind: CaseKind::Tgv,
            ..Self::ldc(n, reynolds, u0)
        }
    }

    /// Channel of 24D x 8D with the cylinder at (6D, ny/2 + 0.5).
    pub fn vks(diameter: usize, reynolds: f64, u0: f64) -> Self {
        Self::vks_in_channel(24 * diameter, 8 * diameter, diameter, reynolds, u0)
    }

    pub fn vks_in_channel(nx: usize, ny: usize, diameter: usize, reynolds: f64, u0: f64) -> Self {
        let d = diameter as f64;
        Self {
            kind: CaseKind::Vks,
            nx,
            ny,
            reynolds,
            u0,
            cylinder: Some(Cylinder {
                cx: 6.0 * d,
                cy: ny as f64 / 2.0 + 0.5,
                diameter: d,
            }),
            viscosity: None,
            perturb: true,
        }
    }

    /// Mirror-symmetric channel: cylinder on the centreline, no perturbation.
    pub fn vks_symmetric(diameter: usize, reynolds: f64, u0: f64) -> Self {
        let mut spec = Self::vks(diameter, reynolds, u0);
        if let Some(c) = spec.cylinder.as_mut() {
            c.cy = spec.ny as f64 / 2.0;
        }
        spec.perturb = false;
        spec
    }

    pub fn with_viscosity(mut self, nu: f64) -> Self {
        self.viscosity = Some(nu);
        self
    }

    pub fn characteristic_length(&self) -> f64 {
        match self.kind {
            CaseKind::Ldc => self.ny as f64,
            CaseKind::Tgv => self.nx as f64,
            CaseKind::Vks => self.cylinder.map_or(0.0, |c| c.diameter),
        }
    }

    pub fn relaxation(&self) -> Result<RelaxationParams> {
        match self.viscosity {
            Some(nu) => RelaxationParams::from_viscosity(nu),
            None => omega_from_reynolds(self.reynolds, self.u0, self.characteristic_length()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::config("grid must be non-empty"));
        }
        if !(self.reynolds > 0.0 && self.reynolds.is_finite()) {
            return Err(Error::config(format!(
                "Reynolds number {} must be positive",
                self.reynolds
            )));
        }
        let max_u = MAX_MACH_SPEED * SOUND_SPEED_SQ.sqrt();
        if !(self.u0 >= 0.0 && self.u0 <= max_u + 1e-12) {
            return Err(Error::config(format!(
                "u0 = {} outside [0, 0.3 c_s = {max_u:.4}]",
                self.u0
            )));
        }
        if self.u0 == 0.0 && (self.kind != CaseKind::Ldc || self.viscosity.is_none()) {
            return Err(Error::config(
                "u0 = 0 is only meaningful for a quiescent cavity with an explicit viscosity",
            ));
        }
        match self.kind {
            CaseKind::Ldc => {
                if self.nx < 3 || self.ny < 3 {
                    return Err(Error::config("cavity needs at least 3x3 cells"));
                }
            }
            CaseKind::Tgv => {
                if self.nx != self.ny {
                    return Err(Error::config(format!(
                        "Taylor-Green vortex needs a square grid, got {}x{}",
                        self.nx, self.ny
                    )));
                }
            }
            CaseKind::Vks => self.validate_cylinder()?,
        }
        Ok(())
    }

    fn validate_cylinder(&self) -> Result<()> {
        let c = self
            .cylinder
            .ok_or_else(|| Error::config("channel case needs a cylinder"))?;
        if !(c.diameter >= 1.0) {
            return Err(Error::config(format!("cylinder diameter {} must be >= 1", c.diameter)));
        }
        let r = c.diameter / 2.0;
        let (nx, ny) = (self.nx as f64, self.ny as f64);
        // one free fluid cell between the disk and the inlet column / walls
        let inside = c.cx - r > 2.0 && c.cy - r > 2.0 && c.cy + r < ny - 2.0 && c.cx + r < nx - 2.0;
        if !inside {
            return Err(Error::config(format!(
                "cylinder at ({}, {}) with D = {} touches the channel boundary",
                c.cx, c.cy, c.diameter
            )));
        }
        if nx - (c.cx + r) < 4.0 * c.diameter {
            return Err(Error::config(format!(
                "need at least 4D = {} cells downstream of the cylinder",
                4.0 * c.diameter
            )));
        }
        Ok(())
    }

    /// Probe cell 3D downstream of the cylinder centre and 1D above it.
    pub fn probe(&self) -> Option<(usize, usize)> {
        let c = self.cylinder?;
        let x = (c.cx + 3.0 * c.diameter).floor() as usize;
        let y = (c.cy + c.diameter).floor() as usize;
        (x < self.nx && y < self.ny).then_some((x, y))
    }
}

fn fill(field: &mut PopulationField, mut f: impl FnMut(usize, usize) -> [f64; lattice::Q]) {
    for y in 0..field.ny() {
        for x in 0..field.nx() {
            let v = f(x, y);
            field.set_cell(x, y, &v);
        }
    }
}

pub fn init(spec: &CaseSpec, mode: PrecisionMode, layout: Layout) -> Result<SimState> {
    match spec.kind {
        CaseKind::Ldc => init_ldc(spec, mode, layout),
        CaseKind::Tgv => init_tgv(spec, mode, layout),
        CaseKind::Vks => init_vks(spec, mode, layout),
    }
}

/// Closed cavity at rest with the top row moving at (u0, 0). The lid
/// excludes the two corner cells, which stay stationary walls.
pub fn init_ldc(spec: &CaseSpec, mode: PrecisionMode, layout: Layout) -> Result<SimState> {
    if spec.kind != CaseKind::Ldc {
        return Err(Error::config("init_ldc needs an ldc case"));
    }
    spec.validate()?;
    let params = spec.relaxation()?;
    let grid = Grid::new(spec.nx, spec.ny, layout)?;
    let mut mask = CellMask::periodic(grid);
    let (nx, ny) = (spec.nx, spec.ny);
    for y in 0..ny {
        for x in 0..nx {
            if x == 0 || y == 0 || x == nx - 1 {
                mask.set(x, y, CellKind::Solid);
            } else if y == ny - 1 {
                mask.set(x, y, CellKind::MovingWall);
            }
        }
    }
    mask.set(0, ny - 1, CellKind::Solid);
    mask.set(nx - 1, ny - 1, CellKind::Solid);
    mask.set_wall_velocity([spec.u0, 0.0]);
    mask.validate()?;

    let rest = rest_populations(mode, &params)?;
    let mut pre = PopulationField::new(grid, mode);
    fill(&mut pre, |_, _| rest);
    SimState::new(pre, mask, params)
}

/// Rest populations that one collision maps onto themselves bitwise in
/// `mode`. Starts from the weights and relaxes a single periodic cell until
/// the stored values stop changing. In f32 and f64 this is the weights.
pub fn rest_populations(mode: PrecisionMode, params: &RelaxationParams) -> Result<[f64; lattice::Q]> {
    let params = RelaxationParams {
        source: None,
        ..params.clone()
    };
    let grid = Grid::new(1, 1, Layout::default())?;
    let mask = CellMask::periodic(grid);
    let mut a = PopulationField::new(grid, mode);
    a.set_cell(0, 0, &WEIGHTS);
    let mut b = PopulationField::new(grid, mode);
    for _ in 0..256 {
        fused_collide_stream(&a, &mut b, &params, &mask, Schedule::Auto, KernelMode::CollideStream)?;
        if b.same_values(&a) {
            return Ok(a.cell(0, 0));
        }
        std::mem::swap(&mut a, &mut b);
    }
    Err(Error::Measurement(format!(
        "rest state does not settle in {mode} at omega = {}",
        params.omega
    )))
}

pub fn init_tgv(spec: &CaseSpec, mode: PrecisionMode, layout: Layout) -> Result<SimState> {
    if spec.kind != CaseKind::Tgv {
        return Err(Error::config("init_tgv needs a tgv case"));
    }
    spec.validate()?;
    let params = spec.relaxation()?;
    let grid = Grid::new(spec.nx, spec.ny, layout)?;
    let mask = CellMask::periodic(grid);
    let mut pre = PopulationField::new(grid, mode);
    let n = spec.nx;
    let mut err = None;
    fill(&mut pre, |x, y| {
        let (rho, ux, uy) = tgv_analytic(x as f64, y as f64, 0.0, params.nu, spec.u0, n);
        lattice::equilibrium(rho, ux, uy).unwrap_or_else(|e| {
            err = Some(e);
            WEIGHTS
        })
    });
    if let Some(e) = err {
        return Err(e);
    }
    SimState::new(pre, mask, params)
}

/// Decaying vortex array on an N x N periodic box, in lattice units.
pub fn tgv_analytic(x: f64, y: f64, t: f64, nu: f64, u0: f64, n: usize) -> (f64, f64, f64) {
    let k = 2.0 * PI / n as f64;
    let decay = (-2.0 * nu * k * k * t).exp();
    let ux = -u0 * (k * x).cos() * (k * y).sin() * decay;
    let uy = u0 * (k * x).sin() * (k * y).cos() * decay;
    let rho = 1.0
        - 0.75 * u0 * u0 * ((2.0 * k * x).cos() + (2.0 * k * y).cos()) * decay * decay;
    (rho, ux, uy)
}

pub fn init_vks(spec: &CaseSpec, mode: PrecisionMode, layout: Layout) -> Result<SimState> {
    if spec.kind != CaseKind::Vks {
        return Err(Error::config("init_vks needs a vks case"));
    }
    spec.validate()?;
    let params = spec.relaxation()?;
    let grid = Grid::new(spec.nx, spec.ny, layout)?;
    let mask = vks_mask(spec, grid)?;
    let (ny, u0) = (spec.ny, spec.u0);

    let mut pre = PopulationField::new(grid, mode);
    let mut err = None;
    fill(&mut pre, |x, y| {
        let uy = match mask.get(x, y) {
            CellKind::Fluid | CellKind::Outlet if spec.perturb => {
                0.01 * u0 * (PI * (y as f64 + 0.5) / ny as f64).sin()
            }
            _ => 0.0,
        };
        let result = match mask.get(x, y) {
            CellKind::Solid | CellKind::MovingWall => Ok(WEIGHTS),
            _ => lattice::equilibrium(1.0, u0, uy),
        };
        result.unwrap_or_else(|e| {
            err = Some(e);
            WEIGHTS
        })
    });
    if let Some(e) = err {
        return Err(e);
    }
    SimState::new(pre, mask, params)
}

fn vks_mask(spec: &CaseSpec, grid: Grid) -> Result<CellMask> {
    let c = spec
        .cylinder
        .ok_or_else(|| Error::config("channel case needs a cylinder"))?;
    let (nx, ny) = (spec.nx, spec.ny);
    let r2 = (c.diameter / 2.0).powi(2);
    let mut mask = CellMask::periodic(grid);
    for y in 0..ny {
        for x in 0..nx {
            let (px, py) = (x as f64 + 0.5 - c.cx, y as f64 + 0.5 - c.cy);
            let kind = if y == 0 || y == ny - 1 || px * px + py * py < r2 {
                CellKind::Solid
            } else if x == 0 {
                CellKind::Inlet
            } else if x == nx - 1 {
                CellKind::Outlet
            } else {
                CellKind::Fluid
            };
            mask.set(x, y, kind);
        }
    }
    mask.set_inlet_velocity([spec.u0, 0.0]);
    mask.validate()?;
    Ok(mask)
}

/// Cells flagged solid by the disk rasterization alone.
pub fn cylinder_cell_count(spec: &CaseSpec) -> usize {
    let Some(c) = spec.cylinder else { return 0 };
    let r2 = (c.diameter / 2.0).powi(2);
    (0..spec.ny)
        .flat_map(|y| (0..spec.nx).map(move |x| (x, y)))
        .filter(|&(x, y)| {
            let (px, py) = (x as f64 + 0.5 - c.cx, y as f64 + 0.5 - c.cy);
            px * px + py * py < r2
        })
        .count()
}

/// `sqrt(sum |u - u_ref|^2) / sqrt(sum |u_ref|^2)` against the analytic
/// vortex at the state's current timestep.
pub fn l2_velocity_error(state: &SimState, spec: &CaseSpec) -> f64 {
    let m = state.macro_fields();
    let t = state.timestep() as f64;
    let nu = state.params().nu;
    let mut num = 0.0;
    let mut den = 0.0;
    for y in 0..m.ny {
        for x in 0..m.nx {
            let k = m.index(x, y);
            let (_, rx, ry) = tgv_analytic(x as f64, y as f64, t, nu, spec.u0, spec.nx);
            num += (m.ux[k] - rx).powi(2) + (m.uy[k] - ry).powi(2);
            den += rx * rx + ry * ry;
        }
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

/// Cross-stream velocity sampled at a fixed probe.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeSeries {
    pub times: Vec<u64>,
    pub values: Vec<f64>,
}

impl ProbeSeries {
    pub fn push(&mut self, t: u64, v: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::config(format!(
                    "probe times must increase strictly ({t} after {last})"
                )));
            }
        }
        self.times.push(t);
        self.values.push(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Samples with `t >= from`.
    pub fn since(&self, from: u64) -> ProbeSeries {
        let start = self.times.partition_point(|&t| t < from);
        ProbeSeries {
            times: self.times[start..].to_vec(),
            values: self.values[start..].to_vec(),
        }
    }

    /// Residual after removing the least-squares line.
    pub fn detrended(&self) -> Vec<f64> {
        let n = self.len() as f64;
        if self.len() < 2 {
            return self.values.iter().map(|_| 0.0).collect();
        }
        let tm = self.times.iter().map(|&t| t as f64).sum::<f64>() / n;
        let vm = self.values.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (&t, &v) in self.times.iter().zip(&self.values) {
            let dt = t as f64 - tm;
            sxy += dt * (v - vm);
            sxx += dt * dt;
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        self.times
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| v - (vm + slope * (t as f64 - tm)))
            .collect()
    }

    /// Interpolated times at which the detrended signal changes sign.
    pub fn zero_crossings(&self) -> Vec<f64> {
        let r = self.detrended();
        let mut out = Vec::new();
        for k in 1..r.len() {
            let (a, b) = (r[k - 1], r[k]);
            if (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0) {
                let (t0, t1) = (self.times[k - 1] as f64, self.times[k] as f64);
                out.push(t0 + (t1 - t0) * a / (a - b));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shedding {
    pub crossings: usize,
    /// Shedding frequency in 1 / timestep.
    pub frequency: f64,
    pub strouhal: f64,
}

/// Strouhal number `f D / u0` from the mean zero-crossing spacing.
pub fn strouhal(series: &ProbeSeries, diameter: f64, u0: f64) -> Result<Shedding> {
    let z = series.zero_crossings();
    if z.len() < 4 {
        return Err(Error::NoShedding { crossings: z.len() });
    }
    let half_period = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
    let frequency = 1.0 / (2.0 * half_period);
    Ok(Shedding {
        crossings: z.len(),
        frequency,
        strouhal: frequency * diameter / u0,
    })
}

/// Total kinetic energy `sum rho |u|^2 / 2` over active cells.
pub fn kinetic_energy(state: &SimState) -> f64 {
    let m = state.macro_fields();
    let mask = state.mask();
    let mut e = 0.0;
    for y in 0..m.ny {
        for x in 0..m.nx {
            if mask.get(x, y).is_active() {
                let k = m.index(x, y);
                e += 0.5 * m.rho[k] * (m.ux[k] * m.ux[k] + m.uy[k] * m.uy[k]);
            }
        }
    }
    e
}

/// Largest velocity magnitude over active cells.
pub fn max_speed(state: &SimState) -> f64 {
    let m = state.macro_fields();
    let mask = state.mask();
    let mut best = 0.0f64;
    for y in 0..m.ny {
        for x in 0..m.nx {
            if mask.get(x, y).is_active() {
                let k = m.index(x, y);
                best = best.max((m.ux[k] * m.ux[k] + m.uy[k] * m.uy[k]).sqrt());
            }
        }
    }
    best
}

/// Probe traces of a cylinder wake.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WakeRecord {
    /// Cross-stream velocity at [`CaseSpec::probe`].
    pub probe: ProbeSeries,
    /// `uy(x, ny/2 - 1) + uy(x, ny/2)` at the probe column. Zero while the
    /// flow is mirror symmetric about the channel axis.
    pub asymmetry: ProbeSeries,
}

impl WakeRecord {
    /// First sample time at which the asymmetry exceeds `threshold`.
    pub fn onset(&self, threshold: f64) -> Option<u64> {
        self.asymmetry
            .times
            .iter()
            .zip(&self.asymmetry.values)
            .find(|(_, v)| v.abs() > threshold)
            .map(|(&t, _)| t)
    }
}

fn cell_uy(state: &SimState, x: usize, y: usize) -> f64 {
    let f = state.populations().cell(x, y);
    lattice::cell::moments(&f).2
}

/// Runs a cylinder case for `steps` steps and samples the wake every step.
pub fn record_wake(
    spec: &CaseSpec,
    mode: PrecisionMode,
    layout: Layout,
    schedule: Schedule,
    steps: u64,
) -> Result<WakeRecord> {
    let (px, py) = spec
        .probe()
        .ok_or_else(|| Error::config("wake probe needs a cylinder case"))?;
    let mid = spec.ny / 2;
    let state = init(spec, mode, layout)?;
    let mut sim = crate::engine::Simulation::from_state(state, schedule, 0)?;
    let mut rec = WakeRecord::default();
    for _ in 0..steps {
        sim.step()?;
        let s = sim.state();
        let t = s.timestep();
        let v = cell_uy(s, px, py);
        if !v.is_finite() {
            return Err(Error::Divergence { step: t });
        }
        rec.probe.push(t, v)?;
        rec.asymmetry
            .push(t, cell_uy(s, px, mid - 1) + cell_uy(s, px, mid))?;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_state_settles_in_every_mode() {
        for mode in PrecisionMode::ALL {
            for k in 1..40 {
                let omega = 0.05 * k as f64;
                let p = RelaxationParams::from_omega(omega).unwrap();
                let f = rest_populations(mode, &p).unwrap();
                let (rho, ux, uy) = lattice::moments(&f).unwrap();
                assert!((rho - 1.0).abs() < 1e-3, "{mode} {omega}");
                assert_eq!((ux, uy), (0.0, 0.0));
                for g in [[1, 2, 3, 4], [5, 6, 7, 8]] {
                    assert!(g.iter().all(|&i| f[i] == f[g[0]]));
                }
                if matches!(mode, PrecisionMode::Single | PrecisionMode::Double) {
                    assert_eq!(f, WEIGHTS.map(|w| if mode == PrecisionMode::Single { w as f32 as f64 } else { w }));
                }
            }
        }
    }

    #[test]
    fn tgv_analytic_examples() {
        let n = 32;
        let (_, ux, uy) = tgv_analytic(0.0, n as f64 / 4.0, 0.0, 0.01, 0.05, n);
        assert!((ux + 0.05).abs() < 1e-17);
        assert!(uy.abs() < 1e-17);

        let nu = 0.02;
        let k = 2.0 * PI / n as f64;
        let tau = 1.0 / (2.0 * nu * k * k);
        let (_, ux, _) = tgv_analytic(0.0, n as f64 / 4.0, tau, nu, 0.05, n);
        assert!((ux.abs() - 0.05 / std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn tgv_analytic_is_divergence_free() {
        // spectral derivative of the closed form, sampled off-grid
        let (n, u0, nu, t) = (40, 0.03, 0.05, 17.0);
        let k = 2.0 * PI / n as f64;
        for &(x, y) in &[(0.3, 1.7), (5.5, 9.25), (33.0, 2.0)] {
            let decay = (-2.0 * nu * k * k * t).exp();
            let dux_dx = u0 * k * (k * x).sin() * (k * y).sin() * decay;
            let duy_dy = -u0 * k * (k * x).sin() * (k * y).sin() * decay;
            assert!((dux_dx + duy_dy).abs() < 1e-18);
            let h = 1e-5;
            let fd = (tgv_analytic(x + h, y, t, nu, u0, n).1 - tgv_analytic(x - h, y, t, nu, u0, n).1)
                / (2.0 * h)
                + (tgv_analytic(x, y + h, t, nu, u0, n).2 - tgv_analytic(x, y - h, t, nu, u0, n).2)
                    / (2.0 * h);
            assert!(fd.abs() < 1e-10);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(CaseSpec::tgv(32, 100.0, 0.05).validate().is_ok());
        let mut s = CaseSpec::tgv(32, 100.0, 0.05);
        s.ny = 16;
        assert!(s.validate().is_err());
        assert!(CaseSpec::ldc(32, -1.0, 0.05).validate().is_err());
        assert!(CaseSpec::ldc(32, 100.0, 0.5).validate().is_err());
        assert!(CaseSpec::ldc(32, 100.0, 0.0).validate().is_err());
        assert!(CaseSpec::ldc(32, 100.0, 0.0).with_viscosity(0.1).validate().is_ok());
        assert!(CaseSpec::vks(10, 100.0, 0.1).validate().is_ok());
    }

    #[test]
    fn vks_zero_diameter_and_touching_disks_rejected() {
        let mut s = CaseSpec::vks(10, 100.0, 0.1);
        s.cylinder.as_mut().unwrap().diameter = 0.0;
        assert!(s.validate().is_err());

        let mut s = CaseSpec::vks(10, 100.0, 0.1);
        s.cylinder.as_mut().unwrap().cy = 4.0;
        let err = init_vks(&s, PrecisionMode::Double, Layout::ColumnMajor).unwrap_err();
        assert!(err.to_string().contains("touches"), "{err}");

        let mut s = CaseSpec::vks(10, 100.0, 0.1);
        s.cylinder.as_mut().unwrap().cx = 210.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn probe_position() {
        let s = CaseSpec::vks(20, 150.0, 0.1);
        assert_eq!(s.probe(), Some((180, 100)));
    }

    #[test]
    fn disk_rasterization_matches_area() {
        for d in [8usize, 13, 20, 31] {
            let s = CaseSpec::vks(d, 100.0, 0.1);
            let area = PI * (d as f64 / 2.0).powi(2);
            let count = cylinder_cell_count(&s) as f64;
            assert!((count - area).abs() <= 0.1 * area, "D={d}: {count} vs {area}");
        }
    }

    #[test]
    fn probe_series_requires_increasing_times() {
        let mut p = ProbeSeries::default();
        p.push(1, 0.0).unwrap();
        assert!(p.push(1, 0.0).is_err());
        assert!(p.push(0, 0.0).is_err());
    }

    fn sine(period: f64, drift: f64, steps: u64) -> ProbeSeries {
        let mut p = ProbeSeries::default();
        for t in (0..steps).step_by(5) {
            let v = 0.01 * (2.0 * PI * t as f64 / period + 0.3).sin() + drift * t as f64;
            p.push(t, v).unwrap();
        }
        p
    }

    #[test]
    fn strouhal_of_constructed_sine() {
        let st = strouhal(&sine(200.0, 0.0, 4000), 20.0, 0.1).unwrap();
        assert!((st.strouhal - 1.0).abs() < 2e-3, "{st:?}");
        assert!(st.crossings >= 38);
    }

    #[test]
    fn strouhal_ignores_linear_drift() {
        let plain = strouhal(&sine(200.0, 0.0, 4000), 20.0, 0.1).unwrap();
        let drift = strouhal(&sine(200.0, 2e-6, 4000), 20.0, 0.1).unwrap();
        assert!((drift.strouhal - plain.strouhal).abs() <= 0.01 * plain.strouhal);
    }

    #[test]
    fn constant_signal_has_no_shedding() {
        let mut p = ProbeSeries::default();
        for t in 0..100 {
            p.push(t, 0.25).unwrap();
        }
        assert!(matches!(strouhal(&p, 20.0, 0.1), Err(Error::NoShedding { .. })));
    }
}

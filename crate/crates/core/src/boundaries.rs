//! Cell flags and the boundary treatments composed with the fused gather.
//!
//! Walls use half-way bounce-back: a population that would be pulled from a
//! wall cell is replaced by the opposite population leaving the destination
//! cell. Moving walls add the usual momentum injection term. Inlet and outlet
//! columns are overwritten after the fused pass.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::field::{Grid, PopulationField};
use crate::lattice::{self, OPPOSITE, Q, SOUND_SPEED_SQ, VELOCITIES, WEIGHTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellKind {
    Fluid = 0,
    Solid = 1,
    /// Wall moving with the mask's wall velocity.
    MovingWall = 2,
    /// West-column velocity inlet.
    Inlet = 3,
    /// East-column zero-gradient outlet.
    Outlet = 4,
}

impl CellKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => CellKind::Fluid,
            1 => CellKind::Solid,
            2 => CellKind::MovingWall,
            3 => CellKind::Inlet,
            4 => CellKind::Outlet,
            _ => return None,
        })
    }

    /// Cells whose populations are produced by the fused update.
    pub fn is_active(self) -> bool {
        !self.is_wall()
    }

    pub fn is_wall(self) -> bool {
        matches!(self, CellKind::Solid | CellKind::MovingWall)
    }
}

pub(crate) const PASSIVE: u32 = 1 << 18;
pub(crate) const WRAP: u32 = 1 << 19;
pub(crate) const MOVING_SHIFT: u32 = 9;

/// Per-cell gather plan derived from the mask.
///
/// bits 0..9: source of direction i is a wall (bounce back);
/// bits 9..18: that wall is moving; `PASSIVE`: wall cell, copied through;
/// `WRAP`: cell on the domain edge, neighbours wrap periodically.
#[derive(Debug, Clone)]
pub(crate) struct Links {
    pub flags: Vec<u32>,
    /// Moving-wall term added to the reflected population, per direction.
    pub wall_delta: [f64; Q],
}

/// Flags for every cell plus the wall and inlet velocities.
#[derive(Debug, Clone)]
pub struct CellMask {
    grid: Grid,
    kinds: Vec<CellKind>,
    wall_velocity: [f64; 2],
    inlet_velocity: [f64; 2],
    links: OnceLock<Links>,
}

impl PartialEq for CellMask {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.kinds == other.kinds
            && self.wall_velocity == other.wall_velocity
            && self.inlet_velocity == other.inlet_velocity
    }
}

impl CellMask {
    /// All-fluid mask: a fully periodic domain.
    pub fn periodic(grid: Grid) -> Self {
        Self {
            grid,
            kinds: vec![CellKind::Fluid; grid.cells()],
            wall_velocity: [0.0; 2],
            inlet_velocity: [0.0; 2],
            links: OnceLock::new(),
        }
    }

    pub(crate) fn from_parts(
        grid: Grid,
        kinds: Vec<CellKind>,
        wall_velocity: [f64; 2],
        inlet_velocity: [f64; 2],
    ) -> Result<Self> {
        if kinds.len() != grid.cells() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} cells, grid has {}",
                kinds.len(),
                grid.cells()
            )));
        }
        let mask = Self {
            grid,
            kinds,
            wall_velocity,
            inlet_velocity,
            links: OnceLock::new(),
        };
        mask.validate()?;
        Ok(mask)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn get(&self, x: usize, y: usize) -> CellKind {
        self.kinds[self.grid.index(x, y)]
    }

    pub fn get_flat(&self, idx: usize) -> CellKind {
        self.kinds[idx]
    }

    pub fn set(&mut self, x: usize, y: usize, kind: CellKind) {
        let idx = self.grid.index(x, y);
        self.kinds[idx] = kind;
        self.links = OnceLock::new();
    }

    pub fn kinds(&self) -> &[CellKind] {
        &self.kinds
    }

    pub fn wall_velocity(&self) -> [f64; 2] {
        self.wall_velocity
    }

    pub fn set_wall_velocity(&mut self, u: [f64; 2]) {
        self.wall_velocity = u;
        self.links = OnceLock::new();
    }

    pub fn inlet_velocity(&self) -> [f64; 2] {
        self.inlet_velocity
    }

    pub fn set_inlet_velocity(&mut self, u: [f64; 2]) {
        self.inlet_velocity = u;
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.kinds.iter().filter(|k| **k == kind).count()
    }

    pub fn has_open_boundaries(&self) -> bool {
        self.kinds
            .iter()
            .any(|k| matches!(k, CellKind::Inlet | CellKind::Outlet))
    }

    /// Same flags in another index order.
    pub fn to_layout(&self, layout: crate::field::Layout) -> CellMask {
        let grid = Grid { layout, ..self.grid };
        let mut kinds = vec![CellKind::Fluid; grid.cells()];
        for y in 0..grid.ny {
            for x in 0..grid.nx {
                kinds[grid.index(x, y)] = self.get(x, y);
            }
        }
        CellMask {
            grid,
            kinds,
            wall_velocity: self.wall_velocity,
            inlet_velocity: self.inlet_velocity,
            links: OnceLock::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let speed = |u: [f64; 2]| (u[0] * u[0] + u[1] * u[1]).sqrt();
        if !self.wall_velocity.iter().all(|v| v.is_finite()) {
            return Err(Error::config("wall velocity must be finite"));
        }
        if speed(self.wall_velocity) > 0.3 * SOUND_SPEED_SQ.sqrt() + 1e-12 {
            return Err(Error::config(format!(
                "wall speed {} exceeds 0.3 c_s",
                speed(self.wall_velocity)
            )));
        }
        if !self.inlet_velocity.iter().all(|v| v.is_finite()) {
            return Err(Error::config("inlet velocity must be finite"));
        }
        for y in 0..self.grid.ny {
            for x in 0..self.grid.nx {
                match self.get(x, y) {
                    CellKind::Inlet if x != 0 => {
                        return Err(Error::config(format!(
                            "inlet cell ({x}, {y}) is not on the west column"
                        )))
                    }
                    CellKind::Outlet if x != self.grid.nx - 1 || x == 0 => {
                        return Err(Error::config(format!(
                            "outlet cell ({x}, {y}) is not on the east column"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub(crate) fn links(&self) -> &Links {
        self.links.get_or_init(|| self.build_links())
    }

    fn build_links(&self) -> Links {
        let g = self.grid;
        let mut flags = vec![0u32; g.cells()];
        for y in 0..g.ny {
            for x in 0..g.nx {
                let idx = g.index(x, y);
                let mut bits = 0u32;
                if x == 0 || y == 0 || x + 1 == g.nx || y + 1 == g.ny {
                    bits |= WRAP;
                }
                if self.kinds[idx].is_wall() {
                    bits |= PASSIVE;
                } else {
                    for (i, c) in VELOCITIES.iter().enumerate() {
                        let (sx, sy) = g.wrap(x, y, -c[0], -c[1]);
                        match self.get(sx, sy) {
                            CellKind::Solid => bits |= 1 << i,
                            CellKind::MovingWall => bits |= (1 << i) | (1 << (i as u32 + MOVING_SHIFT)),
                            _ => {}
                        }
                    }
                }
                flags[idx] = bits;
            }
        }
        // Direction i reflects the population that hit the wall along opp(i).
        let wall_delta = std::array::from_fn(|i| {
            moving_wall_correction(0.0, OPPOSITE[i], self.wall_velocity, 1.0)
        });
        Links { flags, wall_delta }
    }
}

/// Bounce-back value leaving a moving wall: `value - 2 w_i rho_w (c_i . u_wall) / c_s^2`,
/// where `i` is the direction that hit the wall and `value` its population.
pub fn moving_wall_correction(value: f64, i: usize, u_wall: [f64; 2], rho_wall: f64) -> f64 {
    let cu = VELOCITIES[i][0] as f64 * u_wall[0] + VELOCITIES[i][1] as f64 * u_wall[1];
    value - 2.0 * WEIGHTS[i] * rho_wall * cu / SOUND_SPEED_SQ
}

/// Incoming populations for the fluid cell `(x, y)`, widened to f64.
pub fn gather_with_boundaries(
    pre: &PopulationField,
    x: usize,
    y: usize,
    mask: &CellMask,
) -> [f64; Q] {
    let g = pre.grid();
    std::array::from_fn(|i| {
        let c = VELOCITIES[i];
        let (sx, sy) = g.wrap(x, y, -c[0], -c[1]);
        match mask.get(sx, sy) {
            CellKind::Solid => pre.get(OPPOSITE[i], x, y),
            CellKind::MovingWall => moving_wall_correction(
                pre.get(OPPOSITE[i], x, y),
                OPPOSITE[i],
                mask.wall_velocity(),
                1.0,
            ),
            _ => pre.get(i, sx, sy),
        }
    })
}

/// Post-pass for open channels: inlet cells are set to the equilibrium of
/// (rho = 1, u_in), outlet cells copy their west neighbour.
pub fn apply_inlet_outlet(post: &mut PopulationField, mask: &CellMask) -> Result<()> {
    if post.grid() != mask.grid() {
        return Err(Error::DimensionMismatch(
            "mask and field grids differ".to_string(),
        ));
    }
    mask.validate()?;
    let [ux, uy] = mask.inlet_velocity();
    let feq = lattice::equilibrium(1.0, ux, uy)?;
    let nx = post.nx();
    for y in 0..post.ny() {
        if mask.get(0, y) == CellKind::Inlet {
            post.set_cell(0, y, &feq);
        }
        if mask.get(nx - 1, y) == CellKind::Outlet {
            for i in 0..Q {
                let v = post.get(i, nx - 2, y);
                post.set(i, nx - 1, y, v);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Layout;
    use crate::precision::PrecisionMode;

    fn grid(nx: usize, ny: usize) -> Grid {
        Grid::new(nx, ny, Layout::ColumnMajor).unwrap()
    }

    fn numbered(g: Grid) -> PopulationField {
        let mut f = PopulationField::new(g, PrecisionMode::Double);
        for i in 0..Q {
            for y in 0..g.ny {
                for x in 0..g.nx {
                    f.set(i, x, y, (1 + i * 1000 + y * 10 + x) as f64);
                }
            }
        }
        f
    }

    #[test]
    fn interior_gather_is_plain_pull() {
        let g = grid(4, 4);
        let f = numbered(g);
        let mask = CellMask::periodic(g);
        let got = gather_with_boundaries(&f, 1, 2, &mask);
        for i in 0..Q {
            let c = VELOCITIES[i];
            let (sx, sy) = g.wrap(1, 2, -c[0], -c[1]);
            assert_eq!(got[i], f.get(i, sx, sy));
        }
    }

    #[test]
    fn south_wall_reflects_south_moving_population() {
        let g = grid(3, 3);
        let f = numbered(g);
        let mut mask = CellMask::periodic(g);
        mask.set(1, 0, CellKind::Solid);
        let got = gather_with_boundaries(&f, 1, 1, &mask);
        // north-moving (2) comes from (1, 0), which is solid: own south-moving value.
        assert_eq!(got[2], f.get(4, 1, 1));
        assert_eq!(got[1], f.get(1, 0, 1));
    }

    #[test]
    fn enclosed_cell_reflects_everything() {
        let g = grid(3, 3);
        let f = numbered(g);
        let mut mask = CellMask::periodic(g);
        for y in 0..3 {
            for x in 0..3 {
                if (x, y) != (1, 1) {
                    mask.set(x, y, CellKind::Solid);
                }
            }
        }
        let got = gather_with_boundaries(&f, 1, 1, &mask);
        assert_eq!(got[0], f.get(0, 1, 1));
        for i in 1..Q {
            assert_eq!(got[i], f.get(OPPOSITE[i], 1, 1));
        }
        let before: f64 = f.cell(1, 1).iter().sum();
        let after: f64 = got.iter().sum();
        assert_eq!(before, after);
    }

    #[test]
    fn moving_wall_correction_examples() {
        assert_eq!(moving_wall_correction(0.3, 5, [0.0, 0.0], 1.0), 0.3);
        // c_2 = (0, 1) is perpendicular to a lid moving along x.
        assert_eq!(moving_wall_correction(0.3, 2, [0.1, 0.0], 1.0), 0.3);
        // w = 1/36 and c.u = 0.1
        let d = moving_wall_correction(0.0, 5, [0.1, 0.0], 1.0);
        assert!((d - (-1.0 / 60.0)).abs() < 1e-16);
    }

    #[test]
    fn moving_wall_correction_is_antisymmetric_and_linear() {
        for i in 0..Q {
            let u = [0.07, -0.03];
            let plus = moving_wall_correction(0.0, i, u, 1.0);
            let minus = moving_wall_correction(0.0, i, [-u[0], -u[1]], 1.0);
            let double = moving_wall_correction(0.0, i, [2.0 * u[0], 2.0 * u[1]], 1.0);
            assert_eq!(plus, -minus);
            assert!((double - 2.0 * plus).abs() < 1e-17);
        }
    }

    #[test]
    fn plain_bounce_back_preserves_population_multiset() {
        let g = grid(3, 3);
        let f = numbered(g);
        let mut mask = CellMask::periodic(g);
        for x in 0..3 {
            mask.set(x, 2, CellKind::Solid);
        }
        let own = f.cell(1, 1);
        let got = gather_with_boundaries(&f, 1, 1, &mask);
        // reflected directions draw on own values only.
        for i in [4usize, 7, 8] {
            assert_eq!(got[i], own[OPPOSITE[i]]);
        }
        let mut reflected: Vec<f64> = [4usize, 7, 8].iter().map(|&i| got[i]).collect();
        let mut hitting: Vec<f64> = [2usize, 5, 6].iter().map(|&i| own[i]).collect();
        reflected.sort_by(f64::total_cmp);
        hitting.sort_by(f64::total_cmp);
        assert_eq!(reflected, hitting);
    }

    #[test]
    fn inlet_and_outlet_post_pass() {
        let g = grid(8, 4);
        let mut mask = CellMask::periodic(g);
        for y in 0..4 {
            mask.set(0, y, CellKind::Inlet);
            mask.set(7, y, CellKind::Outlet);
        }
        mask.set_inlet_velocity([0.0, 0.0]);
        let mut f = numbered(g);
        apply_inlet_outlet(&mut f, &mask).unwrap();
        for y in 0..4 {
            for i in 0..Q {
                assert!((f.get(i, 0, y) - WEIGHTS[i]).abs() < 1e-17);
                assert_eq!(f.get(i, 7, y), f.get(i, 6, y));
            }
        }
    }

    #[test]
    fn uniform_flow_is_inlet_outlet_fixed_point() {
        let g = grid(8, 4);
        let mut mask = CellMask::periodic(g);
        for y in 0..4 {
            mask.set(0, y, CellKind::Inlet);
            mask.set(7, y, CellKind::Outlet);
        }
        mask.set_inlet_velocity([0.05, 0.0]);
        let feq = lattice::equilibrium(1.0, 0.05, 0.0).unwrap();
        let mut f = PopulationField::new(g, PrecisionMode::Double);
        for y in 0..4 {
            for x in 0..8 {
                f.set_cell(x, y, &feq);
            }
        }
        let before = f.clone();
        apply_inlet_outlet(&mut f, &mask).unwrap();
        assert_eq!(before, f);
    }

    #[test]
    fn misplaced_inlet_is_rejected() {
        let g = grid(8, 4);
        let mut mask = CellMask::periodic(g);
        mask.set(3, 1, CellKind::Inlet);
        let mut f = numbered(g);
        assert!(matches!(apply_inlet_outlet(&mut f, &mask), Err(Error::Config(_))));
        let mut mask = CellMask::periodic(g);
        mask.set(3, 1, CellKind::Outlet);
        assert!(mask.validate().is_err());
    }

    #[test]
    fn fast_lid_is_rejected() {
        let mut mask = CellMask::periodic(grid(4, 4));
        mask.set_wall_velocity([0.5, 0.0]);
        assert!(mask.validate().is_err());
    }

    #[test]
    fn links_flag_walls_and_edges() {
        let g = grid(4, 4);
        let mut mask = CellMask::periodic(g);
        mask.set(1, 0, CellKind::Solid);
        mask.set(2, 3, CellKind::MovingWall);
        let links = mask.links();
        let f = links.flags[g.index(1, 1)];
        assert_ne!(f & (1 << 2), 0);
        assert_eq!(f & PASSIVE, 0);
        assert_eq!(f & WRAP, 0);
        let lid_below = links.flags[g.index(2, 2)];
        assert_ne!(lid_below & (1 << 4), 0);
        assert_ne!(lid_below & (1 << (4 + MOVING_SHIFT)), 0);
        assert_ne!(links.flags[g.index(1, 0)] & PASSIVE, 0);
        assert_ne!(links.flags[g.index(0, 2)] & WRAP, 0);
    }
}

//! Structure-of-arrays population storage.

use std::fmt;
use std::str::FromStr;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Q;
use crate::precision::{PrecisionMode, Real, StoragePrecision, Stored};

/// Index order of a plane. Cells are addressed as `(x, y)`; row-major makes
/// `y` the unit-stride index, column-major makes `x` unit-stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[serde(rename = "row")]
    RowMajor,
    #[default]
    #[serde(rename = "col")]
    ColumnMajor,
}

impl Layout {
    pub const ALL: [Layout; 2] = [Layout::RowMajor, Layout::ColumnMajor];

    pub fn code(self) -> u8 {
        match self {
            Layout::RowMajor => 0,
            Layout::ColumnMajor => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::RowMajor => "row",
            Layout::ColumnMajor => "col",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "row" | "row-major" => Ok(Layout::RowMajor),
            "col" | "column" | "column-major" => Ok(Layout::ColumnMajor),
            _ => Err(Error::config(format!("unknown layout '{s}' (expected row or col)"))),
        }
    }
}

/// Grid extents plus index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub layout: Layout,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, layout: Layout) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::config(format!("grid {nx}x{ny} must be non-empty")));
        }
        Ok(Self { nx, ny, layout })
    }

    #[inline(always)]
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline(always)]
    pub fn index(&self, x: usize, y: usize) -> usize {
        match self.layout {
            Layout::RowMajor => x * self.ny + y,
            Layout::ColumnMajor => y * self.nx + x,
        }
    }

    #[inline(always)]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        match self.layout {
            Layout::RowMajor => (idx / self.ny, idx % self.ny),
            Layout::ColumnMajor => (idx % self.nx, idx / self.nx),
        }
    }

    /// Flat-index offsets of (x, y) -> (x + dx, y + dy) away from the edges.
    #[inline(always)]
    pub fn strides(&self) -> (isize, isize) {
        match self.layout {
            Layout::RowMajor => (self.ny as isize, 1),
            Layout::ColumnMajor => (1, self.nx as isize),
        }
    }

    /// Periodic neighbour (x + dx, y + dy).
    #[inline(always)]
    pub fn wrap(&self, x: usize, y: usize, dx: i32, dy: i32) -> (usize, usize) {
        let wx = (x as i64 + dx as i64).rem_euclid(self.nx as i64) as usize;
        let wy = (y as i64 + dy as i64).rem_euclid(self.ny as i64) as usize;
        (wx, wy)
    }

    /// Extent along the unit-stride axis and the number of such lines.
    pub fn line_shape(&self) -> (usize, usize) {
        match self.layout {
            Layout::RowMajor => (self.ny, self.nx),
            Layout::ColumnMajor => (self.nx, self.ny),
        }
    }
}

/// Nine contiguous planes stored back to back: plane `i` occupies
/// `[i * cells, (i + 1) * cells)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Planes {
    Half(Vec<f16>),
    Single(Vec<f32>),
    Double(Vec<f64>),
}

impl Planes {
    fn zeros(storage: StoragePrecision, len: usize) -> Self {
        match storage {
            StoragePrecision::Half => Planes::Half(vec![f16::ZERO; len]),
            StoragePrecision::Single => Planes::Single(vec![0.0; len]),
            StoragePrecision::Double => Planes::Double(vec![0.0; len]),
        }
    }

    fn len(&self) -> usize {
        match self {
            Planes::Half(v) => v.len(),
            Planes::Single(v) => v.len(),
            Planes::Double(v) => v.len(),
        }
    }

    fn as_ptr(&self) -> *const u8 {
        match self {
            Planes::Half(v) => v.as_ptr() as *const u8,
            Planes::Single(v) => v.as_ptr() as *const u8,
            Planes::Double(v) => v.as_ptr() as *const u8,
        }
    }
}

/// Distribution functions f_i over an nx x ny grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationField {
    grid: Grid,
    mode: PrecisionMode,
    planes: Planes,
}

impl PopulationField {
    pub fn new(grid: Grid, mode: PrecisionMode) -> Self {
        Self {
            grid,
            mode,
            planes: Planes::zeros(mode.storage(), Q * grid.cells()),
        }
    }

    pub(crate) fn from_planes(grid: Grid, mode: PrecisionMode, planes: Planes) -> Result<Self> {
        let expected = Q * grid.cells();
        let storage_ok = matches!(
            (mode.storage(), &planes),
            (StoragePrecision::Half, Planes::Half(_))
                | (StoragePrecision::Single, Planes::Single(_))
                | (StoragePrecision::Double, Planes::Double(_))
        );
        if !storage_ok {
            return Err(Error::DimensionMismatch(format!(
                "storage format does not match precision mode {mode}"
            )));
        }
        if planes.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} values, got {}",
                planes.len()
            )));
        }
        Ok(Self { grid, mode, planes })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.grid.ny
    }

    #[inline]
    pub fn layout(&self) -> Layout {
        self.grid.layout
    }

    #[inline]
    pub fn mode(&self) -> PrecisionMode {
        self.mode
    }

    pub fn storage_precision(&self) -> StoragePrecision {
        self.mode.storage()
    }

    pub fn planes(&self) -> &Planes {
        &self.planes
    }

    pub(crate) fn planes_mut(&mut self) -> &mut Planes {
        &mut self.planes
    }

    pub fn shares_storage_with(&self, other: &PopulationField) -> bool {
        self.planes.as_ptr() == other.planes.as_ptr()
    }

    /// Stored value of population `i` at `(x, y)`, widened to f64.
    pub fn get(&self, i: usize, x: usize, y: usize) -> f64 {
        self.get_flat(i, self.grid.index(x, y))
    }

    pub fn get_flat(&self, i: usize, idx: usize) -> f64 {
        let k = i * self.grid.cells() + idx;
        match &self.planes {
            Planes::Half(v) => v[k].to_f64(),
            Planes::Single(v) => v[k] as f64,
            Planes::Double(v) => v[k],
        }
    }

    /// Narrows `value` into storage (round to nearest).
    pub fn set(&mut self, i: usize, x: usize, y: usize, value: f64) {
        let k = i * self.grid.cells() + self.grid.index(x, y);
        match &mut self.planes {
            Planes::Half(v) => v[k] = f16::from_f64(value),
            Planes::Single(v) => v[k] = value as f32,
            Planes::Double(v) => v[k] = value,
        }
    }

    pub fn cell(&self, x: usize, y: usize) -> [f64; Q] {
        let idx = self.grid.index(x, y);
        std::array::from_fn(|i| self.get_flat(i, idx))
    }

    /// Writes a cell computed in the mode's compute format, so that the
    /// result is rounded exactly as the kernel would round it.
    pub fn set_cell(&mut self, x: usize, y: usize, f: &[f64; Q]) {
        let idx = self.grid.index(x, y);
        let cells = self.grid.cells();
        match (self.mode, &mut self.planes) {
            (PrecisionMode::Mixed1, Planes::Half(v)) => {
                for i in 0..Q {
                    v[i * cells + idx] = <f16 as Stored<f32>>::store(f32::from_f64(f[i]));
                }
            }
            (_, Planes::Single(v)) => {
                for i in 0..Q {
                    v[i * cells + idx] = f[i] as f32;
                }
            }
            (_, Planes::Double(v)) => {
                for i in 0..Q {
                    v[i * cells + idx] = f[i];
                }
            }
            (_, Planes::Half(v)) => {
                for i in 0..Q {
                    v[i * cells + idx] = f16::from_f64(f[i]);
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        match &self.planes {
            Planes::Half(v) => v.iter().all(|x| x.is_finite()),
            Planes::Single(v) => v.iter().all(|x| x.is_finite()),
            Planes::Double(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    /// Bitwise equality of stored values, independent of layout: compares
    /// every `(i, x, y)` entry.
    pub fn same_values(&self, other: &PopulationField) -> bool {
        if self.nx() != other.nx() || self.ny() != other.ny() || self.mode != other.mode {
            return false;
        }
        if self.layout() == other.layout() {
            return self.planes == other.planes;
        }
        (0..Q).all(|i| {
            (0..self.ny()).all(|y| {
                (0..self.nx()).all(|x| {
                    self.get(i, x, y).to_bits() == other.get(i, x, y).to_bits()
                })
            })
        })
    }

    /// Copy in another layout.
    pub fn to_layout(&self, layout: Layout) -> PopulationField {
        let grid = Grid { layout, ..self.grid };
        let mut out = PopulationField::new(grid, self.mode);
        let cells = grid.cells();
        macro_rules! transpose {
            ($src:expr, $dst:expr) => {
                for i in 0..Q {
                    for y in 0..grid.ny {
                        for x in 0..grid.nx {
                            $dst[i * cells + grid.index(x, y)] =
                                $src[i * cells + self.grid.index(x, y)];
                        }
                    }
                }
            };
        }
        match (&self.planes, &mut out.planes) {
            (Planes::Half(s), Planes::Half(d)) => transpose!(s, d),
            (Planes::Single(s), Planes::Single(d)) => transpose!(s, d),
            (Planes::Double(s), Planes::Double(d)) => transpose!(s, d),
            _ => unreachable!("same precision mode"),
        }
        out
    }
}

//! Fused collide-and-stream update (pull scheme).
//!
//! For every active destination cell the kernel gathers `f_pre_i(x - c_i)`,
//! relaxes the gathered populations towards equilibrium and writes all nine
//! results to `f_post` at `x`. Wall cells are copied through unchanged.
//!
//! The work is split into rectangular blocks in memory order. Each block is
//! written by one worker and the per-cell math does not depend on the
//! partition, so every schedule produces bitwise identical output.

use std::fmt;
use std::str::FromStr;

use half::f16;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::{CellMask, Links, MOVING_SHIFT, PASSIVE, WRAP};
use crate::error::{Error, Result};
use crate::field::{Grid, Layout, Planes, PopulationField};
use crate::lattice::{self, cell, RelaxationParams, OPPOSITE, Q, VELOCITIES};
use crate::precision::{PrecisionMode, Real, Stored};

/// How the iteration space is partitioned between workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Runtime picks the chunking from the grid shape and thread count.
    #[default]
    Auto,
    /// User-fixed tiles of `tx` x `ty` cells.
    Tiled { tx: usize, ty: usize },
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Auto => "auto",
            Schedule::Tiled { .. } => "tiled",
        }
    }

    pub fn tile(&self) -> Option<(usize, usize)> {
        match *self {
            Schedule::Auto => None,
            Schedule::Tiled { tx, ty } => Some((tx, ty)),
        }
    }

    pub fn validate(&self, nx: usize, ny: usize) -> Result<()> {
        if let Schedule::Tiled { tx, ty } = *self {
            if tx == 0 || ty == 0 {
                return Err(Error::config(format!("tile sizes must be >= 1, got {tx}x{ty}")));
            }
            if tx > nx || ty > ny {
                return Err(Error::config(format!(
                    "tile {tx}x{ty} exceeds the {nx}x{ny} grid"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Auto => f.write_str("auto"),
            Schedule::Tiled { tx, ty } => write!(f, "tiled({tx},{ty})"),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// Accepts `auto`, `tiled` (8x8 tiles) and `tiled(tx,ty)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "auto" {
            return Ok(Schedule::Auto);
        }
        if t == "tiled" {
            return Ok(Schedule::Tiled { tx: 8, ty: 8 });
        }
        if let Some(inner) = t.strip_prefix("tiled(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<_> = inner.split(',').map(str::trim).collect();
            if let [a, b] = parts[..] {
                let tx = a.parse().map_err(|_| Error::config(format!("bad tile size '{a}'")))?;
                let ty = b.parse().map_err(|_| Error::config(format!("bad tile size '{b}'")))?;
                return Ok(Schedule::Tiled { tx, ty });
            }
        }
        Err(Error::config(format!("unknown schedule '{s}' (expected auto or tiled)")))
    }
}

/// What the kernel does after the gather.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMode {
    #[default]
    CollideStream,
    /// Collision bypass: pure streaming, used to check the gather.
    StreamOnly,
}

/// Rectangle in memory coordinates: `a` runs along the unit-stride axis,
/// `b` across lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Block {
    pub a0: usize,
    pub a1: usize,
    pub b0: usize,
    pub b1: usize,
}

pub(crate) fn blocks(grid: Grid, schedule: Schedule, threads: usize) -> Vec<Block> {
    let (na, nb) = grid.line_shape();
    match schedule {
        Schedule::Auto => {
            let chunks = (threads.max(1) * 4).min(nb);
            let per = nb.div_ceil(chunks);
            (0..nb)
                .step_by(per)
                .map(|b0| Block {
                    a0: 0,
                    a1: na,
                    b0,
                    b1: (b0 + per).min(nb),
                })
                .collect()
        }
        Schedule::Tiled { tx, ty } => {
            let (ta, tb) = match grid.layout {
                Layout::ColumnMajor => (tx, ty),
                Layout::RowMajor => (ty, tx),
            };
            let (ta, tb) = (ta.max(1), tb.max(1));
            let mut out = Vec::new();
            for b0 in (0..nb).step_by(tb) {
                for a0 in (0..na).step_by(ta) {
                    out.push(Block {
                        a0,
                        a1: (a0 + ta).min(na),
                        b0,
                        b1: (b0 + tb).min(nb),
                    });
                }
            }
            out
        }
    }
}

/// Shared output pointer. Blocks partition the cells, so no two workers
/// ever touch the same index.
struct PostWriter<S> {
    ptr: *mut S,
    len: usize,
}

unsafe impl<S: Send> Sync for PostWriter<S> {}

impl<S: Copy> PostWriter<S> {
    /// # Safety
    /// `k < len`, and no other thread writes `k` during this pass.
    #[inline(always)]
    unsafe fn write(&self, k: usize, v: S) {
        debug_assert!(k < self.len);
        *self.ptr.add(k) = v;
    }
}

struct Pass<'a, S, C> {
    pre: &'a [S],
    cells: usize,
    grid: Grid,
    links: &'a Links,
    offsets: [isize; Q],
    wall_delta: [C; Q],
    omega: C,
    source: Option<[C; Q]>,
    mode: KernelMode,
}

impl<S: Stored<C>, C: Real> Pass<'_, S, C> {
    #[inline(always)]
    fn load(&self, i: usize, idx: usize) -> C {
        self.pre[i * self.cells + idx].load()
    }

    #[inline(always)]
    fn gather(&self, idx: usize, flags: u32) -> [C; Q] {
        if flags == 0 {
            return std::array::from_fn(|i| {
                self.load(i, (idx as isize - self.offsets[i]) as usize)
            });
        }
        let coords = if flags & WRAP != 0 {
            Some(self.grid.coords(idx))
        } else {
            None
        };
        std::array::from_fn(|i| {
            if flags & (1 << i) != 0 {
                let v = self.load(OPPOSITE[i], idx);
                if flags & (1 << (i as u32 + MOVING_SHIFT)) != 0 {
                    v + self.wall_delta[i]
                } else {
                    v
                }
            } else {
                let src = match coords {
                    Some((x, y)) => {
                        let c = VELOCITIES[i];
                        let (sx, sy) = self.grid.wrap(x, y, -c[0], -c[1]);
                        self.grid.index(sx, sy)
                    }
                    None => (idx as isize - self.offsets[i]) as usize,
                };
                self.load(i, src)
            }
        })
    }

    #[inline(always)]
    fn update(&self, f: &[C; Q]) -> [C; Q] {
        match self.mode {
            KernelMode::CollideStream => cell::collide(f, self.omega, self.source.as_ref()),
            KernelMode::StreamOnly => *f,
        }
    }

    fn run_block(&self, block: Block, out: &PostWriter<S>) {
        let (na, _) = self.grid.line_shape();
        for b in block.b0..block.b1 {
            let line = b * na;
            for a in block.a0..block.a1 {
                let idx = line + a;
                let flags = self.links.flags[idx];
                if flags & PASSIVE != 0 {
                    for i in 0..Q {
                        // SAFETY: idx belongs to this block only.
                        unsafe { out.write(i * self.cells + idx, self.pre[i * self.cells + idx]) };
                    }
                    continue;
                }
                let f = self.gather(idx, flags);
                let g = self.update(&f);
                for i in 0..Q {
                    // SAFETY: idx belongs to this block only.
                    unsafe { out.write(i * self.cells + idx, S::store(g[i])) };
                }
            }
        }
    }
}

fn pass<S: Stored<C>, C: Real>(
    pre: &[S],
    post: &mut [S],
    grid: Grid,
    params: &RelaxationParams,
    mask: &CellMask,
    schedule: Schedule,
    mode: KernelMode,
) {
    let links = mask.links();
    let (sx, sy) = grid.strides();
    let offsets = std::array::from_fn(|i| VELOCITIES[i][0] as isize * sx + VELOCITIES[i][1] as isize * sy);
    let p = Pass {
        pre,
        cells: grid.cells(),
        grid,
        links,
        offsets,
        wall_delta: links.wall_delta.map(C::from_f64),
        omega: C::from_f64(params.omega),
        source: lattice::source_in::<C>(params),
        mode,
    };
    let out = PostWriter {
        ptr: post.as_mut_ptr(),
        len: post.len(),
    };
    let work = blocks(grid, schedule, rayon::current_num_threads());
    if work.len() == 1 || rayon::current_num_threads() == 1 {
        for b in work {
            p.run_block(b, &out);
        }
    } else {
        work.into_par_iter().for_each(|b| p.run_block(b, &out));
    }
}

/// One fused collide-and-stream pass from `pre` into `post`.
///
/// Runs on the current rayon pool; wrap the call in `ThreadPool::install`
/// to pin a thread count.
pub fn fused_collide_stream(
    pre: &PopulationField,
    post: &mut PopulationField,
    params: &RelaxationParams,
    mask: &CellMask,
    schedule: Schedule,
    mode: KernelMode,
) -> Result<()> {
    if pre.grid() != post.grid() || pre.mode() != post.mode() {
        return Err(Error::DimensionMismatch(format!(
            "pre is {}x{} {} {}, post is {}x{} {} {}",
            pre.nx(),
            pre.ny(),
            pre.layout(),
            pre.mode(),
            post.nx(),
            post.ny(),
            post.layout(),
            post.mode()
        )));
    }
    if mask.grid() != pre.grid() {
        return Err(Error::DimensionMismatch("mask grid differs from field grid".into()));
    }
    if pre.shares_storage_with(post) {
        return Err(Error::Aliasing);
    }
    params.validate()?;
    schedule.validate(pre.nx(), pre.ny())?;

    let grid = pre.grid();
    let mode_p = pre.mode();
    match (mode_p, pre.planes(), post.planes_mut()) {
        (PrecisionMode::Single, Planes::Single(a), Planes::Single(b)) => {
            pass::<f32, f32>(a, b, grid, params, mask, schedule, mode)
        }
        (PrecisionMode::Double, Planes::Double(a), Planes::Double(b)) => {
            pass::<f64, f64>(a, b, grid, params, mask, schedule, mode)
        }
        (PrecisionMode::Mixed1, Planes::Half(a), Planes::Half(b)) => {
            pass::<f16, f32>(a, b, grid, params, mask, schedule, mode)
        }
        (PrecisionMode::Mixed2, Planes::Single(a), Planes::Single(b)) => {
            pass::<f32, f64>(a, b, grid, params, mask, schedule, mode)
        }
        _ => {
            return Err(Error::DimensionMismatch(
                "storage format does not match precision mode".into(),
            ))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundaries::CellKind;
    use crate::lattice::WEIGHTS;

    fn grid(nx: usize, ny: usize, layout: Layout) -> Grid {
        Grid::new(nx, ny, layout).unwrap()
    }

    #[test]
    fn blocks_cover_every_cell_once() {
        for layout in Layout::ALL {
            let g = grid(13, 7, layout);
            for schedule in [
                Schedule::Auto,
                Schedule::Tiled { tx: 4, ty: 4 },
                Schedule::Tiled { tx: 1, ty: 7 },
                Schedule::Tiled { tx: 13, ty: 1 },
            ] {
                for threads in [1, 3, 8] {
                    let mut hits = vec![0u8; g.cells()];
                    let (na, _) = g.line_shape();
                    for b in blocks(g, schedule, threads) {
                        for bb in b.b0..b.b1 {
                            for a in b.a0..b.a1 {
                                hits[bb * na + a] += 1;
                            }
                        }
                    }
                    assert!(hits.iter().all(|h| *h == 1), "{layout} {schedule} {threads}");
                }
            }
        }
    }

    #[test]
    fn schedule_parsing_and_validation() {
        assert_eq!("auto".parse::<Schedule>().unwrap(), Schedule::Auto);
        assert_eq!(
            "tiled(4, 2)".parse::<Schedule>().unwrap(),
            Schedule::Tiled { tx: 4, ty: 2 }
        );
        assert!("spiral".parse::<Schedule>().is_err());
        assert!(Schedule::Tiled { tx: 0, ty: 1 }.validate(4, 4).is_err());
        assert!(Schedule::Tiled { tx: 5, ty: 1 }.validate(4, 4).is_err());
        assert!(Schedule::Tiled { tx: 4, ty: 4 }.validate(4, 4).is_ok());
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let a = PopulationField::new(grid(4, 4, Layout::RowMajor), PrecisionMode::Double);
        let mut b = PopulationField::new(grid(4, 5, Layout::RowMajor), PrecisionMode::Double);
        let mask = CellMask::periodic(a.grid());
        let p = RelaxationParams::from_omega(1.0).unwrap();
        let err = fused_collide_stream(&a, &mut b, &p, &mask, Schedule::Auto, KernelMode::default());
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        let mut c = PopulationField::new(grid(4, 4, Layout::RowMajor), PrecisionMode::Single);
        let err = fused_collide_stream(&a, &mut c, &p, &mask, Schedule::Auto, KernelMode::default());
        assert!(err.is_err());
    }

    #[test]
    fn uniform_equilibrium_is_a_bitwise_fixed_point() {
        for mode in PrecisionMode::ALL {
            let g = grid(6, 5, Layout::ColumnMajor);
            let p = RelaxationParams::from_omega(1.7).unwrap();
            let feq = crate::cases::rest_populations(mode, &p).unwrap();
            let mut pre = PopulationField::new(g, mode);
            for y in 0..5 {
                for x in 0..6 {
                    pre.set_cell(x, y, &feq);
                }
            }
            let mut post = PopulationField::new(g, mode);
            let mask = CellMask::periodic(g);
            fused_collide_stream(&pre, &mut post, &p, &mask, Schedule::Auto, KernelMode::default())
                .unwrap();
            assert_eq!(pre, post, "{mode}");
        }
    }

    #[test]
    fn wall_cells_are_copied_through() {
        let g = grid(4, 4, Layout::RowMajor);
        let mut pre = PopulationField::new(g, PrecisionMode::Double);
        for i in 0..Q {
            for y in 0..4 {
                for x in 0..4 {
                    pre.set(i, x, y, WEIGHTS[i] * (1.0 + 0.01 * (x + y) as f64));
                }
            }
        }
        let mut mask = CellMask::periodic(g);
        mask.set(0, 0, CellKind::Solid);
        let mut post = PopulationField::new(g, PrecisionMode::Double);
        let p = RelaxationParams::from_omega(1.2).unwrap();
        fused_collide_stream(&pre, &mut post, &p, &mask, Schedule::Auto, KernelMode::default())
            .unwrap();
        assert_eq!(pre.cell(0, 0), post.cell(0, 0));
    }
}

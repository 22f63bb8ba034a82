//! Binary checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! "MLB1" | u32 version | u32 nx | u32 ny | u8 precision | u8 layout | u64 timestep
//! 9 planes of populations in the declared layout and storage width
//! mask, one byte per cell in the declared layout
//! trailer: f64 omega | f64 nu | f64 wall ux, uy | f64 inlet ux, uy
//!          | u8 has_source | [9 x f64 source]
//! ```
//!
//! The trailer carries what the one-byte mask cannot: the relaxation rate
//! and boundary velocities needed to resume bit-exactly.

use std::fs;
use std::path::Path;

use half::f16;

use crate::boundaries::{CellKind, CellMask};
use crate::engine::SimState;
use crate::error::{Error, Result};
use crate::field::{Grid, Layout, Planes, PopulationField};
use crate::lattice::{RelaxationParams, Q};
use crate::precision::PrecisionMode;

pub const MAGIC: &[u8; 4] = b"MLB1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 26;

pub fn encode(state: &SimState) -> Vec<u8> {
    let f = state.populations();
    let grid = f.grid();
    let mut out = Vec::with_capacity(
        HEADER_LEN + Q * grid.cells() * f.storage_precision().bytes() + grid.cells() + 128,
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.nx as u32).to_le_bytes());
    out.extend_from_slice(&(grid.ny as u32).to_le_bytes());
    out.push(f.mode().code());
    out.push(grid.layout.code());
    out.extend_from_slice(&state.timestep().to_le_bytes());
    match f.planes() {
        Planes::Half(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Planes::Single(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Planes::Double(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    let mask = state.mask();
    out.extend(mask.kinds().iter().map(|k| k.code()));

    let p = state.params();
    let [wx, wy] = mask.wall_velocity();
    let [ix, iy] = mask.inlet_velocity();
    for v in [p.omega, p.nu, wx, wy, ix, iy] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    match p.source {
        Some(s) => {
            out.push(1);
            s.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        None => out.push(0),
    }
    out
}

pub fn write_checkpoint(state: &SimState, path: &Path) -> Result<()> {
    fs::write(path, encode(state)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::CorruptCheckpoint {
                offset: self.buf.len() as u64,
                reason: format!(
                    "truncated while reading {what} (needed {n} bytes at offset {})",
                    self.pos
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    fn corrupt(&self, at: usize, reason: impl Into<String>) -> Error {
        Error::CorruptCheckpoint {
            offset: at as u64,
            reason: reason.into(),
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<SimState> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.array::<4>("magic")?;
    if &magic != MAGIC {
        return Err(r.corrupt(0, "bad magic"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let nx = r.u32("nx")? as usize;
    let ny = r.u32("ny")? as usize;
    let mode_at = r.pos;
    let mode = PrecisionMode::from_code(r.u8("precision")?)
        .ok_or_else(|| r.corrupt(mode_at, "unknown precision code"))?;
    let layout_at = r.pos;
    let layout = Layout::from_code(r.u8("layout")?)
        .ok_or_else(|| r.corrupt(layout_at, "unknown layout code"))?;
    let t = r.u64("timestep")?;
    if nx == 0 || ny == 0 {
        return Err(Error::CheckpointShape(format!("declared grid {nx}x{ny} is empty")));
    }
    let grid = Grid::new(nx, ny, layout)?;
    let n = Q * grid.cells();

    let planes = match mode.storage() {
        crate::precision::StoragePrecision::Half => Planes::Half(
            r.take(2 * n, "populations")?
                .chunks_exact(2)
                .map(|c| f16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        crate::precision::StoragePrecision::Single => Planes::Single(
            r.take(4 * n, "populations")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        crate::precision::StoragePrecision::Double => Planes::Double(
            r.take(8 * n, "populations")?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ),
    };
    let mask_at = r.pos;
    let kinds = r
        .take(grid.cells(), "mask")?
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            CellKind::from_code(c).ok_or_else(|| r.corrupt(mask_at + k, format!("bad mask code {c}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let omega = r.f64("omega")?;
    let nu = r.f64("viscosity")?;
    let wall = [r.f64("wall velocity")?, r.f64("wall velocity")?];
    let inlet = [r.f64("inlet velocity")?, r.f64("inlet velocity")?];
    let src_at = r.pos;
    let source = match r.u8("source flag")? {
        0 => None,
        1 => {
            let mut s = [0.0; Q];
            for v in s.iter_mut() {
                *v = r.f64("source term")?;
            }
            Some(s)
        }
        other => return Err(r.corrupt(src_at, format!("bad source flag {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::CheckpointShape(format!(
            "{} trailing bytes after a {nx}x{ny} payload",
            bytes.len() - r.pos
        )));
    }

    let pre = PopulationField::from_planes(grid, mode, planes)?;
    let mask = CellMask::from_parts(grid, kinds, wall, inlet)?;
    let params = RelaxationParams { omega, nu, source };
    SimState::at_timestep(pre, mask, params, t)
}

pub fn restore(path: &Path) -> Result<SimState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Restores and checks that the file matches the expected grid and formats.
pub fn restore_matching(
    path: &Path,
    nx: usize,
    ny: usize,
    mode: PrecisionMode,
    layout: Layout,
) -> Result<SimState> {
    let state = restore(path)?;
    let f = state.populations();
    if (f.nx(), f.ny(), f.mode(), f.layout()) != (nx, ny, mode, layout) {
        return Err(Error::CheckpointShape(format!(
            "file holds {}x{} {} {}, expected {nx}x{ny} {mode} {layout}",
            f.nx(),
            f.ny(),
            f.mode(),
            f.layout()
        )));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{self, CaseSpec};
    use crate::engine::step;
    use crate::kernel::Schedule;

    fn state(mode: PrecisionMode) -> SimState {
        let mut s = cases::init_tgv(&CaseSpec::tgv(8, 50.0, 0.05), mode, Layout::RowMajor).unwrap();
        step(&mut s, Schedule::Auto).unwrap();
        s
    }

    #[test]
    fn header_layout() {
        let s = state(PrecisionMode::Single);
        let b = encode(&s);
        assert_eq!(&b[0..4], b"MLB1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 8);
        assert_eq!(b[16], PrecisionMode::Single.code());
        assert_eq!(b[17], Layout::RowMajor.code());
        assert_eq!(u64::from_le_bytes(b[18..26].try_into().unwrap()), 1);
        assert_eq!(b.len(), HEADER_LEN + 9 * 64 * 4 + 64 + 6 * 8 + 1);
    }

    #[test]
    fn round_trip_is_bitwise() {
        for mode in PrecisionMode::ALL {
            let s = state(mode);
            let back = decode(&encode(&s)).unwrap();
            assert!(back.same_as(&s), "{mode}");
            assert_eq!(back.params(), s.params());
        }
    }

    #[test]
    fn source_term_survives() {
        let s = state(PrecisionMode::Double);
        let (pre, mask, params, t) = s.into_parts();
        let params = params.with_source([1e-6; Q]);
        let s = SimState::at_timestep(pre, mask, params, t).unwrap();
        let back = decode(&encode(&s)).unwrap();
        assert_eq!(back.params().source, Some([1e-6; Q]));
    }

    #[test]
    fn truncation_reports_offset() {
        let b = encode(&state(PrecisionMode::Double));
        let cut = &b[..100];
        match decode(cut) {
            Err(Error::CorruptCheckpoint { offset, .. }) => assert_eq!(offset, 100),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode(&b[..10]), Err(Error::CorruptCheckpoint { offset: 10, .. })));
    }

    #[test]
    fn bad_magic_version_and_codes() {
        let mut b = encode(&state(PrecisionMode::Double));
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(Error::CorruptCheckpoint { offset: 0, .. })));

        let mut b = encode(&state(PrecisionMode::Double));
        b[4] = 7;
        assert!(matches!(decode(&b), Err(Error::CheckpointVersion { found: 7, .. })));

        let mut b = encode(&state(PrecisionMode::Double));
        b[16] = 9;
        assert!(matches!(decode(&b), Err(Error::CorruptCheckpoint { offset: 16, .. })));
    }

    #[test]
    fn declared_grid_must_match_payload() {
        let mut b = encode(&state(PrecisionMode::Double));
        // declare 4x8 while the payload holds 8x8
        b[8..12].copy_from_slice(&4u32.to_le_bytes());
        let err = decode(&b).unwrap_err();
        assert!(
            matches!(err, Error::CheckpointShape(_) | Error::CorruptCheckpoint { .. }),
            "{err}"
        );
    }

    #[test]
    fn restore_matching_checks_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.mlb");
        write_checkpoint(&state(PrecisionMode::Single), &path).unwrap();
        assert!(restore_matching(&path, 8, 8, PrecisionMode::Single, Layout::RowMajor).is_ok());
        let err = restore_matching(&path, 16, 8, PrecisionMode::Single, Layout::RowMajor);
        assert!(matches!(err, Err(Error::CheckpointShape(_))));
        let err = restore(&dir.path().join("missing.mlb"));
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}

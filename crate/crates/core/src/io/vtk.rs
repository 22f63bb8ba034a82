//! Legacy ASCII VTK (v3.0) structured-points writer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::engine::{MacroFields, SimState};
use crate::error::{Error, Result};

/// Density and velocity of one timestep, ready to serialize.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSnapshot {
    pub timestep: u64,
    pub fields: MacroFields,
}

impl VtkSnapshot {
    pub fn from_state(state: &SimState) -> Self {
        Self {
            timestep: state.timestep(),
            fields: state.macro_fields(),
        }
    }

    pub fn render(&self) -> String {
        let m = &self.fields;
        let n = m.nx * m.ny;
        let mut s = String::with_capacity(64 * n + 256);
        s.push_str("# vtk DataFile Version 3.0\n");
        let _ = writeln!(s, "miniLB t={}", self.timestep);
        s.push_str("ASCII\n");
        s.push_str("DATASET STRUCTURED_POINTS\n");
        let _ = writeln!(s, "DIMENSIONS {} {} 1", m.nx, m.ny);
        s.push_str("ORIGIN 0 0 0\n");
        s.push_str("SPACING 1 1 1\n");
        let _ = writeln!(s, "POINT_DATA {n}");
        s.push_str("SCALARS density float 1\n");
        s.push_str("LOOKUP_TABLE default\n");
        // MacroFields are already x-fastest.
        for &rho in &m.rho {
            let _ = writeln!(s, "{}", rho as f32);
        }
        s.push_str("VECTORS velocity float\n");
        for k in 0..n {
            let _ = writeln!(s, "{} {} 0", m.ux[k] as f32, m.uy[k] as f32);
        }
        s
    }
}

pub fn write_vtk(state: &SimState, path: &Path) -> Result<()> {
    let text = VtkSnapshot::from_state(state).render();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

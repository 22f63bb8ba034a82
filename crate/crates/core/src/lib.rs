//! D2Q9 lattice-Boltzmann mini-app: a fused collide-and-stream kernel with
//! selectable precision, memory layout and parallel schedule, three flow
//! cases, and throughput/roofline/portability metrics.
//!
//! ```no_run
//! use minilb::{CaseSpec, NoHooks, RunConfig, Simulation};
//!
//! let config = RunConfig {
//!     case: CaseSpec::tgv(64, 100.0, 0.05),
//!     steps: 100,
//!     ..RunConfig::default()
//! };
//! let mut sim = Simulation::new(&config)?;
//! let stats = sim.run(&config, &mut NoHooks)?;
//! println!("MLUPS={:.1}", stats.mlups);
//! # Ok::<(), minilb::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation; indexed loops
// over the nine directions read closer to the lattice formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod boundaries;
pub mod cases;
pub mod checkpoint;
pub mod cli;
pub mod engine;
pub mod error;
pub mod field;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod perfport;
pub mod precision;

pub use boundaries::{CellKind, CellMask};
pub use cases::{CaseKind, CaseSpec};
pub use engine::{step, NoHooks, RunConfig, RunHooks, RunStats, SimState, Simulation};
pub use error::{Error, Result};
pub use field::{Grid, Layout, PopulationField};
pub use kernel::{fused_collide_stream, KernelMode, Schedule};
pub use lattice::{RelaxationParams, D2Q9, Q};
pub use precision::PrecisionMode;

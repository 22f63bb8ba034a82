//! VTK snapshots, benchmark CSV files and run-configuration parsing.

pub mod bench_csv;
pub mod config;
pub mod vtk;

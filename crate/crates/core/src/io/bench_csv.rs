//! Benchmark records as CSV.

use std::path::Path;

use crate::error::{Error, Result};
use crate::perfport::PerfRecord;

pub fn write_bench_csv(records: &[PerfRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::config("no benchmark records to write"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_bench_csv(path: &Path) -> Result<Vec<PerfRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Measurement(format!("{other:?}")),
    }
}

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;

use super::plant::CablePlant;
use super::trace::RunTrace;

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let file = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

pub fn write_trace(path: impl AsRef<Path>, trace: &RunTrace) -> Result<()> {
    trace.write_csv(BufWriter::new(fs::File::create(path)?))
}

/// Writes `dir/step_####.csv` with the observed contour of every trace row.
pub fn write_contours(
    dir: impl AsRef<Path>,
    plant: &CablePlant,
    trace: &RunTrace,
) -> Result<usize> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for row in trace.rows() {
        let x = DVector::from_row_slice(&row.x);
        let contour = plant.contour(&x)?;
        let file = fs::File::create(dir.join(format!("step_{:04}.csv", row.t)))?;
        contour.write_csv(BufWriter::new(file))?;
    }
    Ok(trace.len())
}

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One control or probing step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    /// Active unit.
    pub s: usize,
    /// Model error `|delta - A u|^2` of the step.
    pub g: f64,
    /// Feature error `|y - y*|^2`; NaN when there is no target.
    pub e: f64,
    /// Distortion of the active unit on the step.
    pub u_dist: f64,
}

/// Per-step series with fixed dimensions and strictly increasing `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        t: usize,
        x: &DVector<f64>,
        y: &DVector<f64>,
        u: &DVector<f64>,
        s: usize,
        g: f64,
        e: f64,
        u_dist: f64,
    ) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if t <= last.t {
                return Err(Error::InvalidParameter(format!(
                    "trace time {t} after {}",
                    last.t
                )));
            }
            if x.len() != last.x.len() || y.len() != last.y.len() || u.len() != last.u.len() {
                return Err(Error::Dimension("trace row dimensions changed".into()));
            }
        }
        self.rows.push(TraceRow {
            t,
            x: x.iter().copied().collect(),
            y: y.iter().copied().collect(),
            u: u.iter().copied().collect(),
            s,
            g,
            e,
            u_dist,
        });
        Ok(())
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e).collect()
    }

    /// Header `t,x0..,y0..,u0..,s,G,E,U`.
    pub fn header(&self) -> Vec<String> {
        let (nx, ny, nu) = self
            .rows
            .first()
            .map(|r| (r.x.len(), r.y.len(), r.u.len()))
            .unwrap_or((0, 0, 0));
        let mut h = vec!["t".to_string()];
        h.extend((0..nx).map(|i| format!("x{i}")));
        h.extend((0..ny).map(|i| format!("y{i}")));
        h.extend((0..nu).map(|i| format!("u{i}")));
        h.extend(["s", "G", "E", "U"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![r.t.to_string()];
            rec.extend(r.x.iter().chain(&r.y).chain(&r.u).map(|v| v.to_string()));
            rec.push(r.s.to_string());
            rec.extend([r.g, r.e, r.u_dist].map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::model_error;
use crate::units::{distortion, UnitField};

use super::config::ScenarioConfig;
use super::plant::Plant;
use super::trace::RunTrace;

/// Active unit changed between steps `t - 1` and `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t: usize,
    pub from: usize,
    pub to: usize,
    /// `G` of the last step handled by `from`.
    pub g_before: f64,
    /// `G` of the first step handled by `to`.
    pub g_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleOutcome {
    pub center: [f64; 2],
    pub radius: f64,
    pub phase: f64,
    pub trace: RunTrace,
    pub switches: Vec<SwitchEvent>,
}

/// Least-squares circle `|p - c|^2 = r^2` through planar points; exact when
/// the points are concyclic.
pub fn fit_circle(points: &[[f64; 2]]) -> Result<([f64; 2], f64)> {
    if points.len() < 3 {
        return Err(Error::InsufficientSamples {
            required: 3,
            got: points.len(),
        });
    }
    // x^2 + y^2 = 2 cx x + 2 cy y + (r^2 - |c|^2)
    let a = DMatrix::from_fn(points.len(), 3, |i, j| match j {
        0 => 2.0 * points[i][0],
        1 => 2.0 * points[i][1],
        _ => 1.0,
    });
    let b = DVector::from_fn(points.len(), |i, _| {
        points[i][0].powi(2) + points[i][1].powi(2)
    });
    let qr = a.qr();
    let r = qr.r();
    let diag = r.diagonal().abs();
    let collinear =
        || Error::InvalidParameter("points are collinear; no circle through them".into());
    if diag.min() <= 1e-12 * diag.max() {
        return Err(collinear());
    }
    let sol = r
        .solve_upper_triangular(&(qr.q().transpose() * &b))
        .ok_or_else(collinear)?;
    let c = [sol[0], sol[1]];
    let r2 = sol[2] + c[0] * c[0] + c[1] * c[1];
    if !(r2 > 0.0) {
        return Err(Error::InvalidParameter("degenerate circle fit".into()));
    }
    Ok((c, r2.sqrt()))
}

/// Circle parameters after filling in defaults: the circle through the unit
/// centres, starting at the first centre.
pub fn resolve_circle(cfg: &ScenarioConfig) -> Result<([f64; 2], f64, f64)> {
    if cfg.n() != 2 {
        return Err(Error::Config(
            "the circular test needs a two-dimensional configuration".into(),
        ));
    }
    let pts: Vec<[f64; 2]> = cfg.unit_centers.iter().map(|w| [w[0], w[1]]).collect();
    let (center, radius) = match (cfg.circle.center, cfg.circle.radius) {
        (Some(c), Some(r)) => (c, r),
        (c, r) => {
            let (fc, fr) = fit_circle(&pts)?;
            (c.unwrap_or(fc), r.unwrap_or(fr))
        }
    };
    let phase =
        if cfg.circle.center.is_none() && cfg.circle.radius.is_none() && cfg.circle.phase == 0.0 {
            (pts[0][1] - center[1]).atan2(pts[0][0] - center[0])
        } else {
            cfg.circle.phase
        };
    Ok((center, radius, phase))
}

/// Moves once around the circle and records `G = |delta - A_s u|^2` of the
/// active unit at every step, marking unit switches.
pub fn run_circular_test<P: Plant>(
    cfg: &ScenarioConfig,
    plant: &P,
    field: &UnitField,
) -> Result<CircleOutcome> {
    let (center, radius, phase) = resolve_circle(cfg)?;
    let weights = cfg.distortion_weights()?;
    let steps = cfg.circle.steps;
    let point = |k: usize| {
        let th = phase + TAU * k as f64 / steps as f64;
        DVector::from_row_slice(&[center[0] + radius * th.cos(), center[1] + radius * th.sin()])
    };
    let mut x = point(0);
    plant.check(&x)?;
    let mut y = plant.sense(&x)?;
    let mut trace = RunTrace::new();
    let mut switches = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    for t in 0..steps {
        let x_next = point(t + 1);
        let u = &x_next - &x;
        plant.check(&x_next)?;
        let y_next = plant.sense(&x_next)?;
        let delta = &y_next - &y;
        let s = field.nearest(&x)?;
        let a = field.unit(s).a_hat_matrix();
        let g = model_error(&delta, &a, &u)?;
        let ud = distortion(&a, &u, &delta, &weights)?;
        if let Some((s_prev, g_prev)) = prev {
            if s_prev != s {
                switches.push(SwitchEvent {
                    t,
                    from: s_prev,
                    to: s,
                    g_before: g_prev,
                    g_after: g,
                });
            }
        }
        trace.push(t, &x, &y, &u, s, g, f64::NAN, ud)?;
        prev = Some((s, g));
        x = x_next;
        y = y_next;
    }
    Ok(CircleOutcome {
        center,
        radius,
        phase,
        trace,
        switches,
    })
}

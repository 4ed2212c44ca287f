//! Saturated pseudo-inverse motion control from feature errors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::numerical_rank;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Feedback gain, strictly inside (0, 1).
    pub lambda: f64,
    /// Per-component saturation limit on the feature error.
    pub sat_bound: f64,
    /// Gain of the Jacobian filter, in (0, 1].
    pub eta: f64,
    /// Damping of the pseudo-inverse; zero requests the exact inverse.
    pub reg: f64,
    /// Servo period used to turn position increments into velocities.
    pub dt: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            sat_bound: 2.0,
            eta: 0.2,
            reg: 1e-6,
            dt: 0.04,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in (0,1), got {}",
                self.lambda
            )));
        }
        if !(self.sat_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "saturation bound must be positive, got {}",
                self.sat_bound
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in (0,1], got {}",
                self.eta
            )));
        }
        if !(self.reg >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be non-negative, got {}",
                self.reg
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Component-wise clamp to `[-bound, bound]`.
pub fn saturate(v: &DVector<f64>, bound: f64) -> DVector<f64> {
    v.map(|x| x.clamp(-bound, bound))
}

/// Generalised inverse of `m`.
///
/// With `reg == 0` this is the Moore-Penrose inverse of a full-rank matrix
/// (left inverse for tall, right inverse for wide). With `reg > 0` it is the
/// damped inverse `(M^T M + reg I)^-1 M^T`, or `M^T (M M^T + reg I)^-1` when
/// `M` is wide.
pub fn pseudo_inverse(m: &DMatrix<f64>, reg: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix has non-finite entries".into(),
        ));
    }
    if reg < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "regularization must be non-negative, got {reg}"
        )));
    }
    let (rows, cols) = m.shape();
    let tall = rows >= cols;
    let small = if tall { cols } else { rows };
    if reg == 0.0 {
        let rank = numerical_rank(m);
        if rank < small {
            return Err(Error::RankDeficient {
                rank,
                required: small,
            });
        }
    }
    let mt = m.transpose();
    let gram = if tall { &mt * m } else { m * &mt };
    let damped = gram + DMatrix::identity(small, small) * reg;
    let inv = damped
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| damped.try_inverse())
        .ok_or(Error::RankDeficient {
            rank: 0,
            required: small,
        })?;
    Ok(if tall { inv * mt } else { mt * inv })
}

/// `u = -lambda A# sat(y - y*)`.
pub fn motor_action(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    y_star: &DVector<f64>,
    params: &ControllerParams,
) -> Result<DVector<f64>> {
    if y.len() != y_star.len() || a.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "Jacobian is {}x{}, y has {}, y* has {}",
            a.nrows(),
            a.ncols(),
            y.len(),
            y_star.len()
        )));
    }
    let pinv = pseudo_inverse(a, params.reg)?;
    let err = saturate(&(y - y_star), params.sat_bound);
    Ok(pinv * err * (-params.lambda))
}

/// Low-pass filtered Jacobian used by the adaptive controller.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredJacobian {
    l: DMatrix<f64>,
}

impl FilteredJacobian {
    /// Starts from the zero matrix.
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            l: DMatrix::zeros(m, n),
        }
    }

    pub fn from_matrix(l: DMatrix<f64>) -> Self {
        Self { l }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `L <- L - eta (L - A_s)`.
    pub fn update(&mut self, a_active: &DMatrix<f64>, eta: f64) -> Result<()> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in (0,1], got {eta}"
            )));
        }
        if a_active.shape() != self.l.shape() {
            return Err(Error::Dimension(format!(
                "filter holds {:?}, active model is {:?}",
                self.l.shape(),
                a_active.shape()
            )));
        }
        self.l = &self.l * (1.0 - eta) + a_active * eta;
        Ok(())
    }
}

pub fn filter_update(
    l: &FilteredJacobian,
    a_active: &DMatrix<f64>,
    eta: f64,
) -> Result<FilteredJacobian> {
    let mut next = l.clone();
    next.update(a_active, eta)?;
    Ok(next)
}

/// Motor command computed from the filtered Jacobian.
pub fn adaptive_motor_action(
    l: &FilteredJacobian,
    y: &DVector<f64>,
    y_star: &DVector<f64>,
    params: &ControllerParams,
) -> Result<DVector<f64>> {
    motor_action(&l.l, y, y_star, params)
}

/// First-order difference model `y' = y + A u`.
pub fn closed_loop_step(
    y: &DVector<f64>,
    u: &DVector<f64>,
    a_true: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if a_true.nrows() != y.len() || a_true.ncols() != u.len() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, y has {}, u has {}",
            a_true.nrows(),
            a_true.ncols(),
            y.len(),
            u.len()
        )));
    }
    Ok(y + a_true * u)
}

/// Converts a position increment to a velocity command.
pub fn to_velocity(u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    Ok(u / dt)
}

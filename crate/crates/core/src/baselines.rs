//! Online Jacobian estimators used as comparison baselines: Broyden's
//! rank-one secant update and exponentially weighted recursive least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BROYDEN_MIN_ACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStatus {
    Updated,
    /// Action too small for a well-conditioned update; state unchanged.
    Skipped,
    /// Covariance lost positive definiteness and was reset.
    CovarianceReset,
}

fn check_dims(a: &DMatrix<f64>, u: &DVector<f64>, delta: &DVector<f64>) -> Result<()> {
    if a.ncols() != u.len() || a.nrows() != delta.len() {
        return Err(Error::Dimension(format!(
            "estimate is {}x{}, action has {}, sensor change has {}",
            a.nrows(),
            a.ncols(),
            u.len(),
            delta.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroydenState {
    pub a_hat: DMatrix<f64>,
    pub u_min: f64,
}

impl BroydenState {
    pub fn new(a_hat: DMatrix<f64>) -> Self {
        Self {
            a_hat,
            u_min: BROYDEN_MIN_ACTION,
        }
    }

    /// `A <- A + (delta - A u) u^T / (u^T u)`.
    pub fn update(&mut self, u: &DVector<f64>, delta: &DVector<f64>) -> Result<UpdateStatus> {
        check_dims(&self.a_hat, u, delta)?;
        let uu = u.norm_squared();
        if uu.sqrt() <= self.u_min {
            return Ok(UpdateStatus::Skipped);
        }
        let innovation = delta - &self.a_hat * u;
        self.a_hat += innovation * u.transpose() / uu;
        Ok(UpdateStatus::Updated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlsConfig {
    pub forgetting: f64,
    pub p0: f64,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self {
            forgetting: 0.99,
            p0: 1e3,
        }
    }
}

/// Row-wise RLS. Every output row shares the same regressor `u`, so a single
/// `n x n` covariance serves all rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub a_hat: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub forgetting: f64,
    p0: f64,
}

impl RlsState {
    pub fn new(a_hat: DMatrix<f64>, cfg: &RlsConfig) -> Result<Self> {
        if !(cfg.forgetting > 0.0 && cfg.forgetting <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "forgetting factor must lie in (0,1], got {}",
                cfg.forgetting
            )));
        }
        if !(cfg.p0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial covariance must be positive, got {}",
                cfg.p0
            )));
        }
        let n = a_hat.ncols();
        Ok(Self {
            a_hat,
            p: DMatrix::identity(n, n) * cfg.p0,
            forgetting: cfg.forgetting,
            p0: cfg.p0,
        })
    }

    pub fn update(&mut self, u: &DVector<f64>, delta: &DVector<f64>) -> Result<UpdateStatus> {
        check_dims(&self.a_hat, u, delta)?;
        let pu = &self.p * u;
        let denom = self.forgetting + u.dot(&pu);
        let k = &pu / denom;
        let innovation = delta - &self.a_hat * u;
        self.a_hat += &innovation * k.transpose();
        let p_next = (&self.p - &k * pu.transpose()) / self.forgetting;
        let p_next = (&p_next + p_next.transpose()) * 0.5;
        if p_next.clone().cholesky().is_none() || p_next.iter().any(|x| !x.is_finite()) {
            let n = self.p.nrows();
            self.p = DMatrix::identity(n, n) * self.p0;
            return Ok(UpdateStatus::CovarianceReset);
        }
        self.p = p_next;
        Ok(UpdateStatus::Updated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn broyden_scalar() {
        let mut s = BroydenState::new(DMatrix::zeros(1, 1));
        assert_eq!(
            s.update(&v(&[2.0]), &v(&[4.0])).unwrap(),
            UpdateStatus::Updated
        );
        assert_relative_eq!(s.a_hat[(0, 0)], 2.0);
    }

    #[test]
    fn broyden_zero_residual_and_guard() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut s = BroydenState::new(a.clone());
        let u = v(&[0.3, -0.1]);
        s.update(&u, &(&a * &u)).unwrap();
        assert_eq!(s.a_hat, a);
        assert_eq!(
            s.update(&v(&[1e-12, 0.0]), &v(&[1.0, 1.0])).unwrap(),
            UpdateStatus::Skipped
        );
        assert_eq!(s.a_hat, a);
        assert!(s.update(&v(&[1.0]), &v(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn broyden_secant_and_minimal_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = rand_mat(&mut rng, 3, 2);
            let u = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let delta = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let mut s = BroydenState::new(a.clone());
            s.update(&u, &delta).unwrap();
            assert!((&s.a_hat * &u - &delta).amax() < 1e-12);
            // The closed-form Frobenius projection of A onto {B : B u = delta}
            // is A + (delta - A u) u^+ with u^+ = u^T / |u|^2. Any other feasible
            // matrix is further away.
            let other = &s.a_hat
                + rand_mat(&mut rng, 3, 2)
                    * (DMatrix::identity(2, 2) - &u * u.transpose() / u.norm_squared());
            assert!((&other * &u - &delta).amax() < 1e-12);
            assert!((&s.a_hat - &a).norm() <= (&other - &a).norm() + 1e-12);
        }
    }

    #[test]
    fn rls_scalar_walkthrough() {
        let cfg = RlsConfig {
            forgetting: 1.0,
            p0: 1.0,
        };
        let mut s = RlsState::new(DMatrix::zeros(1, 1), &cfg).unwrap();
        s.update(&v(&[1.0]), &v(&[1.0])).unwrap();
        assert_relative_eq!(s.a_hat[(0, 0)], 0.5);
        assert_relative_eq!(s.p[(0, 0)], 0.5);
    }

    #[test]
    fn rls_zero_innovation_keeps_estimate() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.2, 2.0]);
        let mut s = RlsState::new(a.clone(), &RlsConfig::default()).unwrap();
        let p_before = s.p.clone();
        let u = v(&[0.1, 0.3]);
        s.update(&u, &(&a * &u)).unwrap();
        assert!((&s.a_hat - &a).amax() < 1e-15);
        assert!(s.p != p_before);
    }

    #[test]
    fn rls_error_decreases_in_information_norm() {
        // With forgetting 1 the posterior information P^-1 grows and the
        // weighted error tr(E P^-1 E^T) never increases on exact data.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = rand_mat(&mut rng, 3, 2);
        let cfg = RlsConfig {
            forgetting: 1.0,
            p0: 10.0,
        };
        let mut s = RlsState::new(DMatrix::zeros(3, 2), &cfg).unwrap();
        let werr = |s: &RlsState| {
            let e = &s.a_hat - &a;
            (&e * s.p.clone().try_inverse().unwrap() * e.transpose()).trace()
        };
        let mut prev = werr(&s);
        for _ in 0..20 {
            let u = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            s.update(&u, &(&a * &u)).unwrap();
            let cur = werr(&s);
            assert!(cur <= prev * (1.0 + 1e-9));
            prev = cur;
        }
        assert!((&s.a_hat - &a).amax() < 1e-2);
    }

    #[test]
    fn rls_matches_batch_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (m, n) = (4, 3);
        let a = rand_mat(&mut rng, m, n);
        let cfg = RlsConfig {
            forgetting: 1.0,
            p0: 1e8,
        };
        let mut s = RlsState::new(DMatrix::zeros(m, n), &cfg).unwrap();
        let mut us = Vec::new();
        for _ in 0..(m * n) {
            let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            s.update(&u, &(&a * &u)).unwrap();
            us.push(u);
        }
        // normal equations: A = (sum delta u^T)(sum u u^T)^-1
        let mut r = DMatrix::<f64>::zeros(n, n);
        let mut c = DMatrix::<f64>::zeros(m, n);
        for u in &us {
            r += u * u.transpose();
            c += (&a * u) * u.transpose();
        }
        let batch = c * r.try_inverse().unwrap();
        assert!((&s.a_hat - &batch).amax() < 1e-6);
        assert!((&s.a_hat - &a).amax() < 1e-6);
    }

    #[test]
    fn rls_covariance_stays_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rand_mat(&mut rng, 2, 3);
        let mut s = RlsState::new(DMatrix::zeros(2, 3), &RlsConfig::default()).unwrap();
        for _ in 0..200 {
            let u = DVector::from_fn(3, |_, _| rng.gen_range(-0.1..0.1));
            s.update(&u, &(&a * &u)).unwrap();
            assert!(s.p.clone().cholesky().is_some());
            assert!((&s.p - s.p.transpose()).amax() == 0.0);
        }
    }

    #[test]
    fn rls_rejects_bad_config() {
        let z = DMatrix::zeros(1, 1);
        assert!(RlsState::new(
            z.clone(),
            &RlsConfig {
                forgetting: 0.0,
                p0: 1.0
            }
        )
        .is_err());
        assert!(RlsState::new(
            z,
            &RlsConfig {
                forgetting: 1.0,
                p0: 0.0
            }
        )
        .is_err());
    }
}

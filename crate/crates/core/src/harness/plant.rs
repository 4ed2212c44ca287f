use nalgebra::{DMatrix, DVector};

use crate::cable::{CableWorld, Contour};
use crate::error::{Error, Result};
use crate::features::{feature_dim, fourier_coeffs};

/// Something that can be sensed and moved: the closed-loop side of every
/// experiment.
pub trait Plant {
    /// Configuration / action dimension `n`.
    fn dim(&self) -> usize;

    /// Feature dimension `m`.
    fn feature_dim(&self) -> usize;

    fn sense(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Rejects configurations the plant cannot be placed in.
    fn check(&self, _x: &DVector<f64>) -> Result<()> {
        Ok(())
    }

    /// Executes `u` from `x`. Inadmissible moves are rejected.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Central finite-difference Jacobian of `sense`.
    fn jacobian(&self, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            cols.push((self.sense(&xp)? - self.sense(&xm)?) / (2.0 * h));
        }
        Ok(DMatrix::from_columns(&cols))
    }
}

/// The cable simulator composed with Fourier features.
#[derive(Debug, Clone)]
pub struct CablePlant {
    pub world: CableWorld,
    pub harmonics: usize,
}

impl CablePlant {
    pub fn new(world: CableWorld, harmonics: usize) -> Self {
        Self { world, harmonics }
    }

    pub fn contour(&self, x: &DVector<f64>) -> Result<Contour> {
        self.world.observe(x)
    }
}

impl Plant for CablePlant {
    fn dim(&self) -> usize {
        self.world.n()
    }

    fn feature_dim(&self) -> usize {
        feature_dim(self.harmonics)
    }

    fn sense(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(fourier_coeffs(&self.world.observe(x)?, self.harmonics)?.coeffs)
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        self.world.check_admissible(x)
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.world.apply_action(x, u)
    }
}

/// `y = y0 + A x`, with unrestricted motion. Used for exact-model checks.
#[derive(Debug, Clone)]
pub struct LinearPlant {
    pub a: DMatrix<f64>,
    pub y0: DVector<f64>,
}

impl LinearPlant {
    pub fn new(a: DMatrix<f64>, y0: DVector<f64>) -> Result<Self> {
        if a.nrows() != y0.len() {
            return Err(Error::Dimension(
                "offset does not match Jacobian rows".into(),
            ));
        }
        Ok(Self { a, y0 })
    }
}

impl Plant for LinearPlant {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn feature_dim(&self) -> usize {
        self.a.nrows()
    }

    fn sense(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(&self.y0 + &self.a * x)
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != u.len() || x.len() != self.dim() {
            return Err(Error::Dimension(
                "action does not match configuration".into(),
            ));
        }
        Ok(x + u)
    }

    fn jacobian(&self, _x: &DVector<f64>, _h: f64) -> Result<DMatrix<f64>> {
        Ok(self.a.clone())
    }
}

//! Discrete configuration space: computing units, their bounded observation
//! stores, Gaussian neighbourhood weighting and nearest-unit search.
//!
//! Each unit owns a centre `w` in configuration space, a local estimate of the
//! `m x n` sensor Jacobian (stored row-major as a parameter vector of length
//! `m*n`) and a FIFO store of babbling observations. The store is ordered
//! newest-first: index 0 is the most recently pushed sample.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relearning threshold on the distortion metric.
pub const DEFAULT_RELEARN_EPSILON: f64 = 1e-3;

/// One babbling sample: configuration, motor action and resulting sensor change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(with = "crate::serde_vec")]
    pub x: DVector<f64>,
    #[serde(with = "crate::serde_vec")]
    pub u: DVector<f64>,
    #[serde(with = "crate::serde_vec")]
    pub delta: DVector<f64>,
}

impl Observation {
    pub fn new(x: DVector<f64>, u: DVector<f64>, delta: DVector<f64>) -> Result<Self> {
        if x.len() != u.len() {
            return Err(Error::Dimension(format!(
                "configuration has {} entries but action has {}",
                x.len(),
                u.len()
            )));
        }
        if x.is_empty() || delta.is_empty() {
            return Err(Error::Dimension("empty observation vector".into()));
        }
        if !(all_finite(&x) && all_finite(&u) && all_finite(&delta)) {
            return Err(Error::InvalidParameter(
                "observation contains non-finite entries".into(),
            ));
        }
        Ok(Self { x, u, delta })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn m(&self) -> usize {
        self.delta.len()
    }
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Bounded, newest-first observation queue.
#[derive(Debug, Clone, PartialEq)]
pub struct DataStore {
    m: usize,
    n: usize,
    capacity: usize,
    observations: VecDeque<Observation>,
}

impl DataStore {
    pub fn new(m: usize, n: usize, capacity: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Dimension("store dimensions must be positive".into()));
        }
        if capacity == 0 {
            return Err(Error::InvalidParameter(
                "store capacity must be positive".into(),
            ));
        }
        Ok(Self {
            m,
            n,
            capacity,
            observations: VecDeque::with_capacity(capacity),
        })
    }

    /// Inserts `d` at the head and drops the oldest sample once the store is full.
    pub fn push(&mut self, d: Observation) -> Result<()> {
        if d.n() != self.n || d.m() != self.m {
            return Err(Error::Dimension(format!(
                "observation is (m={}, n={}) but store expects (m={}, n={})",
                d.m(),
                d.n(),
                self.m,
                self.n
            )));
        }
        self.observations.push_front(d);
        self.observations.truncate(self.capacity);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.observations.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Newest-first iteration.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Observation> {
        self.observations.iter()
    }

    pub fn get(&self, index: usize) -> Option<&Observation> {
        self.observations.get(index)
    }

    pub fn newest(&self) -> Option<&Observation> {
        self.observations.front()
    }

    pub fn clear(&mut self) {
        self.observations.clear();
    }

    /// Rank of the stacked action matrix `[u_1 ... u_k]^T`. The stacked
    /// regression matrix has column rank `m` times this value.
    pub fn action_rank(&self) -> usize {
        if self.observations.is_empty() {
            return 0;
        }
        let rows = self.observations.len();
        let actions = DMatrix::from_fn(rows, self.n, |r, c| self.observations[r].u[c]);
        numerical_rank(&actions)
    }
}

pub(crate) fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    let tol = max * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON * 10.0;
    sv.iter().filter(|&&s| s > tol).count()
}

/// A computing unit: centre, local Jacobian estimate and observation store.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub w: DVector<f64>,
    pub a_hat: DVector<f64>,
    pub store: DataStore,
}

impl Unit {
    /// Creates a unit with a zero parameter vector.
    pub fn new(w: DVector<f64>, m: usize, tau: usize) -> Result<Self> {
        let n = w.len();
        let store = DataStore::new(m, n, tau)?;
        Ok(Self {
            w,
            a_hat: DVector::zeros(m * n),
            store,
        })
    }

    pub fn m(&self) -> usize {
        self.store.m()
    }

    pub fn n(&self) -> usize {
        self.store.n()
    }

    /// The `m x n` matrix view of the parameter vector.
    pub fn a_hat_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m(), self.n(), self.a_hat.as_slice())
    }

    pub fn set_a_hat_matrix(&mut self, a: &DMatrix<f64>) -> Result<()> {
        if a.nrows() != self.m() || a.ncols() != self.n() {
            return Err(Error::Dimension(format!(
                "expected {}x{} matrix, got {}x{}",
                self.m(),
                self.n(),
                a.nrows(),
                a.ncols()
            )));
        }
        self.a_hat = DVector::from_iterator(a.len(), a.transpose().iter().cloned());
        Ok(())
    }
}

/// The set of units spread over configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitField {
    units: Vec<Unit>,
    sigma: f64,
    m: usize,
    n: usize,
}

impl UnitField {
    pub fn new(centers: &[DVector<f64>], sigma: f64, m: usize, tau: usize) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptyField);
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let n = centers[0].len();
        if centers.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("unit centres differ in dimension".into()));
        }
        let units = centers
            .iter()
            .map(|w| Unit::new(w.clone(), m, tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { units, sigma, m, n })
    }

    /// Rebuilds a field from existing units (e.g. loaded from a snapshot).
    pub fn from_units(units: Vec<Unit>, sigma: f64) -> Result<Self> {
        let first = units.first().ok_or(Error::EmptyField)?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let (m, n) = (first.m(), first.n());
        if units
            .iter()
            .any(|u| u.m() != m || u.n() != n || u.a_hat.len() != m * n)
        {
            return Err(Error::Dimension("units differ in (m, n)".into()));
        }
        Ok(Self { units, sigma, m, n })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn units_mut(&mut self) -> &mut [Unit] {
        &mut self.units
    }

    pub fn unit(&self, index: usize) -> &Unit {
        &self.units[index]
    }

    pub fn unit_mut(&mut self, index: usize) -> &mut Unit {
        &mut self.units[index]
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nearest(&self, x: &DVector<f64>) -> Result<usize> {
        let centers: Vec<&DVector<f64>> = self.units.iter().map(|u| &u.w).collect();
        nearest_unit(&centers, x)
    }

    pub fn snapshot(&self) -> FieldSnapshot {
        FieldSnapshot {
            sigma: self.sigma,
            m: self.m,
            n: self.n,
            units: self
                .units
                .iter()
                .map(|u| UnitSnapshot {
                    w: u.w.as_slice().to_vec(),
                    a_hat: u.a_hat.as_slice().to_vec(),
                    observations: u.store.iter().cloned().collect(),
                    sigma: self.sigma,
                    tau: u.store.capacity(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &FieldSnapshot) -> Result<Self> {
        let mut units = Vec::with_capacity(snap.units.len());
        for us in &snap.units {
            if us.a_hat.len() != snap.m * snap.n || us.w.len() != snap.n {
                return Err(Error::Dimension(
                    "snapshot unit has wrong dimensions".into(),
                ));
            }
            let mut unit = Unit::new(DVector::from_vec(us.w.clone()), snap.m, us.tau)?;
            unit.a_hat = DVector::from_vec(us.a_hat.clone());
            // Snapshots are newest-first; push oldest first to restore the order.
            for obs in us.observations.iter().rev() {
                unit.store.push(obs.clone())?;
            }
            units.push(unit);
        }
        Self::from_units(units, snap.sigma)
    }
}

/// JSON form of a single unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSnapshot {
    pub w: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub observations: Vec<Observation>,
    pub sigma: f64,
    pub tau: usize,
}

/// JSON form of a whole unit field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub sigma: f64,
    pub m: usize,
    pub n: usize,
    pub units: Vec<UnitSnapshot>,
}

/// Gaussian neighbourhood weight `exp(-|w - x|^2 / (2 sigma^2))`.
pub fn neighborhood_weight(w: &DVector<f64>, x: &DVector<f64>, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if w.len() != x.len() {
        return Err(Error::Dimension(format!(
            "centre has {} entries, configuration has {}",
            w.len(),
            x.len()
        )));
    }
    let d2 = (w - x).norm_squared();
    Ok((-d2 / (2.0 * sigma * sigma)).exp())
}

/// Index of the centre closest to `x`. Ties go to the lowest index.
pub fn nearest_unit(centers: &[&DVector<f64>], x: &DVector<f64>) -> Result<usize> {
    if centers.is_empty() {
        return Err(Error::EmptyField);
    }
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (j, w) in centers.iter().enumerate() {
        if w.len() != x.len() {
            return Err(Error::Dimension(format!(
                "centre {j} has {} entries, configuration has {}",
                w.len(),
                x.len()
            )));
        }
        let d2 = (*w - x).norm_squared();
        if d2 < best_d2 {
            best = j;
            best_d2 = d2;
        }
    }
    Ok(best)
}

/// Diagonal weights of the distortion metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionWeights(DVector<f64>);

impl DistortionWeights {
    pub fn new(diag: DVector<f64>) -> Result<Self> {
        if diag.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter(
                "distortion weights must be positive and finite".into(),
            ));
        }
        Ok(Self(diag))
    }

    pub fn identity(m: usize) -> Self {
        Self(DVector::from_element(m, 1.0))
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Weighted prediction error `U = e^T B e` with `e = A_hat u - delta`.
pub fn distortion(
    a_hat: &DMatrix<f64>,
    u: &DVector<f64>,
    delta: &DVector<f64>,
    weights: &DistortionWeights,
) -> Result<f64> {
    if a_hat.ncols() != u.len() || a_hat.nrows() != delta.len() || weights.0.len() != delta.len() {
        return Err(Error::Dimension(format!(
            "distortion: A is {}x{}, u has {}, delta has {}, B has {}",
            a_hat.nrows(),
            a_hat.ncols(),
            u.len(),
            delta.len(),
            weights.0.len()
        )));
    }
    let e = a_hat * u - delta;
    Ok(e.iter()
        .zip(weights.0.iter())
        .map(|(ei, bi)| bi * ei * ei)
        .sum())
}

/// Strict threshold test `U > |epsilon|`.
pub fn needs_relearn(distortion: f64, epsilon: f64) -> bool {
    distortion > epsilon.abs()
}

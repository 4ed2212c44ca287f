//! Gaussian-weighted gradient estimation of a unit's local Jacobian.
//!
//! The unit's parameter vector `a` is the row-major flattening of the `m x n`
//! Jacobian estimate. For a stored observation `(u_k, delta_k)` the regression
//! matrix `F(u_k)` (shape `m x mn`) satisfies `F(u_k) a = A u_k`, so the
//! weighted cost
//!
//! ```text
//! Q = 1/2 sum_k h_k |F(u_k) a - delta_k|^2
//! ```
//!
//! is minimised by plain gradient descent with a fixed gain `gamma`. The gain
//! is chosen by a decrementing search that stops as soon as
//! `C = 2H - gamma H Phi Phi^T H` is positive definite, where `Phi` stacks the
//! regression matrices and `H` carries the neighbourhood weights. With `Phi`
//! of full column rank the dissipation matrix `Omega = gamma Phi^T C Phi` is
//! then positive definite and `V = |a_hat - a|^2` decreases monotonically on
//! exact data.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{neighborhood_weight, DataStore, Unit};

/// Above this many rows of `Phi` the positivity test of `C` is done on the
/// congruent `mn x mn` problem instead of the full `m*tau` matrix.
pub const FULL_EIGEN_MAX_ROWS: usize = 512;

/// Relative eigenvalue floor for accepting `C > 0`.
pub const POSITIVITY_RTOL: f64 = 1e-10;

/// `F(u)`: `m x (m n)` with `u^T` on the block diagonal.
pub fn regression_matrix(u: &DVector<f64>, m: usize) -> Result<DMatrix<f64>> {
    let n = u.len();
    if m == 0 || n == 0 {
        return Err(Error::Dimension(format!(
            "regression matrix needs m >= 1 and a non-empty action (m={m}, n={n})"
        )));
    }
    let mut f = DMatrix::zeros(m, m * n);
    for i in 0..m {
        for j in 0..n {
            f[(i, i * n + j)] = u[j];
        }
    }
    Ok(f)
}

/// Row-major flattening of an `m x n` matrix.
pub fn flatten(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.transpose().iter().cloned())
}

pub fn unflatten(a: &DVector<f64>, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 || a.len() != m * n {
        return Err(Error::Dimension(format!(
            "parameter vector of length {} cannot be reshaped to {m}x{n}",
            a.len()
        )));
    }
    Ok(DMatrix::from_row_slice(m, n, a.as_slice()))
}

/// Neighbourhood weights `h_k` of the unit's stored observations, newest first.
pub fn observation_weights(unit: &Unit, sigma: f64) -> Result<Vec<f64>> {
    unit.store
        .iter()
        .map(|d| neighborhood_weight(&unit.w, &d.x, sigma))
        .collect()
}

fn require_observations(unit: &Unit) -> Result<()> {
    if unit.store.is_empty() {
        Err(Error::EmptyStore)
    } else {
        Ok(())
    }
}

/// The weighted quadratic cost `Q` of a unit.
pub fn cost_q(unit: &Unit, sigma: f64) -> Result<f64> {
    require_observations(unit)?;
    let a = unit.a_hat_matrix();
    let h = observation_weights(unit, sigma)?;
    Ok(weighted_cost(&a, &unit.store, &h))
}

fn weighted_cost(a: &DMatrix<f64>, store: &DataStore, h: &[f64]) -> f64 {
    let sum: f64 = store
        .iter()
        .zip(h)
        .map(|(d, &hk)| hk * (a * &d.u - &d.delta).norm_squared())
        .sum();
    0.5 * sum
}

/// Analytic gradient `sum_k h_k F_k^T (A_hat u_k - delta_k)`.
pub fn gradient(unit: &Unit, sigma: f64) -> Result<DVector<f64>> {
    require_observations(unit)?;
    let a = unit.a_hat_matrix();
    let h = observation_weights(unit, sigma)?;
    let (m, n) = (unit.m(), unit.n());
    let mut g = DVector::zeros(m * n);
    for (d, &hk) in unit.store.iter().zip(&h) {
        let e = &a * &d.u - &d.delta;
        for i in 0..m {
            for j in 0..n {
                g[i * n + j] += hk * e[i] * d.u[j];
            }
        }
    }
    Ok(g)
}

fn check_gain(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "learning gain must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// One gradient step in matrix form, built from explicit regression matrices.
pub fn update_step(unit: &Unit, gamma: f64, sigma: f64) -> Result<DVector<f64>> {
    check_gain(gamma)?;
    require_observations(unit)?;
    let h = observation_weights(unit, sigma)?;
    let m = unit.m();
    let mut grad = DVector::zeros(unit.a_hat.len());
    for (d, &hk) in unit.store.iter().zip(&h) {
        let f = regression_matrix(&d.u, m)?;
        let residual = &f * &unit.a_hat - &d.delta;
        grad += f.transpose() * residual * hk;
    }
    Ok(&unit.a_hat - grad * gamma)
}

/// The same step written element by element.
pub fn update_step_scalar(unit: &Unit, gamma: f64, sigma: f64) -> Result<DVector<f64>> {
    check_gain(gamma)?;
    require_observations(unit)?;
    let h = observation_weights(unit, sigma)?;
    let (m, n) = (unit.m(), unit.n());
    let a = &unit.a_hat;
    let mut next = a.clone();
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for (d, &hk) in unit.store.iter().zip(&h) {
                let mut pred = 0.0;
                for r in 0..n {
                    pred += a[i * n + r] * d.u[r];
                }
                acc += hk * d.u[j] * (pred - d.delta[i]);
            }
            next[i * n + j] = a[i * n + j] - gamma * acc;
        }
    }
    Ok(next)
}

/// Vertical stack of `F(u_k)` over the store, newest first.
pub fn stack_phi(store: &DataStore) -> Result<DMatrix<f64>> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    let (m, n) = (store.m(), store.n());
    let mut phi = DMatrix::zeros(m * store.len(), m * n);
    for (k, d) in store.iter().enumerate() {
        let f = regression_matrix(&d.u, m)?;
        phi.view_mut((k * m, 0), (m, m * n)).copy_from(&f);
    }
    Ok(phi)
}

/// Block-diagonal weight matrix `H = diag(h_1 I_m, ..., h_tau I_m)`, stored by
/// its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBlockDiag {
    diag: DVector<f64>,
}

impl WeightBlockDiag {
    pub fn from_weights(weights: &[f64], m: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyStore);
        }
        if weights.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParameter(
                "neighbourhood weights must be positive".into(),
            ));
        }
        let diag = DVector::from_iterator(
            weights.len() * m,
            weights.iter().flat_map(|&h| std::iter::repeat_n(h, m)),
        );
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diag)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }
}

pub fn build_h(unit: &Unit, sigma: f64) -> Result<WeightBlockDiag> {
    require_observations(unit)?;
    WeightBlockDiag::from_weights(&observation_weights(unit, sigma)?, unit.m())
}

fn check_phi_h(phi: &DMatrix<f64>, h: &WeightBlockDiag) -> Result<()> {
    if phi.nrows() != h.dim() {
        return Err(Error::Dimension(format!(
            "Phi has {} rows but H is {}x{}",
            phi.nrows(),
            h.dim(),
            h.dim()
        )));
    }
    Ok(())
}

/// `C = 2H - gamma H Phi Phi^T H` together with its smallest eigenvalue.
#[derive(Debug, Clone)]
pub struct StabilityMatrix {
    pub c: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_abs_eigenvalue: f64,
}

impl StabilityMatrix {
    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue > POSITIVITY_RTOL * self.max_abs_eigenvalue
    }
}

pub fn stability_matrix_c(
    phi: &DMatrix<f64>,
    h: &WeightBlockDiag,
    gamma: f64,
) -> Result<StabilityMatrix> {
    check_gain(gamma)?;
    check_phi_h(phi, h)?;
    let hd = h.diag();
    // H Phi: scale rows
    let mut h_phi = phi.clone();
    for (r, &hr) in hd.iter().enumerate() {
        h_phi.row_mut(r).scale_mut(hr);
    }
    let mut c = &h_phi * h_phi.transpose() * (-gamma);
    for r in 0..hd.len() {
        c[(r, r)] += 2.0 * hd[r];
    }
    let c = symmetrize(c);
    let (min_eigenvalue, max_abs_eigenvalue) = eigen_extremes(&c);
    Ok(StabilityMatrix {
        c,
        min_eigenvalue,
        max_abs_eigenvalue,
    })
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Smallest eigenvalue and largest absolute eigenvalue of a symmetric matrix.
pub fn eigen_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_abs = eig.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));
    (min, max_abs)
}

/// `Omega = gamma Phi^T C Phi`.
pub fn omega(phi: &DMatrix<f64>, h: &WeightBlockDiag, gamma: f64) -> Result<DMatrix<f64>> {
    let c = stability_matrix_c(phi, h, gamma)?.c;
    Ok(symmetrize(phi.transpose() * c * phi * gamma))
}

/// `Phi^T H Phi`.
pub fn weighted_gram(phi: &DMatrix<f64>, h: &WeightBlockDiag) -> Result<DMatrix<f64>> {
    check_phi_h(phi, h)?;
    let mut h_phi = phi.clone();
    for (r, &hr) in h.diag().iter().enumerate() {
        h_phi.row_mut(r).scale_mut(hr);
    }
    Ok(symmetrize(phi.transpose() * h_phi))
}

/// `Omega` through the equivalent form `2 gamma M - gamma^2 M^2`, `M = Phi^T H Phi`.
pub fn omega_from_gram(gram: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    symmetrize(gram * (2.0 * gamma) - gram * gram * (gamma * gamma))
}

/// Parameters of the decrementing gain search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSearchConfig {
    pub gamma_init: f64,
    pub mu: f64,
    pub gamma_min: f64,
}

impl Default for GainSearchConfig {
    fn default() -> Self {
        Self {
            gamma_init: 0.99,
            mu: 0.99 / 100.0,
            gamma_min: 1e-8,
        }
    }
}

impl GainSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma_min > 0.0
            && self.gamma_min < self.gamma_init
            && self.gamma_init <= 1.0
            && self.mu > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "gain search needs 0 < gamma_min < gamma_init <= 1 and mu > 0 (got {self:?})"
            )))
        }
    }
}

/// Positivity test for `C` at a given gain. Small problems are decided on the
/// full matrix; large ones use the congruence `C = H^1/2 (2I - gamma K) H^1/2`
/// whose only non-trivial eigenvalues come from `M = Phi^T H Phi`.
fn c_is_positive(
    phi: &DMatrix<f64>,
    h: &WeightBlockDiag,
    gamma: f64,
    gram_max: f64,
) -> Result<bool> {
    if phi.nrows() <= FULL_EIGEN_MAX_ROWS {
        Ok(stability_matrix_c(phi, h, gamma)?.is_positive_definite())
    } else {
        Ok(2.0 - gamma * gram_max > POSITIVITY_RTOL * 2.0)
    }
}

/// Decrement `gamma` from `gamma_init` in steps of `mu` until `C > 0`.
pub fn find_gamma(phi: &DMatrix<f64>, h: &WeightBlockDiag, cfg: &GainSearchConfig) -> Result<f64> {
    cfg.validate()?;
    check_phi_h(phi, h)?;
    let gram_max = if phi.nrows() > FULL_EIGEN_MAX_ROWS {
        let gram = weighted_gram(phi, h)?;
        SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max)
    } else {
        0.0
    };
    let mut k = 1u64;
    loop {
        let gamma = cfg.gamma_init - k as f64 * cfg.mu;
        if gamma < cfg.gamma_min {
            return Err(Error::GainSearchFailure {
                gamma_min: cfg.gamma_min,
            });
        }
        if c_is_positive(phi, h, gamma, gram_max)? {
            return Ok(gamma);
        }
        k += 1;
    }
}

/// Stop rule for unit training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_iters: usize,
    /// Relative change of `Q` between iterations below which training stops.
    pub q_tol: f64,
    /// Absolute `Q` below which training stops.
    pub q_floor: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            q_tol: 1e-10,
            q_floor: 1e-30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Converged,
    MaxIterations,
    /// The stacked actions do not span the action space: `Omega` is singular and
    /// the estimate only converges on the observed subspace.
    RankDeficient,
}

/// Outcome of training one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub unit_index: usize,
    pub gamma: f64,
    pub iterations: usize,
    pub q_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub v_trace: Option<Vec<f64>>,
    pub omega_min_eig: f64,
    pub status: TrainStatus,
    pub action_rank: usize,
}

impl TrainReport {
    pub fn final_q(&self) -> f64 {
        self.q_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs gradient descent on one unit and returns the trained parameter vector.
///
/// The unit itself is not modified. `truth`, when given, is the flattened
/// ground-truth Jacobian used to record `V_t = |a_hat_t - a|^2`.
pub fn train_unit(
    unit: &Unit,
    unit_index: usize,
    sigma: f64,
    cfg: &GainSearchConfig,
    stop: &StopCriteria,
    truth: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, TrainReport)> {
    require_observations(unit)?;
    let (m, n) = (unit.m(), unit.n());
    if let Some(a) = truth {
        if a.len() != m * n {
            return Err(Error::Dimension(
                "ground-truth parameter vector has wrong length".into(),
            ));
        }
    }
    let h = observation_weights(unit, sigma)?;
    let phi = stack_phi(&unit.store)?;
    let hb = WeightBlockDiag::from_weights(&h, m)?;
    let gamma = find_gamma(&phi, &hb, cfg)?;

    // The iteration below uses the sufficient statistics R = sum h u u^T and
    // S = sum h delta u^T, which turn the gradient into A_hat R - S.
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut s = DMatrix::<f64>::zeros(m, n);
    for (d, &hk) in unit.store.iter().zip(&h) {
        r += &d.u * d.u.transpose() * hk;
        s += &d.delta * d.u.transpose() * hk;
    }
    let gram_eigs = SymmetricEigen::new(r.clone()).eigenvalues;
    let action_rank = unit.store.action_rank();
    // M = I_m (x) R, so Omega shares R's eigenvectors.
    let omega_min_eig = gram_eigs
        .iter()
        .map(|&l| 2.0 * gamma * l - gamma * gamma * l * l)
        .fold(f64::INFINITY, f64::min);

    let mut a = unit.a_hat_matrix();
    let mut q = weighted_cost(&a, &unit.store, &h);
    let mut q_trace = vec![q];
    let mut v_trace = truth.map(|t| vec![(flatten(&a) - t).norm_squared()]);
    let mut iterations = 0;
    let mut converged = q <= stop.q_floor;
    while !converged && iterations < stop.max_iters {
        let grad = &a * &r - &s;
        a -= grad * gamma;
        iterations += 1;
        let q_next = weighted_cost(&a, &unit.store, &h);
        q_trace.push(q_next);
        if let (Some(vt), Some(t)) = (v_trace.as_mut(), truth) {
            vt.push((flatten(&a) - t).norm_squared());
        }
        let rel = (q - q_next).abs() / q.max(f64::MIN_POSITIVE);
        converged = q_next <= stop.q_floor || rel < stop.q_tol;
        q = q_next;
    }

    let status = if action_rank < n {
        TrainStatus::RankDeficient
    } else if converged {
        TrainStatus::Converged
    } else {
        TrainStatus::MaxIterations
    };
    let report = TrainReport {
        unit_index,
        gamma,
        iterations,
        q_trace,
        v_trace,
        omega_min_eig,
        status,
        action_rank,
    };
    Ok((flatten(&a), report))
}

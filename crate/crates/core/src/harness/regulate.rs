use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{BroydenState, RlsConfig, RlsState};
use crate::controller::{motor_action, ControllerParams, FilteredJacobian};
use crate::error::{Error, Result};
use crate::features::{feature_error, model_error};
use crate::units::{distortion, DistortionWeights, UnitField};

use super::config::ScenarioConfig;
use super::plant::Plant;
use super::trace::RunTrace;

/// Halvings of a rejected command before the robot holds still for the step.
const MAX_ACTION_HALVINGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AdaptiveUnits,
    Broyden,
    Rls,
    /// Finite-difference Jacobian of the plant at every step.
    Exact,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::AdaptiveUnits,
        Method::Broyden,
        Method::Rls,
        Method::Exact,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::AdaptiveUnits => "adaptive_units",
            Method::Broyden => "broyden",
            Method::Rls => "rls",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?}; expected adaptive_units, broyden, rls or exact"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Diverged,
}

/// Loop settings shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulationParams {
    pub controller: ControllerParams,
    pub step_budget: usize,
    pub e_tol: f64,
    pub divergence_factor: f64,
    pub fd_step: f64,
    pub rls: RlsConfig,
    pub weights: DistortionWeights,
}

impl RegulationParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            controller: cfg.controller,
            step_budget: cfg.step_budget,
            e_tol: cfg.e_tol,
            divergence_factor: cfg.divergence_factor,
            fd_step: cfg.fd_step,
            rls: cfg.rls,
            weights: cfg.distortion_weights()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulationOutcome {
    pub method: Method,
    pub status: RunStatus,
    /// Control steps executed.
    pub steps: usize,
    pub e0: f64,
    pub final_e: f64,
    /// Steps where every scaled version of the command was rejected.
    pub held_steps: usize,
    pub trace: RunTrace,
}

impl RegulationOutcome {
    /// Turns a diverged run into [`Error::Divergence`].
    pub fn check(&self) -> Result<()> {
        if self.status == RunStatus::Diverged {
            return Err(Error::Divergence {
                step: self.steps,
                energy: self.final_e,
                initial: self.e0,
            });
        }
        Ok(())
    }
}

/// Jacobian model driving the controller.
enum Model<'a> {
    Units {
        field: &'a UnitField,
        filter: FilteredJacobian,
    },
    Broyden(BroydenState),
    Rls(RlsState),
    Exact,
}

/// Runs `u = -lambda A# sat(y - y*)` from `x0` until `E < e_tol E0`, the step
/// budget is spent or `E` exceeds `divergence_factor E0`.
///
/// The trace holds one row per executed step, each with the state before the
/// step; a final row with `u = 0` records the state where the run ended.
/// Broyden and RLS start from a finite-difference Jacobian probed at `x0`.
pub fn run_regulation<P: Plant>(
    plant: &P,
    field: &UnitField,
    method: Method,
    x0: &DVector<f64>,
    y_star: &DVector<f64>,
    params: &RegulationParams,
) -> Result<RegulationOutcome> {
    params.controller.validate()?;
    let (m, n) = (plant.feature_dim(), plant.dim());
    if field.m() != m || field.n() != n || y_star.len() != m || x0.len() != n {
        return Err(Error::Dimension(
            "regulation inputs do not match the plant".into(),
        ));
    }
    let mut model = match method {
        Method::AdaptiveUnits => Model::Units {
            field,
            filter: FilteredJacobian::new(m, n),
        },
        Method::Broyden => Model::Broyden(BroydenState::new(plant.jacobian(x0, params.fd_step)?)),
        Method::Rls => Model::Rls(RlsState::new(
            plant.jacobian(x0, params.fd_step)?,
            &params.rls,
        )?),
        Method::Exact => Model::Exact,
    };

    plant.check(x0)?;
    let mut x = x0.clone();
    let mut y = plant.sense(&x)?;
    let e0 = feature_error(&y, y_star)?;
    let mut e = e0;
    let mut trace = RunTrace::new();
    let zero_u = DVector::zeros(n);
    let mut status = RunStatus::BudgetExhausted;
    let mut t = 0;
    let mut last_s = field.nearest(&x)?;
    let mut held_steps = 0;
    if e0 == 0.0 {
        status = RunStatus::Converged;
    }

    while status == RunStatus::BudgetExhausted && t < params.step_budget {
        let s = field.nearest(&x)?;
        last_s = s;
        let (a_used, a_pred): (DMatrix<f64>, DMatrix<f64>) = match &mut model {
            Model::Units { field, filter } => {
                let a_s = field.unit(s).a_hat_matrix();
                (filter.matrix().clone(), a_s)
            }
            Model::Broyden(b) => (b.a_hat.clone(), b.a_hat.clone()),
            Model::Rls(r) => (r.a_hat.clone(), r.a_hat.clone()),
            Model::Exact => {
                let j = plant.jacobian(&x, params.fd_step)?;
                (j.clone(), j)
            }
        };
        let u_cmd = motor_action(&a_used, &y, y_star, &params.controller)?;
        let (u, x_next) = match execute(plant, &x, u_cmd)? {
            Some(moved) => moved,
            None => {
                held_steps += 1;
                (zero_u.clone(), x.clone())
            }
        };
        let y_next = plant.sense(&x_next)?;
        let delta = &y_next - &y;

        let g = model_error(&delta, &a_pred, &u)?;
        let ud = distortion(&a_pred, &u, &delta, &params.weights)?;
        trace.push(t, &x, &y, &u, s, g, e, ud)?;

        match &mut model {
            Model::Units { filter, .. } => filter.update(&a_pred, params.controller.eta)?,
            Model::Broyden(b) => {
                b.update(&u, &delta)?;
            }
            Model::Rls(r) => {
                r.update(&u, &delta)?;
            }
            Model::Exact => {}
        }

        x = x_next;
        y = y_next;
        e = feature_error(&y, y_star)?;
        t += 1;
        if e < params.e_tol * e0 {
            status = RunStatus::Converged;
        } else if e > params.divergence_factor * e0 || !e.is_finite() {
            status = RunStatus::Diverged;
        }
    }
    let s_end = field.nearest(&x).unwrap_or(last_s);
    trace.push(t, &x, &y, &zero_u, s_end, 0.0, e, 0.0)?;
    Ok(RegulationOutcome {
        method,
        status,
        steps: t,
        e0,
        final_e: e,
        held_steps,
        trace,
    })
}

/// Executes `u`, halving it while the plant rejects the move. `None` when no
/// halving is admissible.
fn execute<P: Plant>(
    plant: &P,
    x: &DVector<f64>,
    mut u: DVector<f64>,
) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
    for _ in 0..=MAX_ACTION_HALVINGS {
        match plant.step(x, &u) {
            Ok(next) => return Ok(Some((u, next))),
            Err(Error::RejectedAction(_)) => u *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Observed feature vectors of the recorded target configurations.
pub fn target_features<P: Plant>(plant: &P, targets: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    targets
        .iter()
        .map(|x| {
            plant.check(x)?;
            plant.sense(x)
        })
        .collect()
}

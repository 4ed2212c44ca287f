use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cable::Babbler;
use crate::error::{Error, Result};
use crate::estimator::{train_unit, TrainReport, TrainStatus};
use crate::units::{Observation, UnitField};

use super::config::ScenarioConfig;
use super::plant::Plant;

/// Consecutive failed draws tolerated before collection gives up.
const MAX_REJECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub unit: usize,
    pub rank: usize,
    pub required: usize,
    pub extra_rounds: usize,
    pub rejected_draws: usize,
}

#[derive(Debug, Clone)]
pub struct Collection {
    pub field: UnitField,
    pub ranks: Vec<RankReport>,
    pub warnings: Vec<String>,
}

/// One babbling observation drawn from the box around `center`: the
/// configuration `x`, a random action `u` and the feature change it causes.
pub fn babble_observation<P: Plant>(
    plant: &P,
    babbler: &mut Babbler,
    center: &DVector<f64>,
    radius: f64,
    rejected: &mut usize,
) -> Result<Observation> {
    let mut streak = 0;
    loop {
        let x = babbler.sample_around(center, radius);
        let u = babbler.next_action(center.len());
        match observe_pair(plant, &x, &u) {
            Ok(obs) => return Ok(obs),
            Err(Error::RejectedAction(_)) | Err(Error::InfeasibleConfiguration(_)) => {
                *rejected += 1;
                streak += 1;
                if streak >= MAX_REJECTIONS {
                    return Err(Error::RejectedAction(format!(
                        "no admissible babbling move found near {:?}",
                        center.as_slice()
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn observe_pair<P: Plant>(plant: &P, x: &DVector<f64>, u: &DVector<f64>) -> Result<Observation> {
    plant.check(x)?;
    let next = plant.step(x, u)?;
    let delta = plant.sense(&next)? - plant.sense(x)?;
    Observation::new(x.clone(), u.clone(), delta)
}

/// Fills every unit's store with `tau` babbling observations taken around its
/// centre. A store whose actions do not span the action space gets up to
/// `max_extra_rounds` further rounds.
pub fn collect_training_data<P: Plant>(cfg: &ScenarioConfig, plant: &P) -> Result<Collection> {
    let n = cfg.n();
    if plant.dim() != n || plant.feature_dim() != cfg.m() {
        return Err(Error::Dimension("plant does not match the scenario".into()));
    }
    let mut field = UnitField::new(&cfg.centers(), cfg.sigma, cfg.m(), cfg.tau)?;
    let mut babbler = Babbler::new(cfg.seed, cfg.babble_amplitude)?;
    let mut ranks = Vec::new();
    let mut warnings = Vec::new();
    for l in 0..field.len() {
        let center = field.unit(l).w.clone();
        let mut rejected = 0;
        let mut extra_rounds = 0;
        loop {
            for _ in 0..cfg.tau {
                let obs = babble_observation(
                    plant,
                    &mut babbler,
                    &center,
                    cfg.sample_radius,
                    &mut rejected,
                )?;
                field.unit_mut(l).store.push(obs)?;
            }
            let rank = field.unit(l).store.action_rank();
            if rank >= n || extra_rounds >= cfg.max_extra_rounds {
                if rank < n {
                    warnings.push(format!(
                        "unit {l}: action rank {rank} < {n} after {extra_rounds} extra rounds"
                    ));
                }
                ranks.push(RankReport {
                    unit: l,
                    rank,
                    required: n,
                    extra_rounds,
                    rejected_draws: rejected,
                });
                break;
            }
            warnings.push(format!(
                "unit {l}: action rank {rank} < {n}, babbling again"
            ));
            extra_rounds += 1;
        }
    }
    Ok(Collection {
        field,
        ranks,
        warnings,
    })
}

/// Trains every unit in place and returns the per-unit reports.
pub fn train_field(cfg: &ScenarioConfig, field: &mut UnitField) -> Result<Vec<TrainReport>> {
    let sigma = field.sigma();
    let mut reports = Vec::with_capacity(field.len());
    for l in 0..field.len() {
        let (a, report) = train_unit(field.unit(l), l, sigma, &cfg.gain_search, &cfg.stop, None)?;
        field.unit_mut(l).a_hat = a;
        reports.push(report);
    }
    Ok(reports)
}

/// Collection followed by training.
pub fn trained_field<P: Plant>(
    cfg: &ScenarioConfig,
    plant: &P,
) -> Result<(Collection, Vec<TrainReport>)> {
    let mut collection = collect_training_data(cfg, plant)?;
    let reports = train_field(cfg, &mut collection.field)?;
    Ok((collection, reports))
}

/// Compact form of a [`TrainReport`] for JSON artefacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub unit: usize,
    pub gamma: f64,
    pub iterations: usize,
    pub initial_q: f64,
    pub final_q: f64,
    pub omega_min_eig: f64,
    pub status: TrainStatus,
    pub action_rank: usize,
    pub a_hat: Vec<f64>,
}

impl TrainSummary {
    pub fn new(report: &TrainReport, field: &UnitField) -> Self {
        Self {
            unit: report.unit_index,
            gamma: report.gamma,
            iterations: report.iterations,
            initial_q: report.q_trace.first().copied().unwrap_or(f64::NAN),
            final_q: report.final_q(),
            omega_min_eig: report.omega_min_eig,
            status: report.status,
            action_rank: report.action_rank,
            a_hat: field
                .unit(report.unit_index)
                .a_hat
                .iter()
                .copied()
                .collect(),
        }
    }
}

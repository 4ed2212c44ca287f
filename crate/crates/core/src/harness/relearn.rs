use serde::{Deserialize, Serialize};

use crate::cable::{Babbler, Pose, Rig};
use crate::error::{Error, Result};
use crate::estimator::train_unit;
use crate::features::model_error;
use crate::units::{distortion, needs_relearn, Observation, UnitField};

use super::collect::babble_observation;
use super::config::ScenarioConfig;
use super::plant::{CablePlant, Plant};
use super::trace::RunTrace;

/// Stream offset so relearning draws differ from the training data.
const RELEARN_STREAM: u64 = 0x5EED_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelearnOutcome {
    pub unit: usize,
    pub epsilon: f64,
    /// Steps before the perturbation; rows `0..warmup_steps` of the trace.
    pub warmup_steps: usize,
    pub warmup_max_distortion: f64,
    pub warmup_retrains: usize,
    /// 1-based index of the first perturbed step whose distortion exceeded
    /// `epsilon`.
    pub first_exceed: Option<usize>,
    pub retrains: usize,
    /// Mean probe `G` of the unit before and after retraining.
    pub probe_g_before: f64,
    pub probe_g_after: f64,
    /// Mean distortion over the last quarter of the perturbed phase.
    pub final_mean_distortion: f64,
    pub trace: RunTrace,
}

/// The single-gripper scene with its static anchor displaced.
pub fn perturbed_plant(cfg: &ScenarioConfig, plant: &CablePlant) -> Result<CablePlant> {
    if cfg.rig != Rig::SingleFree {
        return Err(Error::Config(
            "the relearning test perturbs the static anchor of the single rig".into(),
        ));
    }
    let a = plant.world.spec().anchor;
    let shift = cfg.relearn.anchor_shift;
    let anchor = Pose::new(a.position[0] + shift[0], a.position[1] + shift[1], a.angle);
    Ok(CablePlant::new(
        plant.world.with_anchor(anchor)?,
        plant.harmonics,
    ))
}

struct Phase<'a, P: Plant> {
    plant: &'a P,
    cfg: &'a ScenarioConfig,
    unit: usize,
}

impl<P: Plant> Phase<'_, P> {
    /// Babbles around the unit, pushing and retraining whenever the
    /// distortion exceeds epsilon. Returns per-step distortions and the
    /// number of retrains.
    fn run(
        &self,
        field: &mut UnitField,
        babbler: &mut Babbler,
        steps: usize,
        t0: usize,
        trace: &mut RunTrace,
    ) -> Result<(Vec<f64>, usize)> {
        let cfg = self.cfg;
        let weights = cfg.distortion_weights()?;
        let center = field.unit(self.unit).w.clone();
        let mut rejected = 0;
        let mut dists = Vec::with_capacity(steps);
        let mut retrains = 0;
        for k in 0..steps {
            let obs = babble_observation(
                self.plant,
                babbler,
                &center,
                cfg.relearn.sample_radius,
                &mut rejected,
            )?;
            let a = field.unit(self.unit).a_hat_matrix();
            let g = model_error(&obs.delta, &a, &obs.u)?;
            let ud = distortion(&a, &obs.u, &obs.delta, &weights)?;
            let y = self.plant.sense(&obs.x)?;
            trace.push(t0 + k, &obs.x, &y, &obs.u, self.unit, g, f64::NAN, ud)?;
            dists.push(ud);
            if needs_relearn(ud, cfg.epsilon) {
                field.unit_mut(self.unit).store.push(obs)?;
                let (a_new, _) = train_unit(
                    field.unit(self.unit),
                    self.unit,
                    field.sigma(),
                    &cfg.gain_search,
                    &cfg.stop,
                    None,
                )?;
                field.unit_mut(self.unit).a_hat = a_new;
                retrains += 1;
            }
        }
        Ok((dists, retrains))
    }
}

fn mean_probe_g(field: &UnitField, unit: usize, probes: &[Observation]) -> Result<f64> {
    let a = field.unit(unit).a_hat_matrix();
    let mut total = 0.0;
    for p in probes {
        total += model_error(&p.delta, &a, &p.u)?;
    }
    Ok(total / probes.len() as f64)
}

/// Babbles around one unit in the nominal scene, then in the perturbed one,
/// relearning from the data that the unit fails to predict.
///
/// `field` is updated in place with the retrained unit.
pub fn run_relearn_test<P: Plant, Q: Plant>(
    cfg: &ScenarioConfig,
    nominal: &P,
    perturbed: &Q,
    field: &mut UnitField,
) -> Result<RelearnOutcome> {
    let rl = &cfg.relearn;
    let unit = match rl.unit {
        Some(u) => u,
        None => field.nearest(&cfg.start_vec())?,
    };
    if unit >= field.len() {
        return Err(Error::Config(format!("relearn unit {unit} does not exist")));
    }
    let mut babbler = Babbler::new(cfg.seed ^ RELEARN_STREAM, cfg.babble_amplitude)?;
    let mut trace = RunTrace::new();

    let (warm, warmup_retrains) = Phase {
        plant: nominal,
        cfg,
        unit,
    }
    .run(field, &mut babbler, rl.warmup_steps, 0, &mut trace)?;

    let center = field.unit(unit).w.clone();
    let mut rejected = 0;
    let probes = (0..rl.probes)
        .map(|_| {
            babble_observation(
                perturbed,
                &mut babbler,
                &center,
                rl.sample_radius,
                &mut rejected,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let probe_g_before = mean_probe_g(field, unit, &probes)?;

    let (dists, retrains) = Phase {
        plant: perturbed,
        cfg,
        unit,
    }
    .run(field, &mut babbler, rl.steps, rl.warmup_steps, &mut trace)?;
    let probe_g_after = mean_probe_g(field, unit, &probes)?;

    let first_exceed = dists
        .iter()
        .position(|&d| needs_relearn(d, cfg.epsilon))
        .map(|i| i + 1);
    let tail = &dists[dists.len() - (dists.len() / 4).max(1)..];
    Ok(RelearnOutcome {
        unit,
        epsilon: cfg.epsilon,
        warmup_steps: rl.warmup_steps,
        warmup_max_distortion: warm.iter().cloned().fold(0.0, f64::max),
        warmup_retrains,
        first_exceed,
        retrains,
        probe_g_before,
        probe_g_after,
        final_mean_distortion: tail.iter().sum::<f64>() / tail.len() as f64,
        trace,
    })
}

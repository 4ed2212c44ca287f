use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::baselines::RlsConfig;
use crate::cable::{CableSpec, CableWorld, Pose, Rig, Workspace};
use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::estimator::{GainSearchConfig, StopCriteria};
use crate::features::feature_dim;
use crate::units::{DistortionWeights, DEFAULT_RELEARN_EPSILON};

use super::plant::CablePlant;

/// Circular trajectory for the switching test. Unset centre/radius default to
/// the circle through the unit centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleConfig {
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    #[serde(default)]
    pub radius: Option<f64>,
    /// Samples per revolution.
    #[serde(default = "default_circle_steps")]
    pub steps: usize,
    /// Angle of the first sample (radians).
    #[serde(default)]
    pub phase: f64,
}

fn default_circle_steps() -> usize {
    360
}

impl Default for CircleConfig {
    fn default() -> Self {
        Self {
            center: None,
            radius: None,
            steps: default_circle_steps(),
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelearnConfig {
    /// Displacement of the static anchor injected after the warm-up phase.
    pub anchor_shift: [f64; 2],
    /// Babbling steps in the unperturbed scene before the shift.
    pub warmup_steps: usize,
    /// Babbling steps after the shift.
    pub steps: usize,
    /// Number of fixed probe actions used to compare the model before and
    /// after retraining.
    pub probes: usize,
    /// Unit that is babbled around; defaults to the one nearest the start.
    #[serde(default)]
    pub unit: Option<usize>,
    /// Half-width of the box around the unit centre that babbling starts
    /// from. Zero keeps the robot parked at the centre.
    #[serde(default)]
    pub sample_radius: f64,
}

impl Default for RelearnConfig {
    fn default() -> Self {
        Self {
            anchor_shift: [0.1, 0.0],
            warmup_steps: 20,
            steps: 60,
            probes: 10,
            unit: None,
            sample_radius: 0.0,
        }
    }
}

fn default_fd_step() -> f64 {
    1e-5
}

fn default_e_tol() -> f64 {
    1e-3
}

fn default_divergence() -> f64 {
    10.0
}

fn default_budget() -> usize {
    2000
}

fn default_rounds() -> usize {
    3
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub rig: Rig,
    #[serde(default)]
    pub cable: CableSpec,
    #[serde(default)]
    pub workspace: Workspace,
    /// Configuration at which the reference equilibrium is solved.
    pub reference_config: Vec<f64>,
    pub harmonics: usize,
    pub tau: usize,
    pub sigma: f64,
    pub unit_centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Diagonal of the distortion metric; identity when absent.
    #[serde(default)]
    pub distortion_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub gain_search: GainSearchConfig,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default)]
    pub rls: RlsConfig,
    pub seed: u64,
    pub babble_amplitude: f64,
    /// Half-width of the box around each unit centre where training data is
    /// collected.
    pub sample_radius: f64,
    /// Extra babbling rounds allowed when a store is rank deficient.
    #[serde(default = "default_rounds")]
    pub max_extra_rounds: usize,
    #[serde(default = "default_budget")]
    pub step_budget: usize,
    /// Regulation stops once `E < e_tol * E0`.
    #[serde(default = "default_e_tol")]
    pub e_tol: f64,
    /// A run diverges once `E > divergence_factor * E0`.
    #[serde(default = "default_divergence")]
    pub divergence_factor: f64,
    /// Finite-difference step for the exact and probed Jacobians.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    pub start: Vec<f64>,
    /// Recorded configurations whose observed features become targets.
    pub targets: Vec<Vec<f64>>,
    #[serde(default)]
    pub circle: CircleConfig,
    #[serde(default)]
    pub relearn: RelearnConfig,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_epsilon() -> f64 {
    DEFAULT_RELEARN_EPSILON
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_vec(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(config_err(format!(
            "{name} has {} entries, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(config_err(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n(&self) -> usize {
        self.rig.dim()
    }

    pub fn m(&self) -> usize {
        feature_dim(self.harmonics)
    }

    /// Rejects anything the downstream modules would refuse, before any
    /// simulation runs.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| config_err(e.to_string());
        let (m, n) = (self.m(), self.n());
        if self.scenario.trim().is_empty() {
            return Err(config_err("scenario id is empty"));
        }
        self.cable.validate().map_err(wrap)?;
        if self.harmonics == 0 {
            return Err(config_err("harmonics must be at least 1"));
        }
        if self.tau <= m * n {
            return Err(config_err(format!(
                "tau = {} must exceed m*n = {} (m = {m}, n = {n})",
                self.tau,
                m * n
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(config_err(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.unit_centers.is_empty() {
            return Err(config_err("at least one unit centre is required"));
        }
        for (i, w) in self.unit_centers.iter().enumerate() {
            check_vec(&format!("unit centre {i}"), w, n)?;
        }
        self.controller.validate().map_err(wrap)?;
        if !self.epsilon.is_finite() {
            return Err(config_err("epsilon must be finite"));
        }
        self.distortion_weights().map_err(wrap)?;
        self.gain_search.validate().map_err(wrap)?;
        if self.stop.max_iters == 0 || !(self.stop.q_tol >= 0.0) || !(self.stop.q_floor >= 0.0) {
            return Err(config_err(
                "stop criteria need max_iters > 0 and non-negative tolerances",
            ));
        }
        if !(self.rls.forgetting > 0.0 && self.rls.forgetting <= 1.0 && self.rls.p0 > 0.0) {
            return Err(config_err("rls needs forgetting in (0,1] and p0 > 0"));
        }
        if !(self.babble_amplitude > 0.0 && self.babble_amplitude.is_finite()) {
            return Err(config_err("babble_amplitude must be positive"));
        }
        if !(self.sample_radius >= 0.0 && self.sample_radius.is_finite()) {
            return Err(config_err("sample_radius must be non-negative"));
        }
        if !(self.relearn.sample_radius >= 0.0 && self.relearn.sample_radius.is_finite()) {
            return Err(config_err("relearn.sample_radius must be non-negative"));
        }
        if self.step_budget == 0 {
            return Err(config_err("step_budget must be positive"));
        }
        if !(self.e_tol > 0.0 && self.e_tol < 1.0) {
            return Err(config_err("e_tol must lie in (0,1)"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(config_err("divergence_factor must exceed 1"));
        }
        if !(self.fd_step > 0.0) {
            return Err(config_err("fd_step must be positive"));
        }
        check_vec("reference_config", &self.reference_config, n)?;
        check_vec("start", &self.start, n)?;
        if self.targets.is_empty() {
            return Err(config_err("at least one target configuration is required"));
        }
        for (i, t) in self.targets.iter().enumerate() {
            check_vec(&format!("target {i}"), t, n)?;
        }
        if self.circle.steps < 8 {
            return Err(config_err("circle needs at least 8 samples"));
        }
        if let Some(r) = self.circle.radius {
            if !(r > 0.0) {
                return Err(config_err("circle radius must be positive"));
            }
        }
        let rl = &self.relearn;
        if rl.steps == 0 || rl.probes == 0 {
            return Err(config_err("relearn needs steps > 0 and probes > 0"));
        }
        if let Some(u) = rl.unit {
            if u >= self.unit_centers.len() {
                return Err(config_err(format!("relearn unit {u} does not exist")));
            }
        }
        Ok(())
    }

    pub fn distortion_weights(&self) -> Result<DistortionWeights> {
        match &self.distortion_weights {
            None => Ok(DistortionWeights::identity(self.m())),
            Some(b) => {
                if b.len() != self.m() {
                    return Err(config_err(format!(
                        "distortion weights have {} entries, expected {}",
                        b.len(),
                        self.m()
                    )));
                }
                DistortionWeights::new(DVector::from_row_slice(b))
            }
        }
    }

    pub fn centers(&self) -> Vec<DVector<f64>> {
        self.unit_centers
            .iter()
            .map(|w| DVector::from_row_slice(w))
            .collect()
    }

    pub fn start_vec(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.start)
    }

    pub fn target_vecs(&self) -> Vec<DVector<f64>> {
        self.targets
            .iter()
            .map(|t| DVector::from_row_slice(t))
            .collect()
    }

    pub fn world(&self) -> Result<CableWorld> {
        CableWorld::new(
            self.cable,
            self.rig,
            self.workspace,
            &DVector::from_row_slice(&self.reference_config),
        )
    }

    pub fn plant(&self) -> Result<CablePlant> {
        Ok(CablePlant::new(self.world()?, self.harmonics))
    }

    /// One gripper, tip held by position, four units on a square.
    pub fn single_robot(seed: u64) -> Self {
        Self {
            scenario: "single".into(),
            rig: Rig::SingleFree,
            cable: CableSpec::default(),
            workspace: Workspace::default(),
            reference_config: vec![0.4, 0.45],
            harmonics: 4,
            tau: 40,
            sigma: 1.3,
            unit_centers: vec![
                vec![0.3, 0.5],
                vec![0.5, 0.5],
                vec![0.5, 0.3],
                vec![0.3, 0.3],
            ],
            controller: ControllerParams::default(),
            epsilon: 1e-6,
            distortion_weights: None,
            gain_search: GainSearchConfig::default(),
            stop: StopCriteria::default(),
            rls: RlsConfig::default(),
            seed,
            babble_amplitude: 0.01,
            sample_radius: 0.03,
            max_extra_rounds: default_rounds(),
            step_budget: default_budget(),
            e_tol: default_e_tol(),
            divergence_factor: default_divergence(),
            fd_step: default_fd_step(),
            start: vec![0.4, 0.4],
            targets: vec![
                vec![0.32, 0.47],
                vec![0.47, 0.46],
                vec![0.46, 0.33],
                vec![0.33, 0.34],
            ],
            circle: CircleConfig::default(),
            relearn: RelearnConfig::default(),
            output_dir: None,
        }
    }

    /// Both ends turned upwards: the cable leaves rising and arrives rising,
    /// with a single inflection in between. Kept well below the snap-through
    /// of this family near 0.93 rad.
    pub const S_SHAPE: [f64; 6] = [0.1, 0.4, 0.5, 0.5, 0.4, 0.5];

    /// Two grippers clamping both cable ends.
    pub fn dual_robot(seed: u64) -> Self {
        let mut cfg = Self::single_robot(seed);
        cfg.scenario = "dual".into();
        cfg.rig = Rig::DualClamped;
        cfg.cable.anchor = Pose::new(0.1, 0.4, 0.0);
        cfg.reference_config = vec![0.1, 0.4, 0.0, 0.5, 0.4, 0.0];
        cfg.tau = 120;
        cfg.unit_centers = vec![
            vec![0.1, 0.4, 0.0, 0.5, 0.4, 0.0],
            Self::S_SHAPE.to_vec(),
            vec![0.1, 0.4, 0.5, 0.5, 0.4, -0.5],
            vec![0.1, 0.4, -0.5, 0.5, 0.4, -0.5],
        ];
        cfg.start = vec![0.1, 0.4, 0.0, 0.5, 0.4, 0.0];
        cfg.targets = vec![
            Self::S_SHAPE.to_vec(),
            vec![0.1, 0.4, -0.5, 0.5, 0.4, -0.5],
            vec![0.12, 0.42, 0.3, 0.5, 0.38, 0.6],
            vec![0.08, 0.4, 0.6, 0.48, 0.42, 0.2],
        ];
        cfg
    }
}

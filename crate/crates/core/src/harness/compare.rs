use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::units::UnitField;

use super::config::ScenarioConfig;
use super::plant::Plant;
use super::regulate::{
    run_regulation, target_features, Method, RegulationOutcome, RegulationParams, RunStatus,
};

/// One (method, target) regulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub target: usize,
    /// `None` when the run failed before producing a trace.
    pub status: Option<RunStatus>,
    pub steps_to_tol: Option<usize>,
    pub steps: usize,
    pub e0: f64,
    pub final_e: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

/// Every run of a comparison: method, target index and outcome.
pub type ComparisonRuns = Vec<(Method, usize, RegulationOutcome)>;

pub const COMPARED_METHODS: [Method; 3] = [Method::AdaptiveUnits, Method::Broyden, Method::Rls];

/// Runs every compared method on every target from the same start. Failures
/// of individual runs are recorded in the table rather than aborting it.
pub fn compare_methods<P: Plant>(
    cfg: &ScenarioConfig,
    plant: &P,
    field: &UnitField,
) -> Result<(Comparison, ComparisonRuns)> {
    let params = RegulationParams::from_config(cfg)?;
    let x0 = cfg.start_vec();
    let targets = target_features(plant, &cfg.target_vecs())?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for method in COMPARED_METHODS {
        for (k, y_star) in targets.iter().enumerate() {
            match run_regulation(plant, field, method, &x0, y_star, &params) {
                Ok(out) => {
                    rows.push(ComparisonRow {
                        method,
                        target: k,
                        status: Some(out.status),
                        steps_to_tol: (out.status == RunStatus::Converged).then_some(out.steps),
                        steps: out.steps,
                        e0: out.e0,
                        final_e: out.final_e,
                        error: None,
                    });
                    runs.push((method, k, out));
                }
                Err(e) => rows.push(ComparisonRow {
                    method,
                    target: k,
                    status: None,
                    steps_to_tol: None,
                    steps: 0,
                    e0: f64::NAN,
                    final_e: f64::NAN,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    Ok((
        Comparison {
            scenario: cfg.scenario.clone(),
            seed: cfg.seed,
            rows,
        },
        runs,
    ))
}

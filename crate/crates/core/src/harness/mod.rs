//! Experiment scenarios: data collection, unit training, the circular
//! switching test, shape regulation, relearning and the method comparison,
//! plus their CSV/JSON artefacts.

mod circle;
mod collect;
mod compare;
mod config;
mod output;
mod plant;
mod regulate;
mod relearn;
mod trace;

pub use circle::{fit_circle, resolve_circle, run_circular_test, CircleOutcome, SwitchEvent};
pub use collect::{
    babble_observation, collect_training_data, train_field, trained_field, Collection, RankReport,
    TrainSummary,
};
pub use compare::{compare_methods, Comparison, ComparisonRow, ComparisonRuns, COMPARED_METHODS};
pub use config::{CircleConfig, RelearnConfig, ScenarioConfig};
pub use output::{write_contours, write_json, write_trace};
pub use plant::{CablePlant, LinearPlant, Plant};
pub use regulate::{
    run_regulation, target_features, Method, RegulationOutcome, RegulationParams, RunStatus,
};
pub use relearn::{perturbed_plant, run_relearn_test, RelearnOutcome};
pub use trace::{RunTrace, TraceRow};

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sensoradapt::harness::{
    compare_methods, perturbed_plant, run_circular_test, run_regulation, run_relearn_test,
    target_features, trained_field, write_contours, write_json, write_trace, CablePlant,
    Collection, Method, Plant, RegulationParams, RunStatus, ScenarioConfig, TrainSummary,
};
use sensoradapt::units::{FieldSnapshot, UnitField};
use sensoradapt::Error;

#[derive(Debug, Parser)]
#[command(
    name = "sensoradapt",
    version,
    about = "Adaptive sensorimotor models for elastic cable shaping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Babble around every unit and store the observations.
    Collect(Common),
    /// Collect data and train every unit.
    Train(Common),
    /// Move around the circle through the unit centres and record G.
    Circle(Common),
    /// Drive the cable from the start configuration to one target.
    Regulate(Common),
    /// Perturb the scene and relearn the affected unit.
    Relearn(Common),
    /// Run the adaptive units, Broyden and RLS on every target.
    Compare(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Jacobian model used by `regulate`.
    #[arg(long, default_value = "adaptive_units")]
    method: String,
    /// Index of the target used by `regulate`.
    #[arg(long, default_value_t = 0)]
    target: usize,
    /// Trained unit field (`units.json` from `train`) to use instead of
    /// training from scratch.
    #[arg(long)]
    units: Option<PathBuf>,
    /// Skip writing per-step contour files.
    #[arg(long)]
    no_contours: bool,
}

struct Run {
    cfg: ScenarioConfig,
    plant: CablePlant,
    out: PathBuf,
}

impl Run {
    fn new(args: &Common) -> Result<Self, Error> {
        let mut cfg = ScenarioConfig::load(&args.config)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        let out = args
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
            .ok_or_else(|| {
                Error::Config("no output directory: pass --out or set output_dir".into())
            })?;
        fs::create_dir_all(&out)?;
        let plant = cfg.plant()?;
        let start = std::iter::once(("start".to_string(), cfg.start_vec()));
        let targets = cfg
            .target_vecs()
            .into_iter()
            .enumerate()
            .map(|(k, x)| (format!("target {k}"), x));
        for (name, x) in start.chain(targets) {
            plant
                .check(&x)
                .map_err(|e| Error::Config(format!("{name} is not admissible: {e}")))?;
        }
        Ok(Self { cfg, plant, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn field(&self, args: &Common) -> Result<UnitField, Error> {
        match &args.units {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let snap: FieldSnapshot = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let field = UnitField::from_snapshot(&snap)?;
                if field.m() != self.cfg.m() || field.n() != self.cfg.n() {
                    return Err(Error::Config(
                        "unit field does not match the scenario dimensions".into(),
                    ));
                }
                Ok(field)
            }
            None => Ok(trained_field(&self.cfg, &self.plant)?.0.field),
        }
    }

    fn contours(&self, args: &Common, trace: &sensoradapt::harness::RunTrace) -> Result<(), Error> {
        if !args.no_contours {
            write_contours(self.path("contours"), &self.plant, trace)?;
        }
        Ok(())
    }
}

fn collection_report(cfg: &ScenarioConfig, col: &Collection) -> serde_json::Value {
    json!({
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "tau": cfg.tau,
        "ranks": col.ranks,
        "warnings": col.warnings,
    })
}

fn collect(args: &Common) -> Result<(), Error> {
    let run = Run::new(args)?;
    let col = sensoradapt::harness::collect_training_data(&run.cfg, &run.plant)?;
    write_json(run.path("units.json"), &col.field.snapshot())?;
    write_json(run.path("report.json"), &collection_report(&run.cfg, &col))?;
    println!(
        "collected {} units into {}",
        col.field.len(),
        run.out.display()
    );
    Ok(())
}

fn train(args: &Common) -> Result<(), Error> {
    let run = Run::new(args)?;
    let (col, reports) = trained_field(&run.cfg, &run.plant)?;
    let summaries: Vec<TrainSummary> = reports
        .iter()
        .map(|r| TrainSummary::new(r, &col.field))
        .collect();
    let mut report = collection_report(&run.cfg, &col);
    report["units"] = json!(summaries);
    write_json(run.path("units.json"), &col.field.snapshot())?;
    write_json(run.path("report.json"), &report)?;
    for s in &summaries {
        println!(
            "unit {}: gamma {:.4e}, Q {:.3e} -> {:.3e} in {} iterations",
            s.unit, s.gamma, s.initial_q, s.final_q, s.iterations
        );
    }
    Ok(())
}

fn circle(args: &Common) -> Result<(), Error> {
    let run = Run::new(args)?;
    let field = run.field(args)?;
    let out = run_circular_test(&run.cfg, &run.plant, &field)?;
    write_trace(run.path("trace.csv"), &out.trace)?;
    run.contours(args, &out.trace)?;
    let drops = out
        .switches
        .iter()
        .filter(|s| s.g_after < s.g_before)
        .count();
    write_json(
        run.path("report.json"),
        &json!({
            "scenario": run.cfg.scenario,
            "seed": run.cfg.seed,
            "center": out.center,
            "radius": out.radius,
            "phase": out.phase,
            "steps": out.trace.len(),
            "switches": out.switches,
            "switches_with_lower_g": drops,
        }),
    )?;
    println!(
        "{} switches, G lower after {} of them",
        out.switches.len(),
        drops
    );
    Ok(())
}

fn regulate(args: &Common) -> Result<(), Error> {
    let run = Run::new(args)?;
    let method: Method = args.method.parse()?;
    let targets = run.cfg.target_vecs();
    let x_star = targets.get(args.target).ok_or_else(|| {
        Error::Config(format!(
            "target {} does not exist ({} configured)",
            args.target,
            targets.len()
        ))
    })?;
    let y_star = target_features(&run.plant, std::slice::from_ref(x_star))?.remove(0);
    let field = run.field(args)?;
    let params = RegulationParams::from_config(&run.cfg)?;
    let out = run_regulation(
        &run.plant,
        &field,
        method,
        &run.cfg.start_vec(),
        &y_star,
        &params,
    )?;
    write_trace(run.path("trace.csv"), &out.trace)?;
    run.contours(args, &out.trace)?;
    write_json(
        run.path("report.json"),
        &json!({
            "scenario": run.cfg.scenario,
            "seed": run.cfg.seed,
            "method": out.method,
            "target": args.target,
            "status": out.status,
            "steps": out.steps,
            "e0": out.e0,
            "final_e": out.final_e,
            "held_steps": out.held_steps,
        }),
    )?;
    println!(
        "{}: {:?} after {} steps, E {:.3e} -> {:.3e}",
        method, out.status, out.steps, out.e0, out.final_e
    );
    out.check()
}

fn relearn(args: &Common) -> Result<(), Error> {
    let run = Run::new(args)?;
    let mut field = run.field(args)?;
    let perturbed = perturbed_plant(&run.cfg, &run.plant)?;
    let out = run_relearn_test(&run.cfg, &run.plant, &perturbed, &mut field)?;
    write_trace(run.path("trace.csv"), &out.trace)?;
    write_json(run.path("units.json"), &field.snapshot())?;
    let mut report = serde_json::to_value(&out)?;
    if let Some(obj) = report.as_object_mut() {
        obj.remove("trace");
        obj.insert("scenario".into(), json!(run.cfg.scenario));
        obj.insert("seed".into(), json!(run.cfg.seed));
    }
    write_json(run.path("report.json"), &report)?;
    println!(
        "unit {}: first exceedance {:?}, {} retrains, probe G {:.3e} -> {:.3e}",
        out.unit, out.first_exceed, out.retrains, out.probe_g_before, out.probe_g_after
    );
    Ok(())
}

fn compare(args: &Common) -> Result<(), Error> {
    let run = Run::new(args)?;
    let field = run.field(args)?;
    let (table, runs) = compare_methods(&run.cfg, &run.plant, &field)?;
    let runs_dir = run.path("runs");
    fs::create_dir_all(&runs_dir)?;
    for (method, k, out) in &runs {
        write_trace(runs_dir.join(format!("{method}_target{k}.csv")), &out.trace)?;
    }
    if let Some((_, _, first)) = runs.first() {
        write_trace(run.path("trace.csv"), &first.trace)?;
        run.contours(args, &first.trace)?;
    }
    write_json(run.path("report.json"), &table)?;
    for row in &table.rows {
        println!(
            "{:15} target {}: {:?} E {:.3e} -> {:.3e}",
            row.method.name(),
            row.target,
            row.status,
            row.e0,
            row.final_e
        );
    }
    match runs
        .iter()
        .find(|(_, _, o)| o.status == RunStatus::Diverged)
    {
        Some((_, _, o)) => o.check(),
        None => Ok(()),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::Divergence { .. } => 3,
        Error::SolverFailure { .. }
        | Error::InfeasibleConfiguration(_)
        | Error::GainSearchFailure { .. }
        | Error::RankDeficient { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Collect(a) => collect(a),
        Command::Train(a) => train(a),
        Command::Circle(a) => circle(a),
        Command::Regulate(a) => regulate(a),
        Command::Relearn(a) => relearn(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Divergence {
                step: 3,
                energy: 10.0,
                initial: 1.0
            }),
            3
        );
        assert_eq!(
            exit_code(&Error::SolverFailure {
                iterations: 1,
                residual: 1.0
            }),
            4
        );
        assert_eq!(exit_code(&Error::InfeasibleConfiguration("x".into())), 4);
    }
}

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use uavsched::channel::Slot;
use uavsched::harness::{
    collaborative, run_experiment, write_rows, ExperimentKind, HarnessError, OutputFormat, Planning, Scenario,
};
use uavsched::mapping::{DecisionMatrix, EvaluationReport};

/// Collaborative task scheduling for UAV fleets with inertial position
/// prediction.
#[derive(Parser)]
#[command(name = "uavsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario document (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for result files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Predict slot positions and write the predicted topologies.
    Predict(Common),
    /// Solve one task instance and print its evaluation.
    Schedule {
        #[command(flatten)]
        common: Common,
        /// Source data size [Mb]; defaults to the scenario's `data_mb`.
        #[arg(long)]
        data_mb: Option<f64>,
    },
    /// Run one experiment sweep.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[command(flatten)]
        common: Common,
    },
    /// Check a scenario document.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Config(String),
    Infeasible(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_infeasible() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct PredictionRow {
    uav: usize,
    slot: usize,
    predicted_east_m: f64,
    predicted_north_m: f64,
    predicted_up_m: f64,
    true_east_m: f64,
    true_north_m: f64,
    true_up_m: f64,
    error_m: f64,
    capacity_hz: f64,
    seed: u64,
    scenario_hash: String,
}

fn predict(c: &Common) -> Result<(), Failure> {
    let s = Scenario::load(&c.scenario, c.seed)?;
    out_dir(&c.out)?;
    let mut rows = Vec::new();
    for slot in Slot::ALL {
        for uav in 0..s.uav_count() {
            let (p, t) = (s.predicted[slot.index()][uav], s.truth[slot.index()][uav]);
            rows.push(PredictionRow {
                uav: uav + 1,
                slot: slot.number(),
                predicted_east_m: p.x,
                predicted_north_m: p.y,
                predicted_up_m: p.z,
                true_east_m: t.x,
                true_north_m: t.y,
                true_up_m: t.z,
                error_m: (p - t).norm(),
                capacity_hz: s.capacities[uav],
                seed: s.seed,
                scenario_hash: s.hash.clone(),
            });
        }
    }
    let path = c.out.join(format!("prediction.{}", c.format.extension()));
    write_rows(&rows, c.format, create(&path)?)?;
    let wteg = s.planning_wteg(Planning::Predicted)?;
    for slot in Slot::ALL {
        let path = c.out.join(format!("topology_slot{}.csv", slot.number()));
        wteg.topology(slot).write_csv(create(&path)?).map_err(HarnessError::from)?;
    }
    eprintln!("wrote predictions for {} UAVs to {}", s.uav_count(), c.out.display());
    Ok(())
}

#[derive(Serialize)]
struct ScheduleOutput {
    scenario: String,
    scenario_hash: String,
    seed: u64,
    solver: &'static str,
    data_mb: f64,
    total_s: Option<f64>,
    /// Decision matrix rows, one per subtask, columns `slot * N + uav`.
    matrix: DecisionMatrix,
    trace: Vec<f64>,
    evaluation: EvaluationReport,
}

fn schedule(c: &Common, data_mb: Option<f64>) -> Result<(), Failure> {
    let s = Scenario::load(&c.scenario, c.seed)?;
    let d = data_mb.unwrap_or(s.file.data_mb);
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Failure::Config(format!("--data-mb must be non-negative, got {d}")));
    }
    let wteg = s.planning_wteg(Planning::Predicted)?;
    let (problem, result) = collaborative(&s, s.task(d, 1.0)?, &wteg)?;
    let Some(r) = result else {
        return Err(Failure::Infeasible(format!(
            "{} found no executable schedule for {} at {d} Mb",
            s.file.solver.name(),
            problem.dag.name
        )));
    };
    let report = r.evaluation.report(&problem);
    let out = ScheduleOutput {
        scenario: s.file.name.clone(),
        scenario_hash: s.hash.clone(),
        seed: s.seed,
        solver: r.solver,
        data_mb: d,
        total_s: report.total_s,
        matrix: r.matrix.clone(),
        trace: r.trace.clone(),
        evaluation: report,
    };
    out_dir(&c.out)?;
    let path = c.out.join(format!("schedule.{}", c.format.extension()));
    match c.format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(create(&path)?, &out).map_err(HarnessError::from)?;
        }
        OutputFormat::Csv => {
            let rows: Vec<_> = out
                .evaluation
                .subtasks
                .iter()
                .map(|t| (t.id.clone(), t.uav, t.start_slot, t.replica, t.t_accu_s, t.t_comp_s, t.t_s, t.cache_wait_s))
                .collect();
            let mut wr = csv::Writer::from_writer(create(&path)?);
            wr.write_record(["id", "uav", "start_slot", "replica", "t_accu_s", "t_comp_s", "t_s", "cache_wait_s"])
                .map_err(HarnessError::from)?;
            for row in rows {
                wr.serialize(row).map_err(HarnessError::from)?;
            }
            wr.flush().map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&out).map_err(HarnessError::from)?);
    eprintln!("T(X) = {} s ({} at {d} Mb, {})", r.latency, problem.dag.name, r.solver);
    Ok(())
}

fn experiment(kind: ExperimentKind, c: &Common) -> Result<(), Failure> {
    let s = Scenario::load(&c.scenario, c.seed)?;
    out_dir(&c.out)?;
    let start = Instant::now();
    let result = run_experiment(&s, kind)?;
    let path = c.out.join(format!("{}.{}", kind.name(), c.format.extension()));
    result.write(c.format, create(&path)?)?;
    eprintln!("{}: {} rows to {} in {:.2} s", kind.name(), result.len(), path.display(), start.elapsed().as_secs_f64());
    Ok(())
}

fn validate(path: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let s = Scenario::load(path, seed)?;
    for &d in s.file.data_sizes_mb.iter().chain(&s.file.complexity_data_sizes_mb) {
        s.task(d, 1.0)?;
    }
    let wteg = s.planning_wteg(Planning::Predicted)?;
    let links = |slot| {
        let t = wteg.topology(slot);
        (0..t.len()).flat_map(|i| (i + 1..t.len()).map(move |j| (i, j))).filter(|&(i, j)| t.link[i][j]).count()
    };
    println!(
        "{}: ok (hash {}, task {} with {} subtasks, {} UAVs, {} + {} predicted links)",
        s.file.name,
        s.hash,
        s.dag.name,
        s.dag.len(),
        s.uav_count(),
        links(Slot::First),
        links(Slot::Second)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Predict(c) => predict(c),
        Command::Schedule { common, data_mb } => schedule(common, *data_mb),
        Command::Experiment { kind, common } => experiment(*kind, common),
        Command::Validate { scenario, seed } => validate(scenario, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
    }
}

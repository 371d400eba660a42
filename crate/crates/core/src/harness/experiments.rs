//! Experiment runners. Each returns tidy rows, one per sweep point, tagged
//! with the seed and scenario hash that regenerate them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;
use statrs::statistics::Statistics;

use super::execution::{replay, slot_two_inputs, slot_two_links, LinkModel};
use super::scenario::{Planning, Scenario};
use super::{derive_seed, write_rows, HarnessError, OutputFormat};
use crate::channel::{SlotTopology, WtegGraph};
use crate::dag::TaskDag;
use crate::mapping::{Problem, ScheduleEvaluation};
use crate::schedulers::{cloud_solve, local_solve, SolverError, SolverKind, SolverResult};
use crate::sins::{dead_reckon, simulate_imu, EarthModel, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentKind {
    LatencyVsDatasize,
    LatencyVsComplexity,
    AlgorithmComparison,
    SuccessRate,
    SinsError,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::LatencyVsDatasize,
        ExperimentKind::LatencyVsComplexity,
        ExperimentKind::AlgorithmComparison,
        ExperimentKind::SuccessRate,
        ExperimentKind::SinsError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LatencyVsDatasize => "latency-vs-datasize",
            ExperimentKind::LatencyVsComplexity => "latency-vs-complexity",
            ExperimentKind::AlgorithmComparison => "algorithm-comparison",
            ExperimentKind::SuccessRate => "success-rate",
            ExperimentKind::SinsError => "sins-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasizeRow {
    pub task: String,
    pub data_mb: f64,
    pub strategy: &'static str,
    pub latency_s: Option<f64>,
    pub status: &'static str,
    pub seed: u64,
    pub scenario_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub task: String,
    pub data_mb: f64,
    pub complexity_multiplier: f64,
    pub latency_s: Option<f64>,
    pub status: &'static str,
    /// Subtasks that finish after the slot boundary.
    pub slot_two_subtasks: usize,
    /// Longest time any forwarded data waits for the slot boundary [s].
    pub cache_wait_s: Option<f64>,
    pub seed: u64,
    pub scenario_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub task: String,
    pub data_mb: f64,
    pub solver: &'static str,
    pub runs: usize,
    pub feasible_runs: usize,
    pub mean_latency_s: Option<f64>,
    pub std_latency_s: Option<f64>,
    pub min_latency_s: Option<f64>,
    pub max_latency_s: Option<f64>,
    /// How much lower the BPSO mean is, relative to this solver's mean [%].
    pub bpso_gain_pct: Option<f64>,
    pub seed: u64,
    pub scenario_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessRow {
    pub task: String,
    pub data_mb: f64,
    pub strategy: &'static str,
    pub model: &'static str,
    pub status: &'static str,
    pub planned_latency_s: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    pub success_pct: f64,
    pub ci_low_pct: f64,
    pub ci_high_pct: f64,
    /// Success probability implied by the link model, when it has one [%].
    pub expected_pct: Option<f64>,
    pub slot_two_links: usize,
    pub slot_two_inputs: usize,
    pub seed: u64,
    pub scenario_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinsErrorRow {
    pub run: usize,
    pub t_s: f64,
    pub east_err_m: f64,
    pub north_err_m: f64,
    pub up_err_m: f64,
    pub position_err_m: f64,
    pub velocity_err_m_s: f64,
    pub pitch_err_rad: f64,
    pub roll_err_rad: f64,
    pub yaw_err_rad: f64,
    pub seed: u64,
    pub scenario_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentResult {
    Datasize(Vec<DatasizeRow>),
    Complexity(Vec<ComplexityRow>),
    Comparison(Vec<ComparisonRow>),
    Success(Vec<SuccessRow>),
    SinsError(Vec<SinsErrorRow>),
}

impl ExperimentResult {
    pub fn len(&self) -> usize {
        match self {
            ExperimentResult::Datasize(r) => r.len(),
            ExperimentResult::Complexity(r) => r.len(),
            ExperimentResult::Comparison(r) => r.len(),
            ExperimentResult::Success(r) => r.len(),
            ExperimentResult::SinsError(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write<W: std::io::Write>(&self, format: OutputFormat, w: W) -> Result<(), HarnessError> {
        match self {
            ExperimentResult::Datasize(r) => write_rows(r, format, w),
            ExperimentResult::Complexity(r) => write_rows(r, format, w),
            ExperimentResult::Comparison(r) => write_rows(r, format, w),
            ExperimentResult::Success(r) => write_rows(r, format, w),
            ExperimentResult::SinsError(r) => write_rows(r, format, w),
        }
    }
}

pub fn run_experiment(scenario: &Scenario, kind: ExperimentKind) -> Result<ExperimentResult, HarnessError> {
    Ok(match kind {
        ExperimentKind::LatencyVsDatasize => ExperimentResult::Datasize(run_latency_vs_datasize(scenario)?),
        ExperimentKind::LatencyVsComplexity => ExperimentResult::Complexity(run_latency_vs_complexity(scenario)?),
        ExperimentKind::AlgorithmComparison => ExperimentResult::Comparison(run_algorithm_comparison(scenario)?),
        ExperimentKind::SuccessRate => ExperimentResult::Success(run_success_rate(scenario)?),
        ExperimentKind::SinsError => ExperimentResult::SinsError(run_sins_error_report(scenario)?),
    })
}

fn status(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "infeasible"
    }
}

/// Runs `solver`; a search that finds nothing executable is `None`.
fn solve(
    scenario: &Scenario,
    problem: &Problem,
    solver: SolverKind,
    seed: u64,
) -> Result<Option<SolverResult>, HarnessError> {
    match solver.solve(problem, &scenario.bpso(), seed) {
        Ok(r) => Ok(Some(r)),
        Err(SolverError::NoFeasibleSchedule { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Collaborative schedule for `dag` on the predicted graph.
pub fn collaborative(
    scenario: &Scenario,
    dag: TaskDag,
    wteg: &WtegGraph,
) -> Result<(Problem, Option<SolverResult>), HarnessError> {
    let problem = scenario.problem(dag, wteg.clone())?;
    let result = solve(scenario, &problem, scenario.file.solver, scenario.bpso().seed)?;
    Ok((problem, result))
}

pub fn run_latency_vs_datasize(scenario: &Scenario) -> Result<Vec<DatasizeRow>, HarnessError> {
    let wteg = scenario.planning_wteg(Planning::Predicted)?;
    let points: Vec<Vec<DatasizeRow>> = scenario
        .file
        .data_sizes_mb
        .par_iter()
        .map(|&d| {
            let dag = scenario.task(d, 1.0)?;
            let row = |strategy, latency: Option<f64>| DatasizeRow {
                task: dag.name.clone(),
                data_mb: d,
                strategy,
                latency_s: latency,
                status: status(latency.is_some()),
                seed: scenario.seed,
                scenario_hash: scenario.hash.clone(),
            };
            let cloud = cloud_solve(&dag, &scenario.file.cloud).latency;
            let local = local_solve(&dag, scenario.capacities[0]).latency;
            let (_, collab) = collaborative(scenario, dag.clone(), &wteg)?;
            Ok(vec![
                row("cloud", Some(cloud)),
                row("local", Some(local)),
                row("collaborative", collab.map(|r| r.latency)),
            ])
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut rows: Vec<DatasizeRow> = points.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.data_mb.total_cmp(&b.data_mb).then(a.strategy.cmp(b.strategy)));
    Ok(rows)
}

/// Longest time forwarded data waits for the slot boundary, on a cache edge
/// or behind a replica. The terminal subtask's replica forwards nothing.
pub fn longest_cache_wait(problem: &Problem, eval: &ScheduleEvaluation) -> Option<f64> {
    let routes = eval.edges.iter().filter_map(|e| e.route.cache_wait);
    let replicas =
        eval.subtasks.iter().filter(|t| t.subtask != problem.dag.sink()).filter_map(|t| t.replica_cache_wait);
    routes.chain(replicas).reduce(f64::max)
}

pub fn run_latency_vs_complexity(scenario: &Scenario) -> Result<Vec<ComplexityRow>, HarnessError> {
    let wteg = scenario.planning_wteg(Planning::Predicted)?;
    let f = &scenario.file;
    let grid: Vec<(f64, f64)> = f
        .complexity_data_sizes_mb
        .iter()
        .flat_map(|&d| f.complexity_multipliers.iter().map(move |&m| (d, m)))
        .collect();
    let mut rows = grid
        .par_iter()
        .map(|&(d, m)| {
            let dag = scenario.task(d, m)?;
            let name = dag.name.clone();
            let (problem, result) = collaborative(scenario, dag, &wteg)?;
            let eval = result.as_ref().map(|r| &r.evaluation);
            let dt = scenario.slot_duration();
            Ok(ComplexityRow {
                task: name,
                data_mb: d,
                complexity_multiplier: m,
                latency_s: result.as_ref().map(|r| r.latency),
                status: status(result.is_some()),
                slot_two_subtasks: eval.map_or(0, |e| e.subtasks.iter().filter(|t| t.finish > dt).count()),
                cache_wait_s: eval.and_then(|e| longest_cache_wait(&problem, e)),
                seed: scenario.seed,
                scenario_hash: scenario.hash.clone(),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    rows.sort_by(|a, b| {
        a.data_mb.total_cmp(&b.data_mb).then(a.complexity_multiplier.total_cmp(&b.complexity_multiplier))
    });
    Ok(rows)
}

pub fn run_algorithm_comparison(scenario: &Scenario) -> Result<Vec<ComparisonRow>, HarnessError> {
    let wteg = scenario.planning_wteg(Planning::Predicted)?;
    let runs = scenario.file.seeds_per_point;
    let mut rows = Vec::new();
    for &d in &scenario.file.data_sizes_mb {
        let problem = scenario.problem(scenario.task(d, 1.0)?, wteg.clone())?;
        let mut point: Vec<ComparisonRow> = Vec::new();
        for solver in SolverKind::ALL {
            let latencies: Vec<Option<f64>> = if solver.is_stochastic() {
                (0..runs)
                    .into_par_iter()
                    .map(|r| {
                        Ok(solve(scenario, &problem, solver, derive_seed(scenario.seed, "run", r as u64))?
                            .map(|s| s.latency))
                    })
                    .collect::<Result<_, HarnessError>>()?
            } else {
                vec![solve(scenario, &problem, solver, 0)?.map(|s| s.latency); runs]
            };
            let ok: Vec<f64> = latencies.iter().flatten().copied().collect();
            let stat = |v: f64| (!ok.is_empty()).then_some(v);
            point.push(ComparisonRow {
                task: problem.dag.name.clone(),
                data_mb: d,
                solver: solver.name(),
                runs,
                feasible_runs: ok.len(),
                mean_latency_s: stat(ok.iter().mean()),
                std_latency_s: match ok.len() {
                    0 => None,
                    _ if !solver.is_stochastic() || ok.len() == 1 => Some(0.0),
                    _ => Some(ok.iter().std_dev()),
                },
                min_latency_s: stat(ok.iter().copied().fold(f64::INFINITY, f64::min)),
                max_latency_s: stat(ok.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                bpso_gain_pct: None,
                seed: scenario.seed,
                scenario_hash: scenario.hash.clone(),
            });
        }
        let bpso = point.iter().find(|r| r.solver == SolverKind::Bpso.name()).and_then(|r| r.mean_latency_s);
        for r in point.iter_mut().filter(|r| r.solver != SolverKind::Bpso.name()) {
            r.bpso_gain_pct = match (bpso, r.mean_latency_s) {
                (Some(b), Some(m)) if m > 0.0 => Some((m - b) / m * 100.0),
                _ => None,
            };
        }
        rows.extend(point);
    }
    Ok(rows)
}

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
pub fn clopper_pearson(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials && trials > 0);
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 { 0.0 } else { beta_quantile(k, n - k + 1.0, alpha / 2.0) };
    let hi = if successes == trials { 1.0 } else { beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0) };
    (lo, hi)
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta
/// function, which is monotone on [0, 1].
fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn run_success_rate(scenario: &Scenario) -> Result<Vec<SuccessRow>, HarnessError> {
    let f = &scenario.file;
    let trials = f.trials_per_point;
    let predicted = scenario.planning_wteg(Planning::Predicted)?;
    let persist = scenario.planning_wteg(Planning::Persist)?;
    let truth = scenario.true_wteg()?;
    let first = persist.topology(crate::channel::Slot::First).clone();
    let assumed: SlotTopology = persist.topology(crate::channel::Slot::Second).clone();
    let p = f.success.link_probability;
    let mut rows = Vec::new();
    for (di, &d) in f.data_sizes_mb.iter().enumerate() {
        let dag = scenario.task(d, 1.0)?;
        let row = |strategy, model: LinkModel, plan: Option<&SolverResult>, successes: usize, expected: Option<f64>| {
            let (lo, hi) = clopper_pearson(successes, trials, f.success.confidence);
            SuccessRow {
                task: dag.name.clone(),
                data_mb: d,
                strategy,
                model: model.name(),
                status: status(plan.is_some()),
                planned_latency_s: plan.map(|r| r.latency),
                trials,
                successes,
                success_pct: successes as f64 / trials as f64 * 100.0,
                ci_low_pct: lo * 100.0,
                ci_high_pct: hi * 100.0,
                expected_pct: expected.map(|e| e * 100.0),
                slot_two_links: plan.map_or(0, |r| slot_two_links(&r.evaluation).len()),
                slot_two_inputs: plan.map_or(0, |r| slot_two_inputs(&r.evaluation)),
                seed: scenario.seed,
                scenario_hash: scenario.hash.clone(),
            }
        };

        let (problem, plan) = collaborative(scenario, dag.clone(), &predicted)?;
        let ok = plan.as_ref().is_some_and(|r| replay(&problem, &r.evaluation, &truth).success);
        rows.push(row("sins", LinkModel::Physical, plan.as_ref(), if ok { trials } else { 0 }, None));

        let (problem, plan) = collaborative(scenario, dag.clone(), &persist)?;
        for &model in &f.success.models {
            let (successes, expected) = match (&plan, model) {
                (None, _) => (0, None),
                (Some(r), LinkModel::Physical) => {
                    (if replay(&problem, &r.evaluation, &truth).success { trials } else { 0 }, None)
                }
                (Some(r), LinkModel::Bernoulli) => {
                    let k = slot_two_links(&r.evaluation).len();
                    let successes = (0..trials)
                        .into_par_iter()
                        .map(|t| {
                            let seed = derive_seed(scenario.seed, "trial", (di * trials + t) as u64);
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            let second = assumed.retain_links(|_, _| rng.gen_bool(p));
                            let realized = scenario.wteg(&first, &second)?;
                            Ok(replay(&problem, &r.evaluation, &realized).success as usize)
                        })
                        .collect::<Result<Vec<usize>, HarnessError>>()?
                        .into_iter()
                        .sum();
                    (successes, Some(p.powi(k as i32)))
                }
            };
            rows.push(row("no-sins", model, plan.as_ref(), successes, expected));
        }
    }
    Ok(rows)
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

/// Dead-reckons the survey track with the scenario's IMU model and reports
/// the error against truth every `step_s` seconds.
pub fn run_sins_error_report(scenario: &Scenario) -> Result<Vec<SinsErrorRow>, HarnessError> {
    let r = scenario.file.sins_report;
    let ratio = r.step_s / (2.0 * r.sample_s);
    if (ratio - ratio.round()).abs() > 1e-9 || ratio < 0.5 {
        return Err(HarnessError::Invalid("`sins_report.step_s` must be a multiple of 2 x sample_s".into()));
    }
    let earth = EarthModel::wgs84();
    let truth = Trajectory::survey_track();
    let states = truth.states(r.step_s, r.duration_s, &earth)?;
    let origin = truth.start;
    let runs: Vec<Vec<SinsErrorRow>> = (0..r.runs)
        .into_par_iter()
        .map(|run| {
            let imu = scenario.file.imu.model(derive_seed(scenario.seed, "sins-report", run as u64));
            let trace = simulate_imu(&truth, &imu, r.sample_s, r.duration_s, &earth)?;
            let est = dead_reckon(&states[0], &trace, &earth)?;
            states
                .iter()
                .map(|s| {
                    let i = est.partition_point(|e| e.time < s.time - 1e-9);
                    let e = est.get(i).ok_or_else(|| HarnessError::Invalid("trace ends early".into()))?;
                    let dp = earth.geodetic_to_enu(&e.position, &origin) - earth.geodetic_to_enu(&s.position, &origin);
                    let (ea, ta) = (e.euler(), s.euler());
                    Ok(SinsErrorRow {
                        run,
                        t_s: s.time,
                        east_err_m: dp.x,
                        north_err_m: dp.y,
                        up_err_m: dp.z,
                        position_err_m: dp.norm(),
                        velocity_err_m_s: (e.velocity - s.velocity).norm(),
                        pitch_err_rad: ea.pitch - ta.pitch,
                        roll_err_rad: ea.roll - ta.roll,
                        yaw_err_rad: wrap_angle(ea.yaw - ta.yaw),
                        seed: scenario.seed,
                        scenario_hash: scenario.hash.clone(),
                    })
                })
                .collect()
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(runs.into_iter().flatten().collect())
}

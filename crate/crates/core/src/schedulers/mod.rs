//! Schedule search: binary particle swarm optimisation, three load-balancing
//! baselines, and the cloud-only and local-only reference architectures.

mod architectures;
mod baselines;
mod bpso;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{DecisionMatrix, MappingError, Placement, Problem, ScheduleEvaluation};

pub use architectures::{cloud_solve, local_solve, ArchitectureResult, CloudParams};
pub use baselines::{greedy_lb_solve, pick_kx_solve, smooth_weighted_round_robin, wrr_solve};
pub use bpso::{bpso_solve, sigmoid, BpsoParams};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("{solver} found no schedule that can execute")]
    NoFeasibleSchedule { solver: &'static str },
    #[error("invalid solver parameter: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

/// Which collaborative scheduler to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Bpso,
    Wrr,
    GreedyLb,
    PickKx,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Bpso, SolverKind::Wrr, SolverKind::GreedyLb, SolverKind::PickKx];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bpso => "bpso",
            SolverKind::Wrr => "wrr",
            SolverKind::GreedyLb => "greedy-lb",
            SolverKind::PickKx => "pick-kx",
        }
    }

    /// Whether the result depends on the seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, SolverKind::Bpso | SolverKind::PickKx)
    }

    pub fn solve(self, problem: &Problem, bpso: &BpsoParams, seed: u64) -> Result<SolverResult, SolverError> {
        match self {
            SolverKind::Bpso => bpso_solve(problem, &BpsoParams { seed, ..*bpso }),
            SolverKind::Wrr => wrr_solve(problem),
            SolverKind::GreedyLb => greedy_lb_solve(problem),
            SolverKind::PickKx => pick_kx_solve(problem, seed),
        }
    }
}

/// Best schedule found by a collaborative scheduler.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    pub solver: &'static str,
    pub matrix: DecisionMatrix,
    pub placements: Vec<Placement>,
    /// Task latency of `placements` [s].
    pub latency: f64,
    /// Best latency after initialisation and after every iteration.
    pub trace: Vec<f64>,
    /// Number of schedules timed.
    pub evaluations: usize,
    pub evaluation: ScheduleEvaluation,
}

impl SolverResult {
    fn from_evaluation(
        solver: &'static str,
        problem: &Problem,
        evaluation: ScheduleEvaluation,
        trace: Vec<f64>,
        evaluations: usize,
    ) -> Result<Self, SolverError> {
        if !evaluation.is_feasible() {
            return Err(SolverError::NoFeasibleSchedule { solver });
        }
        Ok(SolverResult {
            solver,
            matrix: DecisionMatrix::from_placements(&evaluation.placements, problem.uav_count()),
            placements: evaluation.placements.clone(),
            latency: evaluation.total,
            trace,
            evaluations,
            evaluation,
        })
    }
}

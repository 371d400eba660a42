//! Executing a planned schedule on the topology that actually occurs.
//!
//! Placements and routes are fixed at planning time. Execution re-times
//! every planned route hop by hop on the realized graph; a hop without a
//! link, or a deadline missed because realized links are slower, fails the
//! task.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::channel::{Slot, SlotTopology, WtegGraph};
use crate::mapping::{evaluate_with, Infeasibility, Problem, ScheduleEvaluation};

/// How slot-two links come about for a schedule planned without prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkModel {
    /// Links follow from the positions actually flown.
    Physical,
    /// Each planned link survives independently with a fixed probability.
    Bernoulli,
}

impl LinkModel {
    pub fn name(self) -> &'static str {
        match self {
            LinkModel::Physical => "physical",
            LinkModel::Bernoulli => "bernoulli",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecutionOutcome {
    /// Every planned route exists and the task finishes within two slots.
    pub success: bool,
    /// Task edge whose route broke, as `(from, to)` subtask indices.
    pub failed_edge: Option<(usize, usize)>,
    pub infeasibility: Option<Infeasibility>,
    pub realized: SlotTopology,
    pub evaluation: ScheduleEvaluation,
}

/// Executes `plan` (an evaluation under `problem`'s planning graph) on the
/// `realized` graph.
pub fn replay(problem: &Problem, plan: &ScheduleEvaluation, realized: &WtegGraph) -> ExecutionOutcome {
    let evaluation = if plan.is_feasible() {
        evaluate_with(problem, &plan.placements, |from, to, _, ready, _, payload| {
            let planned = plan.edges.iter().find(|e| e.from == from && e.to == to)?;
            realized.follow(&planned.route.nodes, ready, payload)
        })
    } else {
        plan.clone()
    };
    let failed_edge = match evaluation.infeasibility {
        Some(Infeasibility::Unreachable { from, to }) => Some((from, to)),
        _ => None,
    };
    ExecutionOutcome {
        success: evaluation.is_feasible(),
        failed_edge,
        infeasibility: evaluation.infeasibility,
        realized: realized.topology(Slot::Second).clone(),
        evaluation,
    }
}

/// Distinct inter-UAV links, as ordered pairs `(low, high)`, that the plan
/// uses in slot two.
pub fn slot_two_links(plan: &ScheduleEvaluation) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for e in &plan.edges {
        for w in e.route.nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.slot == Slot::Second && b.slot == Slot::Second && a.uav != b.uav {
                out.insert((a.uav.min(b.uav), a.uav.max(b.uav)));
            }
        }
    }
    out
}

/// Task edges whose planned route crosses at least one slot-two link.
pub fn slot_two_inputs(plan: &ScheduleEvaluation) -> usize {
    plan.edges
        .iter()
        .filter(|e| {
            e.route
                .nodes
                .windows(2)
                .any(|w| w[0].slot == Slot::Second && w[1].slot == Slot::Second && w[0].uav != w[1].uav)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{assemble_two_step, build_slot_topology, ChannelParams};
    use crate::dag::{Subtask, TaskDag, MEGABIT};
    use crate::mapping::{evaluate, Placement};
    use nalgebra::Vector3;

    fn graph(first: &[f64], second: &[f64], dt: f64) -> WtegGraph {
        let p = ChannelParams::default();
        let pos = |xs: &[f64]| xs.iter().map(|&x| Vector3::new(x, 0.0, 0.0)).collect::<Vec<_>>();
        let t1 = build_slot_topology(&pos(first), &p, Slot::First).unwrap();
        let t2 = build_slot_topology(&pos(second), &p, Slot::Second).unwrap();
        assemble_two_step(&t1, &t2, &vec![0.0; first.len()], dt).unwrap()
    }

    fn chain() -> TaskDag {
        let subs = (1..=3).map(|i| Subtask::new(format!("w{i}"), 0.8, 237.5)).collect();
        TaskDag::new("chain", subs, &[("w1", "w2"), ("w2", "w3")]).unwrap().propagate_data_sizes(MEGABIT).unwrap()
    }

    #[test]
    fn replay_on_the_planning_graph_reproduces_the_plan() {
        let g = graph(&[0.0, 1000.0, 2000.0], &[0.0, 1000.0, 2000.0], 0.3);
        let pr = Problem::new(chain(), g.clone(), vec![1e9; 3]).unwrap();
        let plan = evaluate(&pr, &[Placement::spanning(0), Placement::second(1), Placement::second(2)]);
        assert!(plan.is_feasible(), "{plan:?}");
        let out = replay(&pr, &plan, &g);
        assert!(out.success);
        assert!((out.evaluation.total - plan.total).abs() < 1e-12);
        assert_eq!(slot_two_links(&plan).into_iter().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(slot_two_inputs(&plan), 2);
    }

    #[test]
    fn broken_slot_two_link_fails_the_task() {
        let planned = graph(&[0.0, 1000.0, 2000.0], &[0.0, 1000.0, 2000.0], 0.3);
        let pr = Problem::new(chain(), planned, vec![1e9; 3]).unwrap();
        let plan = evaluate(&pr, &[Placement::spanning(0), Placement::second(1), Placement::second(2)]);
        // u3 drifts out of range of u2 in slot two
        let realized = graph(&[0.0, 1000.0, 2000.0], &[0.0, 1000.0, 7500.0], 0.3);
        let out = replay(&pr, &plan, &realized);
        assert!(!out.success);
        assert_eq!(out.failed_edge, Some((1, 2)));
        assert!(!out.realized.link[1][2]);
    }
}

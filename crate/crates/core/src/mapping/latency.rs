//! Single forward pass over the task graph that times every subtask.
//!
//! Subtasks run in topological order. A subtask starts once all of its
//! inputs have arrived and its UAV's CPU is free (one subtask at a time per
//! UAV), and computes for `D * delta * xi / rho` seconds. Inputs travel over
//! the two-slot graph: within a slot along the cheapest per-bit route, which
//! must finish before the slot ends; into the second slot through a cache
//! edge that holds data until the boundary.
//!
//! A subtask placed in slot one without a replica must finish inside slot
//! one. With a replica its output is handed over from the second-slot copy,
//! no earlier than the boundary; the wait is the cache delay of that node.
//! Everything must finish within two slots.

use serde::Serialize;

use super::{check_rules, decode_mapping, DecisionMatrix, MappingError, Placement, Problem};
use crate::channel::{Node, Route, Slot};

/// Why a rule-valid schedule cannot execute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Infeasibility {
    /// No route delivers the output of `from` to `to` in time.
    Unreachable { from: usize, to: usize },
    /// `subtask` finishes at `finish`, after its deadline `limit`.
    SlotOverrun { subtask: usize, finish: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubtaskTiming {
    pub subtask: usize,
    pub placement: Placement,
    /// Time at which inputs are complete and the CPU is free [s].
    pub t_accu: f64,
    pub t_comp: f64,
    /// Completion time, `t_accu + t_comp` [s].
    pub finish: f64,
    /// Time at which the output can leave the end node [s].
    pub output_ready: f64,
    /// Cache delay of a replica: slot length minus time used in slot one.
    pub replica_cache_wait: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeTiming {
    pub from: usize,
    pub to: usize,
    pub route: Route,
}

/// Outcome of timing one schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleEvaluation {
    pub placements: Vec<Placement>,
    /// Timed subtasks in topological order; stops at the first failure.
    pub subtasks: Vec<SubtaskTiming>,
    pub edges: Vec<EdgeTiming>,
    /// Per UAV, the part of slot one spent before its last slot-one
    /// subtask delivered output (capped at the slot length) [s].
    pub consumed: Vec<f64>,
    /// Completion time of the terminal subtask; infinite when infeasible.
    pub total: f64,
    pub infeasibility: Option<Infeasibility>,
}

impl ScheduleEvaluation {
    pub fn is_feasible(&self) -> bool {
        self.infeasibility.is_none()
    }

    pub fn timing(&self, subtask: usize) -> Option<&SubtaskTiming> {
        self.subtasks.iter().find(|t| t.subtask == subtask)
    }

    /// Sum of all compute terms on the timed subtasks.
    pub fn compute_seconds(&self) -> f64 {
        self.subtasks.iter().map(|t| t.t_comp).sum()
    }

    pub fn report(&self, problem: &Problem) -> EvaluationReport {
        let id = |i: usize| problem.dag.subtask(i).id.clone();
        let subtasks = self
            .subtasks
            .iter()
            .map(|t| SubtaskRow {
                id: id(t.subtask),
                uav: t.placement.uav + 1,
                start_slot: t.placement.slot.number(),
                replica: t.placement.replica,
                t_accu_s: t.t_accu,
                t_comp_s: t.t_comp,
                t_s: t.finish,
                cache_wait_s: t.replica_cache_wait,
                inbound: self
                    .edges
                    .iter()
                    .filter(|e| e.to == t.subtask)
                    .map(|e| PathRow {
                        from: id(e.from),
                        nodes: e.route.nodes.iter().map(|n| format!("u{}^{}", n.uav + 1, n.slot.number())).collect(),
                        transmission_s: e.route.transmission,
                        cache_wait_s: e.route.cache_wait,
                        arrival_s: e.route.arrival,
                    })
                    .collect(),
            })
            .collect();
        EvaluationReport {
            task: problem.dag.name.clone(),
            feasible: self.is_feasible(),
            total_s: self.is_feasible().then_some(self.total),
            infeasibility: self.infeasibility.map(|r| describe(r, problem)),
            subtasks,
        }
    }
}

fn describe(r: Infeasibility, problem: &Problem) -> String {
    let id = |i: usize| problem.dag.subtask(i).id.clone();
    match r {
        Infeasibility::Unreachable { from, to } => format!("no timely route from {} to {}", id(from), id(to)),
        Infeasibility::SlotOverrun { subtask, finish, limit } => {
            format!("{} finishes at {finish:.6} s, after {limit:.6} s", id(subtask))
        }
    }
}

/// Serializable per-subtask view of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub task: String,
    pub feasible: bool,
    pub total_s: Option<f64>,
    pub infeasibility: Option<String>,
    pub subtasks: Vec<SubtaskRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubtaskRow {
    pub id: String,
    /// 1-based UAV number.
    pub uav: usize,
    pub start_slot: usize,
    pub replica: bool,
    pub t_accu_s: f64,
    pub t_comp_s: f64,
    pub t_s: f64,
    pub cache_wait_s: Option<f64>,
    pub inbound: Vec<PathRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRow {
    pub from: String,
    pub nodes: Vec<String>,
    pub transmission_s: f64,
    pub cache_wait_s: Option<f64>,
    pub arrival_s: f64,
}

/// Times a placement list. Rule checks are the caller's job; see
/// [`compute_latency`] for the checked entry point.
pub fn evaluate(problem: &Problem, placements: &[Placement]) -> ScheduleEvaluation {
    let wteg = &problem.wteg;
    evaluate_with(problem, placements, |_, _, from, ready, to, payload| wteg.route(from, ready, to, payload))
}

/// [`evaluate`] with a caller-supplied router. The router receives the task
/// edge `(from, to)`, the end node of `from`, the time its output is ready,
/// the start node of `to` and the payload in bits.
pub fn evaluate_with<F>(problem: &Problem, placements: &[Placement], mut router: F) -> ScheduleEvaluation
where
    F: FnMut(usize, usize, Node, f64, Node, f64) -> Option<Route>,
{
    let dag = &problem.dag;
    let dt = problem.slot_duration();
    let n = problem.uav_count();
    let mut cpu_free = vec![0.0; n];
    let mut ready = vec![0.0; dag.len()];
    let mut eval = ScheduleEvaluation {
        placements: placements.to_vec(),
        subtasks: Vec::with_capacity(dag.len()),
        edges: Vec::with_capacity(dag.edges().len()),
        consumed: vec![0.0; n],
        total: f64::INFINITY,
        infeasibility: None,
    };
    for &i in dag.topological_order() {
        let p = placements[i];
        let mut t_accu = p.slot.index() as f64 * dt;
        for &j in dag.predecessors(i) {
            let payload = dag.subtask(j).output_bits();
            match router(j, i, placements[j].end(), ready[j], p.start(), payload) {
                Some(route) => {
                    t_accu = t_accu.max(route.arrival);
                    eval.edges.push(EdgeTiming { from: j, to: i, route });
                }
                None => {
                    eval.infeasibility = Some(Infeasibility::Unreachable { from: j, to: i });
                    return eval;
                }
            }
        }
        t_accu = t_accu.max(cpu_free[p.uav]);
        let s = dag.subtask(i);
        let t_comp = s.cycles * s.scaling / problem.capacities[p.uav];
        let finish = t_accu + t_comp;
        let limit = if p.slot == Slot::First && !p.replica { dt } else { 2.0 * dt };
        if finish > limit {
            eval.infeasibility = Some(Infeasibility::SlotOverrun { subtask: i, finish, limit });
            return eval;
        }
        cpu_free[p.uav] = finish;
        let (output_ready, replica_cache_wait) =
            if p.replica { (finish.max(dt), Some(dt - finish.min(dt))) } else { (finish, None) };
        if p.slot == Slot::First {
            let used = &mut eval.consumed[p.uav];
            *used = used.max(finish.min(dt));
        }
        ready[i] = output_ready;
        eval.subtasks.push(SubtaskTiming {
            subtask: i,
            placement: p,
            t_accu,
            t_comp,
            finish,
            output_ready,
            replica_cache_wait,
        });
    }
    let sink = dag.sink();
    eval.total = eval.timing(sink).map_or(f64::INFINITY, |t| t.finish);
    eval
}

/// Decodes `x`, checks the mapping rules and times the schedule.
pub fn compute_latency(x: &DecisionMatrix, problem: &Problem) -> Result<ScheduleEvaluation, MappingError> {
    if x.uav_count() != problem.uav_count() {
        return Err(MappingError::DimensionMismatch {
            rows: x.rows(),
            cols: x.cols(),
            expected_rows: problem.dag.len(),
            expected_cols: 2 * problem.uav_count(),
        });
    }
    let placements = decode_mapping(x, &problem.dag)?;
    Ok(evaluate(problem, &placements))
}

/// Routes taken by every task edge under a rule-valid schedule.
pub fn map_edges(problem: &Problem, placements: &[Placement]) -> Result<Vec<EdgeTiming>, MappingError> {
    check_rules(placements, &problem.dag, problem.uav_count())?;
    let eval = evaluate(problem, placements);
    match eval.infeasibility {
        Some(Infeasibility::Unreachable { from, to }) => Err(MappingError::UnreachablePair {
            from: problem.dag.subtask(from).id.clone(),
            to: problem.dag.subtask(to).id.clone(),
        }),
        _ => Ok(eval.edges),
    }
}

/// Re-times the schedule, turning on the replica of the first slot-one
/// subtask that overruns the slot, until no such overrun remains. Subtasks
/// that would start in slot one with an input leaving from slot two are
/// moved to slot two on the same UAV.
pub fn repair_overruns(problem: &Problem, placements: &mut [Placement]) -> ScheduleEvaluation {
    loop {
        for &i in problem.dag.topological_order() {
            let late = problem.dag.predecessors(i).iter().any(|&j| placements[j].end_slot() == Slot::Second);
            if late && placements[i].slot == Slot::First {
                placements[i] = Placement::second(placements[i].uav);
            }
        }
        let eval = evaluate(problem, placements);
        match eval.infeasibility {
            Some(Infeasibility::SlotOverrun { subtask, .. })
                if !placements[subtask].replica && placements[subtask].slot == Slot::First =>
            {
                placements[subtask].replica = true;
            }
            _ => return eval,
        }
    }
}

/// Turns a UAV choice per subtask into placements: each subtask starts in
/// the latest slot its inputs leave from, and subtasks that overrun slot one
/// get a replica (which may push their successors into slot two).
pub fn complete_placements(problem: &Problem, uavs: &[usize]) -> (Vec<Placement>, ScheduleEvaluation) {
    let dag = &problem.dag;
    let mut replica = vec![false; dag.len()];
    loop {
        let mut placements = vec![Placement::first(0); dag.len()];
        for &i in dag.topological_order() {
            let slot = dag.predecessors(i).iter().map(|&j| placements[j].end_slot()).max().unwrap_or(Slot::First);
            placements[i] = Placement { uav: uavs[i], slot, replica: replica[i] && slot == Slot::First };
        }
        let eval = evaluate(problem, &placements);
        match eval.infeasibility {
            Some(Infeasibility::SlotOverrun { subtask, .. })
                if !placements[subtask].replica && placements[subtask].slot == Slot::First =>
            {
                replica[subtask] = true;
            }
            _ => return (placements, eval),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{assemble_two_step, build_slot_topology, ChannelParams};
    use crate::dag::{Subtask, TaskDag, DEFAULT_COMPLEXITY, DEFAULT_SCALING, MEGABIT};
    use nalgebra::Vector3;

    fn chain2(source_bits: f64) -> TaskDag {
        let subs = vec![
            Subtask::new("w1", DEFAULT_SCALING, DEFAULT_COMPLEXITY),
            Subtask::new("w2", DEFAULT_SCALING, DEFAULT_COMPLEXITY),
        ];
        TaskDag::new("chain", subs, &[("w1", "w2")]).unwrap().propagate_data_sizes(source_bits).unwrap()
    }

    fn problem(dag: TaskDag, xs: &[f64], dt: f64, capacity: f64) -> Problem {
        let pos: Vec<_> = xs.iter().map(|&x| Vector3::new(x, 0.0, 0.0)).collect();
        let p = ChannelParams::default();
        let t1 = build_slot_topology(&pos, &p, Slot::First).unwrap();
        let t2 = build_slot_topology(&pos, &p, Slot::Second).unwrap();
        let wteg = assemble_two_step(&t1, &t2, &vec![0.0; xs.len()], dt).unwrap();
        Problem::new(dag, wteg, vec![capacity; xs.len()]).unwrap()
    }

    #[test]
    fn link_free_chain_arithmetic() {
        // The anchors put source and sink on different UAVs, so the only
        // link term is the single co-located hop between them.
        let pr = problem(chain2(MEGABIT), &[0.0, 0.0], 4.0, 1e9);
        let e = evaluate(&pr, &[Placement::first(0), Placement::first(1)]);
        let t1: f64 = 1e6 * 237.5 * 0.8 / 1e9;
        let t2: f64 = 0.8e6 * 237.5 * 0.8 / 1e9;
        assert!((t1 - 0.19).abs() < 1e-15 && (t1 + t2 - 0.342).abs() < 1e-12);
        let hop = e.edges[0].route.transmission;
        assert!(hop > 0.0);
        assert!((e.total - (0.342 + hop)).abs() < 1e-12, "{}", e.total);
        for t in &e.subtasks {
            assert_eq!(t.finish - t.t_accu, t.t_comp);
        }
    }

    #[test]
    fn forced_replica_adds_the_cache_delay() {
        let dt = 4.0;
        let pr = problem(chain2(MEGABIT), &[0.0, 800.0], dt, 1e9);
        let plain = evaluate(&pr, &[Placement::first(0), Placement::first(1)]);
        let forced = evaluate(&pr, &[Placement::spanning(0), Placement::second(1)]);
        let f1 = plain.timing(0).unwrap().finish;
        let cache = forced.timing(0).unwrap().replica_cache_wait.unwrap();
        assert!((cache - (dt - f1)).abs() < 1e-12);
        assert!((forced.total - plain.total - cache).abs() < 1e-12);
        assert_eq!(forced.consumed[0], f1);
    }

    #[test]
    fn overruns_and_unreachable_edges() {
        // The source needs 0.19 s, the whole chain about 0.35 s.
        let dt = 0.18;
        let pr = problem(chain2(MEGABIT), &[0.0, 800.0], dt, 1e9);
        let e = evaluate(&pr, &[Placement::first(0), Placement::first(1)]);
        assert!(matches!(e.infeasibility, Some(Infeasibility::SlotOverrun { subtask: 0, .. })));
        assert_eq!(e.total, f64::INFINITY);
        let e = evaluate(&pr, &[Placement::spanning(0), Placement::first(1)]);
        assert_eq!(e.infeasibility, Some(Infeasibility::Unreachable { from: 0, to: 1 }));
        let mut ps = [Placement::first(0), Placement::second(1)];
        let e = repair_overruns(&pr, &mut ps);
        assert!(e.is_feasible(), "{e:?}");
        assert!(ps[0].replica);
        // the successor of a replica cannot stay in slot one
        let mut ps = [Placement::first(0), Placement::first(1)];
        assert!(repair_overruns(&pr, &mut ps).is_feasible());
        assert_eq!(ps, [Placement::spanning(0), Placement::second(1)]);

        let far = problem(chain2(MEGABIT), &[0.0, 7000.0], 4.0, 1e9);
        let e = evaluate(&far, &[Placement::first(0), Placement::first(1)]);
        assert_eq!(e.infeasibility, Some(Infeasibility::Unreachable { from: 0, to: 1 }));
        assert!(matches!(
            map_edges(&far, &[Placement::first(0), Placement::first(1)]),
            Err(MappingError::UnreachablePair { .. })
        ));
    }

    #[test]
    fn complete_placements_pushes_successors_into_slot_two() {
        let pr = problem(chain2(MEGABIT), &[0.0, 800.0], 0.18, 1e9);
        let (ps, e) = complete_placements(&pr, &[0, 1]);
        assert_eq!(ps, vec![Placement::spanning(0), Placement::second(1)]);
        assert!(e.is_feasible());
    }

    #[test]
    fn zero_data_gives_zero_latency() {
        let pr = problem(chain2(0.0), &[0.0, 800.0], 4.0, 1e9);
        let e = evaluate(&pr, &[Placement::first(0), Placement::first(1)]);
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn report_matches_evaluation() {
        let pr = problem(chain2(MEGABIT), &[0.0, 800.0], 4.0, 1e9);
        let x = DecisionMatrix::from_placements(&[Placement::first(0), Placement::first(1)], 2);
        let e = compute_latency(&x, &pr).unwrap();
        let r = e.report(&pr);
        assert_eq!(r.total_s, Some(e.total));
        assert_eq!(r.subtasks[1].inbound[0].nodes, vec!["u1^1", "u2^1"]);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["subtasks"][1]["uav"], 2);
    }
}

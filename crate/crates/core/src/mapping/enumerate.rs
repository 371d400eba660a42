//! Exhaustive search over all rule-valid schedules of small instances.

use serde::Serialize;

use super::latency::evaluate;
use super::{DecisionMatrix, MappingError, Placement, Problem};
use crate::dag::TaskDag;

/// Size limits for [`enumerate_feasible`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBounds {
    pub max_subtasks: usize,
    pub max_uavs: usize,
}

impl Default for EnumerationBounds {
    fn default() -> Self {
        EnumerationBounds { max_subtasks: 5, max_uavs: 4 }
    }
}

/// Every placement the mapping rules allow for subtask `i`: the source on
/// UAV 1 in slot one, the sink on UAV `uavs`, anything else anywhere. Within
/// a UAV the order is slot one, slot one with replica, slot two.
pub fn eligible_placements(dag: &TaskDag, i: usize, uavs: usize) -> Vec<Placement> {
    let all = |u| [Placement::first(u), Placement::spanning(u), Placement::second(u)];
    if i == dag.source() {
        vec![Placement::first(0), Placement::spanning(0)]
    } else if i == dag.sink() {
        all(uavs - 1).to_vec()
    } else {
        (0..uavs).flat_map(all).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumeratedSchedule {
    pub matrix: DecisionMatrix,
    pub placements: Vec<Placement>,
    /// Task latency; infinite for schedules that cannot execute.
    pub total: f64,
}

/// Evaluates every rule-valid decision matrix, in mixed-radix order with
/// the last subtask varying fastest.
pub fn enumerate_feasible(
    problem: &Problem,
    bounds: EnumerationBounds,
) -> Result<Vec<EnumeratedSchedule>, MappingError> {
    let dag = &problem.dag;
    let n = problem.uav_count();
    if dag.len() > bounds.max_subtasks || n > bounds.max_uavs {
        return Err(MappingError::EnumerationBound {
            subtasks: dag.len(),
            uavs: n,
            max_subtasks: bounds.max_subtasks,
            max_uavs: bounds.max_uavs,
        });
    }
    let options: Vec<Vec<Placement>> = (0..dag.len()).map(|i| eligible_placements(dag, i, n)).collect();
    let mut digits = vec![0usize; dag.len()];
    let mut out = Vec::with_capacity(options.iter().map(Vec::len).product());
    loop {
        let placements: Vec<Placement> = digits.iter().zip(&options).map(|(&d, o)| o[d]).collect();
        let total = evaluate(problem, &placements).total;
        out.push(EnumeratedSchedule { matrix: DecisionMatrix::from_placements(&placements, n), placements, total });
        let mut k = digits.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < options[k].len() {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// Lowest-latency schedule; the earliest one in enumeration order on ties.
/// `None` when nothing can execute.
pub fn enumerated_optimum(all: &[EnumeratedSchedule]) -> Option<&EnumeratedSchedule> {
    all.iter().filter(|s| s.total.is_finite()).fold(None, |best: Option<&EnumeratedSchedule>, s| match best {
        Some(b) if b.total <= s.total => Some(b),
        _ => Some(s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{assemble_two_step, build_slot_topology, ChannelParams, Slot};
    use crate::dag::{Subtask, MEGABIT};
    use crate::mapping::decode_mapping;
    use nalgebra::Vector3;

    fn problem(l: usize, n: usize) -> Problem {
        let ids: Vec<String> = (1..=l).map(|i| format!("w{i}")).collect();
        let subs = ids.iter().map(|id| Subtask::new(id.clone(), 0.8, 237.5)).collect();
        let edges: Vec<(&str, &str)> = ids.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
        let dag = TaskDag::new("chain", subs, &edges).unwrap().propagate_data_sizes(MEGABIT).unwrap();
        let pos: Vec<_> = (0..n).map(|u| Vector3::new(500.0 * u as f64, 0.0, 0.0)).collect();
        let p = ChannelParams::default();
        let t1 = build_slot_topology(&pos, &p, Slot::First).unwrap();
        let t2 = build_slot_topology(&pos, &p, Slot::Second).unwrap();
        let wteg = assemble_two_step(&t1, &t2, &vec![0.0; n], 1.0).unwrap();
        Problem::new(dag, wteg, vec![1e9; n]).unwrap()
    }

    #[test]
    fn two_subtasks_two_uavs_has_six_schedules() {
        // Source: replica or not. Sink: slot one, slot one with replica,
        // or slot two.
        let all = enumerate_feasible(&problem(2, 2), EnumerationBounds::default()).unwrap();
        assert_eq!(all.len(), 2 * 3);
    }

    #[test]
    fn count_matches_closed_form_and_every_matrix_decodes() {
        for (l, n) in [(3, 2), (4, 3), (5, 2)] {
            let pr = problem(l, n);
            let all = enumerate_feasible(&pr, EnumerationBounds::default()).unwrap();
            assert_eq!(all.len(), 6 * (3 * n).pow(l as u32 - 2));
            for s in &all {
                assert_eq!(decode_mapping(&s.matrix, &pr.dag).unwrap(), s.placements);
            }
            let best = enumerated_optimum(&all).unwrap();
            assert!(all.iter().all(|s| s.total >= best.total));
        }
    }

    #[test]
    fn bounds_are_enforced() {
        let err = enumerate_feasible(&problem(6, 2), EnumerationBounds::default()).unwrap_err();
        assert!(matches!(err, MappingError::EnumerationBound { subtasks: 6, .. }));
    }
}

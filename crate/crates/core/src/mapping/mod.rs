//! Schedule encoding and end-to-end latency evaluation.
//!
//! A schedule assigns every subtask to one UAV and a start slot, optionally
//! with a replica in the second slot on the same UAV (`replica = true`) when
//! its work or its output spills over the slot boundary. The binary form is
//! a [`DecisionMatrix`] with one row per subtask and `2N` columns, the first
//! `N` for slot one and the last `N` for slot two.

mod enumerate;
mod latency;

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::channel::{Node, Slot, WtegGraph};
use crate::dag::TaskDag;

pub use enumerate::{
    eligible_placements, enumerate_feasible, enumerated_optimum, EnumeratedSchedule, EnumerationBounds,
};
pub use latency::{
    complete_placements, compute_latency, evaluate, evaluate_with, map_edges, repair_overruns, EdgeTiming,
    EvaluationReport, Infeasibility, PathRow, ScheduleEvaluation, SubtaskRow, SubtaskTiming,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// The starting subtask must begin on the task initiator in slot one.
    Start,
    /// The terminal subtask must run on the result receiver.
    Terminal,
}

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("decision matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    DimensionMismatch { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("row of subtask `{subtask}` selects {sum} nodes; one or two are allowed")]
    RowSumInvalid { subtask: String, sum: usize },
    #[error("subtask `{subtask}` selects two nodes that are not one UAV in consecutive slots")]
    ReplicaNotSameUav { subtask: String },
    #[error("a replica of a second-slot placement on UAV {uav} would leave the two-slot horizon")]
    HorizonExceeded { uav: usize },
    #[error("subtask `{subtask}` breaks the {rule:?} anchor")]
    RuleViolation { subtask: String, rule: Anchor },
    #[error("UAV index {uav} is out of range for a fleet of {n}")]
    UavOutOfRange { uav: usize, n: usize },
    #[error("expected {expected} UAV capacities, got {got}")]
    CapacityCount { expected: usize, got: usize },
    #[error("capacity of UAV {0} must be positive and finite")]
    InvalidCapacity(usize),
    #[error("the task graph must be validated first")]
    DagNotValidated,
    #[error("no route from `{from}` to `{to}` within the two slots")]
    UnreachablePair { from: String, to: String },
    #[error("enumeration of {subtasks} subtasks on {uavs} UAVs exceeds the bound ({max_subtasks} subtasks, {max_uavs} UAVs)")]
    EnumerationBound { subtasks: usize, uavs: usize, max_subtasks: usize, max_uavs: usize },
}

/// Where one subtask runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Placement {
    pub uav: usize,
    pub slot: Slot,
    /// Whether the subtask also occupies the same UAV in the next slot.
    pub replica: bool,
}

impl Placement {
    pub fn new(uav: usize, slot: Slot, replica: bool) -> Result<Self, MappingError> {
        if replica && slot == Slot::Second {
            return Err(MappingError::HorizonExceeded { uav });
        }
        Ok(Placement { uav, slot, replica })
    }

    pub fn first(uav: usize) -> Self {
        Placement { uav, slot: Slot::First, replica: false }
    }

    pub fn spanning(uav: usize) -> Self {
        Placement { uav, slot: Slot::First, replica: true }
    }

    pub fn second(uav: usize) -> Self {
        Placement { uav, slot: Slot::Second, replica: false }
    }

    /// Node the subtask's input is delivered to.
    pub fn start(&self) -> Node {
        Node::new(self.uav, self.slot)
    }

    /// Node the subtask's output leaves from.
    pub fn end(&self) -> Node {
        if self.replica {
            Node::new(self.uav, Slot::Second)
        } else {
            self.start()
        }
    }

    pub fn end_slot(&self) -> Slot {
        self.end().slot
    }
}

/// Binary subtask-by-node assignment matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecisionMatrix {
    rows: usize,
    uavs: usize,
    bits: Vec<bool>,
}

impl DecisionMatrix {
    pub fn zeros(rows: usize, uavs: usize) -> Self {
        DecisionMatrix { rows, uavs, bits: vec![false; rows * 2 * uavs] }
    }

    /// Builds a matrix from a flat row-major bit vector.
    ///
    /// # Panics
    /// If `bits.len() != rows * 2 * uavs`.
    pub fn from_bits(rows: usize, uavs: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), rows * 2 * uavs, "bit vector length");
        DecisionMatrix { rows, uavs, bits }
    }

    pub fn from_placements(placements: &[Placement], uavs: usize) -> Self {
        let mut x = DecisionMatrix::zeros(placements.len(), uavs);
        for (i, p) in placements.iter().enumerate() {
            x.set(i, p.start(), true);
            x.set(i, p.end(), true);
        }
        x
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn uav_count(&self) -> usize {
        self.uavs
    }

    pub fn cols(&self) -> usize {
        2 * self.uavs
    }

    pub fn get(&self, row: usize, node: Node) -> bool {
        self.bits[row * self.cols() + node.index(self.uavs)]
    }

    pub fn set(&mut self, row: usize, node: Node, value: bool) {
        let cols = self.cols();
        self.bits[row * cols + node.index(self.uavs)] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        let c = self.cols();
        &self.bits[row * c..(row + 1) * c]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl fmt::Display for DecisionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let line: String = self.row(r).iter().map(|&b| if b { '1' } else { '0' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl Serialize for DecisionMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<u8>> = (0..self.rows).map(|r| self.row(r).iter().map(|&b| b as u8).collect()).collect();
        rows.serialize(s)
    }
}

/// Reads a placement per subtask from `x` and checks the mapping rules.
pub fn decode_mapping(x: &DecisionMatrix, dag: &TaskDag) -> Result<Vec<Placement>, MappingError> {
    if !dag.is_validated() {
        return Err(MappingError::DagNotValidated);
    }
    let n = x.uav_count();
    if x.rows() != dag.len() || n == 0 {
        return Err(MappingError::DimensionMismatch {
            rows: x.rows(),
            cols: x.cols(),
            expected_rows: dag.len(),
            expected_cols: x.cols().max(2),
        });
    }
    let mut out = Vec::with_capacity(dag.len());
    for i in 0..dag.len() {
        let id = || dag.subtask(i).id.clone();
        let set: Vec<Node> =
            x.row(i).iter().enumerate().filter(|(_, &b)| b).map(|(c, _)| Node::from_index(c, n)).collect();
        let p = match set.as_slice() {
            [only] => Placement::new(only.uav, only.slot, false)?,
            [a, b] if a.uav == b.uav => Placement::new(a.uav, Slot::First, true)?,
            [_, _] => return Err(MappingError::ReplicaNotSameUav { subtask: id() }),
            _ => return Err(MappingError::RowSumInvalid { subtask: id(), sum: set.len() }),
        };
        out.push(p);
    }
    check_rules(&out, dag, n)?;
    Ok(out)
}

/// Checks anchors and index ranges of a placement list.
pub fn check_rules(placements: &[Placement], dag: &TaskDag, uavs: usize) -> Result<(), MappingError> {
    if placements.len() != dag.len() {
        return Err(MappingError::DimensionMismatch {
            rows: placements.len(),
            cols: 2 * uavs,
            expected_rows: dag.len(),
            expected_cols: 2 * uavs,
        });
    }
    for (i, p) in placements.iter().enumerate() {
        if p.uav >= uavs {
            return Err(MappingError::UavOutOfRange { uav: p.uav, n: uavs });
        }
        if p.replica && p.slot == Slot::Second {
            return Err(MappingError::HorizonExceeded { uav: p.uav });
        }
        let violation = |rule| MappingError::RuleViolation { subtask: dag.subtask(i).id.clone(), rule };
        if i == dag.source() && (p.uav != 0 || p.slot != Slot::First) {
            return Err(violation(Anchor::Start));
        }
        if i == dag.sink() && p.uav != uavs - 1 {
            return Err(violation(Anchor::Terminal));
        }
    }
    Ok(())
}

/// A task, the two-slot network it runs on and each UAV's CPU speed.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dag: TaskDag,
    pub wteg: WtegGraph,
    /// CPU capacity of every UAV [cycles/s].
    pub capacities: Vec<f64>,
}

impl Problem {
    /// `dag` should already carry propagated data sizes.
    pub fn new(dag: TaskDag, wteg: WtegGraph, capacities: Vec<f64>) -> Result<Self, MappingError> {
        if !dag.is_validated() {
            return Err(MappingError::DagNotValidated);
        }
        if capacities.len() != wteg.uav_count() {
            return Err(MappingError::CapacityCount { expected: wteg.uav_count(), got: capacities.len() });
        }
        if let Some(u) = capacities.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(MappingError::InvalidCapacity(u));
        }
        Ok(Problem { dag, wteg, capacities })
    }

    pub fn uav_count(&self) -> usize {
        self.wteg.uav_count()
    }

    pub fn slot_duration(&self) -> f64 {
        self.wteg.slot_duration()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{Subtask, DEFAULT_COMPLEXITY, DEFAULT_SCALING};

    fn chain(l: usize) -> TaskDag {
        let ids: Vec<String> = (1..=l).map(|i| format!("w{i}")).collect();
        let subs = ids.iter().map(|id| Subtask::new(id.clone(), DEFAULT_SCALING, DEFAULT_COMPLEXITY)).collect();
        let edges: Vec<(&str, &str)> = ids.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
        TaskDag::new("chain", subs, &edges).unwrap()
    }

    #[test]
    fn decodes_single_and_replica_rows() {
        let dag = chain(3);
        let n = 5;
        let placements = [Placement::first(0), Placement::spanning(2), Placement::second(4)];
        let x = DecisionMatrix::from_placements(&placements, n);
        assert_eq!(x.row(1).iter().filter(|&&b| b).count(), 2);
        assert_eq!(decode_mapping(&x, &dag).unwrap(), placements);
    }

    #[test]
    fn anchors_are_enforced() {
        let dag = chain(2);
        let x = DecisionMatrix::from_placements(&[Placement::first(0), Placement::first(4)], 5);
        assert_eq!(decode_mapping(&x, &dag).unwrap()[1].uav, 4);
        let x = DecisionMatrix::from_placements(&[Placement::first(0), Placement::first(3)], 5);
        assert!(matches!(decode_mapping(&x, &dag), Err(MappingError::RuleViolation { rule: Anchor::Terminal, .. })));
        let x = DecisionMatrix::from_placements(&[Placement::second(0), Placement::first(4)], 5);
        assert!(matches!(decode_mapping(&x, &dag), Err(MappingError::RuleViolation { rule: Anchor::Start, .. })));
        let x = DecisionMatrix::from_placements(&[Placement::spanning(0), Placement::second(4)], 5);
        assert!(decode_mapping(&x, &dag).is_ok());
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let dag = chain(2);
        let mut x = DecisionMatrix::from_placements(&[Placement::first(0), Placement::first(2)], 3);
        x.set(1, Node::new(1, Slot::Second), true);
        assert!(matches!(decode_mapping(&x, &dag), Err(MappingError::ReplicaNotSameUav { .. })));
        let mut x = DecisionMatrix::from_placements(&[Placement::first(0), Placement::first(2)], 3);
        x.set(1, Node::new(1, Slot::First), true);
        assert!(matches!(decode_mapping(&x, &dag), Err(MappingError::ReplicaNotSameUav { .. })));
        let mut x = DecisionMatrix::from_placements(&[Placement::first(0), Placement::spanning(2)], 3);
        x.set(1, Node::new(0, Slot::First), true);
        assert!(matches!(decode_mapping(&x, &dag), Err(MappingError::RowSumInvalid { sum: 3, .. })));
        let x = DecisionMatrix::zeros(2, 3);
        assert!(matches!(decode_mapping(&x, &dag), Err(MappingError::RowSumInvalid { sum: 0, .. })));
        let x = DecisionMatrix::zeros(3, 3);
        assert!(matches!(decode_mapping(&x, &dag), Err(MappingError::DimensionMismatch { .. })));
    }

    #[test]
    fn second_slot_replica_leaves_the_horizon() {
        assert_eq!(Placement::new(1, Slot::Second, true), Err(MappingError::HorizonExceeded { uav: 1 }));
        assert_eq!(Placement::spanning(1).end(), Node::new(1, Slot::Second));
    }

    #[test]
    fn matrix_text_form() {
        let x = DecisionMatrix::from_placements(&[Placement::first(0), Placement::spanning(1)], 2);
        assert_eq!(x.to_string(), "1000\n0101\n");
        assert_eq!(serde_json::to_string(&x).unwrap(), "[[1,0,0,0],[0,1,0,1]]");
    }
}

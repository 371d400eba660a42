//! Task model: a DAG of subtasks with data sizes, CPU demand and output
//! scaling, plus structural validation and data-size propagation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bits per megabit.
pub const MEGABIT: f64 = 1e6;
/// Default computation complexity [cycles/bit].
pub const DEFAULT_COMPLEXITY: f64 = 1900.0 / 8.0;
/// Default output-to-input data scaling factor.
pub const DEFAULT_SCALING: f64 = 0.8;

#[derive(Debug, Error)]
pub enum DagError {
    #[error("the task graph has a cycle through `{0}`")]
    CycleDetected(String),
    #[error("more than one subtask without predecessors: {0:?}")]
    MultipleSources(Vec<String>),
    #[error("more than one subtask without successors: {0:?}")]
    MultipleSinks(Vec<String>),
    #[error("subtask `{0}` is not connected to the rest of the task")]
    OrphanNode(String),
    #[error("edge references unknown subtask `{0}`")]
    UnknownSubtask(String),
    #[error("subtask id `{0}` is used twice")]
    DuplicateSubtask(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("a task needs at least two subtasks, got {0}")]
    TooFewSubtasks(usize),
    #[error("subtask `{id}`: {reason}")]
    InvalidSubtask { id: String, reason: &'static str },
    #[error("data sizes can only be propagated on a validated task graph")]
    NotValidated,
    #[error("source data size must be non-negative and finite, got {0}")]
    InvalidSourceSize(f64),
    #[error("cannot read task file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse task file: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subtask {
    pub id: String,
    /// Input data size [bits]; zero until sizes are propagated (or when the
    /// source itself carries no data).
    pub data_bits: f64,
    /// Required CPU cycles, `complexity * data_bits`.
    pub cycles: f64,
    /// Output-to-input data ratio, in (0, 1].
    pub scaling: f64,
    /// Computation complexity [cycles/bit].
    pub complexity: f64,
}

impl Subtask {
    pub fn new(id: impl Into<String>, scaling: f64, complexity: f64) -> Self {
        Subtask { id: id.into(), data_bits: 0.0, cycles: 0.0, scaling, complexity }
    }

    /// Size of the data this subtask hands to each successor [bits].
    pub fn output_bits(&self) -> f64 {
        self.data_bits * self.scaling
    }

    fn check(&self) -> Result<(), DagError> {
        let bad = |reason| Err(DagError::InvalidSubtask { id: self.id.clone(), reason });
        if !(self.scaling > 0.0 && self.scaling <= 1.0) {
            return bad("scaling factor must lie in (0, 1]");
        }
        if !(self.complexity >= 0.0 && self.complexity.is_finite()) {
            return bad("complexity must be non-negative and finite");
        }
        Ok(())
    }
}

/// Directed acyclic task graph with a single source and a single sink.
///
/// Subtasks are addressed by their index in `subtasks`. The structure is
/// checked by [`TaskDag::validate`]; graphs built through [`TaskDag::new`]
/// or loaded from a file are validated already.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskDag {
    pub name: String,
    subtasks: Vec<Subtask>,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    preds: Vec<Vec<usize>>,
    #[serde(skip)]
    succs: Vec<Vec<usize>>,
    #[serde(skip)]
    order: Option<Vec<usize>>,
}

impl TaskDag {
    /// Builds an unvalidated graph from subtasks and `(from, to)` id pairs.
    pub fn from_parts(
        name: impl Into<String>,
        subtasks: Vec<Subtask>,
        edges: &[(&str, &str)],
    ) -> Result<Self, DagError> {
        let mut index = HashMap::new();
        for (i, s) in subtasks.iter().enumerate() {
            if index.insert(s.id.as_str(), i).is_some() {
                return Err(DagError::DuplicateSubtask(s.id.clone()));
            }
        }
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| DagError::UnknownSubtask(id.to_string()));
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let e = (lookup(a)?, lookup(b)?);
            if pairs.contains(&e) {
                return Err(DagError::DuplicateEdge(a.to_string(), b.to_string()));
            }
            pairs.push(e);
        }
        Ok(Self::from_indices(name, subtasks, pairs))
    }

    /// Builds an unvalidated graph from index pairs. Indices must be in range.
    pub fn from_indices(name: impl Into<String>, subtasks: Vec<Subtask>, edges: Vec<(usize, usize)>) -> Self {
        let n = subtasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in &edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} subtasks");
            succs[a].push(b);
            preds[b].push(a);
        }
        TaskDag { name: name.into(), subtasks, edges, preds, succs, order: None }
    }

    /// Builds and validates a graph.
    pub fn new(name: impl Into<String>, subtasks: Vec<Subtask>, edges: &[(&str, &str)]) -> Result<Self, DagError> {
        let mut dag = Self::from_parts(name, subtasks, edges)?;
        dag.validate()?;
        Ok(dag)
    }

    /// Checks acyclicity, a unique source and sink and that every subtask is
    /// connected, then caches a topological order.
    pub fn validate(&mut self) -> Result<(), DagError> {
        let n = self.subtasks.len();
        if n < 2 {
            return Err(DagError::TooFewSubtasks(n));
        }
        for s in &self.subtasks {
            s.check()?;
        }
        let order = self.kahn_order();
        if order.len() < n {
            let stuck = (0..n).find(|i| !order.contains(i)).unwrap_or(0);
            return Err(DagError::CycleDetected(self.subtasks[stuck].id.clone()));
        }
        if let Some(i) = (0..n).find(|&i| self.preds[i].is_empty() && self.succs[i].is_empty()) {
            return Err(DagError::OrphanNode(self.subtasks[i].id.clone()));
        }
        let ids = |f: &dyn Fn(usize) -> bool| -> Vec<String> {
            (0..n).filter(|&i| f(i)).map(|i| self.subtasks[i].id.clone()).collect()
        };
        let sources = ids(&|i| self.preds[i].is_empty());
        if sources.len() > 1 {
            return Err(DagError::MultipleSources(sources));
        }
        let sinks = ids(&|i| self.succs[i].is_empty());
        if sinks.len() > 1 {
            return Err(DagError::MultipleSinks(sinks));
        }
        self.order = Some(order);
        Ok(())
    }

    /// Kahn's algorithm, always releasing the lowest ready index first.
    fn kahn_order(&self) -> Vec<usize> {
        let n = self.subtasks.len();
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &j in &self.succs[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
        order
    }

    pub fn is_validated(&self) -> bool {
        self.order.is_some()
    }

    /// Topological order with ties broken by subtask index.
    ///
    /// # Panics
    /// If the graph has not been validated.
    pub fn topological_order(&self) -> &[usize] {
        self.order.as_deref().expect("task graph must be validated before use")
    }

    /// Sets the source input size and propagates sizes downstream: each
    /// subtask receives the scaled outputs of all its predecessors.
    pub fn propagate_data_sizes(&self, source_bits: f64) -> Result<TaskDag, DagError> {
        let order = self.order.as_ref().ok_or(DagError::NotValidated)?;
        if !(source_bits >= 0.0 && source_bits.is_finite()) {
            return Err(DagError::InvalidSourceSize(source_bits));
        }
        let mut out = self.clone();
        for &i in order {
            let d = if out.preds[i].is_empty() {
                source_bits
            } else {
                out.preds[i].iter().map(|&j| out.subtasks[j].output_bits()).sum()
            };
            let s = &mut out.subtasks[i];
            s.data_bits = d;
            s.cycles = s.complexity * d;
        }
        Ok(out)
    }

    /// Copy with every subtask's complexity replaced (sizes are kept and
    /// cycle counts recomputed).
    pub fn with_uniform_complexity(&self, complexity: f64) -> TaskDag {
        let mut out = self.clone();
        for s in &mut out.subtasks {
            s.complexity = complexity;
            s.cycles = complexity * s.data_bits;
        }
        out
    }

    /// Copy with every subtask's complexity multiplied by `factor`.
    pub fn scale_complexity(&self, factor: f64) -> TaskDag {
        let mut out = self.clone();
        for s in &mut out.subtasks {
            s.complexity *= factor;
            s.cycles = s.complexity * s.data_bits;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn subtasks(&self) -> &[Subtask] {
        &self.subtasks
    }

    pub fn subtask(&self, i: usize) -> &Subtask {
        &self.subtasks[i]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    /// The starting subtask.
    pub fn source(&self) -> usize {
        self.topological_order()[0]
    }

    /// The terminal subtask.
    pub fn sink(&self) -> usize {
        *self.topological_order().last().expect("validated graphs are non-empty")
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.subtasks.iter().position(|s| s.id == id)
    }

    /// Parses and validates a task file.
    pub fn from_toml_str(text: &str) -> Result<TaskDag, DagError> {
        let file: DagFile = toml::from_str(text)?;
        let subtasks = file
            .subtasks
            .iter()
            .map(|s| {
                Subtask::new(
                    s.id.clone(),
                    s.scaling.unwrap_or(file.default_scaling),
                    s.complexity_cycles_per_bit.unwrap_or(file.default_complexity_cycles_per_bit),
                )
            })
            .collect();
        let edges: Vec<(&str, &str)> = file.edges.iter().map(|[a, b]| (a.as_str(), b.as_str())).collect();
        TaskDag::new(file.name, subtasks, &edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TaskDag, DagError> {
        TaskDag::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// On-disk task description.
///
/// ```toml
/// name = "chain"
/// edges = [["a", "b"]]
///
/// [[subtasks]]
/// id = "a"
///
/// [[subtasks]]
/// id = "b"
/// scaling = 0.5
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DagFile {
    name: String,
    #[serde(default = "default_scaling")]
    default_scaling: f64,
    #[serde(default = "default_complexity")]
    default_complexity_cycles_per_bit: f64,
    #[serde(default)]
    edges: Vec<[String; 2]>,
    subtasks: Vec<SubtaskEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubtaskEntry {
    id: String,
    scaling: Option<f64>,
    complexity_cycles_per_bit: Option<f64>,
}

fn default_scaling() -> f64 {
    DEFAULT_SCALING
}

fn default_complexity() -> f64 {
    DEFAULT_COMPLEXITY
}

/// The shipped six-subtask task.
pub const PHI1_TOML: &str = include_str!("../data/dags/phi1.toml");
/// The shipped nine-subtask task.
pub const PHI2_TOML: &str = include_str!("../data/dags/phi2.toml");

/// Looks up a shipped task by name (`phi1` or `phi2`).
pub fn builtin(name: &str) -> Option<TaskDag> {
    let text = match name {
        "phi1" => PHI1_TOML,
        "phi2" => PHI2_TOML,
        _ => return None,
    };
    Some(TaskDag::from_toml_str(text).expect("shipped task files are valid"))
}

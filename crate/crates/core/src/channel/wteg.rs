//! Two-step weighted time-expanded graph.
//!
//! Nodes are `(uav, slot)` copies. Within a slot, edges carry per-bit
//! delays. Between slots, each UAV has one virtual cache edge from its
//! first-slot copy to its second-slot copy, weighted by the time left in the
//! first slot. Nothing leads from the second slot back to the first.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ChannelError, SlotTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    First,
    Second,
}

impl Slot {
    pub const ALL: [Slot; 2] = [Slot::First, Slot::Second];

    /// 0 for the first slot, 1 for the second.
    pub fn index(self) -> usize {
        match self {
            Slot::First => 0,
            Slot::Second => 1,
        }
    }

    /// 1-based slot number as used in reports.
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_index(i: usize) -> Option<Slot> {
        match i {
            0 => Some(Slot::First),
            1 => Some(Slot::Second),
            _ => None,
        }
    }
}

/// A `(uav, slot)` replica in the time-expanded graph. `uav` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub uav: usize,
    pub slot: Slot,
}

impl Node {
    pub fn new(uav: usize, slot: Slot) -> Self {
        Node { uav, slot }
    }

    /// Row/column of this node in the assembled `2N x 2N` matrix.
    pub fn index(&self, n: usize) -> usize {
        self.slot.index() * n + self.uav
    }

    pub fn from_index(i: usize, n: usize) -> Node {
        Node { uav: i % n, slot: Slot::from_index(i / n).expect("node index out of range") }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}^{}", self.uav + 1, self.slot.number())
    }
}

/// A finite entry of the assembled matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Edge {
    /// Transmission edge, seconds per bit.
    PerBit(f64),
    /// Virtual cache edge, fixed seconds.
    Cache(f64),
}

pub fn cache_delay(slot_duration: f64, consumed: f64) -> Result<f64, ChannelError> {
    if !(consumed >= 0.0 && consumed <= slot_duration) {
        return Err(ChannelError::InfeasibleConsumption { consumed, slot: slot_duration });
    }
    Ok(slot_duration - consumed)
}

/// Cheapest per-bit route between two UAVs inside one slot.
#[derive(Debug, Clone, PartialEq)]
struct HopPath {
    per_bit: f64,
    uavs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct WtegGraph {
    n: usize,
    slot_duration: f64,
    slots: [SlotTopology; 2],
    consumed: Vec<f64>,
    /// `hops[slot][i][j]`: minimum per-bit route, lexicographic tie-break.
    hops: [Vec<Vec<Option<HopPath>>>; 2],
}

pub fn assemble_two_step(
    first: &SlotTopology,
    second: &SlotTopology,
    consumed: &[f64],
    slot_duration: f64,
) -> Result<WtegGraph, ChannelError> {
    let n = first.len();
    if second.len() != n {
        return Err(ChannelError::DimensionMismatch(n, second.len()));
    }
    if consumed.len() != n {
        return Err(ChannelError::DimensionMismatch(n, consumed.len()));
    }
    if !(slot_duration > 0.0 && slot_duration.is_finite()) {
        return Err(ChannelError::InvalidSlotDuration(slot_duration));
    }
    for &c in consumed {
        cache_delay(slot_duration, c)?;
    }
    let mut first = first.clone();
    let mut second = second.clone();
    first.slot = Slot::First;
    second.slot = Slot::Second;
    let hops = [all_pairs(&first), all_pairs(&second)];
    Ok(WtegGraph { n, slot_duration, slots: [first, second], consumed: consumed.to_vec(), hops })
}

/// Lexicographically ordered label: total cost, then node sequence.
fn label_less(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

/// Label-setting search over `v` vertices from `src`; `edge(i, j)` returns a
/// non-negative cost or `None`.
fn label_setting(v: usize, src: usize, edge: impl Fn(usize, usize) -> Option<f64>) -> Vec<Option<(f64, Vec<usize>)>> {
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; v];
    let mut done = vec![false; v];
    best[src] = Some((0.0, vec![src]));
    loop {
        let mut pick: Option<usize> = None;
        for i in 0..v {
            if done[i] {
                continue;
            }
            if let Some(l) = &best[i] {
                if pick.is_none_or(|p| label_less(l, best[p].as_ref().unwrap())) {
                    pick = Some(i);
                }
            }
        }
        let Some(u) = pick else { break };
        done[u] = true;
        let (cost, path) = best[u].clone().unwrap();
        for w in 0..v {
            if done[w] || w == u {
                continue;
            }
            if let Some(c) = edge(u, w) {
                let mut p = path.clone();
                p.push(w);
                let cand = (cost + c, p);
                if best[w].as_ref().is_none_or(|old| label_less(&cand, old)) {
                    best[w] = Some(cand);
                }
            }
        }
    }
    best
}

fn all_pairs(t: &SlotTopology) -> Vec<Vec<Option<HopPath>>> {
    let n = t.len();
    (0..n)
        .map(|s| {
            label_setting(n, s, |i, j| t.delay[i][j])
                .into_iter()
                .map(|l| l.map(|(per_bit, uavs)| HopPath { per_bit, uavs }))
                .collect()
        })
        .collect()
}

/// Result of a static shortest-path query.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Total delay in seconds; `None` when `dst` is unreachable.
    pub delay: Option<f64>,
    pub nodes: Vec<Node>,
}

/// A time-aware route used when evaluating a schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Route {
    /// Absolute time at which the payload is available at the destination.
    pub arrival: f64,
    pub nodes: Vec<Node>,
    /// Seconds spent on transmission edges.
    pub transmission: f64,
    /// Seconds spent waiting on a virtual cache edge, if one is crossed.
    pub cache_wait: Option<f64>,
}

impl WtegGraph {
    pub fn uav_count(&self) -> usize {
        self.n
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn topology(&self, slot: Slot) -> &SlotTopology {
        &self.slots[slot.index()]
    }

    pub fn consumed(&self) -> &[f64] {
        &self.consumed
    }

    /// Same graph with a different per-node consumed-time vector.
    pub fn with_consumed(&self, consumed: &[f64]) -> Result<WtegGraph, ChannelError> {
        if consumed.len() != self.n {
            return Err(ChannelError::DimensionMismatch(self.n, consumed.len()));
        }
        for &c in consumed {
            cache_delay(self.slot_duration, c)?;
        }
        Ok(WtegGraph { consumed: consumed.to_vec(), ..self.clone() })
    }

    /// Entry `(a, b)` of the assembled block matrix; `None` is an infinite
    /// entry.
    pub fn edge(&self, a: Node, b: Node) -> Option<Edge> {
        match (a.slot, b.slot) {
            (Slot::First, Slot::Second) => {
                (a.uav == b.uav).then(|| Edge::Cache(self.slot_duration - self.consumed[a.uav]))
            }
            (Slot::Second, Slot::First) => None,
            (s, _) => self.slots[s.index()].delay[a.uav][b.uav].map(Edge::PerBit),
        }
    }

    /// The assembled `2N x 2N` matrix.
    pub fn matrix(&self) -> Vec<Vec<Option<Edge>>> {
        let v = 2 * self.n;
        (0..v)
            .map(|i| (0..v).map(|j| self.edge(Node::from_index(i, self.n), Node::from_index(j, self.n))).collect())
            .collect()
    }

    fn slot_end(&self, slot: Slot) -> f64 {
        slot.number() as f64 * self.slot_duration
    }

    /// Earliest delivery of `payload_bits` from `from` (data ready at
    /// absolute time `ready`) to `to`. Transmissions must finish inside the
    /// slot whose topology they use; crossing into the second slot waits on
    /// a cache edge until the boundary. Ties go to the lexicographically
    /// smallest node sequence.
    pub fn route(&self, from: Node, ready: f64, to: Node, payload_bits: f64) -> Option<Route> {
        let n = self.n;
        let seq = |slot: Slot, uavs: &[usize]| uavs.iter().map(|&u| Node::new(u, slot)).collect::<Vec<_>>();
        match (from.slot, to.slot) {
            (Slot::Second, Slot::First) => None,
            (s, t) if s == t => {
                let hop = self.hops[s.index()][from.uav][to.uav].as_ref()?;
                let tx = hop.per_bit * payload_bits;
                let arrival = ready + tx;
                (arrival <= self.slot_end(s)).then(|| Route {
                    arrival,
                    nodes: seq(s, &hop.uavs),
                    transmission: tx,
                    cache_wait: None,
                })
            }
            _ => {
                let mut best: Option<(Route, Vec<usize>)> = None;
                for w in 0..n {
                    let (Some(h1), Some(h2)) = (&self.hops[0][from.uav][w], &self.hops[1][w][to.uav]) else {
                        continue;
                    };
                    let tx1 = h1.per_bit * payload_bits;
                    let at_cache = ready + tx1;
                    if at_cache > self.slot_duration {
                        continue;
                    }
                    let tx2 = h2.per_bit * payload_bits;
                    let arrival = self.slot_duration + tx2;
                    let key: Vec<usize> = h1.uavs.iter().copied().chain(h2.uavs.iter().map(|u| u + n)).collect();
                    let better = match &best {
                        None => true,
                        Some((r, k)) => arrival < r.arrival || (arrival == r.arrival && key < *k),
                    };
                    if better {
                        let mut nodes = seq(Slot::First, &h1.uavs);
                        nodes.extend(seq(Slot::Second, &h2.uavs));
                        let route = Route {
                            arrival,
                            nodes,
                            transmission: tx1 + tx2,
                            cache_wait: Some(self.slot_duration - at_cache),
                        };
                        best = Some((route, key));
                    }
                }
                best.map(|(r, _)| r)
            }
        }
    }

    /// Re-times a fixed node sequence on this graph with the same deadline
    /// rules as [`WtegGraph::route`]. `None` if a hop has no link here or a
    /// deadline is missed.
    pub fn follow(&self, nodes: &[Node], ready: f64, payload_bits: f64) -> Option<Route> {
        let first = nodes.first()?;
        let mut t = ready;
        let mut transmission = 0.0;
        let mut cache_wait = None;
        let mut slot = first.slot;
        for pair in nodes.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            match (a.slot, b.slot) {
                (Slot::First, Slot::Second) if a.uav == b.uav => {
                    if t > self.slot_duration {
                        return None;
                    }
                    cache_wait = Some(self.slot_duration - t);
                    t = self.slot_duration;
                    slot = Slot::Second;
                }
                (s, u) if s == u => {
                    let tx = self.slots[s.index()].delay[a.uav][b.uav]? * payload_bits;
                    transmission += tx;
                    t += tx;
                }
                _ => return None,
            }
        }
        (t <= self.slot_end(slot)).then(|| Route { arrival: t, nodes: nodes.to_vec(), transmission, cache_wait })
    }
}

/// Minimum-delay path over the assembled matrix for a fixed consumed-time
/// vector. Transmission edges cost `pi * payload_bits`; cache edges cost
/// their fixed weight. `src == dst` yields `(0, [src])`.
pub fn shortest_path(g: &WtegGraph, src: Node, dst: Node, payload_bits: f64) -> PathResult {
    let n = g.n;
    let labels = label_setting(2 * n, src.index(n), |i, j| {
        g.edge(Node::from_index(i, n), Node::from_index(j, n)).map(|e| match e {
            Edge::PerBit(pi) => pi * payload_bits,
            Edge::Cache(c) => c,
        })
    });
    match &labels[dst.index(n)] {
        Some((d, path)) => {
            PathResult { delay: Some(*d), nodes: path.iter().map(|&i| Node::from_index(i, n)).collect() }
        }
        None => PathResult { delay: None, nodes: Vec::new() },
    }
}

//! Reference implementations written from the model description, sharing no
//! code with the library beyond its input types.

use uavsched::channel::{Node, Slot, WtegGraph};
use uavsched::mapping::{DecisionMatrix, Problem};

/// Weight of the directed edge `a -> b`, read straight from the slot delay
/// matrices and the consumed-time vector.
fn edge_cost(g: &WtegGraph, a: Node, b: Node, payload: f64) -> Option<f64> {
    match (a.slot, b.slot) {
        (Slot::First, Slot::Second) => (a.uav == b.uav).then(|| g.slot_duration() - g.consumed()[a.uav]),
        (Slot::Second, Slot::First) => None,
        (s, _) => g.topology(s).delay[a.uav][b.uav].map(|pi| pi * payload),
    }
}

/// Minimum path delay by enumerating every simple path.
pub fn brute_force_delay(g: &WtegGraph, src: Node, dst: Node, payload: f64) -> Option<f64> {
    let n = g.uav_count();
    let nodes: Vec<Node> = Slot::ALL.iter().flat_map(|&s| (0..n).map(move |u| Node::new(u, s))).collect();
    let mut best: Option<f64> = None;
    let mut visited = vec![false; nodes.len()];
    fn dfs(
        g: &WtegGraph,
        nodes: &[Node],
        at: Node,
        dst: Node,
        cost: f64,
        payload: f64,
        visited: &mut [bool],
        best: &mut Option<f64>,
    ) {
        if at == dst {
            if best.is_none_or(|b| cost < b) {
                *best = Some(cost);
            }
            return;
        }
        for (k, &next) in nodes.iter().enumerate() {
            if visited[k] || next == at {
                continue;
            }
            if let Some(c) = edge_cost(g, at, next, payload) {
                visited[k] = true;
                dfs(g, nodes, next, dst, cost + c, payload, visited, best);
                visited[k] = false;
            }
        }
    }
    let start = nodes.iter().position(|&x| x == src).unwrap();
    visited[start] = true;
    dfs(g, &nodes, src, dst, 0.0, payload, &mut visited, &mut best);
    best
}

/// Cost of a given node sequence, or `None` if some hop has no edge.
pub fn path_cost(g: &WtegGraph, nodes: &[Node], payload: f64) -> Option<f64> {
    nodes.windows(2).try_fold(0.0, |acc, w| edge_cost(g, w[0], w[1], payload).map(|c| acc + c))
}

/// Cheapest seconds-per-bit between two UAVs inside one slot, by
/// enumerating simple paths over the slot's delay matrix.
fn slot_per_bit(g: &WtegGraph, slot: Slot, a: usize, b: usize) -> Option<f64> {
    let delay = &g.topology(slot).delay;
    let n = g.uav_count();
    fn walk(
        delay: &[Vec<Option<f64>>],
        n: usize,
        at: usize,
        b: usize,
        cost: f64,
        seen: &mut Vec<bool>,
        best: &mut Option<f64>,
    ) {
        if at == b {
            if best.is_none_or(|x| cost < x) {
                *best = Some(cost);
            }
            return;
        }
        for w in 0..n {
            if seen[w] {
                continue;
            }
            if let Some(pi) = delay[at][w] {
                seen[w] = true;
                walk(delay, n, w, b, cost + pi, seen, best);
                seen[w] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[a] = true;
    let mut best = None;
    walk(delay, n, a, b, 0.0, &mut seen, &mut best);
    best
}

/// Earliest arrival of `payload` bits sent from `from` at time `ready` to
/// `to`. Each transmission must end inside the slot it uses; slot one hands
/// over to slot two at the boundary.
fn transfer(g: &WtegGraph, from: Node, ready: f64, to: Node, payload: f64) -> Option<f64> {
    let dt = g.slot_duration();
    let n = g.uav_count();
    match (from.slot, to.slot) {
        (Slot::Second, Slot::First) => None,
        (Slot::First, Slot::Second) => (0..n)
            .filter_map(|w| {
                let first = slot_per_bit(g, Slot::First, from.uav, w)?;
                let second = slot_per_bit(g, Slot::Second, w, to.uav)?;
                (ready + first * payload <= dt).then_some(dt + second * payload)
            })
            .min_by(f64::total_cmp),
        (s, _) => {
            let arrival = ready + slot_per_bit(g, s, from.uav, to.uav)? * payload;
            let end = if s == Slot::First { dt } else { 2.0 * dt };
            (arrival <= end).then_some(arrival)
        }
    }
}

/// Task latency of the schedule encoded in `x`; infinite when it cannot
/// execute. `x` must satisfy the mapping rules.
pub fn straight_line_latency(problem: &Problem, x: &DecisionMatrix) -> f64 {
    let dag = &problem.dag;
    let g = &problem.wteg;
    let n = g.uav_count();
    let dt = g.slot_duration();
    let l = dag.len();

    // (uav, start slot, replica) per row
    let place: Vec<(usize, Slot, bool)> = (0..l)
        .map(|i| {
            let cols: Vec<usize> = (0..2 * n).filter(|&c| x.row(i)[c]).collect();
            match cols.as_slice() {
                [c] => (c % n, if *c < n { Slot::First } else { Slot::Second }, false),
                [a, b] => {
                    assert_eq!(a % n, b % n);
                    (a % n, Slot::First, true)
                }
                _ => panic!("row {i} has {} bits set", cols.len()),
            }
        })
        .collect();

    let mut order = Vec::with_capacity(l);
    let mut done = vec![false; l];
    while order.len() < l {
        let next = (0..l).find(|&i| !done[i] && dag.predecessors(i).iter().all(|&j| done[j])).expect("acyclic");
        done[next] = true;
        order.push(next);
    }

    let mut cpu_free = vec![0.0_f64; n];
    let mut out_node = vec![Node::new(0, Slot::First); l];
    let mut out_time = vec![0.0_f64; l];
    let mut finish = vec![f64::INFINITY; l];
    for &i in &order {
        let (uav, slot, replica) = place[i];
        let start = Node::new(uav, slot);
        let mut t = if slot == Slot::First { 0.0 } else { dt };
        for &j in dag.predecessors(i) {
            let payload = dag.subtask(j).data_bits * dag.subtask(j).scaling;
            match transfer(g, out_node[j], out_time[j], start, payload) {
                Some(a) => t = t.max(a),
                None => return f64::INFINITY,
            }
        }
        t = t.max(cpu_free[uav]);
        let s = dag.subtask(i);
        let end = t + s.complexity * s.data_bits * s.scaling / problem.capacities[uav];
        let deadline = if slot == Slot::First && !replica { dt } else { 2.0 * dt };
        if end > deadline {
            return f64::INFINITY;
        }
        cpu_free[uav] = end;
        finish[i] = end;
        if replica {
            out_node[i] = Node::new(uav, Slot::Second);
            out_time[i] = end.max(dt);
        } else {
            out_node[i] = start;
            out_time[i] = end;
        }
    }
    finish[dag.sink()]
}

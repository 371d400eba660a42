//! Load-balancing baselines. Each picks a UAV for every intermediate
//! subtask; slots and replicas then follow from [`complete_placements`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SolverError, SolverResult};
use crate::mapping::{complete_placements, Problem};

/// Anchored UAV choice per subtask, with `pick(i)` deciding intermediates.
fn assign(problem: &Problem, mut pick: impl FnMut(usize) -> usize) -> Vec<usize> {
    let dag = &problem.dag;
    let n = problem.uav_count();
    let mut uavs = vec![0; dag.len()];
    for &i in dag.topological_order() {
        uavs[i] = if i == dag.source() {
            0
        } else if i == dag.sink() {
            n - 1
        } else {
            pick(i)
        };
    }
    uavs
}

fn finish(solver: &'static str, problem: &Problem, uavs: &[usize]) -> Result<SolverResult, SolverError> {
    let (_, eval) = complete_placements(problem, uavs);
    let latency = eval.total;
    SolverResult::from_evaluation(solver, problem, eval, vec![latency], 1)
}

/// Smooth weighted round robin: every step each entry gains its weight, the
/// largest running total (lowest index on ties) is chosen and pays back the
/// sum of all weights.
pub fn smooth_weighted_round_robin(weights: &[f64], picks: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut current = vec![0.0; weights.len()];
    (0..picks)
        .map(|_| {
            for (c, w) in current.iter_mut().zip(weights) {
                *c += w;
            }
            let mut best = 0;
            for u in 1..current.len() {
                if current[u] > current[best] {
                    best = u;
                }
            }
            current[best] -= total;
            best
        })
        .collect()
}

/// Weighted round robin over UAVs with weights proportional to CPU capacity.
pub fn wrr_solve(problem: &Problem) -> Result<SolverResult, SolverError> {
    let min = problem.capacities.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = problem.capacities.iter().map(|c| c / min).collect();
    let mut order = smooth_weighted_round_robin(&weights, problem.dag.len()).into_iter();
    let uavs = assign(problem, |_| order.next().expect("one pick per subtask"));
    finish("wrr", problem, &uavs)
}

/// Each subtask to the UAV whose assigned compute time would be least after
/// taking it on (lowest index on ties).
pub fn greedy_lb_solve(problem: &Problem) -> Result<SolverResult, SolverError> {
    let dag = &problem.dag;
    let mut load = vec![0.0; problem.uav_count()];
    let comp = |i: usize, u: usize| {
        let s = dag.subtask(i);
        s.cycles * s.scaling / problem.capacities[u]
    };
    let mut uavs = vec![0; dag.len()];
    for &i in dag.topological_order() {
        let u = if i == dag.source() {
            0
        } else if i == dag.sink() {
            problem.uav_count() - 1
        } else {
            let mut best = 0;
            for u in 1..load.len() {
                if load[u] + comp(i, u) < load[best] + comp(i, best) {
                    best = u;
                }
            }
            best
        };
        load[u] += comp(i, u);
        uavs[i] = u;
    }
    finish("greedy-lb", problem, &uavs)
}

/// Uniformly random UAV for every intermediate subtask.
pub fn pick_kx_solve(problem: &Problem, seed: u64) -> Result<SolverResult, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.uav_count();
    let uavs = assign(problem, |_| rng.gen_range(0..n));
    finish("pick-kx", problem, &uavs)
}

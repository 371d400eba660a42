//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use uavsched::channel::{assemble_two_step, build_slot_topology, ChannelParams, Slot, WtegGraph};
use uavsched::dag::{Subtask, TaskDag, DEFAULT_COMPLEXITY, DEFAULT_SCALING};
use uavsched::mapping::Problem;

/// Random single-source, single-sink DAG with `l` subtasks whose indices are
/// shuffled so that index order is not a topological order.
pub fn random_dag<R: Rng>(rng: &mut R, l: usize) -> TaskDag {
    assert!(l >= 2);
    // Build on ranks 0..l (rank order is topological), then relabel.
    let mut edges = Vec::new();
    for a in 0..l {
        for b in a + 1..l {
            if rng.gen_bool(0.3) {
                edges.push((a, b));
            }
        }
    }
    for b in 1..l {
        if !edges.iter().any(|&(_, t)| t == b) {
            edges.push((rng.gen_range(0..b), b));
        }
    }
    for a in 0..l - 1 {
        if !edges.iter().any(|&(f, _)| f == a) {
            edges.push((a, rng.gen_range(a + 1..l)));
        }
    }
    let mut label: Vec<usize> = (0..l).collect();
    label.shuffle(rng);
    let subtasks = (0..l)
        .map(|i| {
            let scaling = if rng.gen_bool(0.5) { DEFAULT_SCALING } else { rng.gen_range(0.3..=1.0) };
            Subtask::new(format!("s{i}"), scaling, DEFAULT_COMPLEXITY * rng.gen_range(0.5..1.5))
        })
        .collect();
    let edges = edges.into_iter().map(|(a, b)| (label[a], label[b])).collect();
    let mut dag = TaskDag::from_indices("random", subtasks, edges);
    dag.validate().expect("generator builds valid graphs");
    dag
}

pub fn random_positions<R: Rng>(rng: &mut R, n: usize, span: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.gen_range(0.0..span), rng.gen_range(0.0..span), rng.gen_range(0.0..100.0)))
        .collect()
}

/// Two slots over a fleet spread across `span` metres, drifting up to `drift`
/// metres per axis between the slots.
pub fn random_wteg<R: Rng>(rng: &mut R, n: usize, span: f64, drift: f64, dt: f64) -> WtegGraph {
    let p = ChannelParams::default();
    let first = random_positions(rng, n, span);
    let second: Vec<_> = first
        .iter()
        .map(|x| x + Vector3::new(rng.gen_range(-drift..=drift), rng.gen_range(-drift..=drift), 0.0))
        .collect();
    let t1 = build_slot_topology(&first, &p, Slot::First).unwrap();
    let t2 = build_slot_topology(&second, &p, Slot::Second).unwrap();
    let consumed: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..dt)).collect();
    assemble_two_step(&t1, &t2, &consumed, dt).unwrap()
}

/// Scheduling instance with `l` subtasks on `n` UAVs. Sizes and slot length
/// are drawn so that slot crossings, replicas and long hops all occur.
pub fn random_problem<R: Rng>(rng: &mut R, l: usize, n: usize) -> Problem {
    let dag = random_dag(rng, l).propagate_data_sizes(rng.gen_range(0.5e6..3e6)).unwrap();
    let dt = rng.gen_range(0.4..2.0);
    let wteg = random_wteg(rng, n, 7000.0, 1500.0, dt);
    let capacities = (0..n).map(|_| rng.gen_range(500e6..=1200e6)).collect();
    Problem::new(dag, wteg, capacities).unwrap()
}

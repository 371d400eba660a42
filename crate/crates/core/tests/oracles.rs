mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavsched::channel::{shortest_path, Node, Slot};
use uavsched::mapping::{compute_latency, enumerate_feasible, enumerated_optimum, evaluate, EnumerationBounds};

use common::oracle::{brute_force_delay, path_cost, straight_line_latency};
use common::{random_problem, random_wteg};

#[test]
fn shortest_path_matches_exhaustive_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut reachable = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=4);
        let dt = rng.gen_range(0.5..4.0);
        let g = random_wteg(&mut rng, n, 9000.0, 2000.0, dt);
        let payload = rng.gen_range(1e5..5e6);
        for a in 0..2 * n {
            for b in 0..2 * n {
                let (src, dst) = (Node::from_index(a, n), Node::from_index(b, n));
                let got = shortest_path(&g, src, dst, payload);
                let want = brute_force_delay(&g, src, dst, payload);
                assert_eq!(got.delay, want, "{src} -> {dst}");
                if let Some(d) = got.delay {
                    reachable += 1;
                    assert_eq!(got.nodes.first(), Some(&src));
                    assert_eq!(got.nodes.last(), Some(&dst));
                    assert_eq!(path_cost(&g, &got.nodes, payload), Some(d));
                } else {
                    assert!(got.nodes.is_empty());
                }
            }
        }
    }
    assert!(reachable > 1000, "generator produced too few connected pairs: {reachable}");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn latency_matches_straight_line_model_on_every_enumerated_schedule() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut feasible = 0usize;
    let mut infeasible = 0usize;
    for _ in 0..60 {
        let l = rng.gen_range(2..=4);
        let n = rng.gen_range(2..=3);
        let problem = random_problem(&mut rng, l, n);
        let all = enumerate_feasible(&problem, EnumerationBounds { max_subtasks: 4, max_uavs: 3 }).unwrap();
        let mut best = f64::INFINITY;
        for s in &all {
            let oracle = straight_line_latency(&problem, &s.matrix);
            let lib = compute_latency(&s.matrix, &problem).unwrap().total;
            assert_eq!(lib, s.total);
            if oracle.is_finite() {
                feasible += 1;
                assert!(((lib - oracle) / oracle).abs() <= 1e-12, "{lib} vs {oracle} for {:?}", s.placements);
            } else {
                infeasible += 1;
                assert!(lib.is_infinite(), "library times an infeasible schedule at {lib}");
            }
            best = best.min(oracle);
        }
        match enumerated_optimum(&all) {
            Some(opt) => {
                assert_eq!(opt.total, all.iter().map(|s| s.total).fold(f64::INFINITY, f64::min));
                assert!(((opt.total - best) / best).abs() <= 1e-12);
            }
            None => assert!(best.is_infinite()),
        }
    }
    assert!(feasible > 500 && infeasible > 500, "{feasible} feasible, {infeasible} infeasible");
}

#[test]
fn following_a_planned_route_on_its_own_graph_reproduces_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=5);
        let dt = rng.gen_range(0.5..3.0);
        let g = random_wteg(&mut rng, n, 8000.0, 1500.0, dt);
        let payload = rng.gen_range(1e5..3e6);
        for a in 0..2 * n {
            for b in 0..2 * n {
                let (from, to) = (Node::from_index(a, n), Node::from_index(b, n));
                let ready = if from.slot == Slot::First { rng.gen_range(0.0..dt) } else { rng.gen_range(dt..2.0 * dt) };
                if let Some(r) = g.route(from, ready, to, payload) {
                    let f = g.follow(&r.nodes, ready, payload).expect("route must be followable");
                    assert!((f.arrival - r.arrival).abs() <= 1e-12 * r.arrival.max(1.0));
                    assert_eq!(f.cache_wait.is_some(), r.cache_wait.is_some());
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500);
}

#[test]
fn evaluation_of_decoded_matrix_equals_placement_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let problem = random_problem(&mut rng, 3, 3);
        for s in enumerate_feasible(&problem, EnumerationBounds::default()).unwrap() {
            assert_eq!(evaluate(&problem, &s.placements).total, s.total);
        }
    }
}

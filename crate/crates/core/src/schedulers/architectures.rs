//! Reference architectures: everything offloaded to a cloud server, or
//! everything computed on the task initiator.

use serde::{Deserialize, Serialize};

use crate::dag::TaskDag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudParams {
    /// Server CPU capacity [cycles/s].
    pub capacity_hz: f64,
    /// Backhaul rate between the fleet and the server [bit/s].
    pub backhaul_bps: f64,
}

impl Default for CloudParams {
    fn default() -> Self {
        CloudParams { capacity_hz: 10e9, backhaul_bps: 20e6 }
    }
}

/// Latency of a non-collaborative architecture, split by phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArchitectureResult {
    pub architecture: &'static str,
    pub latency: f64,
    pub uplink: f64,
    pub compute: f64,
    pub downlink: f64,
}

fn compute_seconds(dag: &TaskDag, capacity: f64) -> f64 {
    dag.subtasks().iter().map(|s| s.cycles * s.scaling / capacity).sum()
}

/// Uploads the source input once, runs every subtask on the server one
/// after another and downloads the terminal subtask's output.
pub fn cloud_solve(dag: &TaskDag, cloud: &CloudParams) -> ArchitectureResult {
    let per_bit = 1.0 / cloud.backhaul_bps;
    let uplink = dag.subtask(dag.source()).data_bits * per_bit;
    let compute = compute_seconds(dag, cloud.capacity_hz);
    let downlink = dag.subtask(dag.sink()).output_bits() * per_bit;
    ArchitectureResult { architecture: "cloud", latency: uplink + compute + downlink, uplink, compute, downlink }
}

/// Runs every subtask one after another on the task initiator.
pub fn local_solve(dag: &TaskDag, initiator_capacity: f64) -> ArchitectureResult {
    let compute = compute_seconds(dag, initiator_capacity);
    ArchitectureResult { architecture: "local", latency: compute, uplink: 0.0, compute, downlink: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{Subtask, MEGABIT};

    fn chain(complexity: f64, bits: f64) -> TaskDag {
        let subs = (1..=3).map(|i| Subtask::new(format!("w{i}"), 0.8, complexity)).collect();
        TaskDag::new("chain", subs, &[("w1", "w2"), ("w2", "w3")]).unwrap().propagate_data_sizes(bits).unwrap()
    }

    #[test]
    fn local_is_the_sum_of_compute_terms() {
        let r = local_solve(&chain(237.5, MEGABIT), 1e9);
        let expected = (1.0 + 0.8 + 0.64) * 1e6 * 237.5 * 0.8 / 1e9;
        assert!((r.latency - expected).abs() < 1e-12);
    }

    #[test]
    fn cloud_decomposes_into_three_phases() {
        let dag = chain(237.5, MEGABIT);
        let r = cloud_solve(&dag, &CloudParams::default());
        assert!((r.uplink - 1e6 / 20e6).abs() < 1e-15);
        assert!((r.downlink - 0.64e6 * 0.8 / 20e6).abs() < 1e-15);
        assert_eq!(r.latency, r.uplink + r.compute + r.downlink);
    }

    #[test]
    fn crossover_between_cloud_and_local() {
        let cloud = CloudParams::default();
        let heavy = chain(1e5, 1e3);
        assert!(cloud_solve(&heavy, &cloud).latency < local_solve(&heavy, 1e9).latency);
        let bulky = chain(1.0, 1e8);
        assert!(local_solve(&bulky, 1e9).latency < cloud_solve(&bulky, &cloud).latency);
    }
}

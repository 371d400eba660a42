//! Binary particle swarm optimisation over decision matrices.
//!
//! Each particle is a flattened decision matrix with a real velocity per
//! bit. Velocities follow the usual inertia plus cognitive and social
//! attraction, bits are resampled through a sigmoid, and every sampled
//! matrix is projected back onto the rule-valid set before it is timed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SolverError, SolverResult};
use crate::channel::{Node, Slot};
use crate::mapping::{eligible_placements, evaluate, repair_overruns, DecisionMatrix, Placement, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity clamp; keeps the sigmoid away from saturation.
    pub v_max: f64,
    pub seed: u64,
}

impl Default for BpsoParams {
    fn default() -> Self {
        BpsoParams { swarm_size: 100, iterations: 100, inertia: 1.5, cognitive: 1.0, social: 1.0, v_max: 6.0, seed: 0 }
    }
}

impl BpsoParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.swarm_size == 0 {
            return Err(SolverError::InvalidParams("swarm_size must be at least 1"));
        }
        if !(self.inertia > 0.0 && self.inertia.is_finite()) {
            return Err(SolverError::InvalidParams("inertia must be positive"));
        }
        if !(self.cognitive >= 0.0 && self.social >= 0.0 && self.cognitive.is_finite() && self.social.is_finite()) {
            return Err(SolverError::InvalidParams("learning factors must be non-negative"));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(SolverError::InvalidParams("v_max must be positive"));
        }
        Ok(())
    }
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One clamped velocity step for a single bit.
fn next_velocity(params: &BpsoParams, v: f64, x: bool, personal: bool, global: bool, b1: f64, b2: f64) -> f64 {
    let f = |b: bool| b as u8 as f64;
    let v = params.inertia * v + params.cognitive * b1 * (f(personal) - f(x)) + params.social * b2 * (f(global) - f(x));
    v.clamp(-params.v_max, params.v_max)
}

struct Particle {
    rng: ChaCha8Rng,
    position: Vec<bool>,
    velocity: Vec<f64>,
    fitness: f64,
    best_position: Vec<bool>,
    best_fitness: f64,
}

/// Per-row candidate sets, shared by initialisation and repair.
struct Rows {
    uavs: usize,
    eligible: Vec<Vec<Placement>>,
}

impl Rows {
    fn new(problem: &Problem) -> Self {
        let n = problem.uav_count();
        let eligible = (0..problem.dag.len()).map(|i| eligible_placements(&problem.dag, i, n)).collect();
        Rows { uavs: n, eligible }
    }

    fn cols(&self) -> usize {
        2 * self.uavs
    }

    /// Projects the bits of row `i` onto a valid placement: keep the row if
    /// it already encodes one; otherwise start on the set eligible bit (or,
    /// failing that, any eligible start node) with the highest sigmoid
    /// value, with a replica if the same UAV's slot-two bit is set.
    fn project(&self, i: usize, bits: &[bool], velocity: &[f64]) -> Placement {
        let eligible = &self.eligible[i];
        let set: Vec<usize> = (0..bits.len()).filter(|&c| bits[c]).collect();
        let node = |c: usize| Node::from_index(c, self.uavs);
        let decoded = match set.as_slice() {
            [c] => Some(Placement { uav: node(*c).uav, slot: node(*c).slot, replica: false }),
            [a, b] if node(*a).uav == node(*b).uav => Some(Placement::spanning(node(*a).uav)),
            _ => None,
        };
        if let Some(p) = decoded.filter(|p| eligible.contains(p)) {
            return p;
        }
        let starts: Vec<Placement> = eligible.iter().filter(|p| !p.replica).copied().collect();
        let column = |p: &Placement| p.start().index(self.uavs);
        let on: Vec<Placement> = starts.iter().filter(|p| bits[column(p)]).copied().collect();
        let pool = if on.is_empty() { &starts } else { &on };
        let mut best = pool[0];
        for p in &pool[1..] {
            if velocity[column(p)] > velocity[column(&best)] {
                best = *p;
            }
        }
        let spanning = Placement::spanning(best.uav);
        if best.slot == Slot::First
            && bits[Node::new(best.uav, Slot::Second).index(self.uavs)]
            && eligible.contains(&spanning)
        {
            spanning
        } else {
            best
        }
    }

    fn project_all(&self, position: &[bool], velocity: &[f64]) -> Vec<Placement> {
        let c = self.cols();
        (0..self.eligible.len())
            .map(|i| self.project(i, &position[i * c..(i + 1) * c], &velocity[i * c..(i + 1) * c]))
            .collect()
    }
}

/// Projects, repairs slot overruns and writes the result back into the
/// particle's bit vector. Returns the fitness.
fn settle(problem: &Problem, rows: &Rows, p: &mut Particle) -> f64 {
    let mut placements = rows.project_all(&p.position, &p.velocity);
    let eval = repair_overruns(problem, &mut placements);
    p.position = DecisionMatrix::from_placements(&placements, rows.uavs).bits().to_vec();
    eval.total
}

pub fn bpso_solve(problem: &Problem, params: &BpsoParams) -> Result<SolverResult, SolverError> {
    params.validate()?;
    let rows = Rows::new(problem);
    let dims = problem.dag.len() * rows.cols();
    let mut swarm: Vec<Particle> = (0..params.swarm_size)
        .map(|m| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(m as u64 + 1);
            let placements: Vec<Placement> = rows
                .eligible
                .iter()
                .map(|opts| {
                    let starts: Vec<&Placement> = opts.iter().filter(|p| p.slot == Slot::First && !p.replica).collect();
                    *starts[rng.gen_range(0..starts.len())]
                })
                .collect();
            let position = DecisionMatrix::from_placements(&placements, rows.uavs).bits().to_vec();
            Particle {
                rng,
                best_position: position.clone(),
                position,
                velocity: vec![0.0; dims],
                fitness: f64::INFINITY,
                best_fitness: f64::INFINITY,
            }
        })
        .collect();
    swarm.par_iter_mut().for_each(|p| {
        p.fitness = settle(problem, &rows, p);
        p.best_position = p.position.clone();
        p.best_fitness = p.fitness;
    });
    let mut evaluations = swarm.len();
    let global = best_of(&swarm);
    let mut global_position = swarm[global].position.clone();
    let mut global_fitness = swarm[global].fitness;
    let mut trace = Vec::with_capacity(params.iterations + 1);
    trace.push(global_fitness);

    for _ in 0..params.iterations {
        let g = &global_position;
        swarm.par_iter_mut().for_each(|p| {
            for d in 0..dims {
                let b1: f64 = p.rng.gen();
                let b2: f64 = p.rng.gen();
                p.velocity[d] = next_velocity(params, p.velocity[d], p.position[d], p.best_position[d], g[d], b1, b2);
                let r: f64 = p.rng.gen();
                p.position[d] = sigmoid(p.velocity[d]) >= r;
            }
            p.fitness = settle(problem, &rows, p);
            if p.fitness < p.best_fitness {
                p.best_fitness = p.fitness;
                p.best_position = p.position.clone();
            }
        });
        evaluations += swarm.len();
        let cand = best_of(&swarm);
        if swarm[cand].best_fitness < global_fitness {
            global_fitness = swarm[cand].best_fitness;
            global_position = swarm[cand].best_position.clone();
        }
        trace.push(global_fitness);
    }
    let x = DecisionMatrix::from_bits(problem.dag.len(), rows.uavs, global_position);
    let placements = crate::mapping::decode_mapping(&x, &problem.dag)?;
    let evaluation = evaluate(problem, &placements);
    SolverResult::from_evaluation("bpso", problem, evaluation, trace, evaluations)
}

/// Index of the particle with the lowest personal best; lowest index wins ties.
fn best_of(swarm: &[Particle]) -> usize {
    let mut best = 0;
    for (m, p) in swarm.iter().enumerate() {
        if p.best_fitness < swarm[best].best_fitness {
            best = m;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn settled_bit_keeps_zero_velocity() {
        let p = BpsoParams::default();
        for x in [false, true] {
            assert_eq!(next_velocity(&p, 0.0, x, x, x, 0.7, 0.3), 0.0);
        }
    }

    #[test]
    fn velocity_is_clamped() {
        let p = BpsoParams::default();
        assert_eq!(next_velocity(&p, 5.9, false, true, true, 1.0, 1.0), p.v_max);
        assert_eq!(next_velocity(&p, -5.9, true, false, false, 1.0, 1.0), -p.v_max);
        assert_eq!(next_velocity(&p, 1.0, false, true, false, 0.5, 0.9), 1.5 + 0.5);
    }

    #[test]
    fn parameter_validation() {
        assert!(BpsoParams::default().validate().is_ok());
        assert!(BpsoParams { swarm_size: 0, ..Default::default() }.validate().is_err());
        assert!(BpsoParams { inertia: 0.0, ..Default::default() }.validate().is_err());
        assert!(BpsoParams { v_max: f64::NAN, ..Default::default() }.validate().is_err());
    }
}

//! Seeded random DAG instances for testing and benchmarking.
//!
//! Durations are multiples of 1/16 hour, so every start and end time the
//! solvers compute is exact in binary floating point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TaskNode;
use crate::conservation::PhaseTimes;

const QUANTUM: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub nodes: Vec<TaskNode>,
    pub window_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub nodes: usize,
    /// Probability of an edge from each earlier node to each later one.
    pub edge_probability: f64,
    /// Probability that a task raises one interrupt.
    pub interrupt_probability: f64,
    /// Window as a fraction of total operator time plus the longest agent
    /// run, drawn from this range.
    pub window_fraction: (f64, f64),
}

impl InstanceShape {
    pub fn new(nodes: usize) -> Self {
        InstanceShape {
            nodes,
            edge_probability: 0.3,
            interrupt_probability: 0.25,
            window_fraction: (0.3, 0.9),
        }
    }
}

fn quanta(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> f64 {
    f64::from(rng.random_range(lo..=hi)) * QUANTUM
}

pub fn random_instance(seed: u64, shape: InstanceShape) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(shape.nodes);
    let mut operator = 0.0;
    let mut longest = 0.0f64;
    for i in 0..shape.nodes {
        let deps = (0..i)
            .filter(|_| rng.random_bool(shape.edge_probability))
            .map(|j| format!("T{j}"))
            .collect();
        let t_agent = quanta(&mut rng, 8, 64);
        let t_planning = quanta(&mut rng, 1, 8);
        let t_review = quanta(&mut rng, 0, 6);
        let t_interrupts = if rng.random_bool(shape.interrupt_probability) {
            vec![quanta(&mut rng, 1, 3)]
        } else {
            vec![]
        };
        let h_displaced = f64::from(rng.random_range(1u32..=8));
        let cost = PhaseTimes {
            t_planning,
            t_interrupts,
            t_review,
        };
        operator += cost.total();
        longest = longest.max(t_agent);
        nodes.push(TaskNode {
            id: format!("T{i}"),
            deps,
            t_agent,
            operator_cost: cost,
            h_displaced,
        });
    }
    let (lo, hi) = shape.window_fraction;
    let fraction = rng.random_range(lo..=hi);
    let window_length = ((operator + longest) * fraction / QUANTUM).round() * QUANTUM;
    RandomInstance {
        nodes,
        window_length,
    }
}

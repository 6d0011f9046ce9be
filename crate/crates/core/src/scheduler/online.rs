//! Online dispatch with uncertain agent durations.
//!
//! The operator decides at each free moment using only what has happened:
//! pending interrupts and reviews are answered first-come first-served,
//! otherwise a ready task is planned according to the policy. Agent
//! durations are drawn up front from the seeded sampler but revealed only
//! as runs finish, which lets the result be compared with the exact
//! schedule on the same realized durations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{assemble, schedule_exact, Instance, PlacedOp, Schedule, SchedulerOptions, TaskNode};
use crate::error::Result;

/// Draws a realized agent duration around a nominal one.
pub trait DurationSampler: Sync {
    fn sample(&self, nominal: f64, rng: &mut ChaCha8Rng) -> f64;
}

/// Realized equals nominal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Deterministic;

impl DurationSampler for Deterministic {
    fn sample(&self, nominal: f64, _rng: &mut ChaCha8Rng) -> f64 {
        nominal
    }
}

/// Log-normal with mean `nominal` and coefficient of variation `cv`.
#[derive(Debug, Clone, Copy)]
pub struct LogNormalNoise {
    pub cv: f64,
}

impl LogNormalNoise {
    /// Maps a standard normal draw to a duration.
    pub fn apply(&self, nominal: f64, z: f64) -> f64 {
        if self.cv <= 0.0 || nominal <= 0.0 {
            return nominal;
        }
        let var = (1.0 + self.cv * self.cv).ln();
        nominal * (z * var.sqrt() - var / 2.0).exp()
    }
}

impl DurationSampler for LogNormalNoise {
    fn sample(&self, nominal: f64, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.apply(nominal, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlinePolicy {
    /// Highest displaced hours per operator hour first.
    GreedyReadyByDensity,
    /// Highest displaced hours first.
    GreedyReadyByH,
    /// Earliest ready first.
    Fifo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineOutcome {
    pub schedule: Schedule,
    pub realized_t_agent: Vec<f64>,
    /// Exact optimum on the realized durations, when within the exact limit.
    pub hindsight_objective: Option<f64>,
    pub regret: Option<f64>,
}

pub fn schedule_online(
    nodes: &[TaskNode],
    window_length: f64,
    opts: &SchedulerOptions,
    policy: OnlinePolicy,
    sampler: &dyn DurationSampler,
    seed: u64,
) -> Result<OnlineOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let realized: Vec<TaskNode> = nodes
        .iter()
        .map(|n| TaskNode {
            t_agent: sampler.sample(n.t_agent, &mut rng).max(0.0),
            ..n.clone()
        })
        .collect();
    let inst = Instance::build(&realized, window_length, opts)?;
    let placed = run_policy(&inst, policy);
    let schedule = assemble(&inst, &placed);
    let hindsight = if realized.len() <= opts.exact_limit {
        Some(schedule_exact(&realized, window_length, opts)?.objective)
    } else {
        None
    };
    Ok(OnlineOutcome {
        regret: hindsight.map(|h| h - schedule.objective),
        hindsight_objective: hindsight,
        realized_t_agent: realized.iter().map(|n| n.t_agent).collect(),
        schedule,
    })
}

fn run_policy(inst: &Instance, policy: OnlinePolicy) -> Vec<PlacedOp> {
    let n = inst.len();
    let w = inst.window;
    let mut stage = vec![0usize; n];
    let mut release = vec![0.0f64; n];
    let mut finished: Vec<Option<f64>> = vec![None; n];
    let mut abandoned = vec![false; n];
    let mut free = 0.0f64;
    let mut placed = Vec::new();

    loop {
        let fits = |k: usize, q: usize, t: f64| t + inst.ops[k][q] <= w;
        // Open requests from running tasks.
        let mut request: Option<(f64, usize)> = None;
        let mut next_event = f64::INFINITY;
        for k in 0..n {
            let q = stage[k];
            if abandoned[k] || q == 0 || q == inst.ops[k].len() {
                continue;
            }
            if release[k] <= free {
                if !fits(k, q, free) {
                    abandoned[k] = true;
                } else if request.is_none_or(|(r, _)| release[k] < r) {
                    request = Some((release[k], k));
                }
            } else if fits(k, q, release[k]) {
                next_event = next_event.min(release[k]);
            } else {
                abandoned[k] = true;
            }
        }
        let choice = if let Some((_, k)) = request {
            Some(k)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for k in 0..n {
                if abandoned[k] || stage[k] != 0 {
                    continue;
                }
                let Some(ready) = inst.deps[k]
                    .iter()
                    .map(|&d| finished[d])
                    .try_fold(0.0f64, |acc, f| f.map(|f| acc.max(f)))
                else {
                    continue;
                };
                if ready > free {
                    if fits(k, 0, ready) {
                        next_event = next_event.min(ready);
                    }
                    continue;
                }
                if !fits(k, 0, free) {
                    abandoned[k] = true;
                    continue;
                }
                let score = match policy {
                    OnlinePolicy::GreedyReadyByH => inst.h[k],
                    OnlinePolicy::GreedyReadyByDensity => {
                        let cost: f64 = inst.ops[k].iter().sum();
                        if cost > 0.0 {
                            inst.h[k] / cost
                        } else {
                            f64::INFINITY
                        }
                    }
                    OnlinePolicy::Fifo => -ready,
                };
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((k, score));
                }
            }
            best.map(|(k, _)| k)
        };
        match choice {
            Some(k) => {
                let q = stage[k];
                let start = if q == 0 { free } else { free.max(release[k]) };
                let end = start + inst.ops[k][q];
                placed.push(PlacedOp { task: k, phase: q, start });
                free = end;
                if q + 1 == inst.ops[k].len() {
                    finished[k] = Some(end);
                } else {
                    release[k] = end + inst.segs[k][q];
                }
                stage[k] += 1;
            }
            None if next_event.is_finite() => free = next_event,
            None => break,
        }
    }
    placed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conservation::PhaseTimes;
    use crate::scheduler::validate_schedule;

    fn node(id: &str, deps: &[&str], t_agent: f64, plan: f64, review: f64, h: f64) -> TaskNode {
        TaskNode {
            id: id.into(),
            deps: deps.iter().map(|s| s.to_string()).collect(),
            t_agent,
            operator_cost: PhaseTimes {
                t_planning: plan,
                t_interrupts: vec![],
                t_review: review,
            },
            h_displaced: h,
        }
    }

    #[test]
    fn two_independent_tasks_match_exact() {
        let nodes = [node("a", &[], 2.0, 0.25, 0.25, 3.0), node("b", &[], 1.5, 0.5, 0.25, 5.0)];
        let out = schedule_online(
            &nodes,
            3.0,
            &SchedulerOptions::default(),
            OnlinePolicy::GreedyReadyByH,
            &Deterministic,
            1,
        )
        .unwrap();
        assert_eq!(out.schedule.objective, 8.0);
        assert_eq!(out.regret, Some(0.0));
    }

    #[test]
    fn fifo_on_chain_is_optimal() {
        let nodes = [
            node("a", &[], 1.0, 0.25, 0.25, 1.0),
            node("b", &["a"], 1.0, 0.25, 0.25, 2.0),
            node("c", &["b"], 1.0, 0.25, 0.25, 3.0),
        ];
        let opts = SchedulerOptions::default();
        let out = schedule_online(&nodes, 4.5, &opts, OnlinePolicy::Fifo, &Deterministic, 3).unwrap();
        let exact = schedule_exact(&nodes, 4.5, &opts).unwrap();
        assert_eq!(out.schedule, exact);
        assert_eq!(out.schedule.objective, 6.0);
    }

    #[test]
    fn regret_never_negative_and_schedules_feasible() {
        use crate::scheduler::generate::{random_instance, InstanceShape};
        let opts = SchedulerOptions::default();
        for seed in 0..30 {
            let inst = random_instance(seed, InstanceShape::new(6));
            for policy in [OnlinePolicy::GreedyReadyByDensity, OnlinePolicy::GreedyReadyByH, OnlinePolicy::Fifo] {
                let out = schedule_online(&inst.nodes, inst.window_length, &opts, policy, &LogNormalNoise { cv: 0.3 }, seed).unwrap();
                assert!(out.regret.unwrap() >= 0.0);
                let realized: Vec<TaskNode> = inst
                    .nodes
                    .iter()
                    .zip(&out.realized_t_agent)
                    .map(|(n, &t)| TaskNode { t_agent: t, ..n.clone() })
                    .collect();
                validate_schedule(&realized, inst.window_length, &opts, &out.schedule).unwrap();
            }
        }
    }

    #[test]
    fn same_seed_same_outcome() {
        use crate::scheduler::generate::{random_instance, InstanceShape};
        let inst = random_instance(9, InstanceShape::new(5));
        let run = || {
            schedule_online(&inst.nodes, inst.window_length, &SchedulerOptions::default(), OnlinePolicy::Fifo, &LogNormalNoise { cv: 0.2 }, 42).unwrap()
        };
        assert_eq!(run(), run());
    }
}

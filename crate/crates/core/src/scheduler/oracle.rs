//! Exhaustive reference solver.
//!
//! Enumerates every order in which the operator could serve phases, with
//! each phase placed at its earliest feasible start. States with identical
//! futures are solved once. Two states have identical futures when they
//! agree on phases served, tasks credited, operator-free time, and every
//! time that can still delay a phase; a release at or before the
//! operator-free time never delays anything, so it is stored as the
//! operator-free time. There are no bounds and no dominance rules; it
//! exists to check [`super::schedule_exact`].

use std::collections::HashMap;

use super::{assemble, CompletionRule, Instance, PlacedOp, Schedule, SchedulerOptions, TaskNode};
use crate::error::{Error, Result};

pub const ORACLE_LIMIT: usize = 8;

pub fn schedule_oracle(
    nodes: &[TaskNode],
    window_length: f64,
    opts: &SchedulerOptions,
) -> Result<Schedule> {
    if nodes.len() > ORACLE_LIMIT {
        return Err(Error::SizeLimit {
            nodes: nodes.len(),
            limit: ORACLE_LIMIT,
        });
    }
    let inst = Instance::build(nodes, window_length, opts)?;
    let n = inst.len();
    let mut walk = Walk {
        inst: &inst,
        memo: HashMap::new(),
    };
    let mut state = State {
        served: vec![0; n],
        release: vec![0.0; n],
        operator_free: 0.0,
    };
    walk.solve(&state);
    let mut order = Vec::new();
    while let Some(k) = walk.memo[&walk.key(&state)].2 {
        let (op, next) = walk.step(&state, k).expect("memoized move is feasible");
        order.push(op);
        state = next;
    }
    Ok(assemble(&inst, &order))
}

#[derive(Clone)]
struct State {
    served: Vec<usize>,
    /// Release of the next phase while in progress; completion once done.
    release: Vec<f64>,
    operator_free: f64,
}

type Key = (Vec<usize>, Vec<bool>, Vec<u64>, u64);

type Best = (f64, f64, Option<usize>);

struct Walk<'a> {
    inst: &'a Instance,
    memo: HashMap<Key, Best>,
}

impl Walk<'_> {
    fn key(&self, s: &State) -> Key {
        let inst = self.inst;
        let times = (0..inst.len())
            .map(|k| {
                let done = s.served[k] == inst.ops[k].len();
                let waited_on = inst.dependents[k].iter().any(|&d| s.served[d] == 0);
                if s.served[k] == 0 || (done && !waited_on) {
                    0
                } else {
                    s.release[k].max(s.operator_free).to_bits()
                }
            })
            .collect();
        (
            s.served.clone(),
            self.credited(s),
            times,
            s.operator_free.to_bits(),
        )
    }

    fn credited(&self, s: &State) -> Vec<bool> {
        let inst = self.inst;
        (0..inst.len())
            .map(|k| {
                let len = inst.ops[k].len();
                match inst.rule {
                    CompletionRule::ReviewEnd => s.served[k] == len,
                    CompletionRule::AgentComplete => {
                        s.served[k] == len
                            || (s.served[k] == len - 1 && s.release[k] <= inst.window)
                    }
                }
            })
            .collect()
    }

    fn step(&self, s: &State, k: usize) -> Option<(PlacedOp, State)> {
        let inst = self.inst;
        let q = s.served[k];
        if q == inst.ops[k].len() {
            return None;
        }
        let release = if q == 0 {
            let mut r = 0.0f64;
            for &d in &inst.deps[k] {
                if s.served[d] != inst.ops[d].len() {
                    return None;
                }
                r = r.max(s.release[d]);
            }
            r
        } else {
            s.release[k]
        };
        let start = s.operator_free.max(release);
        let end = start + inst.ops[k][q];
        if end > inst.window {
            return None;
        }
        let mut next = s.clone();
        next.operator_free = end;
        next.served[k] = q + 1;
        next.release[k] = if q + 1 == inst.ops[k].len() {
            end
        } else {
            end + inst.segs[k][q]
        };
        Some((PlacedOp { task: k, phase: q, start }, next))
    }

    /// Best final (value, operator hours) reachable from `s`, recording the
    /// first move. Stopping wins ties, then the lowest task index.
    fn solve(&mut self, s: &State) -> (f64, f64) {
        let key = self.key(s);
        if let Some(&(v, t, _)) = self.memo.get(&key) {
            return (v, t);
        }
        let inst = self.inst;
        let mut best: Best = (
            inst.credited_value(&self.credited(s)),
            (0..inst.len())
                .map(|k| inst.ops[k][..s.served[k]].iter().sum::<f64>())
                .sum(),
            None,
        );
        for k in 0..inst.len() {
            let Some((_, next)) = self.step(s, k) else {
                continue;
            };
            let (v, t) = self.solve(&next);
            if v > best.0 || (v == best.0 && t < best.1) {
                best = (v, t, Some(k));
            }
        }
        self.memo.insert(key, best);
        (best.0, best.1)
    }
}

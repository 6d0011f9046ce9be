//! Branch-and-bound over operator phase sequences.
//!
//! Every schedule is determined by the order in which the operator serves
//! phases: each phase starts as early as the operator and its release
//! allow. The search extends that order one phase at a time in task-index
//! order, scores every prefix as a candidate (stopping is always allowed),
//! and prunes with
//!
//! * a fractional-knapsack bound on the hours still creditable, with a
//!   matching lower bound on the operator hours needed to tie the
//!   incumbent, and
//! * dominance between states that have served the same phases and
//!   credited the same tasks: a state whose operator-free time and pending
//!   release times are all no later than another's is at least as good.

use std::collections::HashMap;

use super::{assemble, Instance, PlacedOp, Schedule, SchedulerOptions, TaskNode};
use crate::error::{Error, Result};
use crate::scheduler::CompletionRule;

/// Hard ceiling from the packed state key.
const PACKED_LIMIT: usize = 32;

/// Optimal schedule: most credited displaced hours, then fewest operator
/// hours, then the lexicographically first phase order.
pub fn schedule_exact(
    nodes: &[TaskNode],
    window_length: f64,
    opts: &SchedulerOptions,
) -> Result<Schedule> {
    let limit = opts.exact_limit.min(PACKED_LIMIT);
    if nodes.len() > limit {
        return Err(Error::SizeLimit {
            nodes: nodes.len(),
            limit,
        });
    }
    let inst = Instance::build(nodes, window_length, opts)?;
    let mut search = Search::new(&inst)?;
    search.dfs();
    Ok(assemble(&inst, &search.best_path))
}

struct Search<'a> {
    inst: &'a Instance,
    topo: Vec<usize>,
    stage: Vec<usize>,
    /// Release of the next phase while in progress; completion once done.
    release: Vec<f64>,
    credited: Vec<bool>,
    operator_free: f64,
    path: Vec<PlacedOp>,
    best_value: f64,
    best_t_op: f64,
    best_path: Vec<PlacedOp>,
    eps: f64,
    memo: HashMap<(u128, u64), Vec<Vec<f64>>>,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance) -> Result<Self> {
        let n = inst.len();
        let total_h: f64 = inst.h.iter().sum();
        Ok(Search {
            inst,
            topo: inst.topological_order()?,
            stage: vec![0; n],
            release: vec![0.0; n],
            credited: vec![false; n],
            operator_free: 0.0,
            path: Vec::new(),
            best_value: 0.0,
            best_t_op: 0.0,
            best_path: Vec::new(),
            eps: 1e-9 * (total_h + 1.0),
            memo: HashMap::new(),
        })
    }

    fn done(&self, k: usize) -> bool {
        self.stage[k] == self.inst.ops[k].len()
    }

    /// Operator hours served so far, summed in a path-independent order.
    fn t_op(&self) -> f64 {
        (0..self.inst.len())
            .map(|k| self.inst.ops[k][..self.stage[k]].iter().sum::<f64>())
            .sum()
    }

    fn consider_current(&mut self) {
        let value = self.inst.credited_value(&self.credited);
        let t_op = self.t_op();
        let better = value > self.best_value
            || (value == self.best_value && t_op < self.best_t_op)
            || (value == self.best_value
                && t_op == self.best_t_op
                && tasks_of(&self.path) < tasks_of(&self.best_path));
        if better {
            self.best_value = value;
            self.best_t_op = t_op;
            self.best_path = self.path.clone();
        }
    }

    /// Earliest start of task `k`'s next phase, if it has one available.
    fn next_start(&self, k: usize) -> Option<f64> {
        if self.done(k) {
            return None;
        }
        let release = if self.stage[k] == 0 {
            let mut r = 0.0f64;
            for &d in &self.inst.deps[k] {
                if !self.done(d) {
                    return None;
                }
                r = r.max(self.release[d]);
            }
            r
        } else {
            self.release[k]
        };
        Some(self.operator_free.max(release))
    }

    /// Fractional-knapsack bound on the final value, and a fractional lower
    /// bound on the operator hours still needed to reach the incumbent value.
    fn bounds(&self) -> (f64, f64) {
        let inst = self.inst;
        let w = inst.window;
        let mut completion = vec![f64::INFINITY; inst.len()];
        let mut items: Vec<(f64, f64)> = Vec::new();
        for &k in &self.topo {
            if self.done(k) {
                completion[k] = self.release[k];
                continue;
            }
            let mut t = if self.stage[k] == 0 {
                let dep_done = inst.deps[k]
                    .iter()
                    .map(|&d| completion[d])
                    .fold(0.0f64, f64::max);
                if dep_done.is_infinite() {
                    continue;
                }
                self.operator_free.max(dep_done)
            } else {
                self.operator_free.max(self.release[k])
            };
            let ops = &inst.ops[k];
            let last = ops.len() - 1;
            let credit_phase = match inst.rule {
                CompletionRule::ReviewEnd => last,
                CompletionRule::AgentComplete => inst.last_interrupt_phase(k),
            };
            let mut creditable = false;
            let mut weight = 0.0;
            let mut reached_end = true;
            for (q, &op) in ops.iter().enumerate().skip(self.stage[k]) {
                let end = t + op;
                if end > w {
                    reached_end = false;
                    break;
                }
                if q <= credit_phase {
                    weight += op;
                }
                if q < last {
                    t = end + inst.segs[k][q];
                    if q == credit_phase && t <= w {
                        creditable = true;
                    }
                } else {
                    t = end;
                    if q == credit_phase {
                        creditable = true;
                    }
                }
            }
            if reached_end {
                completion[k] = t;
            }
            if creditable && !self.credited[k] {
                items.push((inst.h[k], weight));
            }
        }
        let current = self.inst.credited_value(&self.credited);
        items.sort_by(|a, b| {
            let ra = if a.1 > 0.0 { a.0 / a.1 } else { f64::INFINITY };
            let rb = if b.1 > 0.0 { b.0 / b.1 } else { f64::INFINITY };
            rb.total_cmp(&ra)
        });
        let mut capacity = (w - self.operator_free).max(0.0);
        let mut bound = current;
        for &(h, weight) in &items {
            if weight <= capacity {
                bound += h;
                capacity -= weight;
            } else {
                bound += h * capacity / weight;
                break;
            }
        }
        let mut missing = self.best_value - current;
        let mut hours = 0.0;
        for &(h, weight) in &items {
            if missing <= self.eps {
                break;
            }
            if h >= missing {
                hours += weight * missing / h;
                missing = 0.0;
            } else {
                hours += weight;
                missing -= h;
            }
        }
        (bound, hours)
    }

    fn key(&self) -> (u128, u64) {
        let mut stages = 0u128;
        let mut mask = 0u64;
        for k in 0..self.inst.len() {
            stages |= (self.stage[k] as u128) << (4 * k);
            if self.credited[k] {
                mask |= 1 << k;
            }
        }
        (stages, mask)
    }

    /// Times that can still influence the future, in a layout fixed by the key.
    fn frontier(&self) -> Vec<f64> {
        let mut v = vec![self.operator_free];
        for k in 0..self.inst.len() {
            let in_flight = self.stage[k] > 0 && !self.done(k);
            let awaited = self.done(k) && self.inst.dependents[k].iter().any(|&d| self.stage[d] == 0);
            if in_flight || awaited {
                v.push(self.release[k]);
            }
        }
        v
    }

    /// True when an already-explored state dominates this one; otherwise
    /// records this state.
    fn dominated(&mut self) -> bool {
        let key = self.key();
        let here = self.frontier();
        let entries = self.memo.entry(key).or_default();
        if entries
            .iter()
            .any(|e| e.iter().zip(&here).all(|(a, b)| a <= b))
        {
            return true;
        }
        entries.retain(|e| !e.iter().zip(&here).all(|(a, b)| b <= a));
        entries.push(here);
        false
    }

    fn dfs(&mut self) {
        self.consider_current();
        // Prefixes are visited in lexicographic order, so a later node must
        // strictly improve on value or operator hours to matter.
        let (bound, hours_needed) = self.bounds();
        if bound + self.eps < self.best_value
            || (bound <= self.best_value + self.eps
                && self.t_op() + hours_needed >= self.best_t_op - self.eps)
        {
            return;
        }
        if self.dominated() {
            return;
        }
        for k in 0..self.inst.len() {
            let Some(start) = self.next_start(k) else {
                continue;
            };
            let q = self.stage[k];
            let end = start + self.inst.ops[k][q];
            if end > self.inst.window {
                continue;
            }
            // apply
            let saved = (self.operator_free, self.release[k], self.credited[k]);
            let last = self.inst.ops[k].len() - 1;
            self.operator_free = end;
            if q < last {
                self.release[k] = end + self.inst.segs[k][q];
                if self.inst.rule == CompletionRule::AgentComplete
                    && q == self.inst.last_interrupt_phase(k)
                    && self.release[k] <= self.inst.window
                {
                    self.credited[k] = true;
                }
            } else {
                self.release[k] = end;
                if self.inst.rule == CompletionRule::ReviewEnd {
                    self.credited[k] = true;
                }
            }
            self.stage[k] += 1;
            self.path.push(PlacedOp {
                task: k,
                phase: q,
                start,
            });
            self.dfs();
            self.path.pop();
            self.stage[k] -= 1;
            (self.operator_free, self.release[k], self.credited[k]) = saved;
        }
    }
}

fn tasks_of(path: &[PlacedOp]) -> Vec<usize> {
    path.iter().map(|p| p.task).collect()
}

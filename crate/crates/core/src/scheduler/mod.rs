//! Dispatch scheduling of dependent tasks for one operator and unlimited
//! agents.
//!
//! Each task is a chain of operator phases (planning, its interrupts,
//! review) separated by agent work. The operator serves one phase at a time
//! without preemption; agents run concurrently. A task may start planning
//! only once every dependency has been reviewed. The objective is the
//! displaced hours of tasks that complete inside the window; the achieved
//! windowed leverage is reported alongside.

mod exact;
pub mod generate;
mod online;
mod oracle;
mod validate;

use serde::{Deserialize, Serialize};

use crate::conservation::PhaseTimes;
use crate::density;
use crate::error::{Error, Result};
use crate::window::{OperatorBreakdown, WindowResult};

pub use exact::schedule_exact;
pub use online::{
    schedule_online, Deterministic, DurationSampler, LogNormalNoise, OnlineOutcome, OnlinePolicy,
};
pub use oracle::{schedule_oracle, ORACLE_LIMIT};
pub use validate::validate_schedule;

pub const DEFAULT_EXACT_LIMIT: usize = 16;
/// Operator phases per task, including planning and review.
pub const MAX_PHASES_PER_TASK: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskNode {
    pub id: String,
    #[serde(default)]
    pub deps: Vec<String>,
    pub t_agent: f64,
    pub operator_cost: PhaseTimes,
    pub h_displaced: f64,
}

/// When a task counts toward the window numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionRule {
    /// Its review ends inside the window.
    #[default]
    ReviewEnd,
    /// Its agent run ends inside the window, reviewed or not.
    AgentComplete,
}

/// Where interrupts fall within an agent run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptArrival {
    /// All interrupts are raised back to back at the run's midpoint.
    #[default]
    Midpoint,
    /// Interrupt `j` of `n` is raised after `(j + 1) / (n + 1)` of the run.
    EvenlySpaced,
}

impl InterruptArrival {
    /// Agent work before, between and after the interrupts: `n + 1`
    /// segments summing to `t_agent`.
    pub fn segments(self, t_agent: f64, n_interrupts: usize) -> Vec<f64> {
        if n_interrupts == 0 {
            return vec![t_agent];
        }
        match self {
            InterruptArrival::Midpoint => {
                let mut segs = vec![0.0; n_interrupts + 1];
                segs[0] = t_agent / 2.0;
                segs[n_interrupts] = t_agent - t_agent / 2.0;
                segs
            }
            InterruptArrival::EvenlySpaced => {
                vec![t_agent / (n_interrupts as f64 + 1.0); n_interrupts + 1]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerOptions {
    #[serde(default)]
    pub completion: CompletionRule,
    #[serde(default)]
    pub arrival: InterruptArrival,
    #[serde(default = "default_exact_limit")]
    pub exact_limit: usize,
}

fn default_exact_limit() -> usize {
    DEFAULT_EXACT_LIMIT
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        SchedulerOptions {
            completion: CompletionRule::default(),
            arrival: InterruptArrival::default(),
            exact_limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePhase {
    Planning,
    Interrupt,
    Review,
    Agent,
}

impl SchedulePhase {
    pub fn is_operator(self) -> bool {
        self != SchedulePhase::Agent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub task: String,
    pub phase: SchedulePhase,
    /// Interrupt number or agent segment number; 0 otherwise.
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDispatch {
    pub task: String,
    /// Agent launch time (end of planning).
    pub dispatch_time: f64,
    pub credited: bool,
    /// Credit time under the completion rule, when reached.
    pub completed_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub window_length: f64,
    pub completion: CompletionRule,
    /// Displaced hours of credited tasks.
    pub objective: f64,
    pub dispatches: Vec<TaskDispatch>,
    pub intervals: Vec<PhaseInterval>,
    pub result: WindowResult,
    pub feasible: bool,
}

impl Schedule {
    pub fn dispatch_time(&self, task: &str) -> Option<f64> {
        self.dispatches
            .iter()
            .find(|d| d.task == task)
            .map(|d| d.dispatch_time)
    }

    /// Plot-ready Gantt rows: `task,resource,phase,index,start,end`.
    pub fn gantt_csv(&self) -> String {
        let mut out = String::from("task,resource,phase,index,start,end\n");
        for iv in &self.intervals {
            let resource = if iv.phase.is_operator() { "operator" } else { "agent" };
            let phase = match iv.phase {
                SchedulePhase::Planning => "planning",
                SchedulePhase::Interrupt => "interrupt",
                SchedulePhase::Review => "review",
                SchedulePhase::Agent => "agent",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                iv.task, resource, phase, iv.index, iv.start, iv.end
            ));
        }
        out
    }
}

/// Index-based view of a validated instance.
#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub ids: Vec<String>,
    pub deps: Vec<Vec<usize>>,
    pub dependents: Vec<Vec<usize>>,
    pub h: Vec<f64>,
    /// Operator phase durations: planning, interrupts, review.
    pub ops: Vec<Vec<f64>>,
    /// Agent work after operator phase `q`, for `q` up to the last interrupt.
    pub segs: Vec<Vec<f64>>,
    pub window: f64,
    pub rule: CompletionRule,
}

impl Instance {
    pub fn build(nodes: &[TaskNode], window: f64, opts: &SchedulerOptions) -> Result<Self> {
        density::non_negative("window_length", window)?;
        let index: std::collections::HashMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        if index.len() != nodes.len() {
            return Err(Error::InvalidParameter("duplicate task ids".into()));
        }
        let mut deps = Vec::with_capacity(nodes.len());
        for node in nodes {
            density::non_negative("t_agent", node.t_agent)?;
            density::non_negative("h_displaced", node.h_displaced)?;
            node.operator_cost.validate()?;
            if node.operator_cost.t_interrupts.len() + 2 > MAX_PHASES_PER_TASK {
                return Err(Error::InvalidParameter(format!(
                    "task `{}` has more than {} interrupts",
                    node.id,
                    MAX_PHASES_PER_TASK - 2
                )));
            }
            let mut d = Vec::new();
            for dep in &node.deps {
                let &j = index.get(dep.as_str()).ok_or_else(|| {
                    Error::InvalidParameter(format!("task `{}` depends on unknown `{dep}`", node.id))
                })?;
                if !d.contains(&j) {
                    d.push(j);
                }
            }
            deps.push(d);
        }
        let mut dependents = vec![Vec::new(); nodes.len()];
        for (k, d) in deps.iter().enumerate() {
            for &j in d {
                dependents[j].push(k);
            }
        }
        let inst = Instance {
            ids: nodes.iter().map(|n| n.id.clone()).collect(),
            deps,
            dependents,
            h: nodes.iter().map(|n| n.h_displaced).collect(),
            ops: nodes
                .iter()
                .map(|n| {
                    let c = &n.operator_cost;
                    std::iter::once(c.t_planning)
                        .chain(c.t_interrupts.iter().copied())
                        .chain(std::iter::once(c.t_review))
                        .collect()
                })
                .collect(),
            segs: nodes
                .iter()
                .map(|n| opts.arrival.segments(n.t_agent, n.operator_cost.t_interrupts.len()))
                .collect(),
            window,
            rule: opts.completion,
        };
        inst.topological_order()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Index of the operator phase whose end, plus the last agent segment,
    /// is the agent completion.
    pub fn last_interrupt_phase(&self, k: usize) -> usize {
        self.ops[k].len() - 2
    }

    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.deps.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&k| indeg[k] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(k) = ready.pop_first() {
            order.push(k);
            for &d in &self.dependents[k] {
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    ready.insert(d);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&k| indeg[k] > 0).unwrap_or(0);
            return Err(Error::DependencyCycle(self.ids[stuck].clone()));
        }
        Ok(order)
    }

    /// Objective of a credited set, summed in index order.
    pub fn credited_value(&self, credited: &[bool]) -> f64 {
        self.h
            .iter()
            .zip(credited)
            .filter(|(_, &c)| c)
            .map(|(h, _)| h)
            .sum()
    }
}

/// An operator phase placed in time; the common currency of the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PlacedOp {
    pub task: usize,
    pub phase: usize,
    pub start: f64,
}

/// Turns a sequence of placed operator phases into a reported schedule.
pub(crate) fn assemble(inst: &Instance, placed: &[PlacedOp]) -> Schedule {
    let n = inst.len();
    let mut intervals = Vec::new();
    let mut dispatch_time: Vec<Option<f64>> = vec![None; n];
    let mut credit: Vec<Option<f64>> = vec![None; n];
    let mut breakdown = OperatorBreakdown::default();
    let mut agent_runs: Vec<(f64, f64)> = Vec::new();
    for op in placed {
        let k = op.task;
        let q = op.phase;
        let dur = inst.ops[k][q];
        let end = op.start + dur;
        let last = inst.ops[k].len() - 1;
        let (phase, index) = if q == 0 {
            (SchedulePhase::Planning, 0)
        } else if q == last {
            (SchedulePhase::Review, 0)
        } else {
            (SchedulePhase::Interrupt, q - 1)
        };
        match phase {
            SchedulePhase::Planning => breakdown.planning += dur,
            SchedulePhase::Review => breakdown.review += dur,
            _ => breakdown.interrupts += dur,
        }
        intervals.push(PhaseInterval {
            task: inst.ids[k].clone(),
            phase,
            index,
            start: op.start,
            end,
        });
        if q == 0 {
            dispatch_time[k] = Some(end);
        }
        if q < last {
            let seg = inst.segs[k][q];
            intervals.push(PhaseInterval {
                task: inst.ids[k].clone(),
                phase: SchedulePhase::Agent,
                index: q,
                start: end,
                end: end + seg,
            });
            if seg > 0.0 {
                agent_runs.push((end, end + seg));
            }
            if q == inst.last_interrupt_phase(k)
                && inst.rule == CompletionRule::AgentComplete
                && end + seg <= inst.window
            {
                credit[k] = Some(end + seg);
            }
        } else if inst.rule == CompletionRule::ReviewEnd && end <= inst.window {
            credit[k] = Some(end);
        }
    }
    let credited: Vec<bool> = credit.iter().map(Option::is_some).collect();
    let objective = inst.credited_value(&credited);
    let t_operator = breakdown.total();
    let dispatches = (0..n)
        .filter_map(|k| {
            dispatch_time[k].map(|t| TaskDispatch {
                task: inst.ids[k].clone(),
                dispatch_time: t,
                credited: credited[k],
                completed_at: credit[k],
            })
        })
        .collect();
    let result = WindowResult {
        l_window: if t_operator > 0.0 { objective / t_operator } else { 0.0 },
        total_h_displaced: objective,
        t_operator,
        task_count: credited.iter().filter(|&&c| c).count(),
        peak_concurrency: peak_overlap(&agent_runs),
        breakdown,
        planning_stock_ratio: None,
    };
    Schedule {
        window_length: inst.window,
        completion: inst.rule,
        objective,
        dispatches,
        intervals,
        result,
        feasible: true,
    }
}

/// Peak number of agents running at once. Stalls on interrupts split a run
/// into segments, which are counted separately.
fn peak_overlap(runs: &[(f64, f64)]) -> usize {
    let mut edges: Vec<(f64, i32)> = runs
        .iter()
        .flat_map(|&(s, e)| [(s, 1), (e, -1)])
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut live = 0;
    let mut peak = 0;
    for (_, d) in edges {
        live += d;
        peak = peak.max(live);
    }
    peak as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_sum_to_run_length() {
        for arrival in [InterruptArrival::Midpoint, InterruptArrival::EvenlySpaced] {
            for n in 0..4 {
                let segs = arrival.segments(3.0, n);
                assert_eq!(segs.len(), n + 1);
                assert!((segs.iter().sum::<f64>() - 3.0).abs() < 1e-12);
            }
        }
        assert_eq!(InterruptArrival::Midpoint.segments(2.0, 2), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn cycles_and_unknown_deps_rejected() {
        let node = |id: &str, deps: &[&str]| TaskNode {
            id: id.into(),
            deps: deps.iter().map(|s| s.to_string()).collect(),
            t_agent: 1.0,
            operator_cost: PhaseTimes::default(),
            h_displaced: 1.0,
        };
        let opts = SchedulerOptions::default();
        let cyc = [node("a", &["b"]), node("b", &["a"])];
        assert!(matches!(
            Instance::build(&cyc, 5.0, &opts),
            Err(Error::DependencyCycle(_))
        ));
        let unknown = [node("a", &["zz"])];
        assert!(Instance::build(&unknown, 5.0, &opts).is_err());
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conservation::{ChannelAllocation, PhaseTimes};
use crate::error::{Error, Result};
use crate::window::{
    OperatorBreakdown, OperatorPhase, OperatorSpan, TaskInformation, TaskOutcome, WindowResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    PlanningStart {
        template: String,
        domain: String,
        /// Memory the task sees.
        m: f64,
        h_displaced: f64,
        i_task: f64,
        i_novel: f64,
        bits: f64,
    },
    /// Planning ends and the agent starts on `agent_hours` of work.
    Dispatch {
        agent_hours: f64,
    },
    InterruptStart {
        j: usize,
        bits: f64,
    },
    InterruptEnd {
        j: usize,
        bits: f64,
    },
    AgentComplete,
    ReviewStart {
        bits: f64,
    },
    ReviewEnd {
        bits: f64,
    },
    MemoryUpdate {
        domain: String,
        m: f64,
    },
    /// The task could not finish before the horizon.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub task: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkflowTrace {
    pub events: Vec<EventRecord>,
}

impl WorkflowTrace {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(line).map_err(|err| Error::Parse {
                line: i + 1,
                message: err.to_string(),
            })?;
            events.push(e);
        }
        Ok(WorkflowTrace { events })
    }

    pub fn truncated_tasks(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter(|e| e.event == Event::Truncated)
            .map(|e| e.task.as_str())
            .collect()
    }
}

#[derive(Default)]
struct Partial {
    planning_start: Option<f64>,
    h_displaced: f64,
    i_task: f64,
    i_novel: f64,
    planning_bits: f64,
    dispatch: Option<f64>,
    /// (start, end, bits) per interrupt; `end` is `None` while open.
    interrupts: Vec<(f64, Option<f64>, f64)>,
    agent_complete: Option<f64>,
    review_start: Option<(f64, f64)>,
    closed: bool,
}

/// Completed runs, in completion order. Truncated tasks are omitted.
pub fn trace_to_ledger(trace: &WorkflowTrace) -> Result<Vec<TaskOutcome>> {
    let mut tasks: BTreeMap<&str, Partial> = BTreeMap::new();
    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (index, rec) in trace.events.iter().enumerate() {
        let bad = |reason: &str| Error::MalformedTrace {
            index,
            reason: format!("task `{}`: {reason}", rec.task),
        };
        if !rec.t.is_finite() {
            return Err(bad("non-finite time"));
        }
        if rec.t < last_t {
            return Err(bad("event out of time order"));
        }
        last_t = rec.t;
        let p = tasks.entry(rec.task.as_str()).or_default();
        if p.closed && !matches!(rec.event, Event::MemoryUpdate { .. }) {
            return Err(bad("event after the task was reviewed or truncated"));
        }
        match &rec.event {
            Event::PlanningStart {
                h_displaced,
                i_task,
                i_novel,
                bits,
                ..
            } => {
                if p.planning_start.is_some() {
                    return Err(bad("planning started twice"));
                }
                p.planning_start = Some(rec.t);
                p.h_displaced = *h_displaced;
                p.i_task = *i_task;
                p.i_novel = *i_novel;
                p.planning_bits = *bits;
            }
            Event::Dispatch { .. } => {
                if p.planning_start.is_none() || p.dispatch.is_some() {
                    return Err(bad("dispatch without a single preceding planning start"));
                }
                p.dispatch = Some(rec.t);
            }
            Event::InterruptStart { j, bits } => {
                if p.dispatch.is_none() || p.agent_complete.is_some() {
                    return Err(bad("interrupt outside the agent run"));
                }
                if *j != p.interrupts.len() || p.interrupts.last().is_some_and(|i| i.1.is_none()) {
                    return Err(bad("interrupt out of sequence"));
                }
                p.interrupts.push((rec.t, None, *bits));
            }
            Event::InterruptEnd { j, .. } => {
                let count = p.interrupts.len();
                match p.interrupts.last_mut() {
                    Some(open) if open.1.is_none() && *j + 1 == count => open.1 = Some(rec.t),
                    _ => return Err(bad("interrupt end without a matching start")),
                }
            }
            Event::AgentComplete => {
                if p.dispatch.is_none() || p.agent_complete.is_some() {
                    return Err(bad("agent completion without a single dispatch"));
                }
                if p.interrupts.last().is_some_and(|i| i.1.is_none()) {
                    return Err(bad("agent completed during an open interrupt"));
                }
                p.agent_complete = Some(rec.t);
            }
            Event::ReviewStart { bits } => {
                if p.agent_complete.is_none() || p.review_start.is_some() {
                    return Err(bad("review before the agent completed"));
                }
                p.review_start = Some((rec.t, *bits));
            }
            Event::ReviewEnd { .. } => {
                let Some((review_start, review_bits)) = p.review_start else {
                    return Err(bad("review end without a start"));
                };
                let planning_start = p.planning_start.expect("checked at dispatch");
                let dispatch = p.dispatch.expect("checked at agent completion");
                let agent_complete = p.agent_complete.expect("checked at review start");
                let mut spans = vec![OperatorSpan {
                    phase: OperatorPhase::Planning,
                    start: planning_start,
                    end: dispatch,
                }];
                let mut t_interrupts = Vec::new();
                let mut i_interrupts = Vec::new();
                for &(s, e, bits) in &p.interrupts {
                    let e = e.expect("closed before agent completion");
                    spans.push(OperatorSpan {
                        phase: OperatorPhase::Interrupt,
                        start: s,
                        end: e,
                    });
                    t_interrupts.push(e - s);
                    i_interrupts.push(bits);
                }
                spans.push(OperatorSpan {
                    phase: OperatorPhase::Review,
                    start: review_start,
                    end: rec.t,
                });
                let mut o = TaskOutcome::new(
                    rec.task.clone(),
                    p.h_displaced,
                    PhaseTimes {
                        t_planning: dispatch - planning_start,
                        t_interrupts,
                        t_review: rec.t - review_start,
                    },
                    agent_complete - dispatch,
                    rec.t,
                );
                o.agent_started_at = Some(dispatch);
                o.operator_spans = spans;
                o.information = Some(TaskInformation {
                    i_task: p.i_task,
                    i_novel: p.i_novel,
                    channels: ChannelAllocation {
                        i_planning: p.planning_bits,
                        i_interrupts,
                        i_review: review_bits,
                    },
                });
                p.closed = true;
                out.push(o);
            }
            Event::MemoryUpdate { .. } => {}
            Event::Truncated => p.closed = true,
        }
    }
    Ok(out)
}

/// Windowed leverage over `(t0, t1]` computed straight from events, over
/// the tasks whose review ends within the trace.
pub fn window_from_trace(trace: &WorkflowTrace, t0: f64, t1: f64) -> Result<WindowResult> {
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "window end {t1} must exceed window start {t0}"
        )));
    }
    let reviewed: std::collections::HashSet<&str> = trace
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::ReviewEnd { .. }))
        .map(|e| e.task.as_str())
        .collect();
    let overlap = |s: f64, e: f64, a: f64, b: f64| (e.min(b) - s.max(a)).max(0.0);
    let mut open: BTreeMap<&str, f64> = BTreeMap::new();
    let mut h: BTreeMap<&str, f64> = BTreeMap::new();
    let mut dispatched: BTreeMap<&str, f64> = BTreeMap::new();
    let mut breakdown = OperatorBreakdown::default();
    let mut before = 0.0;
    let mut total_h = 0.0;
    let mut task_count = 0;
    let mut agent_edges: Vec<(f64, i32)> = Vec::new();
    for rec in trace.events.iter().filter(|e| reviewed.contains(e.task.as_str())) {
        let task = rec.task.as_str();
        match &rec.event {
            Event::PlanningStart { h_displaced, .. } => {
                open.insert(task, rec.t);
                h.insert(task, *h_displaced);
            }
            Event::InterruptStart { .. } | Event::ReviewStart { .. } => {
                open.insert(task, rec.t);
            }
            Event::Dispatch { .. } | Event::InterruptEnd { .. } | Event::ReviewEnd { .. } => {
                let s = open.remove(task).unwrap_or(rec.t);
                let inside = overlap(s, rec.t, t0, t1);
                match rec.event {
                    Event::Dispatch { .. } => {
                        breakdown.planning += inside;
                        before += overlap(s, rec.t, f64::NEG_INFINITY, t0);
                        dispatched.insert(task, rec.t);
                    }
                    Event::InterruptEnd { .. } => breakdown.interrupts += inside,
                    _ => {
                        breakdown.review += inside;
                        if rec.t > t0 && rec.t <= t1 {
                            total_h += h.get(task).copied().unwrap_or(0.0);
                            task_count += 1;
                        }
                    }
                }
            }
            Event::AgentComplete => {
                if let Some(&s) = dispatched.get(task) {
                    let (a, b) = (s.max(t0), rec.t.min(t1));
                    if b > a {
                        agent_edges.push((a, 1));
                        agent_edges.push((b, -1));
                    }
                }
            }
            Event::MemoryUpdate { .. } | Event::Truncated => {}
        }
    }
    let t_operator = breakdown.total();
    if t_operator <= 0.0 {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    agent_edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut live = 0i32;
    let mut peak = 0i32;
    for (_, d) in agent_edges {
        live += d;
        peak = peak.max(live);
    }
    Ok(WindowResult {
        l_window: total_h / t_operator,
        total_h_displaced: total_h,
        t_operator,
        task_count,
        peak_concurrency: peak as usize,
        breakdown,
        planning_stock_ratio: (before > 0.0).then(|| total_h / before),
    })
}

//! Windowed leverage over a ledger of completed task runs.
//!
//! The window numerator counts tasks *completed* in `(t0, t1]`; the
//! denominator counts operator hours *spent* in the window. Hours carry
//! optional spans: when present they are attributed by overlap with the
//! window, otherwise all of a run's hours land at its completion time.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::conservation::{ChannelAllocation, PhaseTimes};
use crate::density;
use crate::error::{Error, Result};
use crate::memory::{DensityModel, MemoryState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceSpec {
    pub n_runs: u32,
    pub t_planning_once: f64,
    pub maint_rate: f64,
}

impl RecurrenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs < 1 {
            return Err(Error::InvalidParameter("n_runs must be at least 1".into()));
        }
        density::non_negative("t_planning_once", self.t_planning_once)?;
        density::non_negative("maint_rate", self.maint_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorPhase {
    Planning,
    Interrupt,
    Review,
    Maintenance,
    SystemDesign,
}

/// An interval of operator time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpan {
    pub phase: OperatorPhase,
    pub start: f64,
    pub end: f64,
}

impl OperatorSpan {
    pub fn hours(&self) -> f64 {
        self.end - self.start
    }

    pub fn overlap(&self, t0: f64, t1: f64) -> f64 {
        (self.end.min(t1) - self.start.max(t0)).max(0.0)
    }
}

/// Bit-level accounting carried alongside an outcome, when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInformation {
    pub i_task: f64,
    pub i_novel: f64,
    pub channels: ChannelAllocation,
}

/// One completed task run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskOutcome {
    pub task_id: String,
    pub h_displaced: f64,
    pub operator_hours: PhaseTimes,
    pub t_agent: f64,
    pub completed_at: f64,
    #[serde(default)]
    pub recurrence: Option<RecurrenceSpec>,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub system_design_hours: f64,
    /// Drift upkeep on a recurring run, booked apart from planning.
    #[serde(default)]
    pub maintenance_hours: f64,
    #[serde(default)]
    pub agent_started_at: Option<f64>,
    #[serde(default)]
    pub operator_spans: Vec<OperatorSpan>,
    #[serde(default)]
    pub information: Option<TaskInformation>,
}

impl TaskOutcome {
    /// A run with phase hours only; the remaining fields take defaults.
    pub fn new(
        task_id: impl Into<String>,
        h_displaced: f64,
        operator_hours: PhaseTimes,
        t_agent: f64,
        completed_at: f64,
    ) -> Self {
        TaskOutcome {
            task_id: task_id.into(),
            h_displaced,
            operator_hours,
            t_agent,
            completed_at,
            recurrence: None,
            parent: None,
            system_design_hours: 0.0,
            maintenance_hours: 0.0,
            agent_started_at: None,
            operator_spans: Vec::new(),
            information: None,
        }
    }

    /// Upstream investment: no displacement, `hours` of operator time.
    pub fn system_design(task_id: impl Into<String>, hours: f64, completed_at: f64) -> Self {
        let mut out = Self::new(task_id, 0.0, PhaseTimes::default(), 0.0, completed_at);
        out.system_design_hours = hours;
        out
    }

    pub fn operator_total(&self) -> f64 {
        self.operator_hours.total() + self.maintenance_hours + self.system_design_hours
    }

    /// First failing field and the reason.
    pub fn check_fields(&self) -> std::result::Result<(), (&'static str, String)> {
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err((name, format!("must be a finite non-negative number, got {v}")))
            }
        };
        nonneg("h_displaced", self.h_displaced)?;
        nonneg("operator_hours.t_planning", self.operator_hours.t_planning)?;
        for &t in &self.operator_hours.t_interrupts {
            nonneg("operator_hours.t_interrupts", t)?;
        }
        nonneg("operator_hours.t_review", self.operator_hours.t_review)?;
        nonneg("t_agent", self.t_agent)?;
        if !self.completed_at.is_finite() {
            return Err(("completed_at", "must be finite".into()));
        }
        nonneg("system_design_hours", self.system_design_hours)?;
        nonneg("maintenance_hours", self.maintenance_hours)?;
        if let Some(rec) = &self.recurrence {
            if rec.n_runs < 1 {
                return Err(("recurrence.n_runs", "must be at least 1".into()));
            }
            nonneg("recurrence.t_planning_once", rec.t_planning_once)?;
            nonneg("recurrence.maint_rate", rec.maint_rate)?;
        }
        for span in &self.operator_spans {
            if !(span.end >= span.start) {
                return Err(("operator_spans", "span ends before it starts".into()));
            }
        }
        if !self.operator_spans.is_empty() {
            let spanned: f64 = self.operator_spans.iter().map(OperatorSpan::hours).sum();
            let total = self.operator_total();
            if (spanned - total).abs() > 1e-9 * total.max(1.0) {
                return Err((
                    "operator_spans",
                    format!("spans cover {spanned} h but the run books {total} h"),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_fields().map_err(|(field, message)| {
            Error::InvalidParameter(format!("task `{}`: {field} {message}", self.task_id))
        })
    }

    /// Wall-clock interval of the agent run.
    pub fn agent_interval(&self) -> (f64, f64) {
        let start = self
            .agent_started_at
            .unwrap_or(self.completed_at - self.operator_hours.t_review - self.t_agent);
        (start, start + self.t_agent)
    }

    /// Operator hours this run spent inside `[t0, t1]`.
    pub fn hours_in(&self, t0: f64, t1: f64) -> OperatorBreakdown {
        let mut b = OperatorBreakdown::default();
        if self.operator_spans.is_empty() {
            if in_window(self.completed_at, t0, t1) {
                b.planning = self.operator_hours.t_planning;
                b.interrupts = self.operator_hours.interrupt_total();
                b.review = self.operator_hours.t_review;
                b.maintenance = self.maintenance_hours;
                b.system_design = self.system_design_hours;
            }
        } else {
            for span in &self.operator_spans {
                *b.slot(span.phase) += span.overlap(t0, t1);
            }
        }
        b
    }
}

fn in_window(t: f64, t0: f64, t1: f64) -> bool {
    t > t0 && t <= t1
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatorBreakdown {
    pub planning: f64,
    pub interrupts: f64,
    pub review: f64,
    pub maintenance: f64,
    pub system_design: f64,
}

impl OperatorBreakdown {
    fn slot(&mut self, phase: OperatorPhase) -> &mut f64 {
        match phase {
            OperatorPhase::Planning => &mut self.planning,
            OperatorPhase::Interrupt => &mut self.interrupts,
            OperatorPhase::Review => &mut self.review,
            OperatorPhase::Maintenance => &mut self.maintenance,
            OperatorPhase::SystemDesign => &mut self.system_design,
        }
    }

    pub fn total(&self) -> f64 {
        self.planning + self.interrupts + self.review + self.maintenance + self.system_design
    }

    fn add(&mut self, other: &OperatorBreakdown) {
        self.planning += other.planning;
        self.interrupts += other.interrupts;
        self.review += other.review;
        self.maintenance += other.maintenance;
        self.system_design += other.system_design;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub l_window: f64,
    pub total_h_displaced: f64,
    pub t_operator: f64,
    pub task_count: usize,
    pub peak_concurrency: usize,
    pub breakdown: OperatorBreakdown,
    /// In-window displaced hours over the planning and system-design hours
    /// booked before the window opened. `None` when nothing was booked.
    pub planning_stock_ratio: Option<f64>,
}

/// Windowed leverage over `(t0, t1]`.
pub fn window_leverage(ledger: &[TaskOutcome], t0: f64, t1: f64) -> Result<WindowResult> {
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "window end {t1} must exceed window start {t0}"
        )));
    }
    validate_ledger(ledger)?;
    let mut breakdown = OperatorBreakdown::default();
    let mut total_h = 0.0;
    let mut task_count = 0;
    let mut stock = 0.0;
    for outcome in ledger {
        breakdown.add(&outcome.hours_in(t0, t1));
        if in_window(outcome.completed_at, t0, t1) {
            total_h += outcome.h_displaced;
            task_count += 1;
        }
        let before = outcome.hours_in(f64::NEG_INFINITY, t0);
        stock += before.planning + before.system_design;
    }
    let t_operator = breakdown.total();
    if t_operator <= 0.0 {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    Ok(WindowResult {
        l_window: total_h / t_operator,
        total_h_displaced: total_h,
        t_operator,
        task_count,
        peak_concurrency: peak_concurrency(ledger, t0, t1),
        breakdown,
        planning_stock_ratio: (stock > 0.0).then(|| total_h / stock),
    })
}

/// Most agent runs overlapping at any instant inside the window.
pub fn peak_concurrency(ledger: &[TaskOutcome], t0: f64, t1: f64) -> usize {
    let mut edges: Vec<(f64, i32)> = Vec::new();
    for o in ledger.iter().filter(|o| o.t_agent > 0.0) {
        let (s, e) = o.agent_interval();
        let (s, e) = (s.max(t0), e.min(t1));
        if e > s {
            edges.push((s, 1));
            edges.push((e, -1));
        }
    }
    // Ends sort before starts at the same instant: touching runs do not overlap.
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut live = 0i32;
    let mut peak = 0i32;
    for (_, d) in edges {
        live += d;
        peak = peak.max(live);
    }
    peak as usize
}

/// Field checks on every run plus acyclic spawn links.
pub fn validate_ledger(ledger: &[TaskOutcome]) -> Result<()> {
    for o in ledger {
        o.validate()?;
    }
    let parents: HashMap<&str, &str> = ledger
        .iter()
        .filter_map(|o| o.parent.as_deref().map(|p| (o.task_id.as_str(), p)))
        .collect();
    for start in parents.keys() {
        let mut seen = HashSet::new();
        let mut cur = *start;
        while let Some(&p) = parents.get(cur) {
            if !seen.insert(cur) {
                return Err(Error::SpawnCycle(cur.to_string()));
            }
            cur = p;
        }
    }
    Ok(())
}

/// Displaced hours contributed in `(t0, t1]` by `root` and every task
/// spawned beneath it. Each run counts once.
pub fn tree_contribution(ledger: &[TaskOutcome], root: &str, t0: f64, t1: f64) -> Result<f64> {
    validate_ledger(ledger)?;
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for o in ledger {
        if let Some(p) = &o.parent {
            children.entry(p.as_str()).or_default().push(o.task_id.as_str());
        }
    }
    let mut members = HashSet::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if members.insert(id) {
            stack.extend(children.get(id).into_iter().flatten().copied());
        }
    }
    Ok(ledger
        .iter()
        .filter(|o| members.contains(o.task_id.as_str()) && in_window(o.completed_at, t0, t1))
        .map(|o| o.h_displaced)
        .sum())
}

/// Per-run planning cost of a recurring task: `t_planning_once / N + maint_rate`.
pub fn amortized_planning_per_run(rec: &RecurrenceSpec) -> Result<f64> {
    rec.validate()?;
    Ok(rec.t_planning_once / f64::from(rec.n_runs) + rec.maint_rate)
}

/// Effective per-run leverage of a recurring task whose runs each also
/// cost `per_run_hours` of interrupt and review time.
pub fn recurring_run_leverage(h_run: f64, rec: &RecurrenceSpec, per_run_hours: f64) -> Result<f64> {
    density::non_negative("h_run", h_run)?;
    density::non_negative("per_run_hours", per_run_hours)?;
    let denom = amortized_planning_per_run(rec)? + per_run_hours;
    if denom <= 0.0 {
        return Err(Error::UndefinedLeverage);
    }
    Ok(h_run / denom)
}

/// Ledger entries for the `n_runs` runs of a recurring task, one every
/// `period` hours from `first_completion`. The first run carries the
/// one-time planning; later runs carry no planning and `maint_rate` of
/// maintenance. Every run carries `per_run` interrupt and review hours.
pub fn recurring_outcomes(
    task_id: &str,
    h_run: f64,
    rec: &RecurrenceSpec,
    per_run: &PhaseTimes,
    t_agent: f64,
    first_completion: f64,
    period: f64,
) -> Result<Vec<TaskOutcome>> {
    rec.validate()?;
    density::non_negative("period", period)?;
    Ok((0..rec.n_runs)
        .map(|run| {
            let mut hours = per_run.clone();
            hours.t_planning = if run == 0 { rec.t_planning_once } else { 0.0 };
            let mut o = TaskOutcome::new(
                format!("{task_id}#{}", run + 1),
                h_run,
                hours,
                t_agent,
                first_completion + f64::from(run) * period,
            );
            o.recurrence = Some(rec.clone());
            if run > 0 {
                o.maintenance_hours = rec.maint_rate;
            }
            o
        })
        .collect())
}

/// Planning hours a spawned child pays for its residual novel bits, at the
/// densities of the memory it inherits from its parent.
pub fn child_planning_cost(
    parent_m: &MemoryState,
    residual_novel_bits: f64,
    alpha_p: f64,
    model: &DensityModel,
) -> Result<f64> {
    density::non_negative("residual_novel_bits", residual_novel_bits)?;
    let rates = model.rates_at(parent_m.m)?;
    let rho = density::effective_density(alpha_p, &rates)?;
    Ok(residual_novel_bits / rho)
}

/// Displaced hours per hour of agent wall-clock.
pub fn efficiency_task(h_displaced: f64, t_agent: f64) -> Result<f64> {
    density::non_negative("h_displaced", h_displaced)?;
    density::positive("t_agent", t_agent)?;
    Ok(h_displaced / t_agent)
}

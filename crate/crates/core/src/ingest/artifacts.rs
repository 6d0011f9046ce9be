use serde::{Deserialize, Serialize};

use crate::conservation::{
    check_conservation, enforce, leverage_task, ConservationMode, ConservationVerdict,
    DEFAULT_CONSERVATION_TOLERANCE,
};
use crate::density::{effective_density, DEFAULT_RHO_IN_MAX};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::{
    repeat_asymmetry_experiment, run_asymmetry_experiment, run_memory_transfer_experiment,
    AsymmetryOptions, EffectTable, TransferTable, Verdict,
};
use crate::memory::{geometric_grid, limit_profile, task_ceiling};
use crate::scheduler::{schedule_exact, schedule_oracle, Schedule};
use crate::window::{efficiency_task, window_leverage, TaskOutcome, WindowResult};

use super::scenario::ScenarioConfig;

pub const ALPHA_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub l_task: Option<f64>,
    pub e_task: Option<f64>,
    pub conservation: Option<ConservationVerdict>,
    pub l_max: Option<f64>,
    /// `l_max - l_task`.
    pub ceiling_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub t0: f64,
    pub t1: f64,
    pub result: Option<WindowResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub m: f64,
    pub alpha: f64,
    pub rho_eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub m: f64,
    pub t_planning: f64,
    pub t_interrupts: f64,
    pub t_review: f64,
    pub planning_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    /// Effective density against alpha at zero memory and at the model's
    /// characteristic memory.
    pub density: Vec<DensityPoint>,
    /// Template whose phase times are traced against memory.
    pub template: String,
    pub phases: Vec<PhasePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub rho_in_max: f64,
    pub tasks: Vec<TaskReport>,
    pub windows: Vec<WindowReport>,
    pub warnings: Vec<String>,
    pub plots: Option<PlotSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub instance: String,
    pub schedule: Schedule,
    pub oracle_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub tables: Vec<EffectTable>,
    pub supports: usize,
    pub refutes: usize,
    pub inconclusive: usize,
    pub null_model: Option<EffectTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDoc {
    pub seed: u64,
    pub asymmetry: Option<AsymmetryReport>,
    pub transfer: Vec<TransferTable>,
}

/// Every JSON document the command line writes.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "artifact", rename_all = "snake_case")]
pub enum Artifact {
    Report(ReportDoc),
    Schedule(ScheduleDoc),
    Experiment(ExperimentDoc),
}

impl Artifact {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifacts serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

fn default_window(ledger: &[TaskOutcome]) -> Option<(f64, f64)> {
    let t1 = ledger.iter().map(|o| o.completed_at).fold(f64::NEG_INFINITY, f64::max);
    let earliest = ledger
        .iter()
        .map(|o| {
            let spans = o.operator_spans.iter().map(|s| s.start).fold(f64::INFINITY, f64::min);
            spans.min(o.agent_interval().0).min(o.completed_at - o.operator_total())
        })
        .fold(0.0f64, f64::min);
    (t1 > earliest).then_some((earliest, t1))
}

/// Per-task leverage, conservation and ceiling checks plus windowed
/// leverage. Analytics are lenient: violations become warnings.
pub fn build_report(
    ledger: &[TaskOutcome],
    scenario: Option<&ScenarioConfig>,
    windows: &[(f64, f64)],
) -> Result<ReportDoc> {
    let rho_in_max = scenario.map_or(DEFAULT_RHO_IN_MAX, |s| s.density_model().rho_in_max);
    let mut warnings = Vec::new();
    let mut tasks = Vec::with_capacity(ledger.len());
    for o in ledger {
        o.validate()?;
        let l_task = leverage_task(o.h_displaced, &o.operator_hours).ok();
        let e_task = efficiency_task(o.h_displaced, o.t_agent).ok();
        let mut conservation = None;
        let mut l_max = None;
        if let Some(info) = &o.information {
            let v = check_conservation(info.i_task, &info.channels, DEFAULT_CONSERVATION_TOLERANCE)?;
            if let Some(w) = enforce(&o.task_id, &v, ConservationMode::Analytics)? {
                warnings.push(w);
            }
            conservation = Some(v);
            if info.i_novel > 0.0 {
                l_max = Some(task_ceiling(o.h_displaced, rho_in_max, info.i_novel)?.l_max);
            }
        }
        let ceiling_margin = match (l_max, l_task) {
            (Some(m), Some(l)) => Some(m - l),
            _ => None,
        };
        if let (Some(margin), Some(l)) = (ceiling_margin, l_task) {
            if margin < 0.0 && o.recurrence.is_none() {
                warnings.push(format!(
                    "task `{}`: leverage {l} exceeds its ceiling {}",
                    o.task_id,
                    l_max.unwrap_or_default()
                ));
            }
        }
        tasks.push(TaskReport {
            task_id: o.task_id.clone(),
            l_task,
            e_task,
            conservation,
            l_max,
            ceiling_margin,
        });
    }

    let mut spans: Vec<(f64, f64)> = windows.to_vec();
    if spans.is_empty() {
        if let Some(s) = scenario {
            spans = s.windows.iter().map(|w| (w.t0, w.t1)).collect();
        }
    }
    if spans.is_empty() {
        spans.extend(default_window(ledger));
    }
    let mut window_reports = Vec::new();
    for (t0, t1) in spans {
        let result = match window_leverage(ledger, t0, t1) {
            Ok(r) => Some(r),
            Err(e @ (Error::EmptyWindow { .. } | Error::UndefinedLeverage)) => {
                warnings.push(e.to_string());
                None
            }
            Err(e) => return Err(e),
        };
        window_reports.push(WindowReport { t0, t1, result });
    }

    let plots = match scenario {
        Some(s) if !s.templates.is_empty() => Some(plot_series(s)?),
        _ => None,
    };
    Ok(ReportDoc {
        rho_in_max,
        tasks,
        windows: window_reports,
        warnings,
        plots,
    })
}

/// Density-versus-alpha and phase-time-versus-memory series for a scenario.
pub fn plot_series(scenario: &ScenarioConfig) -> Result<PlotSeries> {
    let model = scenario.density_model();
    let Some(template) = scenario.templates.first() else {
        return Err(Error::Config("plots need at least one template".into()));
    };
    let mut density = Vec::with_capacity(2 * ALPHA_POINTS);
    for m in [0.0, model.characteristic_m()] {
        let rates = model.rates_at(m)?;
        for i in 0..ALPHA_POINTS {
            let alpha = i as f64 / (ALPHA_POINTS - 1) as f64;
            density.push(DensityPoint {
                m,
                alpha,
                rho_eff: effective_density(alpha, &rates)?,
            });
        }
    }
    let mut spec = template.base_spec(&template.name);
    if template.interrupt_rate > 0.0 && template.interrupt_bits > 0.0 {
        spec.channels.i_interrupts = vec![template.interrupt_rate * template.interrupt_bits];
        spec.scalars.c_i = vec![template.c_i];
        spec.alphas.alpha_i = vec![template.alpha_i];
    }
    let mut grid = vec![0.0];
    grid.extend(geometric_grid(1.0, 2.0, 21));
    let phases = limit_profile(&spec, &model, &scenario.decay, &grid)?
        .into_iter()
        .map(|p| PhasePoint {
            m: p.m,
            t_planning: p.times.t_planning,
            t_interrupts: p.times.interrupt_total(),
            t_review: p.times.t_review,
            planning_floor: p.planning_floor,
        })
        .collect();
    Ok(PlotSeries {
        density,
        template: template.name.clone(),
        phases,
    })
}

/// Solves a scenario instance, optionally checking it against the
/// exhaustive oracle. `window` overrides the instance's window length.
pub fn schedule_scenario(
    scenario: &ScenarioConfig,
    instance: Option<&str>,
    window: Option<f64>,
    oracle: bool,
) -> Result<ScheduleDoc> {
    let inst = scenario.instance(instance)?;
    let w = window.unwrap_or(inst.window);
    let schedule = schedule_exact(&inst.nodes, w, &inst.options)?;
    let oracle_objective = if oracle {
        Some(schedule_oracle(&inst.nodes, w, &inst.options)?.objective)
    } else {
        None
    };
    Ok(ScheduleDoc {
        instance: inst.name.clone(),
        schedule,
        oracle_objective,
    })
}

/// Runs every experiment declared in the scenario.
pub fn run_scenario_experiments(scenario: &ScenarioConfig, exec: Execution) -> Result<ExperimentDoc> {
    let base = scenario.sim_config()?;
    let mut doc = ExperimentDoc {
        seed: base.seed,
        asymmetry: None,
        transfer: Vec::new(),
    };
    if let Some(spec) = &scenario.experiments.asymmetry {
        let mut config = base.clone();
        if let Some(cv) = spec.duration_cv {
            config.duration_cv = cv;
        }
        let opts = AsymmetryOptions {
            margin: spec.margin,
            exec,
        };
        let tables =
            repeat_asymmetry_experiment(&config, spec.a, spec.b, spec.replicas, spec.repetitions, &opts)?;
        let count = |v: Verdict| tables.iter().filter(|t| t.verdict == v).count();
        let null_model = if spec.null_model {
            let mut null = config.clone();
            null.alpha_blind = true;
            Some(run_asymmetry_experiment(&null, spec.a, spec.b, spec.replicas, &opts)?)
        } else {
            None
        };
        doc.asymmetry = Some(AsymmetryReport {
            supports: count(Verdict::Supports),
            refutes: count(Verdict::Refutes),
            inconclusive: count(Verdict::Inconclusive),
            tables,
            null_model,
        });
    }
    if let Some(spec) = &scenario.experiments.transfer {
        let mut config = base.clone();
        if let Some(d) = spec.delta_m {
            config.memory.delta_m = d;
        }
        for &scope in &spec.scopes {
            doc.transfer.push(run_memory_transfer_experiment(
                &config,
                &spec.domain_a,
                &spec.domain_b,
                spec.accrual_tasks,
                scope,
            )?);
        }
    }
    Ok(doc)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn verdict_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn scope_name(t: &TransferTable) -> String {
    serde_json::to_value(t.scope)
        .ok()
        .and_then(|v| v.get("mode").and_then(|m| m.as_str()).map(str::to_string))
        .unwrap_or_default()
}

pub fn render_text(artifact: &Artifact) -> String {
    let mut out = String::new();
    match artifact {
        Artifact::Report(r) => {
            out.push_str(&format!("{} tasks\n", r.tasks.len()));
            out.push_str("task\tL_task\tE_task\tl_max\tmargin\tconservation\n");
            for t in &r.tasks {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    t.task_id,
                    opt(t.l_task),
                    opt(t.e_task),
                    opt(t.l_max),
                    opt(t.ceiling_margin),
                    t.conservation.map_or("-".into(), |c| verdict_name(&c.kind)),
                ));
            }
            for w in &r.windows {
                match &w.result {
                    Some(res) => out.push_str(&format!(
                        "window ({}, {}]: L_window {:.4}, {} tasks, {:.4} operator hours, peak concurrency {}\n",
                        w.t0, w.t1, res.l_window, res.task_count, res.t_operator, res.peak_concurrency
                    )),
                    None => out.push_str(&format!("window ({}, {}]: no operator time\n", w.t0, w.t1)),
                }
            }
            for w in &r.warnings {
                out.push_str(&format!("warning: {w}\n"));
            }
        }
        Artifact::Schedule(s) => {
            out.push_str(&format!(
                "instance {}: objective {} in a window of {} h\n",
                s.instance, s.schedule.objective, s.schedule.window_length
            ));
            if let Some(o) = s.oracle_objective {
                out.push_str(&format!("oracle objective {o}\n"));
            }
            for d in &s.schedule.dispatches {
                out.push_str(&format!(
                    "{}\tdispatch {}\t{}\n",
                    d.task,
                    d.dispatch_time,
                    if d.credited { "credited" } else { "not credited" }
                ));
            }
        }
        Artifact::Experiment(e) => {
            if let Some(a) = &e.asymmetry {
                out.push_str(&format!(
                    "asymmetry: {} supports, {} refutes, {} inconclusive over {} runs\n",
                    a.supports,
                    a.refutes,
                    a.inconclusive,
                    a.tables.len()
                ));
                if let Some(t) = a.tables.first() {
                    out.push_str(&format!(
                        "first run: interaction {:.4}; rho_in boost saves {:.4} planning, {:.4} review; rho_out boost saves {:.4} planning, {:.4} review\n",
                        t.interaction,
                        t.rho_in.planning.relative,
                        t.rho_in.review.relative,
                        t.rho_out.planning.relative,
                        t.rho_out.review.relative
                    ));
                }
                if let Some(n) = &a.null_model {
                    out.push_str(&format!(
                        "alpha-blind null: {} (interaction {:.4})\n",
                        verdict_name(&n.verdict),
                        n.interaction
                    ));
                }
            }
            for t in &e.transfer {
                out.push_str(&format!(
                    "transfer ({}): delta rho_eff {:.4} in {}, {:.4} in {} -> {}\n",
                    scope_name(t),
                    t.delta_a,
                    t.domain_a,
                    t.delta_b,
                    t.domain_b,
                    verdict_name(&t.pattern)
                ));
            }
        }
    }
    out
}

/// Table names accepted by [`render_csv`] for each artifact; the first is
/// the default.
pub fn csv_tables(artifact: &Artifact) -> &'static [&'static str] {
    match artifact {
        Artifact::Report(_) => &["tasks", "windows", "density", "phases"],
        Artifact::Schedule(_) => &["gantt", "dispatches"],
        Artifact::Experiment(_) => &["effects", "transfer"],
    }
}

pub fn render_csv(artifact: &Artifact, table: Option<&str>) -> Result<String> {
    let table = table.unwrap_or(csv_tables(artifact)[0]);
    if !csv_tables(artifact).contains(&table) {
        return Err(Error::Config(format!(
            "unknown table `{table}`; expected one of {}",
            csv_tables(artifact).join(", ")
        )));
    }
    let mut out = String::new();
    match (artifact, table) {
        (Artifact::Report(r), "tasks") => {
            out.push_str("task_id,l_task,e_task,l_max,ceiling_margin,conservation\n");
            for t in &r.tasks {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    t.task_id,
                    csv_opt(t.l_task),
                    csv_opt(t.e_task),
                    csv_opt(t.l_max),
                    csv_opt(t.ceiling_margin),
                    t.conservation.map_or(String::new(), |c| verdict_name(&c.kind)),
                ));
            }
        }
        (Artifact::Report(r), "windows") => {
            out.push_str("t0,t1,l_window,total_h_displaced,t_operator,task_count,peak_concurrency\n");
            for w in &r.windows {
                match &w.result {
                    Some(x) => out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        w.t0, w.t1, x.l_window, x.total_h_displaced, x.t_operator, x.task_count, x.peak_concurrency
                    )),
                    None => out.push_str(&format!("{},{},,,,,\n", w.t0, w.t1)),
                }
            }
        }
        (Artifact::Report(r), "density" | "phases") => {
            let Some(p) = &r.plots else {
                return Err(Error::Config("the report carries no plot series".into()));
            };
            if table == "density" {
                out.push_str("m,alpha,rho_eff\n");
                for d in &p.density {
                    out.push_str(&format!("{},{},{}\n", d.m, d.alpha, d.rho_eff));
                }
            } else {
                out.push_str("m,t_planning,t_interrupts,t_review,planning_floor\n");
                for x in &p.phases {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        x.m, x.t_planning, x.t_interrupts, x.t_review, x.planning_floor
                    ));
                }
            }
        }
        (Artifact::Schedule(s), "gantt") => out.push_str(&s.schedule.gantt_csv()),
        (Artifact::Schedule(s), _) => {
            out.push_str("task,dispatch_time,credited,completed_at\n");
            for d in &s.schedule.dispatches {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    d.task,
                    d.dispatch_time,
                    d.credited,
                    csv_opt(d.completed_at)
                ));
            }
        }
        (Artifact::Experiment(e), "effects") => {
            out.push_str("run,condition,phase,baseline_mean,condition_mean,delta,relative\n");
            if let Some(a) = &e.asymmetry {
                let runs = a
                    .tables
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (i.to_string(), t))
                    .chain(a.null_model.iter().map(|t| ("null".to_string(), t)));
                for (run, t) in runs {
                    for line in t.to_csv().lines().skip(1) {
                        out.push_str(&format!("{run},{line}\n"));
                    }
                }
            }
        }
        (Artifact::Experiment(e), _) => {
            out.push_str("scope,domain,stage,m,rho_in,rho_out,rho_eff\n");
            for t in &e.transfer {
                let scope = scope_name(t);
                for line in t.to_csv().lines().skip(1) {
                    out.push_str(&format!("{scope},{line}\n"));
                }
            }
        }
        _ => unreachable!("table names checked above"),
    }
    Ok(out)
}

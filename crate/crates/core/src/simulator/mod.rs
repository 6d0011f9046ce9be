//! Discrete-event simulation of one operator running a portfolio of agent
//! tasks.
//!
//! Tasks are drawn from weighted templates and started in index order, up
//! to `max_in_flight` at a time. Each task asks the operator for planning,
//! then for each interrupt its agent raises, then for review. The operator
//! serves requests first-come first-served (ties to the lower task index)
//! and never preempts. Phase durations come from the density and
//! conservation algebra at the memory the task sees when planning starts;
//! memory accrues in the task's domain when its review ends.
//!
//! All randomness is drawn up front, three numbers per task in task order
//! (template, interrupt count, agent duration), so two configurations that
//! differ only in rates consume identical streams.

mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conservation::{
    channel_times, check_conservation, enforce, ChannelAllocation, ConservationMode,
    CostScalars, PhaseAlphas, PhaseTimes, TaskSpec, DEFAULT_CONSERVATION_TOLERANCE,
};
use crate::density::{self, Direction, DirectionalRates};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::memory::{ChannelDecay, DensityModel, MemoryBank, MemoryScope};
use crate::scheduler::{InterruptArrival, LogNormalNoise};

pub use trace::{trace_to_ledger, window_from_trace, Event, EventRecord, WorkflowTrace};

/// Largest mean interrupt count a template may declare.
pub const MAX_INTERRUPT_RATE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskTemplate {
    pub name: String,
    #[serde(default = "default_domain")]
    pub domain: String,
    #[serde(default = "one")]
    pub weight: f64,
    pub h_displaced: f64,
    /// Bits the task requires at zero memory.
    pub i_task: f64,
    pub i_novel: f64,
    /// Planning bits at zero memory, novel bits included.
    pub i_planning: f64,
    /// Review bits at zero memory.
    pub i_review: f64,
    /// Bits carried by each interrupt.
    #[serde(default)]
    pub interrupt_bits: f64,
    /// Mean interrupt count at zero memory.
    #[serde(default)]
    pub interrupt_rate: f64,
    #[serde(default = "default_alpha_p")]
    pub alpha_p: f64,
    #[serde(default = "default_alpha_i")]
    pub alpha_i: f64,
    #[serde(default = "default_alpha_r")]
    pub alpha_r: f64,
    #[serde(default = "one")]
    pub c_p: f64,
    #[serde(default = "one")]
    pub c_i: f64,
    #[serde(default = "one")]
    pub c_r: f64,
    /// Nominal agent working hours.
    pub t_agent: f64,
}

fn default_domain() -> String {
    "default".into()
}
fn one() -> f64 {
    1.0
}
fn default_alpha_p() -> f64 {
    0.8
}
fn default_alpha_i() -> f64 {
    0.5
}
fn default_alpha_r() -> f64 {
    0.2
}
fn default_max_in_flight() -> usize {
    1
}

impl TaskTemplate {
    pub fn validate(&self, model: &DensityModel) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("template `{}`: {msg}", self.name)));
        for (name, v) in [
            ("h_displaced", self.h_displaced),
            ("i_task", self.i_task),
            ("i_novel", self.i_novel),
            ("i_planning", self.i_planning),
            ("i_review", self.i_review),
            ("interrupt_bits", self.interrupt_bits),
            ("interrupt_rate", self.interrupt_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("weight", self.weight),
            ("c_p", self.c_p),
            ("c_i", self.c_i),
            ("c_r", self.c_r),
            ("t_agent", self.t_agent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("alpha_p", self.alpha_p),
            ("alpha_i", self.alpha_i),
            ("alpha_r", self.alpha_r),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.interrupt_rate > MAX_INTERRUPT_RATE {
            return bad(format!("interrupt_rate above {MAX_INTERRUPT_RATE}"));
        }
        if self.i_novel > self.i_task || self.i_novel > self.i_planning {
            return bad("i_novel exceeds i_task or i_planning".into());
        }
        if self.i_task > self.i_planning + self.i_review {
            return bad(format!(
                "planning and review carry {} bits, fewer than i_task {}",
                self.i_planning + self.i_review,
                self.i_task
            ));
        }
        // Fastest possible planning of the novel bits stays at or above i_novel / rho_in_max.
        let top = DirectionalRates::new(
            model.rho_in_max,
            model.rho_out_max,
            model.rho_in_max,
            model.rho_out_max,
        )?;
        let fastest = density::effective_density(self.alpha_p, &top)?;
        if fastest > self.c_p * model.rho_in_max {
            return bad(format!(
                "c_p {} with alpha_p {} lets planning outrun rho_in_max; need c_p >= {}",
                self.c_p,
                self.alpha_p,
                fastest / model.rho_in_max
            ));
        }
        Ok(())
    }

    fn alphas(&self, interrupts: usize) -> PhaseAlphas {
        PhaseAlphas {
            alpha_p: self.alpha_p,
            alpha_i: vec![self.alpha_i; interrupts],
            alpha_r: self.alpha_r,
        }
    }

    fn scalars(&self, interrupts: usize) -> CostScalars {
        CostScalars {
            c_p: self.c_p,
            c_i: vec![self.c_i; interrupts],
            c_r: self.c_r,
        }
    }

    /// The task at zero memory with no interrupts.
    pub fn base_spec(&self, id: &str) -> TaskSpec {
        TaskSpec {
            id: id.to_string(),
            h_displaced: self.h_displaced,
            i_task: self.i_task,
            i_novel: self.i_novel,
            channels: ChannelAllocation {
                i_planning: self.i_planning,
                i_interrupts: vec![],
                i_review: self.i_review,
            },
            scalars: self.scalars(0),
            alphas: self.alphas(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryRule {
    /// Memory added to the task's domain when its review ends.
    #[serde(default)]
    pub delta_m: f64,
    #[serde(default)]
    pub scope: MemoryScope,
}

/// How many interrupts a task raises at memory `m`, with mean
/// `rate * k / (m + k)` where `k` is the interrupt decay constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptModel {
    /// Poisson count with that mean, each interrupt carrying the template's bits.
    #[default]
    Poisson,
    /// One interrupt carrying the mean count times the template's bits.
    Expected,
}

/// Rate multipliers applied on top of memory, clamped at the ceilings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFactors {
    #[serde(default = "one")]
    pub rho_in: f64,
    #[serde(default = "one")]
    pub rho_out: f64,
}

impl Default for RateFactors {
    fn default() -> Self {
        RateFactors {
            rho_in: 1.0,
            rho_out: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// Hours of simulated time; later work is truncated.
    pub horizon: f64,
    /// Number of tasks started, in order.
    pub tasks: usize,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    pub density: DensityModel,
    pub decay: ChannelDecay,
    #[serde(default)]
    pub memory: MemoryRule,
    pub templates: Vec<TaskTemplate>,
    #[serde(default)]
    pub interrupts: InterruptModel,
    #[serde(default)]
    pub interrupt_arrival: InterruptArrival,
    /// Coefficient of variation of agent durations; 0 is noise-free.
    #[serde(default)]
    pub duration_cv: f64,
    #[serde(default)]
    pub rate_factors: RateFactors,
    /// Null model: every exchange runs at the plain mean of the two
    /// directional rates, whatever its split.
    #[serde(default)]
    pub alpha_blind: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return cfg(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.max_in_flight == 0 {
            return cfg("max_in_flight must be at least 1".into());
        }
        if self.templates.is_empty() {
            return cfg("at least one task template is required".into());
        }
        if !(self.duration_cv >= 0.0 && self.duration_cv.is_finite()) {
            return cfg(format!("duration_cv must be non-negative, got {}", self.duration_cv));
        }
        if !(self.memory.delta_m >= 0.0 && self.memory.delta_m.is_finite()) {
            return cfg(format!("delta_m must be non-negative, got {}", self.memory.delta_m));
        }
        if let MemoryScope::NegativeTransfer { depth, half_m } = self.memory.scope {
            if !(0.0..1.0).contains(&depth) || !(half_m > 0.0) {
                return cfg("negative transfer needs depth in [0, 1) and half_m > 0".into());
            }
        }
        for (name, f) in [
            ("rate_factors.rho_in", self.rate_factors.rho_in),
            ("rate_factors.rho_out", self.rate_factors.rho_out),
        ] {
            if !(f > 0.0 && f.is_finite()) {
                return cfg(format!("{name} must be positive, got {f}"));
            }
        }
        self.density
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.decay
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        for t in &self.templates {
            t.validate(&self.density)?;
        }
        Ok(())
    }

    fn rates(&self, bank: &MemoryBank, domain: &str) -> Result<DirectionalRates> {
        bank.rates_for(domain, self.memory.scope, &self.density)?
            .boosted(Direction::In, self.rate_factors.rho_in)?
            .boosted(Direction::Out, self.rate_factors.rho_out)
    }
}

/// Random numbers consumed by one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskDraws {
    pub template_u: f64,
    pub interrupt_u: f64,
    pub duration_z: f64,
}

pub fn task_draws(seed: u64, tasks: usize) -> Vec<TaskDraws> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..tasks)
        .map(|_| TaskDraws {
            template_u: rng.random(),
            interrupt_u: rng.random(),
            duration_z: rng.sample(StandardNormal),
        })
        .collect()
}

fn pick_template(templates: &[TaskTemplate], u: f64) -> usize {
    let total: f64 = templates.iter().map(|t| t.weight).sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, t) in templates.iter().enumerate() {
        acc += t.weight;
        if target < acc {
            return i;
        }
    }
    templates.len() - 1
}

/// Inverse Poisson CDF at `u`.
pub fn poisson_quantile(mean: f64, u: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let cap = (mean + 12.0 * mean.sqrt() + 30.0) as usize;
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0;
    while u >= cdf && k < cap {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn exchange_hours(c: f64, bits: f64, alpha: f64, rates: &DirectionalRates, blind: bool) -> Result<f64> {
    if bits == 0.0 {
        return Ok(0.0);
    }
    if blind {
        Ok(c * bits / ((rates.rho_in + rates.rho_out) / 2.0))
    } else {
        Ok(c * bits / density::effective_density(alpha, rates)?)
    }
}

/// A task's operator phases once planning starts.
struct Plan {
    spec: TaskSpec,
    times: PhaseTimes,
    segments: Vec<f64>,
}

fn plan_task(
    config: &SimConfig,
    template: &TaskTemplate,
    id: &str,
    m: f64,
    rates: &DirectionalRates,
    draws: &TaskDraws,
) -> Result<Plan> {
    let base = template.base_spec(id);
    let mut spec = config.decay.spec_at(&base, m)?;
    let mean = template.interrupt_rate * ChannelDecay::factor(config.decay.k_interrupt, m);
    let interrupts = match config.interrupts {
        InterruptModel::Poisson => vec![template.interrupt_bits; poisson_quantile(mean, draws.interrupt_u)],
        InterruptModel::Expected if mean > 0.0 && template.interrupt_bits > 0.0 => {
            vec![mean * template.interrupt_bits]
        }
        InterruptModel::Expected => vec![],
    };
    let n = interrupts.len();
    spec.channels.i_interrupts = interrupts;
    spec.scalars = template.scalars(n);
    spec.alphas = template.alphas(n);
    let verdict = check_conservation(spec.i_task, &spec.channels, DEFAULT_CONSERVATION_TOLERANCE)?;
    enforce(id, &verdict, ConservationMode::Simulation)?;

    let times = if config.alpha_blind {
        let ch = &spec.channels;
        PhaseTimes {
            t_planning: exchange_hours(template.c_p, ch.i_planning, template.alpha_p, rates, true)?,
            t_interrupts: ch
                .i_interrupts
                .iter()
                .map(|&b| exchange_hours(template.c_i, b, template.alpha_i, rates, true))
                .collect::<Result<_>>()?,
            t_review: exchange_hours(template.c_r, ch.i_review, template.alpha_r, rates, true)?,
        }
    } else {
        channel_times(&spec, rates)?
    };
    let t_agent = LogNormalNoise {
        cv: config.duration_cv,
    }
    .apply(template.t_agent, draws.duration_z);
    let segments = config.interrupt_arrival.segments(t_agent, n);
    Ok(Plan {
        spec,
        times,
        segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Request {
    Planning,
    Interrupt(usize),
    Review,
}

struct Running {
    id: String,
    template: usize,
    plan: Plan,
}

fn task_id(i: usize) -> String {
    format!("task-{i:04}")
}

pub fn run_simulation(config: &SimConfig) -> Result<WorkflowTrace> {
    config.validate()?;
    let draws = task_draws(config.seed, config.tasks);
    let horizon = config.horizon;
    let mut bank = MemoryBank::new();
    let mut events: Vec<EventRecord> = Vec::new();
    let mut running: Vec<Option<Running>> = (0..config.tasks).map(|_| None).collect();
    // (request time, task index, request)
    let mut pending: Vec<(f64, usize, Request)> = Vec::new();
    let mut next_task = 0;
    while next_task < config.tasks.min(config.max_in_flight) {
        pending.push((0.0, next_task, Request::Planning));
        next_task += 1;
    }
    let mut operator_free = 0.0f64;

    while let Some(pos) = (0..pending.len()).min_by(|&a, &b| {
        let (ta, ka, _) = pending[a];
        let (tb, kb, _) = pending[b];
        ta.total_cmp(&tb).then(ka.cmp(&kb))
    }) {
        let (requested, k, request) = pending.swap_remove(pos);
        let start = operator_free.max(requested);
        match request {
            Request::Planning => {
                let template_idx = pick_template(&config.templates, draws[k].template_u);
                let template = &config.templates[template_idx];
                let id = task_id(k);
                let m = bank.state_for(&template.domain, config.memory.scope).m;
                let rates = config.rates(&bank, &template.domain)?;
                let plan = plan_task(config, template, &id, m, &rates, &draws[k])?;
                let end = start + plan.times.t_planning;
                if end > horizon {
                    continue;
                }
                events.push(EventRecord {
                    t: start,
                    task: id.clone(),
                    event: Event::PlanningStart {
                        template: template.name.clone(),
                        domain: template.domain.clone(),
                        m,
                        h_displaced: template.h_displaced,
                        i_task: plan.spec.i_task,
                        i_novel: plan.spec.i_novel,
                        bits: plan.spec.channels.i_planning,
                    },
                });
                events.push(EventRecord {
                    t: end,
                    task: id.clone(),
                    event: Event::Dispatch {
                        agent_hours: plan.segments.iter().sum(),
                    },
                });
                operator_free = end;
                let release = end + plan.segments[0];
                let follow = if plan.times.t_interrupts.is_empty() {
                    Request::Review
                } else {
                    Request::Interrupt(0)
                };
                running[k] = Some(Running {
                    id,
                    template: template_idx,
                    plan,
                });
                queue_after_segment(&mut events, &mut pending, &running, k, release, follow, horizon);
            }
            Request::Interrupt(j) => {
                let run = running[k].as_ref().expect("interrupt for a started task");
                let duration = run.plan.times.t_interrupts[j];
                let bits = run.plan.spec.channels.i_interrupts[j];
                let end = start + duration;
                if end > horizon {
                    truncate(&mut events, run, horizon);
                    continue;
                }
                events.push(EventRecord {
                    t: start,
                    task: run.id.clone(),
                    event: Event::InterruptStart { j, bits },
                });
                events.push(EventRecord {
                    t: end,
                    task: run.id.clone(),
                    event: Event::InterruptEnd { j, bits },
                });
                operator_free = end;
                let release = end + run.plan.segments[j + 1];
                let follow = if j + 1 < run.plan.times.t_interrupts.len() {
                    Request::Interrupt(j + 1)
                } else {
                    Request::Review
                };
                queue_after_segment(&mut events, &mut pending, &running, k, release, follow, horizon);
            }
            Request::Review => {
                let run = running[k].as_ref().expect("review for a started task");
                let end = start + run.plan.times.t_review;
                if end > horizon {
                    truncate(&mut events, run, horizon);
                    continue;
                }
                let bits = run.plan.spec.channels.i_review;
                events.push(EventRecord {
                    t: start,
                    task: run.id.clone(),
                    event: Event::ReviewStart { bits },
                });
                events.push(EventRecord {
                    t: end,
                    task: run.id.clone(),
                    event: Event::ReviewEnd { bits },
                });
                operator_free = end;
                let domain = &config.templates[run.template].domain;
                if config.memory.delta_m > 0.0 {
                    let m = bank.accrue(domain, config.memory.delta_m)?;
                    events.push(EventRecord {
                        t: end,
                        task: run.id.clone(),
                        event: Event::MemoryUpdate {
                            domain: domain.clone(),
                            m,
                        },
                    });
                }
                if next_task < config.tasks {
                    pending.push((end, next_task, Request::Planning));
                    next_task += 1;
                }
            }
        }
    }
    // Stable: simultaneous events keep the order they were generated in.
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(WorkflowTrace { events })
}

/// Queues the request that follows an agent segment ending at `release`,
/// recording the agent's completion when the segment is its last.
fn queue_after_segment(
    events: &mut Vec<EventRecord>,
    pending: &mut Vec<(f64, usize, Request)>,
    running: &[Option<Running>],
    k: usize,
    release: f64,
    follow: Request,
    horizon: f64,
) {
    let run = running[k].as_ref().expect("task is running");
    if release > horizon {
        truncate(events, run, horizon);
        return;
    }
    if follow == Request::Review {
        events.push(EventRecord {
            t: release,
            task: run.id.clone(),
            event: Event::AgentComplete,
        });
    }
    pending.push((release, k, follow));
}

fn truncate(events: &mut Vec<EventRecord>, run: &Running, horizon: f64) {
    events.push(EventRecord {
        t: horizon,
        task: run.id.clone(),
        event: Event::Truncated,
    });
}

/// Runs `replicas` copies with seeds `config.seed + i`, in replica order.
pub fn run_batch(
    config: &SimConfig,
    replicas: usize,
    exec: Execution,
) -> Result<Vec<WorkflowTrace>> {
    config.validate()?;
    exec.map_indexed(replicas, |i| {
        let mut c = config.clone();
        c.seed = config.seed.wrapping_add(i as u64);
        run_simulation(&c)
    })
    .into_iter()
    .collect()
}

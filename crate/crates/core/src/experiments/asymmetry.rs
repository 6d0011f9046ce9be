//! Directional-density interaction test.
//!
//! A faster human-to-agent channel should save relatively more time in
//! phases where information mostly flows toward the agent (planning), and a
//! faster agent-to-human channel relatively more where it mostly flows back
//! (review). Baseline and both boosted conditions run on identical seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::simulator::{run_simulation, trace_to_ledger, SimConfig};
use crate::window::TaskOutcome;

pub const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterventionSpec {
    BoostRhoIn { factor: f64 },
    BoostRhoOut { factor: f64 },
}

impl InterventionSpec {
    pub fn factor(&self) -> f64 {
        match *self {
            InterventionSpec::BoostRhoIn { factor } | InterventionSpec::BoostRhoOut { factor } => {
                factor
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.factor();
        if !(f > 1.0 && f.is_finite()) {
            return Err(Error::Config(format!("intervention factor must exceed 1, got {f}")));
        }
        Ok(())
    }

    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        let mut c = base.clone();
        match *self {
            InterventionSpec::BoostRhoIn { factor } => c.rate_factors.rho_in *= factor,
            InterventionSpec::BoostRhoOut { factor } => c.rate_factors.rho_out *= factor,
        }
        c
    }

    pub fn label(&self) -> &'static str {
        match self {
            InterventionSpec::BoostRhoIn { .. } => "boost_rho_in",
            InterventionSpec::BoostRhoOut { .. } => "boost_rho_out",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supports,
    Refutes,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Interrupts,
    Review,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEffect {
    pub baseline_mean: f64,
    pub condition_mean: f64,
    /// Baseline minus condition.
    pub delta: f64,
    /// `delta / baseline_mean`; 0 when the baseline is 0.
    pub relative: f64,
}

impl PhaseEffect {
    fn new(baseline_mean: f64, condition_mean: f64) -> Self {
        let delta = baseline_mean - condition_mean;
        PhaseEffect {
            baseline_mean,
            condition_mean,
            delta,
            relative: if baseline_mean > 0.0 { delta / baseline_mean } else { 0.0 },
        }
    }
}

/// Per-task signs of (relative savings in the high-alpha phase minus the
/// low-alpha phase), with the two-sided sign-test p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub positive: usize,
    pub negative: usize,
    pub ties: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEffect {
    pub intervention: InterventionSpec,
    pub planning: PhaseEffect,
    pub interrupts: PhaseEffect,
    pub review: PhaseEffect,
    /// Relative savings, high-alpha phase minus low-alpha phase.
    pub contrast: f64,
    pub sign_test: SignTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    pub replicas: usize,
    pub paired_tasks: usize,
    pub high_alpha_phase: Phase,
    pub rho_in: ConditionEffect,
    pub rho_out: ConditionEffect,
    /// `rho_in.contrast - rho_out.contrast`.
    pub interaction: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

impl EffectTable {
    /// `condition,phase,baseline_mean,condition_mean,delta,relative`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,phase,baseline_mean,condition_mean,delta,relative\n");
        for c in [&self.rho_in, &self.rho_out] {
            for (phase, e) in [
                ("planning", &c.planning),
                ("interrupts", &c.interrupts),
                ("review", &c.review),
            ] {
                out.push_str(&format!(
                    "{},{phase},{},{},{},{}\n",
                    c.intervention.label(),
                    e.baseline_mean,
                    e.condition_mean,
                    e.delta,
                    e.relative
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetryOptions {
    pub margin: f64,
    pub exec: Execution,
}

impl Default for AsymmetryOptions {
    fn default() -> Self {
        AsymmetryOptions {
            margin: DEFAULT_MARGIN,
            exec: Execution::default(),
        }
    }
}

/// Which of planning and review carries the larger alpha in every template.
pub fn high_alpha_phase(config: &SimConfig) -> Result<Phase> {
    let planning_high = config.templates.iter().all(|t| t.alpha_p > t.alpha_r);
    let review_high = config.templates.iter().all(|t| t.alpha_r > t.alpha_p);
    match (planning_high, review_high) {
        (true, false) => Ok(Phase::Planning),
        (false, true) => Ok(Phase::Review),
        _ => Err(Error::Config(
            "alpha_p and alpha_r must be strictly ordered the same way in every template".into(),
        )),
    }
}

type PhaseRow = [f64; 3];

fn rows(ledger: &[TaskOutcome]) -> BTreeMap<String, PhaseRow> {
    ledger
        .iter()
        .map(|o| {
            let h = &o.operator_hours;
            (o.task_id.clone(), [h.t_planning, h.interrupt_total(), h.t_review])
        })
        .collect()
}

fn run_rows(config: &SimConfig) -> Result<BTreeMap<String, PhaseRow>> {
    Ok(rows(&trace_to_ledger(&run_simulation(config)?)?))
}

/// Two-sided sign-test p-value for `k` successes out of `n`.
pub fn sign_test_p(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let tail = k.min(n - k);
    // log C(n, i) accumulated from i = 0.
    let mut log_c = 0.0f64;
    let mut sum = 0.0f64;
    let log_half_n = n as f64 * 0.5f64.ln();
    for i in 0..=tail {
        if i > 0 {
            log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        sum += (log_c + log_half_n).exp();
    }
    (2.0 * sum).min(1.0)
}

fn contrast_of(row: &PhaseRow, base: &PhaseRow, high: Phase) -> Option<f64> {
    let rel = |i: usize| (base[i] > 0.0).then(|| (base[i] - row[i]) / base[i]);
    let (p, r) = (rel(0)?, rel(2)?);
    Some(if high == Phase::Planning { p - r } else { r - p })
}

pub fn run_asymmetry_experiment(
    base: &SimConfig,
    a: InterventionSpec,
    b: InterventionSpec,
    replicas: usize,
    opts: &AsymmetryOptions,
) -> Result<EffectTable> {
    base.validate()?;
    a.validate()?;
    b.validate()?;
    let (in_spec, out_spec) = match (a, b) {
        (x @ InterventionSpec::BoostRhoIn { .. }, y @ InterventionSpec::BoostRhoOut { .. })
        | (y @ InterventionSpec::BoostRhoOut { .. }, x @ InterventionSpec::BoostRhoIn { .. }) => {
            (x, y)
        }
        _ => {
            return Err(Error::Config(
                "the experiment needs one rho_in boost and one rho_out boost".into(),
            ))
        }
    };
    if !(opts.margin >= 0.0) {
        return Err(Error::Config("margin must be non-negative".into()));
    }
    if replicas == 0 {
        return Err(Error::Config("replicas must be at least 1".into()));
    }
    let high = high_alpha_phase(base)?;
    let conditions = [base.clone(), in_spec.apply(base), out_spec.apply(base)];

    let per_replica = opts.exec.map_indexed(replicas, |i| {
        let seed = base.seed.wrapping_add(i as u64);
        conditions
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.seed = seed;
                run_rows(&c)
            })
            .collect::<Result<Vec<_>>>()
    });

    let mut sums = [[0.0f64; 3]; 3];
    let mut paired = 0usize;
    let mut signs = [(0usize, 0usize, 0usize); 2];
    for runs in per_replica {
        let runs = runs?;
        for (id, base_row) in &runs[0] {
            let (Some(in_row), Some(out_row)) = (runs[1].get(id), runs[2].get(id)) else {
                continue;
            };
            paired += 1;
            for (s, row) in sums.iter_mut().zip([base_row, in_row, out_row]) {
                for phase in 0..3 {
                    s[phase] += row[phase];
                }
            }
            // "Positive" counts tasks moving in the predicted direction.
            for (slot, row, want_positive) in [(0, in_row, true), (1, out_row, false)] {
                let tally = &mut signs[slot];
                match contrast_of(row, base_row, high) {
                    Some(c) if (c > 0.0) == want_positive && c != 0.0 => tally.0 += 1,
                    Some(c) if c != 0.0 => tally.1 += 1,
                    _ => tally.2 += 1,
                }
            }
        }
    }
    if paired == 0 {
        return Err(Error::Config("no task completed under all three conditions".into()));
    }
    let n = paired as f64;
    let means: Vec<PhaseRow> = sums.iter().map(|s| [s[0] / n, s[1] / n, s[2] / n]).collect();
    let effect = |idx: usize, spec: InterventionSpec, tally: (usize, usize, usize)| {
        let e = |phase: usize| PhaseEffect::new(means[0][phase], means[idx][phase]);
        let (planning, interrupts, review) = (e(0), e(1), e(2));
        let contrast = if high == Phase::Planning {
            planning.relative - review.relative
        } else {
            review.relative - planning.relative
        };
        let (pos, neg, ties) = tally;
        ConditionEffect {
            intervention: spec,
            planning,
            interrupts,
            review,
            contrast,
            sign_test: SignTest {
                positive: pos,
                negative: neg,
                ties,
                p_value: sign_test_p(pos, pos + neg),
            },
        }
    };
    let rho_in = effect(1, in_spec, signs[0]);
    let rho_out = effect(2, out_spec, signs[1]);
    let m = opts.margin;
    let verdict = if rho_in.contrast.abs() <= m && rho_out.contrast.abs() <= m {
        Verdict::Refutes
    } else if rho_in.contrast > m && rho_out.contrast < -m {
        Verdict::Supports
    } else {
        Verdict::Inconclusive
    };
    Ok(EffectTable {
        replicas,
        paired_tasks: paired,
        high_alpha_phase: high,
        interaction: rho_in.contrast - rho_out.contrast,
        rho_in,
        rho_out,
        margin: m,
        verdict,
    })
}

/// `repetitions` independent runs of the experiment; repetition `r` uses
/// base seed `config.seed + r * replicas`.
pub fn repeat_asymmetry_experiment(
    base: &SimConfig,
    a: InterventionSpec,
    b: InterventionSpec,
    replicas: usize,
    repetitions: usize,
    opts: &AsymmetryOptions,
) -> Result<Vec<EffectTable>> {
    let inner = AsymmetryOptions {
        exec: Execution::Sequential,
        ..*opts
    };
    opts.exec
        .map_indexed(repetitions, |r| {
            let mut c = base.clone();
            c.seed = base.seed.wrapping_add((r * replicas) as u64);
            run_asymmetry_experiment(&c, a, b, replicas, &inner)
        })
        .into_iter()
        .collect()
}

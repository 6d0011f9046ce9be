//! Channel accounting: where a task's information requirement is paid, what
//! each channel costs in operator time, and the resulting per-task leverage.

use serde::{Deserialize, Serialize};

use crate::density::{self, effective_density, DirectionalRates};
use crate::error::{Error, Result};

pub const DEFAULT_CONSERVATION_TOLERANCE: f64 = 1e-6;

/// Bits routed through each channel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelAllocation {
    pub i_planning: f64,
    pub i_interrupts: Vec<f64>,
    pub i_review: f64,
}

impl ChannelAllocation {
    pub fn total(&self) -> f64 {
        self.i_planning + self.i_interrupts.iter().sum::<f64>() + self.i_review
    }

    pub fn validate(&self) -> Result<()> {
        density::non_negative("i_planning", self.i_planning)?;
        density::non_negative("i_review", self.i_review)?;
        for &bits in &self.i_interrupts {
            density::non_negative("i_interrupts", bits)?;
        }
        Ok(())
    }
}

/// Per-channel overhead multipliers on raw transfer time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostScalars {
    pub c_p: f64,
    pub c_i: Vec<f64>,
    pub c_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAlphas {
    pub alpha_p: f64,
    pub alpha_i: Vec<f64>,
    pub alpha_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub h_displaced: f64,
    pub i_task: f64,
    pub i_novel: f64,
    pub channels: ChannelAllocation,
    pub scalars: CostScalars,
    pub alphas: PhaseAlphas,
}

impl TaskSpec {
    pub fn interrupt_count(&self) -> usize {
        self.channels.i_interrupts.len()
    }

    pub fn validate(&self) -> Result<()> {
        density::non_negative("h_displaced", self.h_displaced)?;
        density::non_negative("i_task", self.i_task)?;
        density::non_negative("i_novel", self.i_novel)?;
        if self.i_novel > self.i_task {
            return Err(Error::InvalidParameter(format!(
                "task `{}`: i_novel ({}) exceeds i_task ({})",
                self.id, self.i_novel, self.i_task
            )));
        }
        self.channels.validate()?;
        let n = self.interrupt_count();
        if self.scalars.c_i.len() != n || self.alphas.alpha_i.len() != n {
            return Err(Error::InvalidParameter(format!(
                "task `{}`: {} interrupts but {} c_i and {} alpha_i entries",
                self.id,
                n,
                self.scalars.c_i.len(),
                self.alphas.alpha_i.len()
            )));
        }
        density::positive("c_p", self.scalars.c_p)?;
        density::positive("c_r", self.scalars.c_r)?;
        for &c in &self.scalars.c_i {
            density::positive("c_i", c)?;
        }
        density::check_alpha(self.alphas.alpha_p)?;
        density::check_alpha(self.alphas.alpha_r)?;
        for &a in &self.alphas.alpha_i {
            density::check_alpha(a)?;
        }
        Ok(())
    }
}

/// Operator hours per channel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub t_planning: f64,
    pub t_interrupts: Vec<f64>,
    pub t_review: f64,
}

impl PhaseTimes {
    pub fn interrupt_total(&self) -> f64 {
        self.t_interrupts.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.t_planning + self.interrupt_total() + self.t_review
    }

    pub fn validate(&self) -> Result<()> {
        density::non_negative("t_planning", self.t_planning)?;
        density::non_negative("t_review", self.t_review)?;
        for &t in &self.t_interrupts {
            density::non_negative("t_interrupts", t)?;
        }
        Ok(())
    }
}

/// `c * bits / rho_eff(alpha)` for one channel.
fn channel_time(c: f64, bits: f64, alpha: f64, rates: &DirectionalRates) -> Result<f64> {
    if bits == 0.0 {
        return Ok(0.0);
    }
    Ok(c * bits / effective_density(alpha, rates)?)
}

pub fn channel_times(spec: &TaskSpec, rates: &DirectionalRates) -> Result<PhaseTimes> {
    spec.validate()?;
    let ch = &spec.channels;
    let t_planning = channel_time(spec.scalars.c_p, ch.i_planning, spec.alphas.alpha_p, rates)?;
    let t_interrupts = ch
        .i_interrupts
        .iter()
        .zip(&spec.scalars.c_i)
        .zip(&spec.alphas.alpha_i)
        .map(|((&bits, &c), &alpha)| channel_time(c, bits, alpha, rates))
        .collect::<Result<Vec<_>>>()?;
    let t_review = channel_time(spec.scalars.c_r, ch.i_review, spec.alphas.alpha_r, rates)?;
    Ok(PhaseTimes {
        t_planning,
        t_interrupts,
        t_review,
    })
}

/// Displaced human-hours per operator hour.
pub fn leverage_task(h_displaced: f64, times: &PhaseTimes) -> Result<f64> {
    density::non_negative("h_displaced", h_displaced)?;
    times.validate()?;
    let denom = times.total();
    if denom <= 0.0 {
        return Err(Error::UndefinedLeverage);
    }
    Ok(h_displaced / denom)
}

/// Leverage evaluated directly as `H / sum(c * I / rho_eff(alpha))`.
pub fn leverage_task_substituted(spec: &TaskSpec, rates: &DirectionalRates) -> Result<f64> {
    spec.validate()?;
    let ch = &spec.channels;
    let terms = std::iter::once((spec.scalars.c_p, ch.i_planning, spec.alphas.alpha_p))
        .chain(
            ch.i_interrupts
                .iter()
                .zip(&spec.scalars.c_i)
                .zip(&spec.alphas.alpha_i)
                .map(|((&i, &c), &a)| (c, i, a)),
        )
        .chain(std::iter::once((
            spec.scalars.c_r,
            ch.i_review,
            spec.alphas.alpha_r,
        )));
    let mut planning = 0.0;
    let mut interrupts = 0.0;
    let mut review = 0.0;
    let n = ch.i_interrupts.len();
    for (idx, (c, bits, alpha)) in terms.enumerate() {
        let t = channel_time(c, bits, alpha, rates)?;
        if idx == 0 {
            planning = t;
        } else if idx <= n {
            interrupts += t;
        } else {
            review = t;
        }
    }
    let denom = planning + interrupts + review;
    if denom <= 0.0 {
        return Err(Error::UndefinedLeverage);
    }
    Ok(spec.h_displaced / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Exact,
    Redundant,
    Violated,
}

/// Result of comparing channel bits against the requirement.
///
/// `slack_bits` is the surplus for `Redundant`, the deficit for `Violated`,
/// and the signed residual `sum - i_task` for `Exact`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationVerdict {
    pub kind: VerdictKind,
    pub slack_bits: f64,
}

pub fn check_conservation(
    i_task: f64,
    alloc: &ChannelAllocation,
    tolerance_bits: f64,
) -> Result<ConservationVerdict> {
    density::non_negative("i_task", i_task)?;
    density::non_negative("tolerance_bits", tolerance_bits)?;
    alloc.validate()?;
    let sum = alloc.total();
    let diff = sum - i_task;
    let verdict = if diff.abs() <= tolerance_bits {
        ConservationVerdict {
            kind: VerdictKind::Exact,
            slack_bits: diff,
        }
    } else if diff > 0.0 {
        ConservationVerdict {
            kind: VerdictKind::Redundant,
            slack_bits: diff,
        }
    } else {
        ConservationVerdict {
            kind: VerdictKind::Violated,
            slack_bits: -diff,
        }
    };
    Ok(verdict)
}

/// How a `Violated` verdict is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConservationMode {
    /// Ledger data is noisy: violations are reported, not fatal.
    Analytics,
    /// Generated workflows must be feasible: violations are errors.
    Simulation,
}

/// Applies the mode's policy. Returns a warning message for lenient
/// violations.
pub fn enforce(
    task: &str,
    verdict: &ConservationVerdict,
    mode: ConservationMode,
) -> Result<Option<String>> {
    if verdict.kind != VerdictKind::Violated {
        return Ok(None);
    }
    match mode {
        ConservationMode::Simulation => Err(Error::ConservationViolated {
            task: task.to_string(),
            deficit_bits: verdict.slack_bits,
        }),
        ConservationMode::Analytics => Ok(Some(format!(
            "task `{task}`: channels carry {} bits fewer than the task requires",
            verdict.slack_bits
        ))),
    }
}

/// A channel that re-routable bits may be sent through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutingChannel {
    pub c: f64,
    pub alpha: f64,
}

/// Operator hours per bit on `channel`.
pub fn unit_cost(channel: &RoutingChannel, rates: &DirectionalRates) -> Result<f64> {
    density::positive("c", channel.c)?;
    Ok(channel.c / effective_density(channel.alpha, rates)?)
}

/// Sends all `bits` through the channel with the smallest `c / rho_eff`.
/// Returns the chosen channel index and the resulting operator hours.
/// Ties go to the lowest index.
pub fn route_bits(
    bits: f64,
    channels: &[RoutingChannel],
    rates: &DirectionalRates,
) -> Result<(usize, f64)> {
    density::non_negative("bits", bits)?;
    let mut best: Option<(usize, f64)> = None;
    for (idx, ch) in channels.iter().enumerate() {
        let cost = unit_cost(ch, rates)?;
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((idx, cost));
        }
    }
    let (idx, cost) =
        best.ok_or_else(|| Error::InvalidParameter("no channels to route into".into()))?;
    Ok((idx, cost * bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rates() -> DirectionalRates {
        DirectionalRates::new(36_000.0, 36_000.0, 72_000.0, 360_000.0).unwrap()
    }

    fn spec() -> TaskSpec {
        TaskSpec {
            id: "t".into(),
            h_displaced: 10.0,
            i_task: 14_400.0,
            i_novel: 1_000.0,
            channels: ChannelAllocation {
                i_planning: 3600.0,
                i_interrupts: vec![1800.0, 1800.0],
                i_review: 7200.0,
            },
            scalars: CostScalars {
                c_p: 1.5,
                c_i: vec![2.0, 2.0],
                c_r: 1.0,
            },
            alphas: PhaseAlphas {
                alpha_p: 0.8,
                alpha_i: vec![0.5, 0.5],
                alpha_r: 0.2,
            },
        }
    }

    #[test]
    fn planning_time_example() {
        let t = channel_times(&spec(), &rates()).unwrap();
        assert_relative_eq!(t.t_planning, 0.15, max_relative = 1e-12);
        assert_eq!(t.t_interrupts[0], t.t_interrupts[1]);
    }

    #[test]
    fn zero_bit_channels_cost_nothing() {
        let mut s = spec();
        s.channels.i_review = 0.0;
        s.channels.i_interrupts = vec![0.0, 0.0];
        let t = channel_times(&s, &rates()).unwrap();
        assert_eq!(t.t_review, 0.0);
        assert_eq!(t.interrupt_total(), 0.0);
    }

    #[test]
    fn leverage_examples() {
        let times = PhaseTimes {
            t_planning: 1.0,
            t_interrupts: vec![0.25, 0.25],
            t_review: 0.5,
        };
        assert_eq!(leverage_task(10.0, &times).unwrap(), 5.0);
        assert_eq!(leverage_task(0.0, &times).unwrap(), 0.0);
        assert_eq!(
            leverage_task(3.0, &PhaseTimes::default()),
            Err(Error::UndefinedLeverage)
        );
    }

    #[test]
    fn substituted_single_channel_example() {
        let s = TaskSpec {
            id: "x".into(),
            h_displaced: 10.0,
            i_task: 7200.0,
            i_novel: 7200.0,
            channels: ChannelAllocation {
                i_planning: 7200.0,
                i_interrupts: vec![],
                i_review: 0.0,
            },
            scalars: CostScalars {
                c_p: 1.0,
                c_i: vec![],
                c_r: 1.0,
            },
            alphas: PhaseAlphas {
                alpha_p: 1.0,
                alpha_i: vec![],
                alpha_r: 0.2,
            },
        };
        let r = DirectionalRates::new(72_000.0, 1000.0, 72_000.0, 1000.0).unwrap();
        assert_relative_eq!(
            leverage_task_substituted(&s, &r).unwrap(),
            100.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn substituted_matches_composition_and_scales() {
        let s = spec();
        let r = rates();
        let composed = leverage_task(s.h_displaced, &channel_times(&s, &r).unwrap()).unwrap();
        let direct = leverage_task_substituted(&s, &r).unwrap();
        assert_relative_eq!(composed, direct, max_relative = 1e-12);

        let mut doubled = s.clone();
        doubled.scalars.c_p *= 2.0;
        doubled.scalars.c_r *= 2.0;
        doubled.scalars.c_i.iter_mut().for_each(|c| *c *= 2.0);
        assert_relative_eq!(
            leverage_task_substituted(&doubled, &r).unwrap(),
            direct / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mismatched_interrupt_vectors_rejected() {
        let mut s = spec();
        s.scalars.c_i.pop();
        assert!(matches!(
            channel_times(&s, &rates()),
            Err(Error::InvalidParameter(_))
        ));
        let mut s = spec();
        s.i_novel = s.i_task + 1.0;
        assert!(s.validate().is_err());
    }

    fn alloc(p: f64, i: &[f64], r: f64) -> ChannelAllocation {
        ChannelAllocation {
            i_planning: p,
            i_interrupts: i.to_vec(),
            i_review: r,
        }
    }

    #[test]
    fn verdicts() {
        let tol = DEFAULT_CONSERVATION_TOLERANCE;
        let v = check_conservation(100.0, &alloc(50.0, &[20.0], 30.0), tol).unwrap();
        assert_eq!(v.kind, VerdictKind::Exact);
        let v = check_conservation(100.0, &alloc(50.0, &[40.0], 30.0), tol).unwrap();
        assert_eq!(v.kind, VerdictKind::Redundant);
        assert_relative_eq!(v.slack_bits, 20.0);
        let v = check_conservation(100.0, &alloc(50.0, &[10.0], 30.0), tol).unwrap();
        assert_eq!(v.kind, VerdictKind::Violated);
        assert_relative_eq!(v.slack_bits, 10.0);
    }

    #[test]
    fn enforcement_policy() {
        let v = ConservationVerdict {
            kind: VerdictKind::Violated,
            slack_bits: 4.0,
        };
        assert!(enforce("a", &v, ConservationMode::Simulation).is_err());
        assert!(enforce("a", &v, ConservationMode::Analytics)
            .unwrap()
            .is_some());
    }

    #[test]
    fn homogeneity_in_bits() {
        let s = spec();
        let r = rates();
        let base = channel_times(&s, &r).unwrap();
        let mut scaled = s.clone();
        let k = 3.0;
        scaled.channels.i_planning *= k;
        scaled.channels.i_review *= k;
        scaled
            .channels
            .i_interrupts
            .iter_mut()
            .for_each(|b| *b *= k);
        let t = channel_times(&scaled, &r).unwrap();
        assert_relative_eq!(t.total(), k * base.total(), max_relative = 1e-12);
        assert_relative_eq!(
            leverage_task(10.0, &t).unwrap(),
            leverage_task(10.0, &base).unwrap() / k,
            max_relative = 1e-12
        );
    }
}

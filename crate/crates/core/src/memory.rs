//! Density growth with shared memory, channel decay, and the per-task
//! ceiling.
//!
//! Memory is a scalar stock `m` in abstract context units, tracked per
//! domain. A [`DensityModel`] maps `m` to a directional rate for each
//! direction; a [`ChannelDecay`] maps `m` to the bits each channel still has
//! to carry. Together they give the phase-time trajectory of a task as the
//! system matures: interrupts and review vanish, planning floors at the
//! novel bits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conservation::{channel_times, PhaseTimes, TaskSpec};
use crate::density::{self, Direction, DirectionalRates, DEFAULT_RHO_IN_MAX};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    pub m: f64,
    pub domain_tag: String,
}

impl MemoryState {
    pub fn new(m: f64, domain_tag: impl Into<String>) -> Result<Self> {
        density::non_negative("m", m)?;
        Ok(MemoryState {
            m,
            domain_tag: domain_tag.into(),
        })
    }

    pub fn empty(domain_tag: impl Into<String>) -> Self {
        MemoryState {
            m: 0.0,
            domain_tag: domain_tag.into(),
        }
    }
}

/// Parametric form of `rho(m)` for one direction. Rates in bits/hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityCurve {
    /// `min(rho0 + slope * m, cap)`.
    Linear { rho0: f64, slope: f64, cap: f64 },
    /// `min(rho0 + gain * ln(1 + m), cap)`.
    Logarithmic { rho0: f64, gain: f64, cap: f64 },
    /// `rho_min + (rho_max - rho_min) * m / (m + half_m)`.
    Saturating {
        rho_min: f64,
        rho_max: f64,
        half_m: f64,
    },
}

impl DensityCurve {
    pub fn validate(&self, ceiling: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            DensityCurve::Linear { rho0, slope, cap }
            | DensityCurve::Logarithmic {
                rho0,
                gain: slope,
                cap,
            } => {
                density::positive("rho0", rho0)?;
                density::positive("slope/gain", slope)?;
                if !(cap > rho0) {
                    return bad(format!("cap {cap} must exceed rho0 {rho0}"));
                }
                if rho0 > ceiling {
                    return bad(format!("rho0 {rho0} exceeds the direction ceiling {ceiling}"));
                }
            }
            DensityCurve::Saturating {
                rho_min,
                rho_max,
                half_m,
            } => {
                density::positive("rho_min", rho_min)?;
                density::positive("half_m", half_m)?;
                if !(rho_max > rho_min) {
                    return bad(format!("rho_max {rho_max} must exceed rho_min {rho_min}"));
                }
                if rho_max > ceiling {
                    return bad(format!(
                        "rho_max {rho_max} exceeds the direction ceiling {ceiling}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Unchecked evaluation, clamped at `ceiling`.
    fn eval(&self, m: f64, ceiling: f64) -> f64 {
        let raw = match *self {
            DensityCurve::Linear { rho0, slope, cap } => (rho0 + slope * m).min(cap),
            DensityCurve::Logarithmic { rho0, gain, cap } => (rho0 + gain * m.ln_1p()).min(cap),
            DensityCurve::Saturating {
                rho_min,
                rho_max,
                half_m,
            } => rho_min + (rho_max - rho_min) * (m / (m + half_m)),
        };
        raw.min(ceiling)
    }

    /// Memory scale of the curve: `half_m` for saturating curves, the
    /// memory at which the cap is reached otherwise.
    pub fn characteristic_m(&self) -> f64 {
        match *self {
            DensityCurve::Linear { rho0, slope, cap } => (cap - rho0) / slope,
            DensityCurve::Logarithmic { rho0, gain, cap } => ((cap - rho0) / gain).exp_m1(),
            DensityCurve::Saturating { half_m, .. } => half_m,
        }
    }
}

/// How memory accrued in one domain is seen from another.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MemoryScope {
    /// Each domain reads only its own stock.
    #[default]
    Localized,
    /// Every domain reads the total stock across domains.
    Global,
    /// Each domain reads its own stock, and foreign stock depresses its
    /// rates by up to `depth` (a fraction in [0, 1)).
    NegativeTransfer { depth: f64, half_m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub input: DensityCurve,
    pub output: DensityCurve,
    #[serde(default = "default_rho_in_max")]
    pub rho_in_max: f64,
    pub rho_out_max: f64,
}

fn default_rho_in_max() -> f64 {
    DEFAULT_RHO_IN_MAX
}

impl DensityModel {
    pub fn validate(&self) -> Result<()> {
        density::positive("rho_in_max", self.rho_in_max)?;
        density::positive("rho_out_max", self.rho_out_max)?;
        self.input.validate(self.rho_in_max)?;
        self.output.validate(self.rho_out_max)
    }

    pub fn curve(&self, direction: Direction) -> &DensityCurve {
        match direction {
            Direction::In => &self.input,
            Direction::Out => &self.output,
        }
    }

    pub fn ceiling(&self, direction: Direction) -> f64 {
        match direction {
            Direction::In => self.rho_in_max,
            Direction::Out => self.rho_out_max,
        }
    }

    /// Both directional rates at memory `m`.
    pub fn rates_at(&self, m: f64) -> Result<DirectionalRates> {
        DirectionalRates::new(
            rho_of_memory(self, Direction::In, m)?,
            rho_of_memory(self, Direction::Out, m)?,
            self.rho_in_max,
            self.rho_out_max,
        )
    }

    /// Largest memory scale across both directions.
    pub fn characteristic_m(&self) -> f64 {
        self.input.characteristic_m().max(self.output.characteristic_m())
    }
}

pub fn rho_of_memory(model: &DensityModel, direction: Direction, m: f64) -> Result<f64> {
    density::non_negative("m", m)?;
    model.validate()?;
    Ok(model
        .curve(direction)
        .eval(m, model.ceiling(direction)))
}

/// Per-domain memory stocks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MemoryBank {
    stocks: BTreeMap<String, f64>,
}

impl MemoryBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stock(&self, domain: &str) -> f64 {
        self.stocks.get(domain).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.stocks.values().sum()
    }

    fn foreign(&self, domain: &str) -> f64 {
        self.stocks
            .iter()
            .filter(|(d, _)| d.as_str() != domain)
            .map(|(_, m)| m)
            .sum()
    }

    /// Adds `delta` to `domain` and returns the new stock.
    pub fn accrue(&mut self, domain: &str, delta: f64) -> Result<f64> {
        density::non_negative("delta_m", delta)?;
        let stock = self.stocks.entry(domain.to_string()).or_insert(0.0);
        *stock += delta;
        Ok(*stock)
    }

    /// The memory a query in `domain` sees.
    pub fn state_for(&self, domain: &str, scope: MemoryScope) -> MemoryState {
        let m = match scope {
            MemoryScope::Global => self.total(),
            MemoryScope::Localized | MemoryScope::NegativeTransfer { .. } => self.stock(domain),
        };
        MemoryState {
            m,
            domain_tag: domain.to_string(),
        }
    }

    /// Directional rates for an exchange in `domain`.
    pub fn rates_for(
        &self,
        domain: &str,
        scope: MemoryScope,
        model: &DensityModel,
    ) -> Result<DirectionalRates> {
        let state = self.state_for(domain, scope);
        let rates = model.rates_at(state.m)?;
        match scope {
            MemoryScope::NegativeTransfer { depth, half_m } => {
                if !(0.0..1.0).contains(&depth) {
                    return Err(Error::domain("depth", depth, "within [0, 1)"));
                }
                density::positive("half_m", half_m)?;
                let foreign = self.foreign(domain);
                let factor = 1.0 - depth * foreign / (foreign + half_m);
                DirectionalRates::new(
                    rates.rho_in * factor,
                    rates.rho_out * factor,
                    rates.rho_in_max,
                    rates.rho_out_max,
                )
            }
            _ => Ok(rates),
        }
    }
}

/// Hyperbolic decay of channel bits with memory: `bits(m) = bits(0) * k / (m + k)`.
///
/// Planning splits into the task's novel bits, which never decay, and
/// context bits, which do.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDecay {
    pub k_plan_context: f64,
    pub k_interrupt: f64,
    pub k_review: f64,
}

impl ChannelDecay {
    pub fn validate(&self) -> Result<()> {
        density::positive("k_plan_context", self.k_plan_context)?;
        density::positive("k_interrupt", self.k_interrupt)?;
        density::positive("k_review", self.k_review)
    }

    pub fn factor(k: f64, m: f64) -> f64 {
        k / (m + k)
    }

    pub fn largest_k(&self) -> f64 {
        self.k_plan_context.max(self.k_interrupt).max(self.k_review)
    }

    /// Planning bits at memory `m` given the baseline planning bits.
    pub fn planning_bits(&self, i_planning: f64, i_novel: f64, m: f64) -> f64 {
        let context = (i_planning - i_novel).max(0.0);
        i_novel + context * Self::factor(self.k_plan_context, m)
    }

    pub fn interrupt_bits(&self, bits: f64, m: f64) -> f64 {
        bits * Self::factor(self.k_interrupt, m)
    }

    pub fn review_bits(&self, bits: f64, m: f64) -> f64 {
        bits * Self::factor(self.k_review, m)
    }

    /// The task as it presents at memory `m`: decayed channel bits, with
    /// the requirement reduced by the bits memory now supplies.
    pub fn spec_at(&self, spec: &TaskSpec, m: f64) -> Result<TaskSpec> {
        if spec.channels.i_planning < spec.i_novel {
            return Err(Error::InvalidParameter(format!(
                "task `{}`: planning carries {} bits, fewer than its {} novel bits",
                spec.id, spec.channels.i_planning, spec.i_novel
            )));
        }
        let mut out = spec.clone();
        let ch = &mut out.channels;
        ch.i_planning = self.planning_bits(spec.channels.i_planning, spec.i_novel, m);
        for b in ch.i_interrupts.iter_mut() {
            *b = self.interrupt_bits(*b, m);
        }
        ch.i_review = self.review_bits(spec.channels.i_review, m);
        let supplied = spec.channels.total() - ch.total();
        out.i_task = (spec.i_task - supplied).max(spec.i_novel);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeilingResult {
    pub l_max: f64,
    pub planning_floor_hours: f64,
}

/// Least planning time at these rates: the novel bits at `rho_eff(alpha_p)`.
pub fn planning_floor(i_novel: f64, alpha_p: f64, rates_at_m: &DirectionalRates) -> Result<f64> {
    density::non_negative("i_novel", i_novel)?;
    if i_novel == 0.0 {
        density::check_alpha(alpha_p)?;
        rates_at_m.validate()?;
        return Ok(0.0);
    }
    Ok(i_novel / density::effective_density(alpha_p, rates_at_m)?)
}

/// `H * rho_in_max / i_novel`.
pub fn task_ceiling(h_displaced: f64, rho_in_max: f64, i_novel: f64) -> Result<CeilingResult> {
    density::non_negative("h_displaced", h_displaced)?;
    density::positive("rho_in_max", rho_in_max)?;
    density::non_negative("i_novel", i_novel)?;
    if i_novel == 0.0 {
        return Err(Error::UnboundedCeiling);
    }
    Ok(CeilingResult {
        l_max: h_displaced * rho_in_max / i_novel,
        planning_floor_hours: i_novel / rho_in_max,
    })
}

/// One point of a maturity trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub m: f64,
    pub times: PhaseTimes,
    /// `i_novel / rho_eff(alpha_p)` at this `m`.
    pub planning_floor: f64,
}

/// Phase times of `spec` at each memory value in `m_grid`.
pub fn limit_profile(
    spec: &TaskSpec,
    model: &DensityModel,
    decay: &ChannelDecay,
    m_grid: &[f64],
) -> Result<Vec<LimitPoint>> {
    spec.validate()?;
    model.validate()?;
    decay.validate()?;
    if m_grid.is_empty() {
        return Err(Error::InvalidParameter("m_grid is empty".into()));
    }
    if m_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("m_grid must be increasing".into()));
    }
    m_grid
        .iter()
        .map(|&m| {
            let rates = model.rates_at(m)?;
            let at_m = decay.spec_at(spec, m)?;
            Ok(LimitPoint {
                m,
                times: channel_times(&at_m, &rates)?,
                planning_floor: planning_floor(spec.i_novel, spec.alphas.alpha_p, &rates)?,
            })
        })
        .collect()
}

/// `count` points from `start` growing by `ratio`.
pub fn geometric_grid(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    std::iter::successors(Some(start), |m| Some(m * ratio))
        .take(count)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conservation::{ChannelAllocation, CostScalars, PhaseAlphas};
    use approx::assert_relative_eq;

    fn saturating(rho_min: f64, rho_max: f64, half_m: f64) -> DensityCurve {
        DensityCurve::Saturating {
            rho_min,
            rho_max,
            half_m,
        }
    }

    fn model() -> DensityModel {
        DensityModel {
            input: saturating(20_000.0, 60_000.0, 50.0),
            output: saturating(40_000.0, 400_000.0, 80.0),
            rho_in_max: DEFAULT_RHO_IN_MAX,
            rho_out_max: 500_000.0,
        }
    }

    fn spec() -> TaskSpec {
        TaskSpec {
            id: "t".into(),
            h_displaced: 6.0,
            i_task: 30_000.0,
            i_novel: 4_000.0,
            channels: ChannelAllocation {
                i_planning: 6_000.0,
                i_interrupts: vec![3_000.0, 2_000.0],
                i_review: 20_000.0,
            },
            scalars: CostScalars {
                c_p: 1.0,
                c_i: vec![1.5, 1.5],
                c_r: 1.2,
            },
            alphas: PhaseAlphas {
                alpha_p: 0.8,
                alpha_i: vec![0.5, 0.5],
                alpha_r: 0.2,
            },
        }
    }

    fn decay() -> ChannelDecay {
        ChannelDecay {
            k_plan_context: 30.0,
            k_interrupt: 40.0,
            k_review: 60.0,
        }
    }

    #[test]
    fn saturating_boundaries() {
        let m = model();
        assert_eq!(rho_of_memory(&m, Direction::In, 0.0).unwrap(), 20_000.0);
        assert_relative_eq!(
            rho_of_memory(&m, Direction::In, 50.0).unwrap(),
            40_000.0,
            max_relative = 1e-12
        );
        let far = rho_of_memory(&m, Direction::In, 99.0 * 50.0).unwrap();
        assert!((60_000.0 - far) / 60_000.0 <= 0.01);
    }

    #[test]
    fn linear_and_log_clamp_at_ceiling() {
        let mut m = model();
        m.input = DensityCurve::Linear {
            rho0: 10_000.0,
            slope: 1_000.0,
            cap: 1e9,
        };
        assert_eq!(
            rho_of_memory(&m, Direction::In, 1e6).unwrap(),
            DEFAULT_RHO_IN_MAX
        );
        m.input = DensityCurve::Logarithmic {
            rho0: 10_000.0,
            gain: 5_000.0,
            cap: 30_000.0,
        };
        assert_eq!(rho_of_memory(&m, Direction::In, 1e9).unwrap(), 30_000.0);
        let a = rho_of_memory(&m, Direction::In, 1.0).unwrap();
        let b = rho_of_memory(&m, Direction::In, 2.0).unwrap();
        assert!(b > a);
    }

    #[test]
    fn invalid_families_rejected() {
        let mut m = model();
        m.input = saturating(50_000.0, 80_000.0, 10.0);
        assert!(matches!(
            rho_of_memory(&m, Direction::In, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        m.input = DensityCurve::Linear {
            rho0: 1.0,
            slope: -1.0,
            cap: 10.0,
        };
        assert!(m.validate().is_err());
        m.input = saturating(5.0, 4.0, 1.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn floor_examples() {
        let r = DirectionalRates::new(72_000.0, 1_000.0, 72_000.0, 1_000.0).unwrap();
        assert_eq!(planning_floor(0.0, 0.8, &r).unwrap(), 0.0);
        assert_relative_eq!(planning_floor(7200.0, 1.0, &r).unwrap(), 0.1);
        let m = model();
        let mut prev = f64::INFINITY;
        for mem in geometric_grid(1.0, 4.0, 12) {
            let f = planning_floor(500.0, 0.8, &m.rates_at(mem).unwrap()).unwrap();
            assert!(f > 0.0 && f < prev);
            prev = f;
        }
    }

    #[test]
    fn ceiling_examples() {
        let c = task_ceiling(10.0, 72_000.0, 7_200.0).unwrap();
        assert_relative_eq!(c.l_max, 100.0);
        assert_relative_eq!(c.planning_floor_hours, 0.1);
        assert_eq!(
            task_ceiling(10.0, 72_000.0, 0.0),
            Err(Error::UnboundedCeiling)
        );
        let d = task_ceiling(10.0, 72_000.0, 14_400.0).unwrap();
        assert_relative_eq!(d.l_max, c.l_max / 2.0);
    }

    #[test]
    fn profile_at_origin_is_baseline() {
        let s = spec();
        let m = model();
        let p = limit_profile(&s, &m, &decay(), &[0.0]).unwrap();
        let base = channel_times(&s, &m.rates_at(0.0).unwrap()).unwrap();
        assert_eq!(p[0].times, base);
    }

    #[test]
    fn profile_limits() {
        let s = spec();
        let m = model();
        let d = decay();
        let big = 99.0 * d.largest_k().max(m.characteristic_m());
        let p = limit_profile(&s, &m, &d, &[0.0, big]).unwrap();
        let (origin, far) = (&p[0].times, &p[1].times);
        assert!(far.interrupt_total() <= 0.01 * origin.interrupt_total());
        assert!(far.t_review <= 0.01 * origin.t_review);
        assert!((far.t_planning - p[1].planning_floor) / p[1].planning_floor <= 0.01);
    }

    #[test]
    fn profile_rejects_bad_grids() {
        let s = spec();
        assert!(limit_profile(&s, &model(), &decay(), &[]).is_err());
        assert!(limit_profile(&s, &model(), &decay(), &[2.0, 1.0]).is_err());
    }

    #[test]
    fn decayed_spec_stays_conserved() {
        use crate::conservation::{check_conservation, VerdictKind};
        let mut s = spec();
        s.i_task = s.channels.total();
        for m in geometric_grid(0.5, 3.0, 10) {
            let at = decay().spec_at(&s, m).unwrap();
            let v = check_conservation(at.i_task, &at.channels, 1e-6).unwrap();
            assert_ne!(v.kind, VerdictKind::Violated);
        }
    }

    #[test]
    fn bank_scopes() {
        let m = model();
        let mut bank = MemoryBank::new();
        bank.accrue("a", 50.0).unwrap();
        let base = m.rates_at(0.0).unwrap();
        let local_b = bank.rates_for("b", MemoryScope::Localized, &m).unwrap();
        assert_eq!(local_b, base);
        let global_b = bank.rates_for("b", MemoryScope::Global, &m).unwrap();
        let local_a = bank.rates_for("a", MemoryScope::Localized, &m).unwrap();
        assert_eq!(global_b, local_a);
        let neg = MemoryScope::NegativeTransfer {
            depth: 0.3,
            half_m: 50.0,
        };
        let neg_b = bank.rates_for("b", neg, &m).unwrap();
        assert!(neg_b.rho_in < base.rho_in);
        assert_eq!(bank.rates_for("a", neg, &m).unwrap(), local_a);
    }
}

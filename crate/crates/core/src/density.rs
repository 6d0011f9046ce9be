//! Directional information density.
//!
//! Every exchange moves bits in two directions at once: human to agent at
//! `rho_in` and agent to human at `rho_out`. When a fraction `alpha` of the
//! exchange flows human to agent, the exchange time is the sum of both
//! directional transfer times and the effective density is the
//! alpha-weighted harmonic mean of the two rates.
//!
//! Rates are bits/hour internally. Use [`bits_per_sec`] at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Speech-rate ceiling on human output: 20 bits/sec.
pub const DEFAULT_RHO_IN_MAX: f64 = 20.0 * SECONDS_PER_HOUR;

/// Converts a rate in bits/sec to bits/hour.
pub fn bits_per_sec(rate: f64) -> f64 {
    rate * SECONDS_PER_HOUR
}

/// Converts a rate in bits/hour to bits/sec.
pub fn to_bits_per_sec(rate: f64) -> f64 {
    rate / SECONDS_PER_HOUR
}

/// Information direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Human to agent.
    In,
    /// Agent to human.
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalRates {
    pub rho_in: f64,
    pub rho_out: f64,
    pub rho_in_max: f64,
    pub rho_out_max: f64,
}

impl DirectionalRates {
    /// All values in bits/hour.
    pub fn new(rho_in: f64, rho_out: f64, rho_in_max: f64, rho_out_max: f64) -> Result<Self> {
        let rates = DirectionalRates {
            rho_in,
            rho_out,
            rho_in_max,
            rho_out_max,
        };
        rates.validate()?;
        Ok(rates)
    }

    /// Rates with the default input ceiling. The output ceiling has no
    /// defensible default and must be supplied.
    pub fn with_default_in_ceiling(rho_in: f64, rho_out: f64, rho_out_max: f64) -> Result<Self> {
        Self::new(rho_in, rho_out, DEFAULT_RHO_IN_MAX, rho_out_max)
    }

    /// Builds rates from bits/sec values.
    pub fn from_bits_per_sec(
        rho_in: f64,
        rho_out: f64,
        rho_in_max: f64,
        rho_out_max: f64,
    ) -> Result<Self> {
        Self::new(
            bits_per_sec(rho_in),
            bits_per_sec(rho_out),
            bits_per_sec(rho_in_max),
            bits_per_sec(rho_out_max),
        )
    }

    pub fn validate(&self) -> Result<()> {
        positive("rho_in", self.rho_in)?;
        positive("rho_out", self.rho_out)?;
        positive("rho_in_max", self.rho_in_max)?;
        positive("rho_out_max", self.rho_out_max)?;
        if self.rho_in > self.rho_in_max {
            return Err(Error::domain("rho_in", self.rho_in, "<= rho_in_max"));
        }
        if self.rho_out > self.rho_out_max {
            return Err(Error::domain("rho_out", self.rho_out, "<= rho_out_max"));
        }
        Ok(())
    }

    pub fn rate(&self, direction: Direction) -> f64 {
        match direction {
            Direction::In => self.rho_in,
            Direction::Out => self.rho_out,
        }
    }

    pub fn ceiling(&self, direction: Direction) -> f64 {
        match direction {
            Direction::In => self.rho_in_max,
            Direction::Out => self.rho_out_max,
        }
    }

    /// Multiplies one direction's rate by `factor`, clamped at that
    /// direction's ceiling.
    pub fn boosted(&self, direction: Direction, factor: f64) -> Result<Self> {
        positive("factor", factor)?;
        let mut out = *self;
        match direction {
            Direction::In => out.rho_in = (self.rho_in * factor).min(self.rho_in_max),
            Direction::Out => out.rho_out = (self.rho_out * factor).min(self.rho_out_max),
        }
        out.validate()?;
        Ok(out)
    }
}

/// One exchange: its directional split and total bits moved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeProfile {
    pub alpha: f64,
    pub info_bits: f64,
}

impl ExchangeProfile {
    pub fn new(alpha: f64, info_bits: f64) -> Result<Self> {
        check_alpha(alpha)?;
        non_negative("info_bits", info_bits)?;
        Ok(ExchangeProfile { alpha, info_bits })
    }

    pub fn time(&self, rates: &DirectionalRates) -> Result<f64> {
        exchange_time(self.info_bits, self.alpha, rates)
    }
}

/// `1 / (alpha / rho_in + (1 - alpha) / rho_out)` in bits/hour.
pub fn effective_density(alpha: f64, rates: &DirectionalRates) -> Result<f64> {
    check_alpha(alpha)?;
    rates.validate()?;
    Ok(harmonic(alpha, rates.rho_in, rates.rho_out))
}

/// Hours needed to move `info_bits` with split `alpha`.
pub fn exchange_time(info_bits: f64, alpha: f64, rates: &DirectionalRates) -> Result<f64> {
    check_alpha(alpha)?;
    non_negative("info_bits", info_bits)?;
    rates.validate()?;
    if alpha == 1.0 {
        return Ok(info_bits / rates.rho_in);
    }
    if alpha == 0.0 {
        return Ok(info_bits / rates.rho_out);
    }
    Ok(alpha * info_bits / rates.rho_in + (1.0 - alpha) * info_bits / rates.rho_out)
}

/// Unchecked harmonic mean; callers validate.
pub(crate) fn harmonic(alpha: f64, rho_in: f64, rho_out: f64) -> f64 {
    if alpha == 1.0 {
        rho_in
    } else if alpha == 0.0 {
        rho_out
    } else {
        1.0 / (alpha / rho_in + (1.0 - alpha) / rho_out)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("alpha", alpha, "within [0, 1]"));
    }
    Ok(())
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::domain(name, value, "finite and > 0"));
    }
    Ok(())
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::domain(name, value, "finite and >= 0"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rates_bps(rin: f64, rout: f64) -> DirectionalRates {
        DirectionalRates::from_bits_per_sec(rin, rout, rin.max(20.0), rout * 10.0).unwrap()
    }

    #[test]
    fn degenerate_alphas_pick_one_channel() {
        let r = rates_bps(20.0, 80.0);
        assert_eq!(effective_density(1.0, &r).unwrap(), r.rho_in);
        assert_eq!(effective_density(0.0, &r).unwrap(), r.rho_out);
    }

    #[test]
    fn balanced_harmonic_mean() {
        let r = rates_bps(20.0, 80.0);
        let rho = effective_density(0.5, &r).unwrap();
        assert_relative_eq!(to_bits_per_sec(rho), 32.0, max_relative = 1e-12);
    }

    #[test]
    fn exchange_time_examples() {
        let r = rates_bps(20.0, 80.0);
        assert_eq!(exchange_time(0.0, 0.3, &r).unwrap(), 0.0);
        let t = exchange_time(7200.0, 0.5, &r).unwrap();
        assert_relative_eq!(t * SECONDS_PER_HOUR, 225.0, max_relative = 1e-12);
        let t = exchange_time(7200.0, 1.0, &r).unwrap();
        assert_relative_eq!(t * SECONDS_PER_HOUR, 360.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_alpha_tolerates_unused_channel() {
        // alpha = 1 never divides by rho_out.
        let r = DirectionalRates {
            rho_in: 10.0,
            rho_out: f64::MIN_POSITIVE,
            rho_in_max: 10.0,
            rho_out_max: 1.0,
        };
        assert_eq!(exchange_time(20.0, 1.0, &r).unwrap(), 2.0);
    }

    #[test]
    fn domain_errors() {
        let r = rates_bps(20.0, 80.0);
        assert!(matches!(
            effective_density(1.2, &r),
            Err(Error::Domain { name: "alpha", .. })
        ));
        assert!(effective_density(-0.1, &r).is_err());
        assert!(exchange_time(-1.0, 0.5, &r).is_err());
        assert!(DirectionalRates::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(DirectionalRates::new(2.0, 1.0, 1.0, 1.0).is_err());
        assert!(ExchangeProfile::new(0.5, -3.0).is_err());
    }

    #[test]
    fn default_input_ceiling_is_speech_rate() {
        assert_eq!(DEFAULT_RHO_IN_MAX, 72_000.0);
        let r = DirectionalRates::with_default_in_ceiling(1.0, 1.0, 5.0).unwrap();
        assert_eq!(r.rho_in_max, 72_000.0);
    }

    #[test]
    fn boost_clamps_at_ceiling() {
        let r = DirectionalRates::new(50_000.0, 10.0, 72_000.0, 100.0).unwrap();
        assert_eq!(r.boosted(Direction::In, 2.0).unwrap().rho_in, 72_000.0);
        assert_eq!(r.boosted(Direction::Out, 2.0).unwrap().rho_out, 20.0);
    }

    proptest! {
        #[test]
        fn harmonic_bounds(alpha in 0.0f64..=1.0, rin in 1.0f64..1e5, rout in 1.0f64..1e6) {
            let r = DirectionalRates::new(rin, rout, rin, rout).unwrap();
            let rho = effective_density(alpha, &r).unwrap();
            prop_assert!(rho >= rin.min(rout) * (1.0 - 1e-12));
            prop_assert!(rho <= rin.max(rout) * (1.0 + 1e-12));
        }

        #[test]
        fn time_density_consistency(
            alpha in 0.0f64..=1.0, bits in 1.0f64..1e7, rin in 1.0f64..1e5, rout in 1.0f64..1e6,
        ) {
            let r = DirectionalRates::new(rin, rout, rin, rout).unwrap();
            let t = exchange_time(bits, alpha, &r).unwrap();
            let rho = effective_density(alpha, &r).unwrap();
            prop_assert!(((t * rho) - bits).abs() <= 1e-9 * bits);
        }

        #[test]
        fn directional_lever(
            lo in 0.0f64..0.5, gap in 0.01f64..0.5, rin in 1.0f64..1e5, rout in 1.0f64..1e5,
        ) {
            let hi = lo + gap;
            let base = DirectionalRates::new(rin, rout, rin * 4.0, rout * 4.0).unwrap();
            let saving = |alpha: f64, boosted: &DirectionalRates| {
                let t0 = exchange_time(1.0, alpha, &base).unwrap();
                (t0 - exchange_time(1.0, alpha, boosted).unwrap()) / t0
            };
            let fast_in = base.boosted(Direction::In, 2.0).unwrap();
            let fast_out = base.boosted(Direction::Out, 2.0).unwrap();
            prop_assert!(saving(hi, &fast_in) > saving(lo, &fast_in));
            prop_assert!(saving(lo, &fast_out) > saving(hi, &fast_out));
        }
    }
}

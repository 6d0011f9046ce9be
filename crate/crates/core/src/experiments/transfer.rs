//! Memory transfer across domains: accrue memory in one domain through the
//! simulator, then probe effective density in that domain and in another.

use serde::{Deserialize, Serialize};

use crate::density::{effective_density, Direction};
use crate::error::{Error, Result};
use crate::memory::{MemoryBank, MemoryScope};
use crate::simulator::{run_simulation, Event, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferPattern {
    /// Only the accruing domain got faster.
    Localized,
    /// Both domains gained exactly the same.
    Generic,
    /// The accruing domain got faster and the other slower.
    Negative,
    /// Neither domain moved.
    NoEffect,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub m: f64,
    pub rho_in: f64,
    pub rho_out: f64,
    pub rho_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferTable {
    pub scope: MemoryScope,
    pub domain_a: String,
    pub domain_b: String,
    /// Accrual tasks reviewed before the horizon.
    pub accrued_tasks: usize,
    pub probe_alpha: f64,
    pub a_before: Probe,
    pub a_after: Probe,
    pub b_before: Probe,
    pub b_after: Probe,
    pub delta_a: f64,
    pub delta_b: f64,
    pub pattern: TransferPattern,
}

impl TransferTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,stage,m,rho_in,rho_out,rho_eff\n");
        for (domain, stage, p) in [
            (&self.domain_a, "before", &self.a_before),
            (&self.domain_a, "after", &self.a_after),
            (&self.domain_b, "before", &self.b_before),
            (&self.domain_b, "after", &self.b_after),
        ] {
            out.push_str(&format!(
                "{domain},{stage},{},{},{},{}\n",
                p.m, p.rho_in, p.rho_out, p.rho_eff
            ));
        }
        out
    }
}

pub fn classify_transfer(delta_a: f64, delta_b: f64) -> TransferPattern {
    if delta_a == 0.0 && delta_b == 0.0 {
        TransferPattern::NoEffect
    } else if delta_a > 0.0 && delta_b == 0.0 {
        TransferPattern::Localized
    } else if delta_a > 0.0 && delta_b == delta_a {
        TransferPattern::Generic
    } else if delta_a > 0.0 && delta_b < 0.0 {
        TransferPattern::Negative
    } else {
        TransferPattern::Unclassified
    }
}

fn probe(
    config: &SimConfig,
    bank: &MemoryBank,
    domain: &str,
    scope: MemoryScope,
    alpha: f64,
) -> Result<Probe> {
    let rates = bank
        .rates_for(domain, scope, &config.density)?
        .boosted(Direction::In, config.rate_factors.rho_in)?
        .boosted(Direction::Out, config.rate_factors.rho_out)?;
    Ok(Probe {
        m: bank.state_for(domain, scope).m,
        rho_in: rates.rho_in,
        rho_out: rates.rho_out,
        rho_eff: effective_density(alpha, &rates)?,
    })
}

/// Runs `accrual_tasks` tasks drawn from the domain-A templates under
/// `scope`, then probes both domains at the planning alpha of the first
/// domain-A template.
pub fn run_memory_transfer_experiment(
    base: &SimConfig,
    domain_a: &str,
    domain_b: &str,
    accrual_tasks: usize,
    scope: MemoryScope,
) -> Result<TransferTable> {
    if domain_a == domain_b {
        return Err(Error::Config("transfer needs two distinct domains".into()));
    }
    let mut config = base.clone();
    config.memory.scope = scope;
    config.tasks = accrual_tasks;
    config.templates.retain(|t| t.domain == domain_a);
    let Some(first) = config.templates.first() else {
        return Err(Error::Config(format!("no template in domain `{domain_a}`")));
    };
    let alpha = first.alpha_p;
    config.validate()?;

    let trace = run_simulation(&config)?;
    let mut bank = MemoryBank::new();
    let mut accrued_tasks = 0;
    for rec in &trace.events {
        match &rec.event {
            Event::ReviewEnd { .. } => accrued_tasks += 1,
            Event::MemoryUpdate { domain, m } => {
                let delta = m - bank.stock(domain);
                bank.accrue(domain, delta)?;
            }
            _ => {}
        }
    }
    let empty = MemoryBank::new();
    let a_before = probe(&config, &empty, domain_a, scope, alpha)?;
    let b_before = probe(&config, &empty, domain_b, scope, alpha)?;
    let a_after = probe(&config, &bank, domain_a, scope, alpha)?;
    let b_after = probe(&config, &bank, domain_b, scope, alpha)?;
    let delta_a = a_after.rho_eff - a_before.rho_eff;
    let delta_b = b_after.rho_eff - b_before.rho_eff;
    Ok(TransferTable {
        scope,
        domain_a: domain_a.to_string(),
        domain_b: domain_b.to_string(),
        accrued_tasks,
        probe_alpha: alpha,
        a_before,
        a_after,
        b_before,
        b_after,
        delta_a,
        delta_b,
        pattern: classify_transfer(delta_a, delta_b),
    })
}

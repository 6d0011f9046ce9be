use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::SECONDS_PER_HOUR;
use crate::error::{Error, Result};
use crate::experiments::{InterventionSpec, DEFAULT_MARGIN};
use crate::memory::{ChannelDecay, DensityCurve, DensityModel, MemoryScope};
use crate::scheduler::{Instance, InterruptArrival, SchedulerOptions, TaskNode};
use crate::simulator::{InterruptModel, MemoryRule, SimConfig, TaskTemplate};

pub const SCENARIO_VERSION: u32 = 1;

/// Unit strings declared by a scenario file. Times are always decimal hours
/// from scenario start and information is always bits; rates may be given
/// per second or per hour and are converted to bits/hour on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub time: String,
    pub information: String,
    pub rate: String,
}

impl Units {
    fn rate_factor(&self) -> Result<f64> {
        if self.time != "hours" {
            return Err(Error::Config(format!(
                "units.time must be \"hours\", got {:?}",
                self.time
            )));
        }
        if self.information != "bits" {
            return Err(Error::Config(format!(
                "units.information must be \"bits\", got {:?}",
                self.information
            )));
        }
        match self.rate.as_str() {
            "bits_per_sec" => Ok(SECONDS_PER_HOUR),
            "bits_per_hour" => Ok(1.0),
            other => Err(Error::Config(format!(
                "units.rate must be \"bits_per_sec\" or \"bits_per_hour\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: f64,
    pub tasks: usize,
    #[serde(default = "one")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub memory: MemoryRule,
    #[serde(default)]
    pub interrupts: InterruptModel,
    #[serde(default)]
    pub interrupt_arrival: InterruptArrival,
    #[serde(default)]
    pub duration_cv: f64,
    #[serde(default)]
    pub alpha_blind: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowDef {
    #[serde(default)]
    pub name: Option<String>,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDef {
    pub name: String,
    /// Window length in hours, starting at 0.
    pub window: f64,
    #[serde(default)]
    pub options: SchedulerOptions,
    pub nodes: Vec<TaskNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymmetrySpec {
    pub a: InterventionSpec,
    pub b: InterventionSpec,
    pub replicas: usize,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Overrides the simulation's duration noise for this experiment.
    #[serde(default)]
    pub duration_cv: Option<f64>,
    /// Also run the alpha-blind null model.
    #[serde(default = "yes")]
    pub null_model: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub domain_a: String,
    pub domain_b: String,
    pub accrual_tasks: usize,
    /// Overrides the simulation's memory increment.
    #[serde(default)]
    pub delta_m: Option<f64>,
    pub scopes: Vec<MemoryScope>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentsSection {
    #[serde(default)]
    pub asymmetry: Option<AsymmetrySpec>,
    #[serde(default)]
    pub transfer: Option<TransferSpec>,
}

/// A scenario file. Rates in `density` are in the declared rate unit; use
/// [`ScenarioConfig::density_model`] for bits/hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub units: Units,
    pub density: DensityModel,
    pub decay: ChannelDecay,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub templates: Vec<TaskTemplate>,
    #[serde(default)]
    pub windows: Vec<WindowDef>,
    #[serde(default)]
    pub instances: Vec<InstanceDef>,
    #[serde(default)]
    pub experiments: ExperimentsSection,
}

fn scale_curve(curve: DensityCurve, f: f64) -> DensityCurve {
    match curve {
        DensityCurve::Linear { rho0, slope, cap } => DensityCurve::Linear {
            rho0: rho0 * f,
            slope: slope * f,
            cap: cap * f,
        },
        DensityCurve::Logarithmic { rho0, gain, cap } => DensityCurve::Logarithmic {
            rho0: rho0 * f,
            gain: gain * f,
            cap: cap * f,
        },
        DensityCurve::Saturating {
            rho_min,
            rho_max,
            half_m,
        } => DensityCurve::Saturating {
            rho_min: rho_min * f,
            rho_max: rho_max * f,
            half_m,
        },
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// The density model in bits/hour.
    pub fn density_model(&self) -> DensityModel {
        let f = self.units.rate_factor().unwrap_or(1.0);
        DensityModel {
            input: scale_curve(self.density.input, f),
            output: scale_curve(self.density.output, f),
            rho_in_max: self.density.rho_in_max * f,
            rho_out_max: self.density.rho_out_max * f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                self.version
            )));
        }
        self.units.rate_factor()?;
        let model = self.density_model();
        model
            .validate()
            .map_err(|e| Error::Config(format!("density: {e}")))?;
        self.decay
            .validate()
            .map_err(|e| Error::Config(format!("decay: {e}")))?;
        for t in &self.templates {
            t.validate(&model)?;
        }
        for w in &self.windows {
            if !(w.t1 > w.t0) || !w.t0.is_finite() || !w.t1.is_finite() {
                return Err(Error::Config(format!(
                    "window ({}, {}] is empty or not finite",
                    w.t0, w.t1
                )));
            }
        }
        for inst in &self.instances {
            Instance::build(&inst.nodes, inst.window, &inst.options)
                .map_err(|e| Error::Config(format!("instance `{}`: {e}", inst.name)))?;
        }
        if self.simulation.is_some() {
            self.sim_config()?.validate()?;
        }
        if let Some(a) = &self.experiments.asymmetry {
            a.a.validate()?;
            a.b.validate()?;
            if a.replicas == 0 || a.repetitions == 0 {
                return Err(Error::Config("replicas and repetitions must be at least 1".into()));
            }
            if !(a.margin >= 0.0) {
                return Err(Error::Config("margin must be non-negative".into()));
            }
            if self.simulation.is_none() {
                return Err(Error::Config("experiments need a [simulation] section".into()));
            }
        }
        if let Some(t) = &self.experiments.transfer {
            if self.simulation.is_none() {
                return Err(Error::Config("experiments need a [simulation] section".into()));
            }
            if t.scopes.is_empty() {
                return Err(Error::Config("transfer needs at least one scope".into()));
            }
        }
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let Some(s) = &self.simulation else {
            return Err(Error::Config("scenario has no [simulation] section".into()));
        };
        Ok(SimConfig {
            seed: self.seed,
            horizon: s.horizon,
            tasks: s.tasks,
            max_in_flight: s.max_in_flight,
            density: self.density_model(),
            decay: self.decay,
            memory: s.memory,
            templates: self.templates.clone(),
            interrupts: s.interrupts,
            interrupt_arrival: s.interrupt_arrival,
            duration_cv: s.duration_cv,
            rate_factors: Default::default(),
            alpha_blind: s.alpha_blind,
        })
    }

    pub fn instance(&self, name: Option<&str>) -> Result<&InstanceDef> {
        match name {
            Some(n) => self
                .instances
                .iter()
                .find(|i| i.name == n)
                .ok_or_else(|| Error::Config(format!("no scheduler instance named `{n}`"))),
            None => self
                .instances
                .first()
                .ok_or_else(|| Error::Config("scenario has no scheduler instances".into())),
        }
    }
}

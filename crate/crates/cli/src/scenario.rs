//! Scenario documents: one TOML file per experiment.
//!
//! ```toml
//! name = "fig4c"
//! description = "balanced flux qubit"
//!
//! [params]
//! omega_c = 0.03
//! eta1 = 1e-3
//!
//! [pulse]
//! tau_p = 1e4
//!
//! [flux]
//! alpha = 0.7071067811865476
//!
//! [sweep]
//! parameter = "params.gamma_star"
//! values = [0.0, 1e-4]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qrouter_core::units::{rate_from_hz, time_from_seconds};
use qrouter_core::{EvolveOptions, FluxQubitConfig, PulseSpec, SystemParams};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Dotted path into the scenario, e.g. `params.gamma_star`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { dir: None, formats: default_formats() }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

/// Detuning grid for the steady-state scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyGrid {
    pub delta2_min: f64,
    pub delta2_max: f64,
    pub points: usize,
}

impl Default for SteadyGrid {
    fn default() -> Self {
        SteadyGrid { delta2_min: -6e-3, delta2_max: 6e-3, points: 1201 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Step budget; the run fails with a convergence error beyond it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

/// Inputs in laboratory units. Each present entry overrides the matching
/// dimensionless field, using `params.gamma_wg_hz` as the anchor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalUnits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_star_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_f_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_p_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub params: SystemParams,
    /// May be omitted when `physical.tau_p_seconds` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseSpec>,
    pub flux: FluxQubitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub steady: SteadyGrid,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalUnits>,
}

const SECTIONS: [&str; 3] = ["params", "pulse", "flux"];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are all representable in TOML")
    }

    fn check(&self) -> Result<(), CliError> {
        if self.steady.points < 2 || !(self.steady.delta2_max > self.steady.delta2_min) {
            return Err(CliError::Config("steady: need points >= 2 and delta2_max > delta2_min".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(CliError::Config("sweep.values: list is empty".into()));
            }
            // resolves the path and validates the first value against the schema
            self.with_value(&sw.parameter, sw.values[0])?;
        }
        self.resolved()?;
        Ok(())
    }

    /// Params and pulse with the physical-unit overrides applied.
    pub fn resolved(&self) -> Result<(SystemParams, PulseSpec), CliError> {
        let mut p = self.params.clone();
        let mut pulse = self.pulse.clone();
        if let Some(ph) = &self.physical {
            let hz = p.gamma_wg_hz;
            if let Some(v) = ph.gamma_star_hz {
                p.gamma_star = rate_from_hz(v, hz);
            }
            if let Some(v) = ph.gamma1_hz {
                p.gamma1 = rate_from_hz(v, hz);
            }
            if let Some(v) = ph.gamma2_hz {
                p = p.with_gamma2(rate_from_hz(v, hz));
            }
            if let Some(v) = ph.gamma_f_hz {
                p.gamma_f = rate_from_hz(v, hz);
            }
            if let Some(v) = ph.tau_p_seconds {
                pulse = Some(PulseSpec::new(time_from_seconds(v, hz)));
            }
            p.validate().map_err(|e| CliError::Config(format!("physical: {e}")))?;
        }
        let pulse = pulse.ok_or_else(|| CliError::Config("missing [pulse] section or physical.tau_p_seconds".into()))?;
        pulse.validate().map_err(|e| CliError::Config(format!("pulse: {e}")))?;
        Ok((p, pulse))
    }

    /// Copy of the scenario with one numeric field replaced.
    ///
    /// Dependent fields follow the usual conventions: setting `flux.alpha`
    /// recomputes `|β|`, `params.gamma2` recomputes ξ₂ and `pulse.tau_p`
    /// resets the delay to 5.5τ_p.
    pub fn with_value(&self, path: &str, value: f64) -> Result<Scenario, CliError> {
        let (section, field) = path
            .split_once('.')
            .filter(|(s, _)| SECTIONS.contains(s))
            .ok_or_else(|| CliError::Config(format!("sweep.parameter: `{path}` must look like params.<field>, pulse.<field> or flux.<field>")))?;
        let mut doc = serde_json::to_value(self).expect("scenario serializes");
        let obj = doc[section]
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("sweep.parameter: scenario has no [{section}] section")))?;
        if !obj.contains_key(field) {
            let known: Vec<&str> = obj.keys().map(String::as_str).collect();
            return Err(CliError::Config(format!(
                "sweep.parameter: `{section}` has no field `{field}` (known: {})",
                known.join(", ")
            )));
        }
        if !obj[field].is_number() {
            return Err(CliError::Config(format!("sweep.parameter: `{path}` is not numeric")));
        }
        let number = serde_json::Number::from_f64(value)
            .ok_or_else(|| CliError::Config(format!("sweep.values: {value} is not finite")))?;
        obj.insert(field.to_string(), Value::Number(number));
        match (section, field) {
            ("flux", "alpha") => obj.remove("beta_abs"),
            ("params", "gamma2") => obj.remove("xi_2"),
            ("pulse", "tau_p") => obj.remove("tau"),
            _ => None,
        };
        let physical_key = match (section, field) {
            ("params", "gamma_star") => Some("gamma_star_hz"),
            ("params", "gamma1") => Some("gamma1_hz"),
            ("params", "gamma2") => Some("gamma2_hz"),
            ("params", "gamma_f") => Some("gamma_f_hz"),
            ("pulse", "tau_p") => Some("tau_p_seconds"),
            _ => None,
        };
        if let (Some(key), Some(ph)) = (physical_key, doc.get_mut("physical").and_then(Value::as_object_mut)) {
            ph.remove(key);
        }
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("{path} = {value}: {e}")))
    }

    /// Integrator settings from the scenario, with command-line overrides.
    pub fn evolve_options(&self, samples: Option<usize>, rtol: Option<f64>) -> EvolveOptions {
        let mut o = EvolveOptions::default();
        if let Some(v) = self.integrator.rtol {
            o.rtol = v;
        }
        if let Some(v) = self.integrator.atol {
            o.atol = v;
        }
        if let Some(v) = self.integrator.samples {
            o.samples = v;
        }
        o.t_end = self.integrator.t_end;
        if let Some(v) = self.integrator.max_steps {
            o.max_steps = v;
        }
        if let Some(v) = samples {
            o.samples = v;
        }
        if let Some(v) = rtol {
            o.rtol = v;
        }
        o
    }
}

/// Scenario files shipped with the tool.
pub const PRESETS: [(&str, &str); 6] = [
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
    ("fig4c", include_str!("../presets/fig4c.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("experimental", include_str!("../presets/experimental.toml")),
];

pub fn preset(name: &str) -> Result<Scenario, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown preset `{name}` (available: {})", names.join(", ")))
    })?;
    Scenario::from_toml(text).map_err(|e| CliError::Config(format!("preset {name}: {e}")))
}

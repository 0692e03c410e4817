//! TOML configuration. Every key is optional and defaults to the reference
//! inverter; unknown keys are rejected.
//!
//! ```toml
//! [inverter]
//! r = 0.8            # Ω
//! l = 1.5e-3         # H
//! frequency = 60.0   # Hz
//! e_mag = 120.0      # V, grid vector (e_mag, 0)
//! s_nom = 1200.0     # W, used when i_max is absent
//! # i_max = 6.667    # A
//!
//! [droop]
//! m_p = 2.6e-3       # rad/s per W
//! m_q = 5e-3         # V per VAr
//! m_v2 = 5.0         # 1/s
//! cutoff = 60.0      # Hz, power measurement filter
//!
//! [oc]
//! k_v = 10.0         # 1/s
//!
//! [sim]
//! dt = 1e-4          # s
//! t_end = 1.0        # s
//! t0 = 0.2           # s, setpoint switch
//!
//! [[scenario]]
//! name = "my-run"
//! controller = "droop-pv2"   # oc | droop-pq | droop-pv2
//! pair = "pv2"               # pq | pv2 | qv2
//! pre = [200.0, 14400.0]
//! post = [850.0, 14400.0]
//! optimize = false
//! gamma = 1.0
//! ```
//!
//! Frequencies are in Hz and are converted to rad/s internally; phase
//! angles (only used by the `verify` report) are printed in degrees.

use std::f64::consts::PI;
use std::path::Path;

use invfeas_core::simulator::{Controller, DroopParams, Gains, OcParams, Scenario, SimConfig};
use invfeas_core::{InverterParams, OutputPair, OutputQuantity};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverterSection {
    pub r: f64,
    pub l: f64,
    pub frequency: f64,
    pub e_mag: f64,
    pub s_nom: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max: Option<f64>,
}

impl Default for InverterSection {
    fn default() -> Self {
        let p = InverterParams::reference();
        InverterSection {
            r: p.r,
            l: p.l,
            frequency: p.omega / (2.0 * PI),
            e_mag: p.e_mag,
            s_nom: invfeas_core::model::NOMINAL_POWER,
            i_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroopSection {
    pub m_p: f64,
    pub m_q: f64,
    pub m_v2: f64,
    pub cutoff: f64,
}

impl Default for DroopSection {
    fn default() -> Self {
        let d = DroopParams::reference();
        DroopSection { m_p: d.m_p, m_q: d.m_q, m_v2: d.m_v2, cutoff: d.omega_c / (2.0 * PI) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcSection {
    pub k_v: f64,
}

impl Default for OcSection {
    fn default() -> Self {
        OcSection { k_v: OcParams::reference().k_v }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_end: f64,
    pub t0: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let c = SimConfig::reference();
        SimSection { dt: c.dt, t_end: c.t_end, t0: c.t0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub name: String,
    pub controller: String,
    pub pair: String,
    pub pre: [f64; 2],
    pub post: [f64; 2],
    #[serde(default)]
    pub optimize: bool,
    #[serde(default = "unit_gamma")]
    pub gamma: f64,
}

fn unit_gamma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub inverter: InverterSection,
    pub droop: DroopSection,
    pub oc: OcSection,
    pub sim: SimSection,
    #[serde(rename = "scenario", skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioEntry>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.params()?;
        cfg.gains()?;
        cfg.sim_config()?;
        for s in &cfg.scenarios {
            scenario_from_entry(s)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn params(&self) -> Result<InverterParams, CliError> {
        let s = &self.inverter;
        let i_max = s.i_max.unwrap_or_else(|| InverterParams::default_i_max(s.s_nom, s.e_mag));
        InverterParams::new(s.r, s.l, 2.0 * PI * s.frequency, s.e_mag, i_max)
            .map_err(|e| CliError::Config(format!("[inverter] {e}")))
    }

    pub fn gains(&self) -> Result<Gains, CliError> {
        let d = &self.droop;
        let droop = DroopParams::new(d.m_p, d.m_q, d.m_v2, 2.0 * PI * d.cutoff)
            .map_err(|e| CliError::Config(format!("[droop] {e}")))?;
        let oc = OcParams::new(self.oc.k_v).map_err(|e| CliError::Config(format!("[oc] {e}")))?;
        Ok(Gains { droop, oc })
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        SimConfig::new(self.sim.dt, self.sim.t_end, self.sim.t0)
            .map_err(|e| CliError::Config(format!("[sim] {e}")))
    }

    /// Scenario by name: entries of the file first, then the built-in presets.
    pub fn scenario(&self, name: &str) -> Result<Scenario, CliError> {
        if let Some(entry) = self.scenarios.iter().find(|s| s.name == name) {
            return scenario_from_entry(entry);
        }
        Scenario::preset(name).ok_or_else(|| {
            let mut known: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
            known.extend(Scenario::PRESETS);
            CliError::Usage(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
        })
    }
}

/// Output pair from two quantity codes (`p`, `q`, `v2`), e.g. `pq`, `pv2`,
/// `v2q`.
pub fn parse_pair(s: &str) -> Result<OutputPair, CliError> {
    let unknown = || CliError::Usage(format!("unknown output pair `{s}` (pq, pv2, qv2)"));
    let lower = s.to_ascii_lowercase();
    let mut rest = lower.as_str();
    let mut qs = Vec::new();
    while !rest.is_empty() {
        let (q, tail) = if let Some(t) = rest.strip_prefix("v2") {
            (OutputQuantity::SquaredVoltage, t)
        } else if let Some(t) = rest.strip_prefix('p') {
            (OutputQuantity::ActivePower, t)
        } else if let Some(t) = rest.strip_prefix('q') {
            (OutputQuantity::ReactivePower, t)
        } else {
            return Err(unknown());
        };
        qs.push(q);
        rest = tail;
    }
    match qs[..] {
        [a, b] => OutputPair::new(a, b)
            .map_err(|_| CliError::Usage(format!("output pair `{s}` repeats a quantity"))),
        _ => Err(unknown()),
    }
}

pub fn pair_name(pair: OutputPair) -> String {
    format!("{}{}", pair.first().symbol(), pair.second().symbol()).to_ascii_lowercase()
}

fn scenario_from_entry(e: &ScenarioEntry) -> Result<Scenario, CliError> {
    let ctx = |msg: String| CliError::Config(format!("[[scenario]] `{}`: {msg}", e.name));
    let controller = match e.controller.as_str() {
        "oc" => Controller::Oc,
        "droop-pq" => Controller::DroopPq,
        "droop-pv2" => Controller::DroopPv2,
        other => return Err(ctx(format!("unknown controller `{other}`"))),
    };
    let pair = parse_pair(&e.pair).map_err(|err| ctx(err.to_string()))?;
    let s = Scenario {
        controller,
        pair,
        pre: e.pre,
        post: e.post,
        optimize_setpoints: e.optimize,
        gamma: e.gamma,
    };
    s.validate().map_err(|err| ctx(err.to_string()))?;
    Ok(s)
}

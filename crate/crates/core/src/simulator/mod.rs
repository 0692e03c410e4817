//! Fixed-step simulation of the inverter under setpoint-tracking controllers.
//!
//! Three controllers are provided: linear voltage feedback towards the
//! model-based equilibrium voltage of an optimized current (`Oc`), PQ droop
//! and PV² droop. A scenario switches from a pre- to a post-disturbance
//! setpoint at `t0`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::math::{ceil, round};
use crate::model::{instantaneous_outputs, steady_state_voltage, DqVector, InverterParams, OutputPair};
use crate::optimizer::{solve_sdp, SdpOptions, TrackingObjective};
use crate::{Error, Result};

mod controllers;
mod rk4;

pub use controllers::{
    droop_pq_derivatives, droop_pv2_derivatives, oc_derivatives, DroopParams, DroopState,
    OcParams, OcState,
};
pub use rk4::{rk4_step, OdeState};

/// Step size, horizon and disturbance instant, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub t0: f64,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, t0: f64) -> Result<Self> {
        let c = SimConfig { dt, t_end, t0 };
        c.validate()?;
        Ok(c)
    }

    /// 100 µs steps over one second, disturbance at 0.2 s.
    pub fn reference() -> Self {
        SimConfig { dt: 1e-4, t_end: 1.0, t0: 0.2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::InvalidParams("dt must lie in (0, 1e-3]"));
        }
        if !(self.t0 >= 0.0 && self.t0 < self.t_end && self.t_end.is_finite()) {
            return Err(Error::InvalidParams("need 0 <= t0 < t_end"));
        }
        Ok(())
    }

    /// Number of integration steps; the trajectory has one more record.
    pub fn steps(&self) -> usize {
        round(self.t_end / self.dt) as usize
    }

    /// Index of the first sample at or after `t0`.
    pub fn switch_index(&self) -> usize {
        ceil(self.t0 / self.dt - 1e-9) as usize
    }
}

/// Controller gains for all three controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub droop: DroopParams,
    pub oc: OcParams,
}

impl Gains {
    pub fn reference() -> Self {
        Gains { droop: DroopParams::reference(), oc: OcParams::reference() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    Oc,
    DroopPq,
    DroopPv2,
}

impl Controller {
    pub fn name(self) -> &'static str {
        match self {
            Controller::Oc => "oc",
            Controller::DroopPq => "droop-pq",
            Controller::DroopPv2 => "droop-pv2",
        }
    }

    /// Output pair a droop controller regulates; `None` for `Oc`, which
    /// accepts any pair.
    pub fn fixed_pair(self) -> Option<OutputPair> {
        match self {
            Controller::Oc => None,
            Controller::DroopPq => Some(OutputPair::PQ),
            Controller::DroopPv2 => Some(OutputPair::PV2),
        }
    }
}

/// State of whichever controller is running.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerState {
    Oc(OcState),
    DroopPq(DroopState),
    DroopPv2(DroopState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub controller: Controller,
    pub pair: OutputPair,
    pub pre: [f64; 2],
    pub post: [f64; 2],
    /// Replace both setpoints by the closest feasible outputs first.
    pub optimize_setpoints: bool,
    /// Weight of the second output in the setpoint optimization.
    pub gamma: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.controller.fixed_pair() {
            if p != self.pair {
                return Err(Error::InvalidParams("output pair does not match the controller"));
            }
        }
        if !self.pre.iter().chain(&self.post).all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("setpoints must be finite"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams("gamma must be finite and non-negative"));
        }
        Ok(())
    }

    /// Reference scenarios by name: `droop-pq`, `droop-pv2`, `oc-pq`,
    /// `oc-pv2`, `oc-qv2`.
    pub fn preset(name: &str) -> Option<Scenario> {
        let (controller, pair, pre, post) = match name {
            "droop-pq" => (Controller::DroopPq, OutputPair::PQ, PQ_SETPOINTS.0, PQ_SETPOINTS.1),
            "droop-pv2" => (Controller::DroopPv2, OutputPair::PV2, PV2_SETPOINTS.0, PV2_SETPOINTS.1),
            "oc-pq" => (Controller::Oc, OutputPair::PQ, PQ_SETPOINTS.0, PQ_SETPOINTS.1),
            "oc-pv2" => (Controller::Oc, OutputPair::PV2, PV2_SETPOINTS.0, PV2_SETPOINTS.1),
            "oc-qv2" => (Controller::Oc, OutputPair::QV2, QV2_SETPOINTS.0, QV2_SETPOINTS.1),
            _ => return None,
        };
        Some(Scenario { controller, pair, pre, post, optimize_setpoints: false, gamma: 1.0 })
    }

    pub const PRESETS: [&'static str; 5] = ["droop-pq", "droop-pv2", "oc-pq", "oc-pv2", "oc-qv2"];
}

const PQ_SETPOINTS: ([f64; 2], [f64; 2]) = ([800.0, 0.0], [1100.0, 0.0]);
const PV2_SETPOINTS: ([f64; 2], [f64; 2]) = ([200.0, 14400.0], [850.0, 14400.0]);
const QV2_SETPOINTS: ([f64; 2], [f64; 2]) = ([0.0, 14400.0], [-500.0, 14400.0]);

/// Setpoints actually applied before and after the disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSetpoints {
    pub outputs: [[f64; 2]; 2],
    /// Optimized currents, when the setpoints came from the optimizer.
    pub currents: Option<[DqVector; 2]>,
}

/// Droop internals recorded alongside the electrical quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopRecord {
    pub p_filt: f64,
    pub q_filt: f64,
    pub delta: f64,
    /// Voltage magnitude (PQ droop) or squared magnitude (PV² droop).
    pub v_cmd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: f64,
    pub i: DqVector,
    pub v: DqVector,
    pub p: f64,
    pub q: f64,
    pub v_sq: f64,
    pub droop: Option<DroopRecord>,
}

impl Record {
    pub fn i_mag(&self) -> f64 {
        self.i.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub controller: Controller,
    pub pair: OutputPair,
    pub config: SimConfig,
    pub setpoints: ResolvedSetpoints,
    /// One record per step, starting at `t = 0`.
    pub records: Vec<Record>,
    /// Set when the PV² droop voltage command went negative and was clamped.
    pub v_sq_clamped: bool,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }
}

/// Setpoints a scenario will apply. `Oc` always needs the optimal current,
/// so it always goes through the optimizer; droop controllers only when the
/// scenario asks for it.
pub fn resolve_setpoints(
    params: &InverterParams,
    scenario: &Scenario,
    sdp: &SdpOptions,
) -> Result<ResolvedSetpoints> {
    scenario.validate()?;
    if scenario.controller != Controller::Oc && !scenario.optimize_setpoints {
        return Ok(ResolvedSetpoints { outputs: [scenario.pre, scenario.post], currents: None });
    }
    let mut outputs = [[0.0; 2]; 2];
    let mut currents = [DqVector::ZERO; 2];
    for (k, target) in [scenario.pre, scenario.post].into_iter().enumerate() {
        let obj = TrackingObjective::new(target[0], target[1], scenario.gamma)?;
        let report = solve_sdp(params, scenario.pair, &obj, sdp)?;
        outputs[k] = [report.s1, report.s2];
        currents[k] = report.i_star;
    }
    Ok(ResolvedSetpoints { outputs, currents: Some(currents) })
}

/// Resolves the setpoints and simulates the scenario.
pub fn run_scenario(
    params: &InverterParams,
    scenario: &Scenario,
    cfg: &SimConfig,
    gains: &Gains,
) -> Result<Trajectory> {
    let resolved = resolve_setpoints(params, scenario, &SdpOptions::default())?;
    simulate(params, scenario.controller, scenario.pair, resolved, cfg, gains)
}

/// Simulates a controller from its cold-start state with the given
/// setpoints. `Oc` requires `setpoints.currents`.
pub fn simulate(
    params: &InverterParams,
    controller: Controller,
    pair: OutputPair,
    setpoints: ResolvedSetpoints,
    cfg: &SimConfig,
    gains: &Gains,
) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate()?;
    if let Some(p) = controller.fixed_pair() {
        if p != pair {
            return Err(Error::InvalidParams("output pair does not match the controller"));
        }
    }
    let e = params.grid_voltage();
    let mut state = match controller {
        Controller::Oc => ControllerState::Oc(OcState { i: DqVector::ZERO, v: e }),
        Controller::DroopPq | Controller::DroopPv2 => {
            let v_cmd = if controller == Controller::DroopPq { params.e_mag } else { e.norm_sq() };
            let out = instantaneous_outputs(DqVector::ZERO, e);
            let s = DroopState { i: DqVector::ZERO, p_filt: out.p, q_filt: out.q, delta: 0.0, v_cmd };
            if controller == Controller::DroopPq {
                ControllerState::DroopPq(s)
            } else {
                ControllerState::DroopPv2(s)
            }
        }
    };
    let v_targets = match (controller, setpoints.currents) {
        (Controller::Oc, Some(c)) => [steady_state_voltage(params, c[0]), steady_state_voltage(params, c[1])],
        (Controller::Oc, None) => {
            return Err(Error::InvalidParams("the OC controller needs target currents"))
        }
        _ => [e, e],
    };

    let steps = cfg.steps();
    let k_switch = cfg.switch_index();
    let mut traj = Trajectory {
        controller,
        pair,
        config: *cfg,
        setpoints,
        records: Vec::with_capacity(steps + 1),
        v_sq_clamped: false,
    };
    traj.records.push(record(0.0, &state));
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let phase = usize::from(k >= k_switch);
        let sp = setpoints.outputs[phase];
        let stepped = match state {
            ControllerState::Oc(s) => {
                let f = |_: f64, x: &OcState| oc_derivatives(params, &gains.oc, v_targets[phase], x);
                rk4_step(f, &s, t, cfg.dt).map(ControllerState::Oc)
            }
            ControllerState::DroopPq(s) => {
                let f = |_: f64, x: &DroopState| droop_pq_derivatives(params, &gains.droop, sp, x);
                rk4_step(f, &s, t, cfg.dt).map(ControllerState::DroopPq)
            }
            ControllerState::DroopPv2(s) => {
                let f = |_: f64, x: &DroopState| droop_pv2_derivatives(params, &gains.droop, sp, x);
                rk4_step(f, &s, t, cfg.dt).map(|mut n| {
                    if n.v_cmd < 0.0 {
                        n.v_cmd = 0.0;
                        traj.v_sq_clamped = true;
                    }
                    ControllerState::DroopPv2(n)
                })
            }
        };
        state = match stepped {
            Ok(s) => s,
            Err(Error::NonFinite { t, .. }) => {
                return Err(Error::NonFinite { t, partial: Some(Box::new(traj)) })
            }
            Err(other) => return Err(other),
        };
        traj.records.push(record((k + 1) as f64 * cfg.dt, &state));
    }
    Ok(traj)
}

fn record(t: f64, state: &ControllerState) -> Record {
    let (i, v, droop) = match state {
        ControllerState::Oc(s) => (s.i, s.v, None),
        ControllerState::DroopPq(s) => (s.i, s.voltage_from_magnitude(), Some(s)),
        ControllerState::DroopPv2(s) => (s.i, s.voltage_from_squared(), Some(s)),
    };
    let out = instantaneous_outputs(i, v);
    Record {
        t,
        i,
        v,
        p: out.p,
        q: out.q,
        v_sq: out.v_sq,
        droop: droop.map(|s| DroopRecord {
            p_filt: s.p_filt,
            q_filt: s.q_filt,
            delta: s.delta,
            v_cmd: s.v_cmd,
        }),
    }
}

/// Mean and maximum of one recorded signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateMetrics {
    pub samples: usize,
    pub i_mag: Stat,
    pub p: Stat,
    pub q: Stat,
    pub v_sq: Stat,
}

/// Statistics over the samples in `[t_end - window, t_end]`.
pub fn steady_state_metrics(traj: &Trajectory, window: f64) -> Result<SteadyStateMetrics> {
    let cfg = &traj.config;
    if !(window > 0.0 && window <= cfg.t_end - cfg.t0 + 1e-12) {
        return Err(Error::Domain("window must lie in (0, t_end - t0]"));
    }
    let end = traj.records.last().map_or(cfg.t_end, |r| r.t);
    let from = end - window - 1e-9 * cfg.dt;
    let tail: Vec<&Record> = traj.records.iter().filter(|r| r.t >= from).collect();
    if tail.is_empty() {
        return Err(Error::Domain("no samples in the window"));
    }
    let stat = |f: &dyn Fn(&Record) -> f64| {
        let mut sum = 0.0;
        let mut max = f64::NEG_INFINITY;
        for r in &tail {
            let x = f(r);
            sum += x;
            max = max.max(x);
        }
        Stat { mean: sum / tail.len() as f64, max }
    };
    Ok(SteadyStateMetrics {
        samples: tail.len(),
        i_mag: stat(&|r| r.i_mag()),
        p: stat(&|r| r.p),
        q: stat(&|r| r.q),
        v_sq: stat(&|r| r.v_sq),
    })
}

//! Closed-loop right-hand sides for the three controllers.

use core::f64::consts::PI;

use super::rk4::OdeState;
use crate::math::{cos, sin, sqrt};
use crate::model::{current_rate, instantaneous_outputs, DqVector, InverterParams};
use crate::{Error, Result};

/// Droop gains and the power-measurement filter cut-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopParams {
    /// Frequency droop, rad/(s·W).
    pub m_p: f64,
    /// Voltage droop, V/VAr.
    pub m_q: f64,
    /// Squared-voltage feedback gain, 1/s.
    pub m_v2: f64,
    /// Low-pass cut-off of the power filters, rad/s.
    pub omega_c: f64,
}

impl DroopParams {
    pub fn new(m_p: f64, m_q: f64, m_v2: f64, omega_c: f64) -> Result<Self> {
        let d = DroopParams { m_p, m_q, m_v2, omega_c };
        for x in [m_p, m_q, m_v2, omega_c] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParams("droop gains must be positive and finite"));
            }
        }
        Ok(d)
    }

    pub fn reference() -> Self {
        DroopParams { m_p: 2.6e-3, m_q: 5.0e-3, m_v2: 5.0, omega_c: 2.0 * PI * 60.0 }
    }
}

/// Gain of the linear voltage feedback `V̇ = -k_v (V - V̄*)`, 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcParams {
    pub k_v: f64,
}

impl OcParams {
    pub fn new(k_v: f64) -> Result<Self> {
        if !(k_v.is_finite() && k_v > 0.0) {
            return Err(Error::InvalidParams("k_v must be positive and finite"));
        }
        Ok(OcParams { k_v })
    }

    pub fn reference() -> Self {
        OcParams { k_v: 10.0 }
    }
}

/// Inverter current and terminal voltage under linear voltage feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcState {
    pub i: DqVector,
    pub v: DqVector,
}

/// Droop controller state. `v_cmd` is the internal voltage magnitude (PQ
/// droop) or squared magnitude (PV² droop); the terminal voltage is
/// `√v_sq·(cos δ, sin δ)` resp. `v_mag·(cos δ, sin δ)` in the grid frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopState {
    pub i: DqVector,
    pub p_filt: f64,
    pub q_filt: f64,
    pub delta: f64,
    pub v_cmd: f64,
}

impl OdeState for OcState {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        OcState { i: self.i + h * rate.i, v: self.v + h * rate.v }
    }
    fn is_finite(&self) -> bool {
        self.i.is_finite() && self.v.is_finite()
    }
}

impl OdeState for DroopState {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        DroopState {
            i: self.i + h * rate.i,
            p_filt: self.p_filt + h * rate.p_filt,
            q_filt: self.q_filt + h * rate.q_filt,
            delta: self.delta + h * rate.delta,
            v_cmd: self.v_cmd + h * rate.v_cmd,
        }
    }
    fn is_finite(&self) -> bool {
        self.i.is_finite()
            && self.p_filt.is_finite()
            && self.q_filt.is_finite()
            && self.delta.is_finite()
            && self.v_cmd.is_finite()
    }
}

impl DroopState {
    /// Terminal voltage for a magnitude-commanding droop.
    pub fn voltage_from_magnitude(&self) -> DqVector {
        DqVector::new(self.v_cmd * cos(self.delta), self.v_cmd * sin(self.delta))
    }

    /// Terminal voltage for a squared-magnitude-commanding droop.
    pub fn voltage_from_squared(&self) -> DqVector {
        let mag = sqrt(self.v_cmd.max(0.0));
        DqVector::new(mag * cos(self.delta), mag * sin(self.delta))
    }

    /// Inverter frequency deviation `Δω = -m_p (P̃ - P*)`.
    pub fn frequency_deviation(&self, dp: &DroopParams, p_set: f64) -> f64 {
        -dp.m_p * (self.p_filt - p_set)
    }
}

pub fn oc_derivatives(
    params: &InverterParams,
    ocp: &OcParams,
    v_target: DqVector,
    s: &OcState,
) -> OcState {
    OcState { i: current_rate(params, s.i, s.v), v: (-ocp.k_v) * (s.v - v_target) }
}

fn droop_common(
    params: &InverterParams,
    dp: &DroopParams,
    p_set: f64,
    s: &DroopState,
    voltage: DqVector,
) -> (DroopState, f64) {
    let out = instantaneous_outputs(s.i, voltage);
    let rate = DroopState {
        i: current_rate(params, s.i, voltage),
        p_filt: dp.omega_c * (out.p - s.p_filt),
        q_filt: dp.omega_c * (out.q - s.q_filt),
        delta: s.frequency_deviation(dp, p_set),
        v_cmd: 0.0,
    };
    (rate, out.q)
}

/// PQ droop. The voltage channel `v̇ = m_q ω_c (Q̃ − Q)` is the time
/// derivative of `v = v_nom − m_q (Q̃ − Q*)`, so `Q*` acts only through the
/// initial magnitude and `setpoint[1]` does not appear in the rate.
pub fn droop_pq_derivatives(
    params: &InverterParams,
    dp: &DroopParams,
    setpoint: [f64; 2],
    s: &DroopState,
) -> DroopState {
    let (mut rate, q) = droop_common(params, dp, setpoint[0], s, s.voltage_from_magnitude());
    rate.v_cmd = dp.m_q * dp.omega_c * (s.q_filt - q);
    rate
}

/// PV² droop: power-frequency channel as in PQ droop, voltage channel
/// `v̇_sq = -m_v2 (v_sq - V²*)`.
pub fn droop_pv2_derivatives(
    params: &InverterParams,
    dp: &DroopParams,
    setpoint: [f64; 2],
    s: &DroopState,
) -> DroopState {
    let (mut rate, _) = droop_common(params, dp, setpoint[0], s, s.voltage_from_squared());
    rate.v_cmd = -dp.m_v2 * (s.v_cmd - setpoint[1]);
    rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{output_triple, steady_state_voltage, system_matrix};

    #[test]
    fn oc_equilibrium_at_grid_voltage() {
        let p = InverterParams::reference();
        let s = OcState { i: DqVector::ZERO, v: p.grid_voltage() };
        let r = oc_derivatives(&p, &OcParams::reference(), p.grid_voltage(), &s);
        assert_eq!(r.i, DqVector::ZERO);
        assert_eq!(r.v, DqVector::ZERO);
    }

    #[test]
    fn oc_equilibrium_at_any_steady_state() {
        let p = InverterParams::reference();
        let i = DqVector::new(4.0, -2.5);
        let v = steady_state_voltage(&p, i);
        let r = oc_derivatives(&p, &OcParams::reference(), v, &OcState { i, v });
        assert!(r.i.norm() < 1e-9 && r.v.norm() == 0.0);
    }

    #[test]
    fn oc_closed_loop_is_block_triangular_and_stable() {
        // Jacobian columns by probing the (affine) right-hand side.
        let p = InverterParams::reference();
        let ocp = OcParams::reference();
        let base = OcState { i: DqVector::ZERO, v: DqVector::ZERO };
        let f0 = oc_derivatives(&p, &ocp, DqVector::ZERO, &base);
        let mut jac = [[0.0; 4]; 4];
        for k in 0..4 {
            let mut x = [0.0; 4];
            x[k] = 1.0;
            let s = OcState { i: DqVector::new(x[0], x[1]), v: DqVector::new(x[2], x[3]) };
            let f = oc_derivatives(&p, &ocp, DqVector::ZERO, &s);
            let col = [f.i.d - f0.i.d, f.i.q - f0.i.q, f.v.d - f0.v.d, f.v.q - f0.v.q];
            for r in 0..4 {
                jac[r][k] = col[r];
            }
        }
        // Lower-left block is zero; the diagonal blocks are A and -k_v I.
        for r in 2..4 {
            for c in 0..2 {
                assert_eq!(jac[r][c], 0.0);
            }
        }
        let a = system_matrix(&p);
        for r in 0..2 {
            for c in 0..2 {
                assert!((jac[r][c] - a.0[r][c]).abs() < 1e-9);
            }
        }
        assert_eq!(jac[2][2], -ocp.k_v);
        assert_eq!(jac[3][3], -ocp.k_v);
        // Eigenvalues of A: real part -R/L from the trace, all negative.
        assert!(a.trace() / 2.0 < 0.0);
        assert!((a.trace() / 2.0 + p.r / p.l).abs() < 1e-12);
    }

    #[test]
    fn droop_fixed_points_have_zero_rate_in_the_control_channels() {
        let p = InverterParams::reference();
        let dp = DroopParams::reference();
        let i = DqVector::new(3.0, 0.5);
        let v = steady_state_voltage(&p, i);
        let out = output_triple(&p, i);
        let (mag, ang) = (v.norm(), v.q.atan2(v.d));
        let s = DroopState { i, p_filt: out.p, q_filt: out.q, delta: ang, v_cmd: mag };
        let r = droop_pq_derivatives(&p, &dp, [out.p, out.q], &s);
        assert!(r.delta.abs() < 1e-12 && r.v_cmd.abs() < 1e-9);
        assert!(r.p_filt.abs() < 1e-6 && r.q_filt.abs() < 1e-6 && r.i.norm() < 1e-6);
        assert!(s.frequency_deviation(&dp, out.p).abs() < 1e-15);

        let s2 = DroopState { v_cmd: mag * mag, ..s };
        let r = droop_pv2_derivatives(&p, &dp, [out.p, mag * mag], &s2);
        assert!(r.delta.abs() < 1e-12 && r.v_cmd.abs() < 1e-9);
        assert!(r.i.norm() < 1e-6);
    }

    #[test]
    fn gain_validation() {
        assert!(DroopParams::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(OcParams::new(-1.0).is_err());
        assert!(OcParams::new(10.0).is_ok());
    }
}

//! Circuit constants and the steady-state maps from current to outputs.
//!
//! The inverter is a controllable voltage source `V` feeding an infinite bus
//! `E = (e_mag, 0)` through a series RL branch. In the grid's dq frame
//!
//! ```text
//! dI/dt = A I + (V - E) / L,    A = [[-R/L, ω], [-ω, -R/L]]
//! ```
//!
//! and at equilibrium `V̄ = E - L A Ī`. Active power, reactive power and the
//! squared terminal voltage are then quadratic in `Ī` with an isotropic
//! quadratic part, which is the structure every other module relies on.

use core::f64::consts::PI;
use core::ops::{Add, Mul, Neg, Sub};

use crate::linalg::Mat2;
use crate::math::{cos, hypot, sin, sqrt};
use crate::{Error, Result};

/// A vector in the rotating dq frame (amperes or volts).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DqVector {
    pub d: f64,
    pub q: f64,
}

impl DqVector {
    pub const ZERO: DqVector = DqVector { d: 0.0, q: 0.0 };

    pub const fn new(d: f64, q: f64) -> Self {
        DqVector { d, q }
    }

    pub fn from_polar(mag: f64, angle: f64) -> Self {
        DqVector::new(mag * cos(angle), mag * sin(angle))
    }

    pub fn dot(self, other: DqVector) -> f64 {
        self.d * other.d + self.q * other.q
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        hypot(self.d, self.q)
    }

    /// `J v` with `J = [[0, 1], [-1, 0]]`.
    pub fn apply_j(self) -> DqVector {
        DqVector::new(self.q, -self.d)
    }

    /// Counterclockwise rotation by `phi` radians.
    pub fn rotate(self, phi: f64) -> DqVector {
        let (s, c) = (sin(phi), cos(phi));
        DqVector::new(c * self.d - s * self.q, s * self.d + c * self.q)
    }

    pub fn transform(self, m: &Mat2) -> DqVector {
        let [d, q] = m.apply([self.d, self.q]);
        DqVector::new(d, q)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.d, self.q]
    }

    pub fn is_finite(self) -> bool {
        self.d.is_finite() && self.q.is_finite()
    }
}

impl Add for DqVector {
    type Output = DqVector;
    fn add(self, o: DqVector) -> DqVector {
        DqVector::new(self.d + o.d, self.q + o.q)
    }
}

impl Sub for DqVector {
    type Output = DqVector;
    fn sub(self, o: DqVector) -> DqVector {
        DqVector::new(self.d - o.d, self.q - o.q)
    }
}

impl Neg for DqVector {
    type Output = DqVector;
    fn neg(self) -> DqVector {
        DqVector::new(-self.d, -self.q)
    }
}

impl Mul<DqVector> for f64 {
    type Output = DqVector;
    fn mul(self, v: DqVector) -> DqVector {
        DqVector::new(self * v.d, self * v.q)
    }
}

/// Circuit constants of the inverter and its current limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterParams {
    /// Series resistance, Ω.
    pub r: f64,
    /// Series inductance, H.
    pub l: f64,
    /// Grid angular frequency, rad/s.
    pub omega: f64,
    /// Grid voltage magnitude, V. The grid vector is `(e_mag, 0)`.
    pub e_mag: f64,
    /// Current magnitude limit, A.
    pub i_max: f64,
}

/// Nominal apparent power of the reference inverter, W.
pub const NOMINAL_POWER: f64 = 1200.0;

impl InverterParams {
    pub fn new(r: f64, l: f64, omega: f64, e_mag: f64, i_max: f64) -> Result<Self> {
        let p = InverterParams { r, l, omega, e_mag, i_max };
        p.validate()?;
        Ok(p)
    }

    /// Reference inverter: 0.8 Ω, 1.5 mH, 60 Hz, 120 V bus and the current
    /// limit that delivers 1200 W at unity power factor and nominal voltage.
    pub fn reference() -> Self {
        InverterParams {
            r: 0.8,
            l: 1.5e-3,
            omega: 2.0 * PI * 60.0,
            e_mag: 120.0,
            i_max: Self::default_i_max(NOMINAL_POWER, 120.0),
        }
    }

    /// `S_nom / (1.5 · e_mag)`: the dq current magnitude carrying `s_nom` watts.
    pub fn default_i_max(s_nom: f64, e_mag: f64) -> f64 {
        s_nom / (1.5 * e_mag)
    }

    pub fn with_i_max(self, i_max: f64) -> Result<Self> {
        InverterParams::new(self.r, self.l, self.omega, self.e_mag, i_max)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.r, "r must be positive and finite"),
            (self.l, "l must be positive and finite"),
            (self.omega, "omega must be positive and finite"),
            (self.e_mag, "e_mag must be positive and finite"),
            (self.i_max, "i_max must be positive and finite"),
        ];
        for (value, msg) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(msg));
            }
        }
        Ok(())
    }

    pub fn grid_voltage(&self) -> DqVector {
        DqVector::new(self.e_mag, 0.0)
    }

    /// `ωL`, the branch reactance.
    pub fn reactance(&self) -> f64 {
        self.omega * self.l
    }

    /// `R² + ω²L²`.
    pub fn impedance_sq(&self) -> f64 {
        self.r * self.r + self.reactance() * self.reactance()
    }
}

/// `A = [[-R/L, ω], [-ω, -R/L]]`.
pub fn system_matrix(params: &InverterParams) -> Mat2 {
    let k = params.r / params.l;
    Mat2([[-k, params.omega], [-params.omega, -k]])
}

/// Right-hand side of the current dynamics for an arbitrary grid vector.
pub fn current_rate_with_grid(
    params: &InverterParams,
    grid: DqVector,
    current: DqVector,
    voltage: DqVector,
) -> DqVector {
    let a = system_matrix(params);
    current.transform(&a) + (1.0 / params.l) * (voltage - grid)
}

pub fn current_rate(params: &InverterParams, current: DqVector, voltage: DqVector) -> DqVector {
    current_rate_with_grid(params, params.grid_voltage(), current, voltage)
}

/// Equilibrium voltage `V̄ = E - L A Ī` for an arbitrary grid vector.
pub fn steady_state_voltage_with_grid(
    params: &InverterParams,
    grid: DqVector,
    i_bar: DqVector,
) -> DqVector {
    // L·A = [[-R, ωL], [-ωL, -R]]
    let x = params.reactance();
    let la_i = DqVector::new(-params.r * i_bar.d + x * i_bar.q, -x * i_bar.d - params.r * i_bar.q);
    grid - la_i
}

pub fn steady_state_voltage(params: &InverterParams, i_bar: DqVector) -> DqVector {
    steady_state_voltage_with_grid(params, params.grid_voltage(), i_bar)
}

/// Instantaneous `(P, Q, |V|²)` for a given current and terminal voltage.
pub fn instantaneous_outputs(current: DqVector, voltage: DqVector) -> OutputTriple {
    OutputTriple {
        p: 1.5 * current.dot(voltage),
        q: 1.5 * current.dot(voltage.apply_j()),
        v_sq: voltage.norm_sq(),
    }
}

/// Steady-state `(P, Q, |V|²)` at current `Ī` for an arbitrary grid vector.
pub fn output_triple_with_grid(
    params: &InverterParams,
    grid: DqVector,
    i_bar: DqVector,
) -> OutputTriple {
    instantaneous_outputs(i_bar, steady_state_voltage_with_grid(params, grid, i_bar))
}

pub fn output_triple(params: &InverterParams, i_bar: DqVector) -> OutputTriple {
    output_triple_with_grid(params, params.grid_voltage(), i_bar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutputQuantity {
    ActivePower,
    ReactivePower,
    SquaredVoltage,
}

impl OutputQuantity {
    pub const ALL: [OutputQuantity; 3] = [
        OutputQuantity::ActivePower,
        OutputQuantity::ReactivePower,
        OutputQuantity::SquaredVoltage,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            OutputQuantity::ActivePower => "P",
            OutputQuantity::ReactivePower => "Q",
            OutputQuantity::SquaredVoltage => "V2",
        }
    }
}

/// Steady-state active power (W), reactive power (VAr) and squared voltage
/// magnitude (V²).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutputTriple {
    pub p: f64,
    pub q: f64,
    pub v_sq: f64,
}

impl OutputTriple {
    pub fn get(&self, q: OutputQuantity) -> f64 {
        match q {
            OutputQuantity::ActivePower => self.p,
            OutputQuantity::ReactivePower => self.q,
            OutputQuantity::SquaredVoltage => self.v_sq,
        }
    }

    pub fn project(&self, pair: OutputPair) -> [f64; 2] {
        [self.get(pair.first()), self.get(pair.second())]
    }
}

/// Two distinct output quantities, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutputPair(OutputQuantity, OutputQuantity);

impl OutputPair {
    pub const PQ: OutputPair = OutputPair(OutputQuantity::ActivePower, OutputQuantity::ReactivePower);
    pub const PV2: OutputPair =
        OutputPair(OutputQuantity::ActivePower, OutputQuantity::SquaredVoltage);
    pub const QV2: OutputPair =
        OutputPair(OutputQuantity::ReactivePower, OutputQuantity::SquaredVoltage);
    pub const ALL: [OutputPair; 3] = [OutputPair::PQ, OutputPair::PV2, OutputPair::QV2];

    pub fn new(first: OutputQuantity, second: OutputQuantity) -> Result<Self> {
        if first == second {
            return Err(Error::SamePair);
        }
        Ok(OutputPair(first, second))
    }

    pub fn first(self) -> OutputQuantity {
        self.0
    }

    pub fn second(self) -> OutputQuantity {
        self.1
    }

    pub fn maps(self, params: &InverterParams) -> [QuadraticOutputMap; 2] {
        [quadratic_map(params, self.0), quadratic_map(params, self.1)]
    }

    /// Output pair at a steady-state current.
    pub fn evaluate(self, params: &InverterParams, i_bar: DqVector) -> [f64; 2] {
        output_triple(params, i_bar).project(self)
    }
}

/// One output as `alpha·‖Ī‖² + a_vec·Ī + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticOutputMap {
    pub alpha: f64,
    pub a_vec: DqVector,
    pub offset: f64,
}

impl QuadraticOutputMap {
    pub fn eval(&self, i_bar: DqVector) -> f64 {
        self.alpha * i_bar.norm_sq() + self.a_vec.dot(i_bar) + self.offset
    }
}

/// Coefficients of one steady-state output for an arbitrary grid vector.
///
/// Expanding `V̄ = E - L A Ī` into the output definitions and using
/// `(A + Aᵀ)/2 = -(R/L) I` and `(JA + (JA)ᵀ)/2 = -ω I`:
///
/// * `P  = 1.5 R ‖Ī‖² + 1.5 Eᵀ Ī`
/// * `Q  = 1.5 ωL ‖Ī‖² + 1.5 (J E)ᵀ Ī`
/// * `V² = (R² + ω²L²) ‖Ī‖² - 2L (Aᵀ E)ᵀ Ī + ‖E‖²`
pub fn quadratic_map_with_grid(
    params: &InverterParams,
    grid: DqVector,
    q: OutputQuantity,
) -> QuadraticOutputMap {
    match q {
        OutputQuantity::ActivePower => QuadraticOutputMap {
            alpha: 1.5 * params.r,
            a_vec: 1.5 * grid,
            offset: 0.0,
        },
        OutputQuantity::ReactivePower => QuadraticOutputMap {
            alpha: 1.5 * params.reactance(),
            a_vec: 1.5 * grid.apply_j(),
            offset: 0.0,
        },
        OutputQuantity::SquaredVoltage => {
            let at_e = grid.transform(&system_matrix(params).transpose());
            QuadraticOutputMap {
                alpha: params.impedance_sq(),
                a_vec: (-2.0 * params.l) * at_e,
                offset: grid.norm_sq(),
            }
        }
    }
}

pub fn quadratic_map(params: &InverterParams, q: OutputQuantity) -> QuadraticOutputMap {
    quadratic_map_with_grid(params, params.grid_voltage(), q)
}

/// An output pair normalized to the unit current disk `x = Ī / i_max`:
///
/// ```text
/// S1 - offset1 = alpha_n ‖x‖² + a_n·x
/// S2 - offset2 = beta_n  ‖x‖² + b_n·x
/// ```
///
/// and `c_vec = [a_nᵀ; b_nᵀ]⁻¹ (alpha_n, beta_n)`, so that the pair is an
/// invertible affine image of `{‖x‖² c + x : ‖x‖ ≤ 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaForm {
    pub alpha_n: f64,
    pub beta_n: f64,
    pub a_n: DqVector,
    pub b_n: DqVector,
    pub c_vec: DqVector,
    pub offset1: f64,
    pub offset2: f64,
}

impl LemmaForm {
    /// `[a_nᵀ; b_nᵀ]`.
    pub fn linear_part(&self) -> Mat2 {
        Mat2([[self.a_n.d, self.a_n.q], [self.b_n.d, self.b_n.q]])
    }

    /// Output pair at unit-disk coordinate `x`.
    pub fn eval(&self, x: DqVector) -> [f64; 2] {
        let n = x.norm_sq();
        [
            self.alpha_n * n + self.a_n.dot(x) + self.offset1,
            self.beta_n * n + self.b_n.dot(x) + self.offset2,
        ]
    }
}

pub fn lemma_form(
    params: &InverterParams,
    q1: OutputQuantity,
    q2: OutputQuantity,
) -> Result<LemmaForm> {
    let pair = OutputPair::new(q1, q2)?;
    let [m1, m2] = pair.maps(params);
    let s = params.i_max;
    let a_n = s * m1.a_vec;
    let b_n = s * m2.a_vec;
    let alpha_n = m1.alpha * s * s;
    let beta_n = m2.alpha * s * s;
    let lin = Mat2([[a_n.d, a_n.q], [b_n.d, b_n.q]]);
    let det = lin.det();
    if !(det.abs() >= 1e-12 * a_n.norm() * b_n.norm()) || det == 0.0 {
        return Err(Error::SingularPair { det });
    }
    let [c1, c2] = lin.solve([alpha_n, beta_n]).ok_or(Error::SingularPair { det })?;
    Ok(LemmaForm {
        alpha_n,
        beta_n,
        a_n,
        b_n,
        c_vec: DqVector::new(c1, c2),
        offset1: m1.offset,
        offset2: m2.offset,
    })
}

/// Magnitude helper shared by the region and optimizer modules.
pub(crate) fn norm2(v: [f64; 2]) -> f64 {
    sqrt(v[0] * v[0] + v[1] * v[1])
}

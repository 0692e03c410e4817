//! Setpoint tracking over the feasible output region.
//!
//! Three independent routes to the same optimum:
//!
//! * [`solve_sdp`]: projected gradient on the 3×3 Gram lift
//!   `W = [[ĪĪᵀ, Ī], [Īᵀ, 1]]` relaxed to `W ⪰ 0, W33 = 1, W11 + W22 ≤ i_max²`,
//!   followed by recovery of the current from `W`;
//! * [`solve_frank_wolfe`]: conditional gradient in the output plane with the
//!   closed-form support function as the linear-minimization oracle;
//! * [`brute_force`]: polar grid over the current disk plus local polishing.

use alloc::vec::Vec;

use crate::linalg::SymMat3;
use crate::model::{quadratic_map, DqVector, InverterParams, OutputPair, OutputQuantity};
use crate::{Error, Result};

mod frank_wolfe;
mod grid;
mod sdp;

pub use frank_wolfe::{solve_frank_wolfe, solve_frank_wolfe_with, FrankWolfeOptions};
pub use grid::brute_force;
pub use sdp::{extract_current, solve_sdp, Extraction, Rank1Path, SdpOptions};

/// Lifted variable `[[ĪĪᵀ, Ī], [Īᵀ, 1]]` or any relaxation of it (physical
/// units: A² in the top-left block, A in the last column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramMatrix(pub SymMat3);

impl GramMatrix {
    /// Rank-1 lift of a current.
    pub fn from_current(i: DqVector) -> Self {
        GramMatrix(SymMat3::outer([i.d, i.q, 1.0]))
    }

    pub fn matrix(&self) -> &SymMat3 {
        &self.0
    }

    /// `(W13, W23)`.
    pub fn current_column(&self) -> DqVector {
        DqVector::new(self.0.get(0, 2), self.0.get(1, 2))
    }

    /// `W11 + W22`.
    pub fn current_trace(&self) -> f64 {
        self.0.get(0, 0) + self.0.get(1, 1)
    }

    /// Checks symmetry, `W33 = 1`, the trace cap and positive
    /// semidefiniteness at the documented tolerances.
    pub fn check_invariants(&self, i_max: f64) -> core::result::Result<(), &'static str> {
        let w = &self.0;
        let scale = w.frobenius().max(1.0);
        for i in 0..3 {
            for j in 0..3 {
                if (w.get(i, j) - w.get(j, i)).abs() > 1e-15 * scale {
                    return Err("not symmetric");
                }
            }
        }
        if (w.get(2, 2) - 1.0).abs() > 1e-12 {
            return Err("W33 != 1");
        }
        if self.current_trace() > i_max * i_max * (1.0 + 1e-9) {
            return Err("trace cap violated");
        }
        if w.eigh().values[0] < -1e-9 * w.trace() {
            return Err("not positive semidefinite");
        }
        Ok(())
    }
}

/// `M` with `Tr(M · W(Ī))` equal to one output at current `Ī`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatrix(pub SymMat3);

impl MomentMatrix {
    pub fn matrix(&self) -> &SymMat3 {
        &self.0
    }

    pub fn eval(&self, w: &GramMatrix) -> f64 {
        self.0.dot(&w.0)
    }
}

/// `[[α I₂, a/2], [aᵀ/2, offset]]` from the output's quadratic map.
pub fn build_moment_matrix(params: &InverterParams, q: OutputQuantity) -> MomentMatrix {
    let m = quadratic_map(params, q);
    let (h0, h1) = (0.5 * m.a_vec.d, 0.5 * m.a_vec.q);
    MomentMatrix(SymMat3([
        [m.alpha, 0.0, h0],
        [0.0, m.alpha, h1],
        [h0, h1, m.offset],
    ]))
}

/// `f(S1, S2) = ½(S1 - S1*)² + γ·½(S2 - S2*)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingObjective {
    pub target1: f64,
    pub target2: f64,
    pub gamma: f64,
}

impl TrackingObjective {
    pub fn new(target1: f64, target2: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain("gamma must be finite and non-negative"));
        }
        if !(target1.is_finite() && target2.is_finite()) {
            return Err(Error::Domain("targets must be finite"));
        }
        Ok(TrackingObjective { target1, target2, gamma })
    }

    pub fn targets(&self) -> [f64; 2] {
        [self.target1, self.target2]
    }
}

/// A convex objective on the output plane, as used by Frank-Wolfe.
pub trait Objective {
    fn value(&self, s: [f64; 2]) -> f64;
    fn gradient(&self, s: [f64; 2]) -> [f64; 2];

    /// Minimizer of `η ↦ f(s + η d)` over `[0, 1]`, if available in closed
    /// form. Frank-Wolfe falls back to `η = 2/(k+2)` otherwise.
    fn line_search(&self, _s: [f64; 2], _d: [f64; 2]) -> Option<f64> {
        None
    }
}

impl Objective for TrackingObjective {
    fn value(&self, s: [f64; 2]) -> f64 {
        let e0 = s[0] - self.target1;
        let e1 = s[1] - self.target2;
        0.5 * e0 * e0 + 0.5 * self.gamma * e1 * e1
    }

    fn gradient(&self, s: [f64; 2]) -> [f64; 2] {
        [s[0] - self.target1, self.gamma * (s[1] - self.target2)]
    }

    fn line_search(&self, s: [f64; 2], d: [f64; 2]) -> Option<f64> {
        let g = self.gradient(s);
        let slope = g[0] * d[0] + g[1] * d[1];
        let curvature = d[0] * d[0] + self.gamma * d[1] * d[1];
        Some(if curvature > 0.0 {
            (-slope / curvature).clamp(0.0, 1.0)
        } else if slope < 0.0 {
            1.0
        } else {
            0.0
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sdp,
    FrankWolfe,
    Grid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sdp => "sdp",
            Method::FrankWolfe => "fw",
            Method::Grid => "grid",
        }
    }
}

/// One recorded solver iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iterate {
    pub iteration: usize,
    pub s1: f64,
    pub s2: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Outputs at `i_star`.
    pub s1: f64,
    pub s2: f64,
    pub i_star: DqVector,
    /// Objective at `(s1, s2)`.
    pub objective: f64,
    /// Returned Gram matrix (SDP only).
    pub w_star: Option<GramMatrix>,
    /// Rank-1 residual of `w_star` (0 for the other methods).
    pub rank1_residual: f64,
    /// Rank-1 residual of the unregularized SDP iterate before any fallback.
    pub raw_rank1_residual: f64,
    /// How the SDP solution was turned into a current (SDP only).
    pub rank1_path: Option<Rank1Path>,
    pub iterations: usize,
    pub method: Method,
    /// Final optimality measure: the duality gap of the last stage (SDP and
    /// Frank-Wolfe), or 0 (grid).
    pub certificate: f64,
    pub history: Vec<Iterate>,
}

impl SolveReport {
    pub(crate) fn from_current(
        params: &InverterParams,
        pair: OutputPair,
        obj: &dyn Objective,
        i_star: DqVector,
        method: Method,
    ) -> Self {
        let [s1, s2] = pair.evaluate(params, i_star);
        SolveReport {
            s1,
            s2,
            i_star,
            objective: obj.value([s1, s2]),
            w_star: None,
            rank1_residual: 0.0,
            raw_rank1_residual: 0.0,
            rank1_path: None,
            iterations: 0,
            method,
            certificate: 0.0,
            history: Vec::new(),
        }
    }
}

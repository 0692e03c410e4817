//! Projected-gradient solver for the Gram lift of the tracking problem.
//!
//! Internally the lift is normalized to the unit current disk,
//! `W̃ = D⁻¹ W D⁻¹` with `D = diag(i_max, i_max, 1)`, so the feasible set is
//! `{W̃ ⪰ 0, W̃33 = 1, W̃11 + W̃22 ≤ 1}` and every entry is O(1).

use alloc::vec::Vec;

use super::{
    build_moment_matrix, GramMatrix, Iterate, Method, Objective, SolveReport,
    TrackingObjective,
};
use crate::linalg::SymMat3;
use crate::math::sqrt;
use crate::model::{DqVector, InverterParams, OutputPair};
use crate::region::disk_preimage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_iterations: usize,
    /// Stop once the duality gap is below `gap_tolerance · max(1, f)`.
    pub gap_tolerance: f64,
    /// Alternating-projection rounds per gradient step.
    pub projection_rounds: usize,
    /// Largest accepted rank-1 residual.
    pub rank1_tolerance: f64,
    /// Relative duality gap above which hitting the cap is an error.
    pub kkt_tolerance: f64,
    /// Re-solve with a small trace (nuclear-norm) penalty when the
    /// solution is not rank 1.
    pub regularize_on_failure: bool,
    /// Regularization weight relative to the objective's curvature.
    pub regularization_weight: f64,
    pub record_history: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            max_iterations: 100_000,
            gap_tolerance: 1e-9,
            projection_rounds: 50,
            rank1_tolerance: 1e-6,
            kkt_tolerance: 1e-5,
            regularize_on_failure: true,
            regularization_weight: 1e-6,
            record_history: false,
        }
    }
}

/// How the reported current was obtained from the lifted solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank1Path {
    /// The unregularized solution was rank 1.
    Direct,
    /// The trace-regularized re-solve was rank 1.
    Regularized,
    /// Neither was; the current was recovered from the unregularized
    /// solution by solving the scalar quadratic that matches its outputs.
    Recovered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction {
    /// `(W13, W23)`.
    pub current: DqVector,
    /// `‖W_topleft − ĪĪᵀ‖_F / max(1, Tr W)`.
    pub residual: f64,
    pub rank1: bool,
}

pub fn extract_current(w: &GramMatrix, tol: f64) -> Extraction {
    let m = w.matrix();
    let i = w.current_column();
    let e00 = m.get(0, 0) - i.d * i.d;
    let e01 = m.get(0, 1) - i.d * i.q;
    let e10 = m.get(1, 0) - i.q * i.d;
    let e11 = m.get(1, 1) - i.q * i.q;
    let residual = sqrt(e00 * e00 + e01 * e01 + e10 * e10 + e11 * e11) / m.trace().max(1.0);
    Extraction { current: i, residual, rank1: residual <= tol }
}

/// The normalized lifted problem.
struct Lifted {
    moments: [SymMat3; 2],
    /// Moment matrices with the fixed (3,3) entry removed.
    directions: [SymMat3; 2],
    targets: [f64; 2],
    gamma: f64,
    reg: f64,
    lipschitz: f64,
}

const TRACE_DIRECTION: SymMat3 = SymMat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);

impl Lifted {
    fn new(params: &InverterParams, pair: OutputPair, obj: &TrackingObjective) -> Self {
        let s = params.i_max;
        let scale = [s, s, 1.0];
        let normalize = |q| {
            let mut m = build_moment_matrix(params, q).0 .0;
            for (i, row) in m.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x *= scale[i] * scale[j];
                }
            }
            SymMat3(m)
        };
        let moments = [normalize(pair.first()), normalize(pair.second())];
        let directions = moments.map(|m| {
            let mut d = m;
            d.0[2][2] = 0.0;
            d
        });
        // Largest eigenvalue of the Hessian's 2×2 Gram form.
        let g = obj.gamma;
        let a = directions[0].dot(&directions[0]);
        let b = sqrt(g) * directions[0].dot(&directions[1]);
        let c = g * directions[1].dot(&directions[1]);
        let lipschitz = 0.5 * (a + c) + sqrt(0.25 * (a - c) * (a - c) + b * b);
        Lifted { moments, directions, targets: obj.targets(), gamma: g, reg: 0.0, lipschitz }
    }

    fn outputs(&self, w: &SymMat3) -> [f64; 2] {
        [self.moments[0].dot(w), self.moments[1].dot(w)]
    }

    /// True when the gap certifies `f` to the relative tolerance, or when
    /// the residual is already at the rounding level of the outputs.
    fn certified(&self, w: &SymMat3, f: f64, gap: f64, tol: f64) -> bool {
        // f* ≥ 0, so f itself bounds the suboptimality as well.
        if gap.min(f) <= tol * f.max(1.0) {
            return true;
        }
        let s = self.outputs(w);
        let g = sqrt(self.gamma);
        let magnitude = self.targets[0].abs().max(s[0].abs()).max(g * self.targets[1].abs()).max(g * s[1].abs());
        let floor = ROUNDING_FLOOR * f64::EPSILON * magnitude;
        self.tracking_value(w) <= 0.5 * floor * floor
    }

    fn tracking_value(&self, w: &SymMat3) -> f64 {
        let s = self.outputs(w);
        let e0 = s[0] - self.targets[0];
        let e1 = s[1] - self.targets[1];
        0.5 * e0 * e0 + 0.5 * self.gamma * e1 * e1
    }

    fn value(&self, w: &SymMat3) -> f64 {
        self.tracking_value(w) + self.reg * (w.get(0, 0) + w.get(1, 1))
    }

    fn gradient(&self, w: &SymMat3) -> SymMat3 {
        let s = self.outputs(w);
        let g0 = s[0] - self.targets[0];
        let g1 = self.gamma * (s[1] - self.targets[1]);
        self.directions[0].scale(g0) + self.directions[1].scale(g1) + TRACE_DIRECTION.scale(self.reg)
    }

    fn step(&self, w: &SymMat3, rounds: usize) -> SymMat3 {
        project_feasible(*w - self.gradient(w).scale(1.0 / self.lipschitz), rounds)
    }

    /// Frank-Wolfe duality gap `⟨∇F(W), W − W'⟩`, with `W'` the minimizer
    /// of the linearization over the feasible set. The gradient's top-left
    /// block is a multiple of the identity, so `W'` is the lift of a point
    /// of the unit disk found in closed form.
    fn duality_gap(&self, w: &SymMat3) -> f64 {
        let g = self.gradient(w);
        let c = 0.5 * (g.get(0, 0) + g.get(1, 1));
        let b = DqVector::new(g.get(0, 2), g.get(1, 2));
        let b_norm = b.norm();
        // min over ρ ∈ [0, 1] of cρ² − 2‖b‖ρ
        let rho = if c <= 0.0 { 1.0 } else { (b_norm / c).min(1.0) };
        let y = if b_norm > 0.0 { (-rho / b_norm) * b } else { DqVector::new(rho, 0.0) };
        let lmo = SymMat3::outer([y.d, y.q, 1.0]);
        g.dot(&(*w - lmo))
    }
}

/// Euclidean projection onto `{W33 = 1, W11 + W22 ≤ 1}`.
fn project_slice(x: SymMat3) -> SymMat3 {
    let mut m = x.0;
    m[2][2] = 1.0;
    let excess = m[0][0] + m[1][1] - 1.0;
    if excess > 0.0 {
        m[0][0] -= 0.5 * excess;
        m[1][1] -= 0.5 * excess;
    }
    SymMat3(m)
}

/// Alternating projections between the PSD cone and the slice, with
/// Dykstra's correction so the limit is the projection onto the
/// intersection. Ends on the slice, so `W33 = 1` and the trace cap hold
/// exactly; the PSD cone holds up to the final alternation gap.
fn project_feasible(x: SymMat3, rounds: usize) -> SymMat3 {
    let mut cur = x;
    let mut p = SymMat3::ZERO;
    let mut q = SymMat3::ZERO;
    for _ in 0..rounds.max(1) {
        let y = (cur + p).project_psd();
        p = cur + p - y;
        let next = project_slice(y + q);
        q = y + q - next;
        let change = (next - cur).frobenius();
        let gap = (next - y).frobenius();
        cur = next;
        if change <= 1e-15 && gap <= 1e-15 {
            break;
        }
    }
    cur.symmetrize()
}

struct RunOutcome {
    w: SymMat3,
    iterations: usize,
    gap: f64,
    converged: bool,
}

/// Accelerated projected gradient with gradient-based momentum restart,
/// stopped by the duality gap.
fn run(
    problem: &Lifted,
    w0: SymMat3,
    opts: &SdpOptions,
    history: &mut Option<Vec<Iterate>>,
    iteration_offset: usize,
) -> RunOutcome {
    let rounds = opts.projection_rounds;
    let mut x = project_feasible(w0, rounds);
    let mut y = x;
    let mut t = 1.0f64;
    let mut best = (problem.value(&x), x);
    let mut trail: Vec<f64> = Vec::with_capacity(STALL_WINDOW + 1);
    let gap = problem.duality_gap(&x);
    if problem.certified(&x, best.0, gap, opts.gap_tolerance) {
        return RunOutcome { w: x, iterations: 0, gap, converged: true };
    }

    for k in 1..=opts.max_iterations {
        let x_next = problem.step(&y, rounds);
        let f_next = problem.value(&x_next);

        let restart = (y - x_next).dot(&(x_next - x)) > 0.0;
        if restart {
            t = 1.0;
            y = x_next;
        } else {
            let t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t));
            y = x_next + (x_next - x).scale((t - 1.0) / t_next);
            t = t_next;
        }
        x = x_next;
        if let Some(h) = history.as_mut() {
            let s = problem.outputs(&x_next);
            h.push(Iterate {
                iteration: iteration_offset + k,
                s1: s[0],
                s2: s[1],
                objective: problem.tracking_value(&x_next),
            });
        }
        if f_next < best.0 {
            best = (f_next, x_next);
            let gap = problem.duality_gap(&x_next);
            if problem.certified(&x_next, f_next, gap, opts.gap_tolerance) {
                return RunOutcome { w: x_next, iterations: k, gap, converged: true };
            }
        }
        if problem.reg > 0.0 {
            // Regularized stages only select a point of the optimal face;
            // they stop once progress stalls.
            if trail.len() > STALL_WINDOW {
                trail.remove(0);
            }
            trail.push(best.0);
            if trail.len() > STALL_WINDOW && trail[0] - best.0 < STALL_TOLERANCE * best.0.max(1.0) {
                let gap = problem.duality_gap(&best.1);
                return RunOutcome { w: best.1, iterations: k, gap, converged: true };
            }
        }
    }
    let gap = problem.duality_gap(&best.1);
    RunOutcome {
        w: best.1,
        iterations: opts.max_iterations,
        gap,
        converged: problem.certified(&best.1, best.0, gap, opts.kkt_tolerance),
    }
}

/// A regularized stage stops when the best objective improved by less than
/// `STALL_TOLERANCE · max(1, f)` over `STALL_WINDOW` iterations.
const STALL_WINDOW: usize = 20;
const STALL_TOLERANCE: f64 = 1e-10;

/// Residuals below this many ulps of the output magnitude count as exact.
const ROUNDING_FLOOR: f64 = 1e3;

const CONTINUATION_STEPS: usize = 3;
const CONTINUATION_FACTOR: f64 = 1e-3;

fn to_physical(w: &SymMat3, i_max: f64) -> GramMatrix {
    let scale = [i_max, i_max, 1.0];
    let mut m = w.0;
    for (i, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x *= scale[i] * scale[j];
        }
    }
    m[2][2] = 1.0;
    GramMatrix(SymMat3(m).symmetrize())
}

/// Minimizes the tracking objective over the Gram lift and extracts the
/// optimal current.
///
/// The first solve is unregularized. When its solution is not rank 1
/// (this happens for targets strictly inside the region, where the optimal
/// face contains higher-rank points) the problem is re-solved once from
/// that point with a small penalty on `W11 + W22`, which selects the
/// rank-1 point of the face. If that still fails, the current is recovered
/// from the unregularized solution `(τ, w) = (W̃11 + W̃22, (W̃13, W̃23))` as
/// `y = μc + w` with `‖y‖²c + y = τc + w`, which preserves both outputs.
pub fn solve_sdp(
    params: &InverterParams,
    pair: OutputPair,
    obj: &TrackingObjective,
    opts: &SdpOptions,
) -> Result<SolveReport> {
    params.validate()?;
    let mut problem = Lifted::new(params, pair, obj);
    let i_max = params.i_max;
    let mut history = opts.record_history.then(Vec::new);

    let start = SymMat3::diag([0.0, 0.0, 1.0]);
    let raw = run(&problem, start, opts, &mut history, 0);
    let raw_w = to_physical(&raw.w, i_max);
    let raw_extraction = extract_current(&raw_w, opts.rank1_tolerance);
    let mut iterations = raw.iterations;
    let mut certificate = raw.gap;

    // Normalized solution the current is read from, and the reported lift.
    let (chosen, w_star, path) = if raw_extraction.rank1 {
        (raw.w, raw_w, Rank1Path::Direct)
    } else {
        let regularized = if opts.regularize_on_failure {
            // The penalty biases the outputs in proportion to its weight, so
            // once a rank-1 point is found the weight is shrunk with warm
            // starts for as long as the solution stays rank 1.
            let mut accepted = None;
            let mut start = raw.w;
            let mut weight = opts.regularization_weight;
            for _ in 0..=CONTINUATION_STEPS {
                problem.reg = weight * problem.lipschitz;
                let out = run(&problem, start, opts, &mut history, iterations);
                iterations += out.iterations;
                let w = to_physical(&out.w, i_max);
                if !extract_current(&w, opts.rank1_tolerance).rank1 {
                    break;
                }
                accepted = Some((out.w, w, out.gap));
                start = out.w;
                weight *= CONTINUATION_FACTOR;
            }
            // A regularized point is only kept if it is still optimal for
            // the unregularized problem.
            let f_raw = problem.tracking_value(&raw.w);
            accepted.filter(|(w, _, _)| {
                problem.tracking_value(w) - f_raw <= opts.gap_tolerance * f_raw.max(1.0)
            })
        } else {
            None
        };
        match regularized {
            Some((w, w_phys, gap)) => {
                certificate = gap;
                (w, w_phys, Rank1Path::Regularized)
            }
            None => (raw.w, raw_w, Rank1Path::Recovered),
        }
    };

    // Reading the current as y = μc + z with ‖y‖²c + y = τc + z keeps the
    // outputs of the lifted solution exactly; for a rank-1 lift it is
    // (W13, W23) itself.
    let lf = crate::model::lemma_form(params, pair.first(), pair.second())?;
    let tau = (chosen.get(0, 0) + chosen.get(1, 1)).min(1.0);
    let z = DqVector::new(chosen.get(0, 2), chosen.get(1, 2));
    let y = disk_preimage(lf.c_vec, z, tau);
    let y = if y.norm() > 1.0 { (1.0 / y.norm()) * y } else { y };
    let i_star = i_max * y;
    let w_star = if path == Rank1Path::Recovered { GramMatrix::from_current(i_star) } else { w_star };

    let mut report = SolveReport::from_current(params, pair, obj as &dyn Objective, i_star, Method::Sdp);
    report.w_star = Some(w_star);
    report.rank1_residual = extract_current(&w_star, opts.rank1_tolerance).residual;
    report.raw_rank1_residual = raw_extraction.residual;
    report.rank1_path = Some(path);
    report.iterations = iterations;
    report.certificate = certificate;
    report.history = history.unwrap_or_default();

    if raw.converged {
        Ok(report)
    } else {
        Err(Error::NotConverged(alloc::boxed::Box::new(report)))
    }
}

//! Reference computations that share no code with the solvers they check:
//! brute-force support values over a polar grid of currents, and the exact
//! solution of the linear OC closed loop by matrix exponential.

use std::f64::consts::PI;

use invfeas_core::simulator::{SimConfig, Trajectory};
use invfeas_core::{DqVector, InverterParams, OutputPair};

/// Maximum of `w·s(I)` over the polar grid with `n` radii `k·i_max/(n-1)`
/// and `n` angles `2πj/n`.
///
/// Along a ray `w·s` is a quadratic in the radius, so the largest grid
/// value on that ray sits at an end of the ray or at one of the two grid
/// radii around the vertex; only those are evaluated.
pub fn grid_support(params: &InverterParams, pair: OutputPair, w: [f64; 2], n: usize) -> GridMax {
    assert!(n >= 2);
    let h = params.i_max / (n - 1) as f64;
    let f = |i: DqVector| {
        let s = pair.evaluate(params, i);
        w[0] * s[0] + w[1] * s[1]
    };
    let f0 = f(DqVector::ZERO);
    let mut best = GridMax { value: f0, current: DqVector::ZERO };
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let u = DqVector::new(theta.cos(), theta.sin());
        let at = |k: usize| k as f64 * h * u;
        // g(k) = a k² + b k + f0, fitted from k = n-1 and k = (n-1)/2.
        let kmax = (n - 1) as f64;
        let kmid = kmax / 2.0;
        let g_end = f(at(n - 1)) - f0;
        let g_mid = f(kmid * h * u) - f0;
        let a = (g_end / kmax - g_mid / kmid) / (kmax - kmid);
        let b = g_end / kmax - a * kmax;
        let mut candidates = [0usize, n - 1, n - 1, n - 1];
        if a < 0.0 {
            let vertex = (-b / (2.0 * a)).clamp(0.0, kmax);
            candidates[2] = vertex.floor() as usize;
            candidates[3] = vertex.ceil() as usize;
        }
        for k in candidates {
            let i = at(k);
            let v = f(i);
            if v > best.value {
                best = GridMax { value: v, current: i };
            }
        }
    }
    best
}

/// [`grid_support`] followed by repeated zooming: a 21 × 21 polar sub-grid
/// spanning one cell on each side of the best point, shrunk tenfold per
/// level.
pub fn refined_grid_support(
    params: &InverterParams,
    pair: OutputPair,
    w: [f64; 2],
    n: usize,
    levels: usize,
) -> GridMax {
    const M: usize = 21;
    let f = |i: DqVector| {
        let s = pair.evaluate(params, i);
        w[0] * s[0] + w[1] * s[1]
    };
    let mut best = grid_support(params, pair, w, n);
    let mut dr = params.i_max / (n - 1) as f64;
    let mut dth = 2.0 * PI / n as f64;
    for _ in 0..levels {
        let r0 = best.current.norm();
        let th0 = best.current.q.atan2(best.current.d);
        for a in 0..M {
            let th = th0 + dth * (2.0 * a as f64 / (M - 1) as f64 - 1.0);
            for b in 0..M {
                let r = (r0 + dr * (2.0 * b as f64 / (M - 1) as f64 - 1.0)).clamp(0.0, params.i_max);
                let i = DqVector::from_polar(r, th);
                let v = f(i);
                if v > best.value {
                    best = GridMax { value: v, current: i };
                }
            }
        }
        dr *= 0.1;
        dth *= 0.1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMax {
    pub value: f64,
    pub current: DqVector,
}

/// `exp(M)` by scaling and squaring with a degree-20 Taylor polynomial.
pub fn expm<const N: usize>(m: &[[f64; N]; N]) -> [[f64; N]; N] {
    let norm = (0..N).map(|i| m[i].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        s += 1;
    }
    let a = m.map(|row| row.map(|x| x * scale));
    let mut term = identity::<N>();
    let mut sum = identity::<N>();
    for k in 1..=20 {
        term = matmul(&term, &a).map(|row| row.map(|x| x / k as f64));
        for i in 0..N {
            for j in 0..N {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = matmul(&sum, &sum);
    }
    sum
}

pub fn identity<const N: usize>() -> [[f64; N]; N] {
    let mut m = [[0.0; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut c = [[0.0; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            for j in 0..N {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn matvec<const N: usize>(a: &[[f64; N]; N], x: &[f64; N]) -> [f64; N] {
    let mut y = [0.0; N];
    for i in 0..N {
        y[i] = (0..N).map(|j| a[i][j] * x[j]).sum();
    }
    y
}

/// OC closed loop in deviations from its rest point `x* = (I*, V*)`:
/// `L İ = V − E − R I + ωL (I_q, −I_d)` and `V̇ = −k_v (V − V*)` give
/// `ẋ = M (x − x*)` with `x = (I_d, I_q, V_d, V_q)`.
pub fn oc_generator(params: &InverterParams, k_v: f64) -> [[f64; 4]; 4] {
    let (r, l, w) = (params.r, params.l, params.omega);
    [
        [-r / l, w, 1.0 / l, 0.0],
        [-w, -r / l, 0.0, 1.0 / l],
        [0.0, 0.0, -k_v, 0.0],
        [0.0, 0.0, 0.0, -k_v],
    ]
}

/// Rest point of the OC loop for a target current.
pub fn oc_rest_point(params: &InverterParams, target: DqVector) -> [f64; 4] {
    let (r, wl, e) = (params.r, params.omega * params.l, params.e_mag);
    [target.d, target.q, e + r * target.d - wl * target.q, r * target.q + wl * target.d]
}

/// Exact `(I_d, I_q, V_d, V_q)` at `t_k = k·dt`, `k = 0..=steps`, for the OC
/// loop started at rest (`I = 0`, `V = E`) with the target switching from
/// `targets[0]` to `targets[1]` at the first grid time not before `t0`.
pub fn oc_exact(params: &InverterParams, k_v: f64, targets: [DqVector; 2], cfg: &SimConfig) -> Vec<[f64; 4]> {
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let k_switch = ((cfg.t0 / cfg.dt) - 1e-9).ceil() as usize;
    let t_switch = k_switch as f64 * cfg.dt;
    let m = oc_generator(params, k_v);
    let rest = targets.map(|t| oc_rest_point(params, t));
    let flow = |t: f64, from: &[f64; 4], rest: &[f64; 4]| {
        let dev = [0, 1, 2, 3].map(|j| from[j] - rest[j]);
        let y = matvec(&expm(&m.map(|row| row.map(|v| v * t))), &dev);
        [0, 1, 2, 3].map(|j| rest[j] + y[j])
    };
    let x0 = [0.0, 0.0, params.e_mag, 0.0];
    let x_switch = flow(t_switch, &x0, &rest[0]);
    (0..=steps)
        .map(|k| {
            let t = k as f64 * cfg.dt;
            if k < k_switch {
                flow(t, &x0, &rest[0])
            } else {
                flow(t - t_switch, &x_switch, &rest[1])
            }
        })
        .collect()
}

/// Largest per-sample relative deviation of an OC trajectory from the
/// exact solution, and the largest absolute deviation. Currents are
/// compared relative to `max(‖I‖, 1 A)`, voltages to `max(‖V‖, 1 V)`.
pub fn oc_deviation(params: &InverterParams, k_v: f64, traj: &Trajectory) -> Option<(f64, f64)> {
    let targets = traj.setpoints.currents?;
    let exact = oc_exact(params, k_v, targets, &traj.config);
    if exact.len() != traj.records.len() {
        return None;
    }
    let mut rel = 0.0f64;
    let mut abs = 0.0f64;
    for (rec, x) in traj.records.iter().zip(&exact) {
        let di = (rec.i.d - x[0]).hypot(rec.i.q - x[1]);
        let dv = (rec.v.d - x[2]).hypot(rec.v.q - x[3]);
        rel = rel.max(di / x[0].hypot(x[1]).max(1.0)).max(dv / x[2].hypot(x[3]).max(1.0));
        abs = abs.max(di).max(dv);
    }
    Some((rel, abs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 7.3;
        let e = expm(&[[0.0, t], [-t, 0.0]]);
        assert!((e[0][0] - t.cos()).abs() < 1e-13);
        assert!((e[0][1] - t.sin()).abs() < 1e-13);
        assert!((e[1][0] + t.sin()).abs() < 1e-13);
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let e = expm(&[[-3.0, 0.0], [0.0, 2.0]]);
        assert!((e[0][0] - (-3.0f64).exp()).abs() < 1e-15);
        assert!((e[1][1] / 2.0f64.exp() - 1.0).abs() < 1e-14);
        let n = expm(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]);
        assert_eq!(n[0][2], 0.5);
        assert_eq!(n[0][1], 1.0);
    }

    #[test]
    fn generator_rests_at_target() {
        let p = InverterParams::reference();
        let target = DqVector::new(5.0, -2.0);
        let x = oc_rest_point(&p, target);
        let v = invfeas_core::model::steady_state_voltage(&p, target);
        assert!((x[2] - v.d).abs() < 1e-12 && (x[3] - v.q).abs() < 1e-12);
        let g = oc_generator(&p, 10.0);
        let rate = invfeas_core::simulator::oc_derivatives(
            &p,
            &invfeas_core::simulator::OcParams::new(10.0).unwrap(),
            v,
            &invfeas_core::simulator::OcState { i: target, v },
        );
        assert!(rate.i.norm() < 1e-9 && rate.v.norm() == 0.0);
        assert_eq!(g[2][0], 0.0);
    }

    #[test]
    fn refinement_only_improves() {
        let p = InverterParams::reference();
        for pair in OutputPair::ALL {
            let w = [0.6, -0.8];
            let coarse = grid_support(&p, pair, w, 101);
            let fine = refined_grid_support(&p, pair, w, 101, 10);
            assert!(fine.value >= coarse.value);
            assert!(fine.current.norm() <= p.i_max * (1.0 + 1e-15));
        }
    }

    #[test]
    fn grid_support_matches_a_full_scan() {
        let p = InverterParams::reference();
        let n = 61;
        for pair in OutputPair::ALL {
            for w in [[1.0, 0.0], [0.3, -0.9], [-0.6, 0.8]] {
                let fast = grid_support(&p, pair, w, n).value;
                let mut full = f64::NEG_INFINITY;
                for j in 0..n {
                    let th = 2.0 * PI * j as f64 / n as f64;
                    for k in 0..n {
                        let i = DqVector::from_polar(p.i_max * k as f64 / (n - 1) as f64, th);
                        let s = pair.evaluate(&p, i);
                        full = full.max(w[0] * s[0] + w[1] * s[1]);
                    }
                }
                assert!((fast - full).abs() <= 1e-9 * full.abs().max(1.0), "{fast} {full}");
            }
        }
    }
}

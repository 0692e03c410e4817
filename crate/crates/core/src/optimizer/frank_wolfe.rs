use alloc::vec;
use alloc::vec::Vec;

use super::{Iterate, Method, Objective, SolveReport, TrackingObjective};
use crate::math::sqrt;
use crate::model::{DqVector, InverterParams, OutputPair};
use crate::region::{disk_preimage, FeasibleRegion};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrankWolfeOptions {
    pub max_iterations: usize,
    /// Stop once the duality gap is below `gap_tolerance · max(1, f)`.
    pub gap_tolerance: f64,
    pub record_history: bool,
}

impl Default for FrankWolfeOptions {
    fn default() -> Self {
        FrankWolfeOptions { max_iterations: 10_000, gap_tolerance: 1e-8, record_history: false }
    }
}

/// Frank-Wolfe for the tracking objective, fully corrective: after each
/// support call the iterate is re-optimized over the convex hull of all
/// support points found so far. For a quadratic in the plane that
/// correction is an exact projection onto a polygon, so interior targets
/// are reached exactly once they are enclosed.
pub fn solve_frank_wolfe(
    params: &InverterParams,
    pair: OutputPair,
    obj: &TrackingObjective,
    opts: &FrankWolfeOptions,
) -> Result<SolveReport> {
    params.validate()?;
    let region = FeasibleRegion::new(params, pair);
    let lf = region.lemma_form()?;
    let i_max = params.i_max;
    let metric = if obj.gamma > 0.0 { sqrt(obj.gamma) } else { 0.0 };
    let target = [obj.target1, metric * obj.target2];

    let mut atoms = vec![Atom::new(&region, DqVector::ZERO, metric)];
    let mut weights = vec![(0usize, 1.0)];
    let mut s = atoms[0].s;
    let mut gap = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..opts.max_iterations {
        iterations = k;
        let g = obj.gradient(s);
        if g == [0.0, 0.0] {
            gap = 0.0;
            converged = true;
            break;
        }
        let vertex = region.support_weighted([-g[0], -g[1]]).maximizer_current;
        let atom = Atom::new(&region, vertex, metric);
        gap = g[0] * (s[0] - atom.s[0]) + g[1] * (s[1] - atom.s[1]);
        if gap <= opts.gap_tolerance * obj.value(s).max(1.0) {
            converged = true;
            break;
        }
        if atoms.iter().any(|a| a.s == atom.s) {
            // The oracle returned a known vertex, so the remaining gap is
            // round-off in the projection.
            converged = true;
            break;
        }
        atoms.push(atom);
        atoms = hull(atoms);
        weights = project_onto_hull(&atoms, target, obj.gamma > 0.0);
        s = combine(&atoms, &weights, |a| a.s);
        iterations = k + 1;
        if opts.record_history {
            history.push(Iterate { iteration: k + 1, s1: s[0], s2: s[1], objective: obj.value(s) });
        }
    }

    let tau = combine(&atoms, &weights, |a| [a.y.norm_sq(), 0.0])[0];
    let [zd, zq] = combine(&atoms, &weights, |a| a.y.to_array());
    let y = disk_preimage(lf.c_vec, DqVector::new(zd, zq), tau.min(1.0));
    let current = clamp_to_disk(i_max * y, i_max);

    let mut report = SolveReport::from_current(params, pair, obj as &dyn Objective, current, Method::FrankWolfe);
    report.iterations = iterations;
    report.certificate = gap;
    report.history = history;
    if converged {
        Ok(report)
    } else {
        Err(Error::NotConverged(alloc::boxed::Box::new(report)))
    }
}

/// Conditional gradient over the feasible output region for any convex
/// objective, with the objective's closed-form line search when it has one
/// and the step `2/(k+2)` otherwise.
///
/// Each vertex `v_k` is the support point in direction `-∇f(s_k)`. The
/// iterate's preimage is carried along as the matching combination of
/// `(‖x‖², x)` over the vertices' unit-disk currents, from which the final
/// current is recovered exactly.
pub fn solve_frank_wolfe_with(
    params: &InverterParams,
    pair: OutputPair,
    obj: &dyn Objective,
    opts: &FrankWolfeOptions,
) -> Result<SolveReport> {
    params.validate()?;
    let region = FeasibleRegion::new(params, pair);
    let lf = region.lemma_form()?;
    let i_max = params.i_max;

    let mut s = region.output(DqVector::ZERO);
    let mut tau = 0.0;
    let mut z = DqVector::ZERO;
    let mut gap = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..opts.max_iterations {
        iterations = k;
        let g = obj.gradient(s);
        if g == [0.0, 0.0] {
            gap = 0.0;
            converged = true;
            break;
        }
        let vertex = region.support_weighted([-g[0], -g[1]]).maximizer_current;
        let v = region.output(vertex);
        gap = g[0] * (s[0] - v[0]) + g[1] * (s[1] - v[1]);
        if gap <= opts.gap_tolerance * obj.value(s).max(1.0) {
            converged = true;
            break;
        }
        let d = [v[0] - s[0], v[1] - s[1]];
        let eta = obj.line_search(s, d).unwrap_or(2.0 / (k as f64 + 2.0));
        if eta <= 0.0 {
            converged = true;
            break;
        }
        let y = (1.0 / i_max) * vertex;
        s = [s[0] + eta * d[0], s[1] + eta * d[1]];
        tau += eta * (y.norm_sq() - tau);
        z = z + eta * (y - z);
        iterations = k + 1;
        if opts.record_history {
            history.push(Iterate { iteration: k + 1, s1: s[0], s2: s[1], objective: obj.value(s) });
        }
    }

    let current = clamp_to_disk(i_max * disk_preimage(lf.c_vec, z, tau.min(1.0)), i_max);
    let mut report = SolveReport::from_current(params, pair, obj, current, Method::FrankWolfe);
    report.iterations = iterations;
    report.certificate = gap;
    report.history = history;
    if converged {
        Ok(report)
    } else {
        Err(Error::NotConverged(alloc::boxed::Box::new(report)))
    }
}

fn clamp_to_disk(c: DqVector, i_max: f64) -> DqVector {
    let n = c.norm();
    if n > i_max {
        (i_max / n) * c
    } else {
        c
    }
}

/// A support point: outputs, outputs in the objective's metric, and the
/// unit-disk current that produces them.
#[derive(Debug, Clone, Copy)]
struct Atom {
    s: [f64; 2],
    p: [f64; 2],
    y: DqVector,
}

impl Atom {
    fn new(region: &FeasibleRegion, current: DqVector, metric: f64) -> Self {
        let s = region.output(current);
        Atom { s, p: [s[0], metric * s[1]], y: (1.0 / region.params().i_max) * current }
    }
}

fn combine(atoms: &[Atom], weights: &[(usize, f64)], f: impl Fn(&Atom) -> [f64; 2]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for &(i, w) in weights {
        let v = f(&atoms[i]);
        out[0] += w * v[0];
        out[1] += w * v[1];
    }
    out
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Vertices of the convex hull of the atoms (in the metric coordinates),
/// counter-clockwise. Interior and collinear points are dropped.
fn hull(mut atoms: Vec<Atom>) -> Vec<Atom> {
    if atoms.len() < 3 {
        return atoms;
    }
    atoms.sort_by(|a, b| a.p[0].total_cmp(&b.p[0]).then(a.p[1].total_cmp(&b.p[1])));
    atoms.dedup_by(|a, b| a.p == b.p);
    if atoms.len() < 3 {
        return atoms;
    }
    let chain = |pts: &mut dyn Iterator<Item = &Atom>| {
        let mut side: Vec<Atom> = Vec::new();
        for a in pts {
            while side.len() >= 2 && cross(side[side.len() - 2].p, side[side.len() - 1].p, a.p) <= 0.0 {
                side.pop();
            }
            side.push(*a);
        }
        side.pop();
        side
    };
    let mut out = chain(&mut atoms.iter());
    out.extend(chain(&mut atoms.iter().rev()));
    out
}

/// Weights of the point of the polygon closest to `q` in the metric
/// coordinates. With `full_metric` false the objective ignores the second
/// coordinate and only the first is matched.
fn project_onto_hull(atoms: &[Atom], q: [f64; 2], full_metric: bool) -> Vec<(usize, f64)> {
    let n = atoms.len();
    if !full_metric {
        let lo = (0..n).min_by(|&i, &j| atoms[i].p[0].total_cmp(&atoms[j].p[0])).unwrap_or(0);
        let hi = (0..n).max_by(|&i, &j| atoms[i].p[0].total_cmp(&atoms[j].p[0])).unwrap_or(0);
        let (a, b) = (atoms[lo].p[0], atoms[hi].p[0]);
        if q[0] <= a || hi == lo {
            return vec![(lo, 1.0)];
        }
        if q[0] >= b {
            return vec![(hi, 1.0)];
        }
        let t = (q[0] - a) / (b - a);
        return vec![(lo, 1.0 - t), (hi, t)];
    }
    if n == 1 {
        return vec![(0, 1.0)];
    }
    if n >= 3 && (0..n).all(|i| cross(atoms[i].p, atoms[(i + 1) % n].p, q) >= 0.0) {
        // Inside: barycentric weights in the fan triangle that holds q best.
        let mut best: Option<(f64, [f64; 3], usize)> = None;
        for j in 1..n - 1 {
            let (a, b, c) = (atoms[0].p, atoms[j].p, atoms[j + 1].p);
            let area = cross(a, b, c);
            if area <= 0.0 {
                continue;
            }
            let w = [cross(b, c, q) / area, cross(c, a, q) / area, cross(a, b, q) / area];
            let worst = w[0].min(w[1]).min(w[2]);
            if best.is_none_or(|(m, _, _)| worst > m) {
                best = Some((worst, w, j));
            }
        }
        if let Some((_, w, j)) = best {
            let w = w.map(|x| x.max(0.0));
            let sum = w[0] + w[1] + w[2];
            return vec![(0, w[0] / sum), (j, w[1] / sum), (j + 1, w[2] / sum)];
        }
    }
    let edges = if n == 2 { 1 } else { n };
    let mut best = (f64::INFINITY, vec![(0, 1.0)]);
    for i in 0..edges {
        let j = (i + 1) % n;
        let (a, b) = (atoms[i].p, atoms[j].p);
        let ab = sub(b, a);
        let len2 = dot(ab, ab);
        let t = if len2 > 0.0 { (dot(sub(q, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let pt = [a[0] + t * ab[0], a[1] + t * ab[1]];
        let d = dot(sub(q, pt), sub(q, pt));
        if d < best.0 {
            best = (d, vec![(i, 1.0 - t), (j, t)]);
        }
    }
    best.1
}

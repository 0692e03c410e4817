//! Geometry of the feasible output set
//! `S = {(S1(Ī), S2(Ī)) : ‖Ī‖ ≤ i_max}` for a pair of outputs.
//!
//! Both outputs share an isotropic quadratic part, so any weighted
//! combination `w1 S1 + w2 S2` is `γ‖Ī‖² + d·Ī + k` and its maximum over the
//! current disk has a closed form: the maximizer points along `d` and only
//! its radius needs a one-dimensional search. The set is convex, so these
//! support values describe it completely.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math::{cos, sin, sqrt};
use crate::model::{
    lemma_form, norm2, DqVector, InverterParams, LemmaForm, OutputPair, QuadraticOutputMap,
};
use crate::{Error, Result};

/// Unit direction in the output plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction([f64; 2]);

impl Direction {
    pub fn from_angle(theta: f64) -> Self {
        Direction([cos(theta), sin(theta)])
    }

    /// Normalizes `v`; the zero vector has no direction.
    pub fn from_vector(v: [f64; 2]) -> Result<Self> {
        let n = norm2(v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain("direction vector must be non-zero and finite"));
        }
        Ok(Direction([v[0] / n, v[1] / n]))
    }

    pub fn vector(&self) -> [f64; 2] {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportResult {
    /// `max w·s` over the region.
    pub value: f64,
    /// A current attaining the maximum.
    pub maximizer_current: DqVector,
}

/// Vertex of a sampled boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub s1: f64,
    pub s2: f64,
    pub preimage: DqVector,
}

/// Counterclockwise polyline through support points of the region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryPolyline {
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryPolyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when every turn of the closed polyline has the same orientation,
    /// allowing cross products down to `-tol·‖e1‖‖e2‖`.
    pub fn is_convex(&self, tol: f64) -> bool {
        let n = self.points.len();
        if n < 3 {
            return true;
        }
        let mut pos = true;
        let mut neg = true;
        for i in 0..n {
            let p0 = &self.points[i];
            let p1 = &self.points[(i + 1) % n];
            let p2 = &self.points[(i + 2) % n];
            let e1 = [p1.s1 - p0.s1, p1.s2 - p0.s2];
            let e2 = [p2.s1 - p1.s1, p2.s2 - p1.s2];
            let cross = e1[0] * e2[1] - e1[1] * e2[0];
            let slack = tol * norm2(e1) * norm2(e2);
            pos &= cross >= -slack;
            neg &= cross <= slack;
        }
        pos || neg
    }

    /// Twice the signed area; positive for counterclockwise order.
    pub fn signed_area2(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let a = &self.points[i];
                let b = &self.points[(i + 1) % n];
                a.s1 * b.s2 - a.s2 * b.s1
            })
            .sum()
    }
}

/// Number of supporting half-planes checked by [`contains`].
pub const MEMBERSHIP_DIRECTIONS: usize = 720;
/// Angular subdivision used to refine around the tightest half-plane.
pub const MEMBERSHIP_REFINEMENT: usize = 8;

/// The feasible output set of one pair, with its coefficient maps cached.
#[derive(Debug, Clone, Copy)]
pub struct FeasibleRegion {
    params: InverterParams,
    pair: OutputPair,
    maps: [QuadraticOutputMap; 2],
}

impl FeasibleRegion {
    pub fn new(params: &InverterParams, pair: OutputPair) -> Self {
        FeasibleRegion { params: *params, pair, maps: pair.maps(params) }
    }

    pub fn params(&self) -> &InverterParams {
        &self.params
    }

    pub fn pair(&self) -> OutputPair {
        self.pair
    }

    pub fn maps(&self) -> &[QuadraticOutputMap; 2] {
        &self.maps
    }

    pub fn output(&self, current: DqVector) -> [f64; 2] {
        [self.maps[0].eval(current), self.maps[1].eval(current)]
    }

    /// Support value for arbitrary (not necessarily unit) weights.
    pub fn support_weighted(&self, w: [f64; 2]) -> SupportResult {
        let [m1, m2] = &self.maps;
        let gamma = w[0] * m1.alpha + w[1] * m2.alpha;
        let d = w[0] * m1.a_vec + w[1] * m2.a_vec;
        let k = w[0] * m1.offset + w[1] * m2.offset;
        let d_norm = d.norm();
        let i_max = self.params.i_max;

        // max over ρ ∈ [0, i_max] of γρ² + ‖d‖ρ
        let rho = if gamma >= 0.0 {
            i_max
        } else {
            (d_norm / (-2.0 * gamma)).min(i_max)
        };
        let current = if d_norm > 0.0 {
            (rho / d_norm) * d
        } else {
            DqVector::new(rho, 0.0)
        };
        SupportResult { value: gamma * rho * rho + d_norm * rho + k, maximizer_current: current }
    }

    pub fn support(&self, dir: Direction) -> SupportResult {
        self.support_weighted(dir.vector())
    }

    pub fn boundary(&self, n_samples: usize) -> Result<BoundaryPolyline> {
        if n_samples < 3 {
            return Err(Error::Domain("boundary needs at least 3 samples"));
        }
        let raw: Vec<BoundaryPoint> = (0..n_samples)
            .map(|i| {
                let theta = 2.0 * PI * i as f64 / n_samples as f64;
                let cur = self.support(Direction::from_angle(theta)).maximizer_current;
                let [s1, s2] = self.output(cur);
                BoundaryPoint { s1, s2, preimage: cur }
            })
            .collect();

        let scale = raw.iter().fold(1.0f64, |m, p| m.max(p.s1.abs()).max(p.s2.abs()));
        let merge_tol = 1e-9 * scale;
        let same = |a: &BoundaryPoint, b: &BoundaryPoint| {
            norm2([a.s1 - b.s1, a.s2 - b.s2]) <= merge_tol
        };
        let mut points: Vec<BoundaryPoint> = Vec::with_capacity(raw.len());
        for p in raw {
            if points.last().is_none_or(|last| !same(last, &p)) {
                points.push(p);
            }
        }
        while points.len() > 1 && same(&points[0], &points[points.len() - 1]) {
            points.pop();
        }
        Ok(BoundaryPolyline { points })
    }

    /// Slack `h(θ) + tol·max(1, |h(θ)|) - θ·point` of one supporting half-plane.
    fn half_plane_margin(&self, theta: f64, point: [f64; 2], tol: f64) -> f64 {
        let dir = Direction::from_angle(theta);
        let h = self.support(dir).value;
        let [u, v] = dir.vector();
        h + tol * h.abs().max(1.0) - (u * point[0] + v * point[1])
    }

    pub fn contains(&self, point: [f64; 2], tol: f64) -> Result<bool> {
        if !(tol > 0.0) {
            return Err(Error::Domain("membership tolerance must be positive"));
        }
        let step = 2.0 * PI / MEMBERSHIP_DIRECTIONS as f64;
        let mut tightest = (f64::INFINITY, 0.0);
        for i in 0..MEMBERSHIP_DIRECTIONS {
            let theta = step * i as f64;
            let margin = self.half_plane_margin(theta, point, tol);
            if margin < 0.0 {
                return Ok(false);
            }
            if margin < tightest.0 {
                tightest = (margin, theta);
            }
        }
        // A point just outside can slip between two sampled half-planes;
        // look again on a finer grid either side of the tightest one.
        let fine = step / MEMBERSHIP_REFINEMENT as f64;
        for j in 1..MEMBERSHIP_REFINEMENT {
            for sign in [-1.0, 1.0] {
                let theta = tightest.1 + sign * fine * j as f64;
                if self.half_plane_margin(theta, point, tol) < 0.0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn lemma_form(&self) -> Result<LemmaForm> {
        lemma_form(&self.params, self.pair.first(), self.pair.second())
    }

    /// Current whose outputs are the `lambda`-combination of the outputs of
    /// `i1` and `i2`, using a precomputed lemma form.
    pub fn midpoint_witness_with(
        &self,
        lf: &LemmaForm,
        i1: DqVector,
        i2: DqVector,
        lambda: f64,
    ) -> Result<DqVector> {
        let i_max = self.params.i_max;
        let limit = i_max * (1.0 + 1e-9);
        if !(i1.norm() <= limit && i2.norm() <= limit) {
            return Err(Error::Domain("witness endpoints must satisfy the current limit"));
        }
        let y = convex_combination_preimage(lf, (1.0 / i_max) * i1, (1.0 / i_max) * i2, lambda)?;
        Ok(i_max * y)
    }
}

pub fn support(
    params: &InverterParams,
    pair: OutputPair,
    dir: Direction,
) -> SupportResult {
    FeasibleRegion::new(params, pair).support(dir)
}

pub fn boundary(
    params: &InverterParams,
    pair: OutputPair,
    n_samples: usize,
) -> Result<BoundaryPolyline> {
    FeasibleRegion::new(params, pair).boundary(n_samples)
}

/// Membership by supporting half-planes: `point` is accepted when it
/// satisfies `θ·point ≤ h(θ) + tol·max(1, |h(θ)|)` for every sampled θ.
pub fn contains(
    params: &InverterParams,
    pair: OutputPair,
    point: [f64; 2],
    tol: f64,
) -> Result<bool> {
    FeasibleRegion::new(params, pair).contains(point, tol)
}

/// Solves `‖y‖² c + y = ζ c + z` for `y = μ c + z` with `μ` the non-negative
/// root of `‖c‖²μ² + (2cᵀz + 1)μ + (‖z‖² − ζ) = 0`.
///
/// Requires `‖z‖² ≤ ζ ≤ 1`; the result then satisfies `‖y‖ ≤ 1`. This is the
/// single step shared by the convexity witness and the recovery of a current
/// from a non-rank-1 Gram matrix.
pub fn disk_preimage(c: DqVector, z: DqVector, zeta: f64) -> DqVector {
    let a = c.norm_sq();
    let b = 2.0 * c.dot(z) + 1.0;
    let k = z.norm_sq() - zeta;
    let mu = if k >= 0.0 {
        0.0
    } else if a < 1e-14 {
        -k / b
    } else {
        let disc = b * b - 4.0 * a * k;
        let q = -0.5 * (b + b.signum() * sqrt(disc));
        (q / a).max(k / q)
    };
    mu * c + z
}

/// Preimage, in unit-disk coordinates, of the convex combination
/// `λ s(x1) + (1-λ) s(x2)`.
pub fn convex_combination_preimage(
    lf: &LemmaForm,
    x1: DqVector,
    x2: DqVector,
    lambda: f64,
) -> Result<DqVector> {
    const SLACK: f64 = 1.0 + 1e-9;
    if !(x1.norm() <= SLACK && x2.norm() <= SLACK) {
        return Err(Error::Domain("points must lie in the unit disk"));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain("lambda must lie in [0, 1]"));
    }
    if lambda == 1.0 {
        return Ok(x1);
    }
    if lambda == 0.0 {
        return Ok(x2);
    }
    let z = lambda * x1 + (1.0 - lambda) * x2;
    let zeta = lambda * x1.norm_sq() + (1.0 - lambda) * x2.norm_sq();
    Ok(disk_preimage(lf.c_vec, z, zeta))
}

pub fn midpoint_witness(
    params: &InverterParams,
    pair: OutputPair,
    i1: DqVector,
    i2: DqVector,
    lambda: f64,
) -> Result<DqVector> {
    let region = FeasibleRegion::new(params, pair);
    let lf = region.lemma_form()?;
    region.midpoint_witness_with(&lf, i1, i2, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutputQuantity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference() -> InverterParams {
        InverterParams::reference()
    }

    fn random_params(rng: &mut impl Rng) -> InverterParams {
        InverterParams::new(
            rng.gen_range(0.01..10.0),
            rng.gen_range(0.1e-3..50e-3),
            2.0 * PI * 60.0,
            rng.gen_range(50.0..400.0),
            rng.gen_range(1.0..50.0),
        )
        .unwrap()
    }

    fn random_in_disk(rng: &mut impl Rng, radius: f64) -> DqVector {
        DqVector::from_polar(radius * sqrt(rng.gen_range(0.0..1.0)), rng.gen_range(0.0..2.0 * PI))
    }

    /// Dense polar-grid maximum of `w·s` over the current disk.
    fn polar_grid_support(region: &FeasibleRegion, w: [f64; 2], n: usize) -> f64 {
        let i_max = region.params().i_max;
        let mut best = f64::NEG_INFINITY;
        for a in 0..4 * n {
            let phi = 2.0 * PI * a as f64 / (4 * n) as f64;
            for r in 0..n {
                let rho = i_max * r as f64 / (n - 1) as f64;
                let s = region.output(DqVector::from_polar(rho, phi));
                best = best.max(w[0] * s[0] + w[1] * s[1]);
            }
        }
        best
    }

    #[test]
    fn support_reference_pq_along_p() {
        let p = reference();
        let r = support(&p, OutputPair::PQ, Direction::from_angle(0.0));
        let want = 1.2 * p.i_max * p.i_max + 180.0 * p.i_max;
        assert!((r.value - want).abs() < 1e-9);
        assert!((r.value - 1253.33).abs() < 0.01, "{}", r.value);
        assert!((r.maximizer_current.d - p.i_max).abs() < 1e-12);
        assert!(r.maximizer_current.q.abs() < 1e-12);
        let grid = polar_grid_support(&FeasibleRegion::new(&p, OutputPair::PQ), [1.0, 0.0], 401);
        assert!((grid - r.value).abs() <= 1e-9 * r.value);
    }

    #[test]
    fn support_agrees_with_polar_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let p = random_params(&mut rng);
            for pair in OutputPair::ALL {
                let region = FeasibleRegion::new(&p, pair);
                for k in 0..24 {
                    let dir = Direction::from_angle(2.0 * PI * (k as f64 + 0.3) / 24.0);
                    let exact = region.support(dir).value;
                    let grid = polar_grid_support(&region, dir.vector(), 301);
                    assert!(grid <= exact + 1e-9 * exact.abs().max(1.0));
                    let [m1, m2] = region.maps();
                    let spread = (m1.alpha + m2.alpha) * p.i_max * p.i_max
                        + (m1.a_vec.norm() + m2.a_vec.norm()) * p.i_max;
                    assert!(exact - grid <= 1e-3 * spread, "{pair:?} {exact} {grid}");
                }
            }
        }
    }

    #[test]
    fn support_result_invariants_and_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let p = random_params(&mut rng);
            let pair = OutputPair::ALL[rng.gen_range(0..3)];
            let region = FeasibleRegion::new(&p, pair);
            let dir = Direction::from_angle(rng.gen_range(0.0..2.0 * PI));
            let r = region.support(dir);
            assert!(r.maximizer_current.norm() <= p.i_max * (1.0 + 1e-12));
            let s = region.output(r.maximizer_current);
            let [u, v] = dir.vector();
            let proj = u * s[0] + v * s[1];
            assert!((proj - r.value).abs() <= 1e-10 * r.value.abs().max(1.0));
            // Ī = 0 is always feasible.
            let s0 = region.output(DqVector::ZERO);
            assert!(r.value >= u * s0[0] + v * s0[1]);
            // Positive homogeneity of the variable part.
            let k: f64 = rng.gen_range(0.1..10.0);
            let scaled = region.support_weighted([k * u, k * v]);
            let offset = u * s0[0] + v * s0[1];
            let want = k * (r.value - offset);
            assert!((scaled.value - k * offset - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn boundary_small_sample_counts() {
        let p = reference();
        for pair in OutputPair::ALL {
            let b = boundary(&p, pair, 4).unwrap();
            assert_eq!(b.len(), 4);
            for pt in &b.points {
                assert!(pt.preimage.norm() <= p.i_max * (1.0 + 1e-12));
            }
        }
        assert!(boundary(&p, OutputPair::PQ, 2).is_err());
    }

    #[test]
    fn boundary_is_convex_and_counterclockwise() {
        let p = reference();
        let b = boundary(&p, OutputPair::PV2, 3600).unwrap();
        assert!(b.len() > 3000);
        assert!(b.is_convex(1e-9));
        assert!(b.signed_area2() > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let q = random_params(&mut rng);
            for pair in OutputPair::ALL {
                let b = boundary(&q, pair, 720).unwrap();
                assert!(b.is_convex(1e-9), "{pair:?} {q:?}");
                assert!(b.signed_area2() > 0.0);
            }
        }
    }

    #[test]
    fn boundary_preimages_on_limit_circle_for_nonnegative_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let p = random_params(&mut rng);
            for pair in OutputPair::ALL {
                let region = FeasibleRegion::new(&p, pair);
                for k in 0..=90 {
                    let theta = (PI / 2.0) * k as f64 / 90.0;
                    let r = region.support(Direction::from_angle(theta));
                    assert!((r.maximizer_current.norm() - p.i_max).abs() <= 1e-12 * p.i_max);
                }
            }
        }
    }

    #[test]
    fn contains_reference_setpoints() {
        let p = reference();
        assert!(!contains(&p, OutputPair::PV2, [850.0, 14400.0], 1e-6).unwrap());
        assert!(contains(&p, OutputPair::PQ, [1100.0, 0.0], 1e-6).unwrap());
        assert!(contains(&p, OutputPair::PV2, [200.0, 14400.0], 1e-6).unwrap());
        assert!(contains(&p, OutputPair::PQ, [800.0, 0.0], 1e-6).unwrap());
        assert!(contains(&p, OutputPair::PQ, [0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn contains_accepts_images_of_feasible_currents() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..40 {
            let p = random_params(&mut rng);
            for pair in OutputPair::ALL {
                let region = FeasibleRegion::new(&p, pair);
                for _ in 0..10 {
                    let i = random_in_disk(&mut rng, p.i_max);
                    assert!(region.contains(region.output(i), 1e-6).unwrap());
                }
                // Boundary points too.
                let i = DqVector::from_polar(p.i_max, rng.gen_range(0.0..2.0 * PI));
                assert!(region.contains(region.output(i), 1e-6).unwrap());
            }
        }
    }

    #[test]
    fn contains_rejects_points_beyond_the_boundary() {
        let p = reference();
        for pair in OutputPair::ALL {
            let region = FeasibleRegion::new(&p, pair);
            let b = region.boundary(90).unwrap();
            let centroid = region.output(DqVector::ZERO);
            for pt in &b.points {
                let out = [
                    centroid[0] + 1.01 * (pt.s1 - centroid[0]),
                    centroid[1] + 1.01 * (pt.s2 - centroid[1]),
                ];
                assert!(!region.contains(out, 1e-6).unwrap(), "{pair:?}");
            }
        }
    }

    #[test]
    fn preimage_endpoint_and_affine_cases() {
        let p = reference();
        let lf = lemma_form(&p, OutputQuantity::ActivePower, OutputQuantity::ReactivePower).unwrap();
        let x1 = DqVector::new(0.3, -0.4);
        let x2 = DqVector::new(-0.9, 0.1);
        assert_eq!(convex_combination_preimage(&lf, x1, x2, 1.0).unwrap(), x1);
        assert_eq!(convex_combination_preimage(&lf, x1, x2, 0.0).unwrap(), x2);
        let affine = LemmaForm { c_vec: DqVector::ZERO, ..lf };
        let y = convex_combination_preimage(&affine, x1, x2, 0.25).unwrap();
        let z = 0.25 * x1 + 0.75 * x2;
        assert!((y - z).norm() < 1e-15);
        assert!(convex_combination_preimage(&lf, DqVector::new(1.1, 0.0), x2, 0.5).is_err());
        assert!(convex_combination_preimage(&lf, x1, x2, 1.5).is_err());
    }

    #[test]
    fn preimage_reference_pq_midpoint() {
        let p = reference();
        let lf = lemma_form(&p, OutputQuantity::ActivePower, OutputQuantity::ReactivePower).unwrap();
        let (x1, x2) = (DqVector::new(1.0, 0.0), DqVector::new(0.0, 1.0));
        let y = convex_combination_preimage(&lf, x1, x2, 0.5).unwrap();

        // Independent root solve: bisection of f1 on [0, 1] (f1(0) < 0 here).
        let c = lf.c_vec;
        let z = 0.5 * x1 + 0.5 * x2;
        let zeta = 1.0;
        let f1 = |mu: f64| {
            c.norm_sq() * mu * mu + (2.0 * c.dot(z) + 1.0) * mu + z.norm_sq() - zeta
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        assert!(f1(lo) < 0.0 && f1(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f1(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let y_ref = lo * c + z;
        assert!((y - y_ref).norm() < 1e-12);
        assert!(y.norm() <= 1.0 + 1e-9);
        let lhs = y.norm_sq() * c + y;
        let rhs = zeta * c + z;
        assert!((lhs - rhs).norm() < 1e-9);

        let mixed = {
            let a = lf.eval(x1);
            let b = lf.eval(x2);
            [0.5 * a[0] + 0.5 * b[0], 0.5 * a[1] + 0.5 * b[1]]
        };
        let got = OutputPair::PQ.evaluate(&p, p.i_max * y);
        for k in 0..2 {
            assert!((got[k] - mixed[k]).abs() <= 1e-9 * mixed[k].abs().max(1.0));
        }
    }

    #[test]
    fn witness_of_identical_endpoints_is_the_endpoint() {
        let p = reference();
        let i = DqVector::new(2.0, -3.0);
        for pair in OutputPair::ALL {
            let y = midpoint_witness(&p, pair, i, i, 0.37).unwrap();
            assert!((y - i).norm() <= 1e-12 * p.i_max);
        }
    }

    #[test]
    fn witness_between_boundary_points_stays_feasible() {
        let p = reference();
        for pair in OutputPair::ALL {
            let region = FeasibleRegion::new(&p, pair);
            let lf = region.lemma_form().unwrap();
            let b = region.boundary(64).unwrap();
            for (k, a) in b.points.iter().enumerate() {
                let c = &b.points[(k * 7 + 3) % b.len()];
                let y = region.midpoint_witness_with(&lf, a.preimage, c.preimage, 0.5).unwrap();
                assert!(y.norm() <= p.i_max * (1.0 + 1e-9));
                let s = region.output(y);
                assert!(region.contains(s, 1e-9).unwrap());
            }
        }
    }
}

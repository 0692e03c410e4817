//! Fixed-size dense matrices used by the model and the SDP lift.

use core::ops::{Add, Mul, Sub};

use crate::math::{hypot, sqrt};

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn transpose(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        let m = &self.0;
        Mat2([[k * m[0][0], k * m[0][1]], [k * m[1][0], k * m[1][1]]])
    }

    /// Solves `self * x = rhs` by Cramer's rule. Returns `None` when singular.
    pub fn solve(&self, rhs: [f64; 2]) -> Option<[f64; 2]> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        Some([
            (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

/// Symmetric 3×3 matrix stored densely (row-major).
///
/// Symmetry is the caller's contract; [`SymMat3::symmetrize`] restores it
/// after operations that may introduce rounding asymmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat3(pub [[f64; 3]; 3]);

/// Eigen-decomposition of a [`SymMat3`]: `values` ascending, `vectors[k]` is
/// the unit eigenvector paired with `values[k]`.
#[derive(Debug, Clone, Copy)]
pub struct Eigen3 {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

impl SymMat3 {
    pub const ZERO: SymMat3 = SymMat3([[0.0; 3]; 3]);

    pub fn identity() -> SymMat3 {
        SymMat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(d: [f64; 3]) -> SymMat3 {
        SymMat3([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    /// `v vᵀ`.
    pub fn outer(v: [f64; 3]) -> SymMat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = v[i] * v[j];
            }
        }
        SymMat3(m)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Frobenius inner product `Tr(self · other)` for symmetric operands.
    pub fn dot(&self, other: &SymMat3) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.0[i][j] * other.0[i][j];
            }
        }
        acc
    }

    pub fn frobenius(&self) -> f64 {
        sqrt(self.dot(self))
    }

    pub fn scale(&self, k: f64) -> SymMat3 {
        let mut m = self.0;
        m.iter_mut().flatten().for_each(|x| *x *= k);
        SymMat3(m)
    }

    pub fn symmetrize(&self) -> SymMat3 {
        let mut m = self.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let avg = 0.5 * (m[i][j] + m[j][i]);
                m[i][j] = avg;
                m[j][i] = avg;
            }
        }
        SymMat3(m)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    /// Eigen-decomposition by cyclic Jacobi rotations.
    ///
    /// Sweeps until the off-diagonal mass drops below `1e-30` of the total
    /// (or 20 sweeps), which gives eigenvalues to about machine precision
    /// relative to the matrix norm.
    pub fn eigh(&self) -> Eigen3 {
        let mut a = self.symmetrize().0;
        let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let total: f64 = a.iter().flatten().map(|x| x * x).sum();

        for _sweep in 0..20 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            if off <= 1e-30 * total || off == 0.0 {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                // Rotation angle zeroing a[p][q]; t = tan(theta), the smaller root.
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + hypot(theta, 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / hypot(t, 1.0);
                let s = t * c;

                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }

        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
        let mut values = [0.0; 3];
        let mut vectors = [[0.0; 3]; 3];
        for (slot, &k) in order.iter().enumerate() {
            values[slot] = a[k][k];
            vectors[slot] = [v[0][k], v[1][k], v[2][k]];
        }
        Eigen3 { values, vectors }
    }

    /// Rebuilds `Σ λ_k v_k v_kᵀ` from an eigen-decomposition.
    pub fn from_eigen(values: [f64; 3], vectors: &[[f64; 3]; 3]) -> SymMat3 {
        let mut m = SymMat3::ZERO;
        for k in 0..3 {
            if values[k] != 0.0 {
                m = m + SymMat3::outer(vectors[k]).scale(values[k]);
            }
        }
        m
    }

    /// Nearest positive semidefinite matrix in the Frobenius norm.
    pub fn project_psd(&self) -> SymMat3 {
        let eig = self.eigh();
        if eig.values[0] >= 0.0 {
            return *self;
        }
        let clamped = eig.values.map(|l| l.max(0.0));
        SymMat3::from_eigen(clamped, &eig.vectors).symmetrize()
    }
}

impl Add for SymMat3 {
    type Output = SymMat3;
    fn add(self, o: SymMat3) -> SymMat3 {
        let mut m = self.0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += o.0[i][j];
            }
        }
        SymMat3(m)
    }
}

impl Sub for SymMat3 {
    type Output = SymMat3;
    fn sub(self, o: SymMat3) -> SymMat3 {
        let mut m = self.0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] -= o.0[i][j];
            }
        }
        SymMat3(m)
    }
}

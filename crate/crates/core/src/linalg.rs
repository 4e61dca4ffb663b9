//! Small dense linear algebra: 2×2 complex matrices for Bogoliubov propagators,
//! a row-major real matrix for the Bethe-Salpeter kernel, and a pivoted solver.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::exec::Executor;
use crate::sum::pairwise_sum_by;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    /// σ³ = diag(1, −1).
    pub const SIGMA3: Mat2 = Mat2([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]]);
    /// σ¹, the particle-hole exchange.
    pub const SIGMA1: Mat2 = Mat2([[ZERO, ONE], [ONE, ZERO]]);

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[row][col]
    }

    pub fn scale(self, s: C64) -> Self {
        let m = self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn adjoint(self) -> Self {
        let m = self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |acc: f64, z| acc.max(z.norm()))
    }

    /// Inverse, or `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == 0.0 {
            return None;
        }
        let m = self.0;
        let inv = ONE / det;
        Some(Mat2([[m[1][1] * inv, -m[0][1] * inv], [-m[1][0] * inv, m[0][0] * inv]]))
    }

    /// Both eigenvalues, ordered by decreasing modulus.
    pub fn eigenvalues(&self) -> [C64; 2] {
        let half_tr = self.trace() * 0.5;
        let disc = (half_tr * half_tr - self.det()).sqrt();
        let (a, b) = (half_tr + disc, half_tr - disc);
        if a.norm() >= b.norm() {
            [a, b]
        } else {
            [b, a]
        }
    }

    /// Right eigenvector for `lambda`, normalised to unit Euclidean norm.
    pub fn eigenvector(&self, lambda: C64) -> [C64; 2] {
        let m = self.0;
        // (M − λ) v = 0: take the row with the larger entries for stability.
        let r0 = [m[0][0] - lambda, m[0][1]];
        let r1 = [m[1][0], m[1][1] - lambda];
        let n0 = r0[0].norm() + r0[1].norm();
        let n1 = r1[0].norm() + r1[1].norm();
        let v = if n0 == 0.0 && n1 == 0.0 {
            [ONE, ZERO]
        } else if n0 >= n1 {
            [r0[1], -r0[0]]
        } else {
            [r1[1], -r1[0]]
        };
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / norm, v[1] / norm]
    }

    pub fn mul_vec(&self, v: [C64; 2]) -> [C64; 2] {
        let m = self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Outer product `a b†`.
    pub fn outer(a: [C64; 2], b: [C64; 2]) -> Self {
        Mat2([[a[0] * b[0].conj(), a[0] * b[1].conj()], [a[1] * b[0].conj(), a[1] * b[1].conj()]])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "rows must form a square matrix");
            data.extend(row);
        }
        DenseMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| pairwise_sum_by(self.n, &|j| self.get(i, j))).collect()
    }

    /// `y = A x`; each row is reduced sequentially in a fixed order.
    pub fn mul_vec<E: Executor>(&self, x: &[f64], exec: &E) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        exec.map(self.n, |i| {
            let row = self.row(i);
            pairwise_sum_by(self.n, &|j| row[j] * x[j])
        })
    }
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. `a` is row-major `n × n`. Returns `None` if singular.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < f64::MIN_POSITIVE {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|j| a[row * n + j] * x[j]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn eigenpairs_of_a_bogoliubov_generator() {
        // −iσ³[[ξ, ε],[ε, ξ]] has eigenvalues ±sqrt(ε² − ξ²).
        let (xi, eps) = (0.5, 1.0);
        let m = (Mat2::SIGMA3 * Mat2::real(xi, eps, eps, xi)).scale(C64::new(0.0, -1.0));
        let [a, b] = m.eigenvalues();
        let expected = (eps * eps - xi * xi).sqrt();
        assert!((a.re.abs() - expected).abs() < 1e-12);
        assert!(close(a + b, ZERO));
        for lambda in [a, b] {
            let v = m.eigenvector(lambda);
            let mv = m.mul_vec(v);
            assert!(close(mv[0], lambda * v[0]) && close(mv[1], lambda * v[1]));
        }
    }

    #[test]
    fn inverse_round_trips() {
        let m = Mat2::new(C64::new(1.0, 2.0), C64::new(0.5, 0.0), C64::new(-0.3, 1.0), C64::new(2.0, -1.0));
        let id = m * m.inverse().unwrap();
        assert!((id - Mat2::IDENTITY).max_abs() < 1e-14);
        assert!(Mat2::ZERO.inverse().is_none());
    }

    #[test]
    fn dense_solve_with_pivoting() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = solve_dense(a, vec![5.0, 3.0, 4.0]).unwrap();
        for (xi, e) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((xi - e).abs() < 1e-12, "{x:?}");
        }
        assert!(solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).is_none());
    }
}

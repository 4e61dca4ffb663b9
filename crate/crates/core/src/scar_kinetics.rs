//! Quasiparticle decay and ladder kernel on the scar background, and the
//! growth rate of the squared commutator as the dominant eigenvalue of the
//! on-shell Bethe-Salpeter matrix.
//!
//! Rates are in units of `J²α⁴/N` unless a function takes `N` explicitly.
//! Three-momentum combinations such as `k − p − q` reduce to plain index
//! arithmetic modulo `L` on the grid `k_j = −π + 2πj/L`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::lattice::{delta_broadened, LatticeModel};
use crate::linalg::DenseMatrix;
use crate::sum::pairwise_sum;

#[derive(Debug, Clone, PartialEq)]
pub struct ScarParams {
    pub lattice: LatticeModel,
    pub coupling: f64,
    pub alpha_sq: f64,
}

impl ScarParams {
    pub fn new(lattice: LatticeModel, coupling: f64, alpha_sq: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidParameter { name: "J", reason: "must be positive" });
        }
        if !(alpha_sq > 0.0 && alpha_sq.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha_sq", reason: "must be positive" });
        }
        if !(lattice.gap() > 0.0) {
            return Err(Error::InvalidParameter { name: "mu", reason: "gap mu - 2t must be positive" });
        }
        Ok(ScarParams { lattice, coupling, alpha_sq })
    }

    /// Precession frequency scale `E`.
    pub fn gap_e(&self) -> f64 {
        self.lattice.gap()
    }

    /// `J²α⁴`, the factor separating physical rates from the rescaled ones.
    pub fn rate_scale(&self) -> f64 {
        self.coupling * self.coupling * self.alpha_sq * self.alpha_sq
    }
}

#[inline]
fn idx_sub(a: usize, b: usize, l: usize) -> usize {
    if a >= b {
        a - b
    } else {
        a + l - b
    }
}

#[inline]
fn idx_add(a: usize, b: usize, l: usize) -> usize {
    let s = a + b;
    if s >= l {
        s - l
    } else {
        s
    }
}

/// `π δ_η(x)`.
#[inline]
fn pi_delta(x: f64, eta: f64) -> f64 {
    eta / (x * x + eta * eta)
}

/// Broadened imaginary part of the three-particle bubble `S^R(ω, k, p, q)`.
pub fn im_sr(lattice: &LatticeModel, omega: f64, k: usize, p: usize, q: usize) -> f64 {
    let l = lattice.sites();
    let xi = lattice.xi();
    let eta = lattice.eta();
    let dec = idx_sub(idx_sub(k, p, l), q, l);
    let con = idx_sub(idx_add(k, p, l), q, l);
    let inc = idx_add(idx_add(k, p, l), q, l);
    -PI * (delta_broadened(omega - xi[p] - xi[q] - xi[dec], eta)
        + 2.0 * delta_broadened(omega + xi[p] - xi[q] - xi[con], eta)
        - delta_broadened(omega + xi[p] + xi[q] - xi[inc], eta))
}

/// `(1/L²) Σ_{p,q} Σ_s w_s · (−Im S^R(ω + s, k, p, q))` for shift/weight pairs `(s, w_s)`.
fn bubble_sum(lattice: &LatticeModel, k: usize, omega: f64, shifts: &[(f64, f64)]) -> f64 {
    let l = lattice.sites();
    let xi = lattice.xi();
    let eta = lattice.eta();
    let mut rows = vec![0.0; l];
    for (p, row) in rows.iter_mut().enumerate() {
        let xp = xi[p];
        let kmp = idx_sub(k, p, l);
        let kpp = idx_add(k, p, l);
        let mut acc = 0.0;
        for q in 0..l {
            let xq = xi[q];
            let a1 = omega - xp - xq - xi[idx_sub(kmp, q, l)];
            let a2 = omega + xp - xq - xi[idx_sub(kpp, q, l)];
            let a3 = omega + xp + xq - xi[idx_add(kpp, q, l)];
            for &(s, w) in shifts {
                acc += w * (pi_delta(a1 + s, eta) + 2.0 * pi_delta(a2 + s, eta) - pi_delta(a3 + s, eta));
            }
        }
        *row = acc;
    }
    pairwise_sum(&rows) / (l * l) as f64
}

/// `Im Σ̃_k`: on-shell decay rate with the quarter-weight side bands at `±2E`.
pub fn im_sigma_tilde(lattice: &LatticeModel, k: usize) -> f64 {
    let e2 = 2.0 * lattice.gap();
    bubble_sum(lattice, k, lattice.xi_at(k), &[(0.0, 1.0), (e2, 0.25), (-e2, 0.25)])
}

/// `Im Σ̃_k` for every grid momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfEnergyTable {
    pub im_sigma_tilde: Vec<f64>,
    pub eta: f64,
}

impl SelfEnergyTable {
    pub fn compute<E: Executor>(lattice: &LatticeModel, exec: &E) -> Self {
        let im_sigma_tilde = exec.map(lattice.sites(), |k| im_sigma_tilde(lattice, k));
        SelfEnergyTable { im_sigma_tilde, eta: lattice.eta() }
    }

    pub fn len(&self) -> usize {
        self.im_sigma_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.im_sigma_tilde.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.im_sigma_tilde.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.im_sigma_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Imaginary part of the Floquet harmonic `Σ_n(k, ω)`; zero for `|n| > 2`.
pub fn sigma_harmonics(lattice: &LatticeModel, k: usize, omega: f64, n: i32) -> f64 {
    let e2 = 2.0 * lattice.gap();
    let sign = if n < 0 { -1.0 } else { 1.0 };
    // −Im S^R is what bubble_sum accumulates, and Σ_n carries an overall minus.
    match n.abs() {
        0 => 8.0 * bubble_sum(lattice, k, omega, &[(0.0, 1.0), (e2, 0.25), (-e2, 0.25)]),
        1 => 4.0 * bubble_sum(lattice, k, omega, &[(0.0, 1.0), (sign * e2, 1.0)]),
        2 => 2.0 * bubble_sum(lattice, k, omega, &[(sign * e2, 1.0)]),
        _ => 0.0,
    }
}

/// `G^R(k, ω) = 1/(ω − ξ_k + iΓ_k)` with `Γ_k = 8J²α⁴/N · Im Σ̃_k`.
pub fn retarded_gf(params: &ScarParams, table: &SelfEnergyTable, n_flavours: f64, k: usize, omega: f64) -> Complex64 {
    let gamma = 8.0 * params.rate_scale() / n_flavours * table.im_sigma_tilde[k];
    Complex64::new(1.0, 0.0) / Complex64::new(omega - params.lattice.xi_at(k), gamma)
}

/// Bare Wightman function `2π δ_η(ω − ξ_k)`.
pub fn wightman_bare(lattice: &LatticeModel, k: usize, omega: f64) -> f64 {
    2.0 * PI * delta_broadened(omega - lattice.xi_at(k), lattice.eta())
}

/// On-shell rung `K̃_n(k, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RungKernel {
    pub n: i32,
    pub matrix: DenseMatrix,
}

/// Builds `K̃_n(k, q) = R_{−n}(k, ξ_k, q, ξ_q)/2`.
pub fn rung_kernel<E: Executor>(lattice: &LatticeModel, n: i32, exec: &E) -> RungKernel {
    let l = lattice.sites();
    let e2 = 2.0 * lattice.gap();
    // Frequency shifts and weights of Σ_p G^W, with the 1/(2L²) of R/2 folded in.
    let shifts: Vec<(f64, f64)> = match n {
        0 => vec![(0.0, 1.0), (e2, 0.25), (-e2, 0.25)],
        -1 => vec![(0.0, 0.5), (e2, 0.5)],
        1 => vec![(0.0, 0.5), (-e2, 0.5)],
        -2 => vec![(e2, 0.25)],
        2 => vec![(-e2, 0.25)],
        _ => Vec::new(),
    };
    if shifts.is_empty() {
        return RungKernel { n, matrix: DenseMatrix::zeros(l) };
    }
    let xi = lattice.xi();
    let eta = lattice.eta();
    let norm = 2.0 / (l * l) as f64;
    let rows = exec.map(l, |k| {
        let mut row = vec![0.0; l];
        for (q, out) in row.iter_mut().enumerate() {
            let base = xi[k] - xi[q];
            let mut m = idx_sub(k, q, l);
            let mut acc = 0.0;
            // m runs over k − p − q as p increases.
            for &xp in xi {
                let x = base - xp - xi[m];
                for &(s, w) in &shifts {
                    acc += w * pi_delta(x + s, eta);
                }
                m = if m == 0 { l - 1 } else { m - 1 };
            }
            *out = norm * acc;
        }
        row
    });
    RungKernel { n, matrix: DenseMatrix::from_rows(rows) }
}

/// `M = −8·diag(Im Σ̃) + K̃₀`.
pub fn bs_matrix(table: &SelfEnergyTable, kernel: &RungKernel) -> Result<DenseMatrix> {
    let l = kernel.matrix.dim();
    if table.len() != l {
        return Err(Error::DimensionMismatch { expected: l, found: table.len() });
    }
    let mut m = kernel.matrix.clone();
    for k in 0..l {
        m.set(k, k, m.get(k, k) - 8.0 * table.im_sigma_tilde[k]);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSSpectrum {
    pub lambda_tilde: f64,
    /// Unit 2-norm, oriented so its entries sum to a positive number.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { tol: 1e-10, max_iter: 100_000 }
    }
}

fn norm2(v: &[f64]) -> f64 {
    pairwise_sum(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt()
}

/// Dominant eigenpair of a matrix with nonnegative off-diagonal entries by
/// power iteration on `M + cI`, `c = max(0, −min_k M_kk)`. Stops once
/// `‖M f − λ f‖₂ < tol`.
pub fn dominant_eigenpair<E: Executor>(m: &DenseMatrix, opts: PowerOptions, exec: &E) -> Result<BSSpectrum> {
    let l = m.dim();
    let shift = (0..l).map(|k| -m.get(k, k)).fold(0.0, f64::max);
    let mut v = vec![1.0 / (l as f64).sqrt(); l];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mv = m.mul_vec(&v, exec);
        lambda = pairwise_sum(&v.iter().zip(&mv).map(|(a, b)| a * b).collect::<Vec<_>>());
        let r: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
        residual = norm2(&r);
        if residual < opts.tol {
            return Ok(BSSpectrum { lambda_tilde: lambda, eigenvector: orient(v), iterations: it, residual });
        }
        let mut next: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a + shift * b).collect();
        let n = norm2(&next);
        if !(n > 0.0 && n.is_finite()) {
            break;
        }
        next.iter_mut().for_each(|x| *x /= n);
        v = next;
    }
    let _ = lambda;
    Err(Error::NotConverged { what: "power iteration", iterations: opts.max_iter, last_delta: residual })
}

fn orient(mut v: Vec<f64>) -> Vec<f64> {
    if pairwise_sum(&v) < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Growth rates extracted from the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ScarLyapunov {
    /// Dominant eigenpair of the rung `K̃₀`.
    pub lambda: BSSpectrum,
    /// Dominant eigenpair of `M = −8·diag(Im Σ̃) + K̃₀`, when the table was supplied.
    pub with_decay: Option<BSSpectrum>,
}

/// Scar growth rate from the on-shell ladder. The reported `λ̃` is the
/// dominant eigenvalue of `K̃₀`; when a self-energy table is supplied the
/// spectrum of the decay-corrected matrix is returned alongside.
pub fn lyapunov_bs<E: Executor>(
    kernel: &RungKernel,
    table: Option<&SelfEnergyTable>,
    opts: PowerOptions,
    exec: &E,
) -> Result<ScarLyapunov> {
    let lambda = dominant_eigenpair(&kernel.matrix, opts, exec)?;
    let with_decay = match table {
        Some(t) => Some(dominant_eigenpair(&bs_matrix(t, kernel)?, opts, exec)?),
        None => None,
    };
    Ok(ScarLyapunov { lambda, with_decay })
}

//! Scar orbit under the pairing perturbation `ε`: closed-form bare
//! propagators, instability rates for `ε` above the gap, and the two-time
//! Dyson solve for the first-order self-energies below it.
//!
//! Propagators are 2×2 in Nambu space and depend on `t − t'` only.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::lattice::LatticeModel;
use crate::linalg::{Mat2, C64};
use crate::sum::pairwise_sum_by;

const I: C64 = C64::new(0.0, 1.0);

/// Assumption recorded alongside every OTOC output.
pub const OTOC_COMPONENT_NOTE: &str = "C_k = |G11|^2 + |G12|^2 (both [b,b^dag] and [b,b] commutators)";

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedParams {
    pub lattice: LatticeModel,
    pub epsilon: f64,
    /// `g = 8Jα²`.
    pub drive_strength: f64,
    pub dt: f64,
    pub t_max: f64,
    pub fp_tol: f64,
    pub fp_damping: f64,
    pub max_iter: usize,
}

impl PerturbedParams {
    /// Defaults: `dt = 0.01`, `t_max = 40`, tolerance `1e-10`, damping `0.5`.
    pub fn new(lattice: LatticeModel, epsilon: f64, drive_strength: f64) -> Result<Self> {
        PerturbedParams {
            lattice,
            epsilon,
            drive_strength,
            dt: 0.01,
            t_max: 40.0,
            fp_tol: 1e-10,
            fp_damping: 0.5,
            max_iter: 5000,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter { name: "epsilon", reason: "must be non-negative" });
        }
        if !(self.drive_strength >= 0.0 && self.drive_strength.is_finite()) {
            return Err(Error::InvalidParameter { name: "drive_strength", reason: "must be non-negative" });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: "must be positive" });
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter { name: "t_max", reason: "must be positive" });
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::InvalidParameter { name: "tol", reason: "must be positive" });
        }
        if !(self.fp_damping > 0.0 && self.fp_damping <= 1.0) {
            return Err(Error::InvalidParameter { name: "fp_damping", reason: "must lie in (0, 1]" });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter { name: "max_iter", reason: "must be positive" });
        }
        Ok(self)
    }

    /// Number of intervals on the time grid, `⌈t_max/dt⌉`.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|i| i as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovTable {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

/// `ω_q = sqrt(ξ_q² − ε²)` and `θ_q = arctanh((ξ_q − ω_q)/ε)`.
pub fn bogoliubov_table(lattice: &LatticeModel, epsilon: f64) -> Result<BogoliubovTable> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "must be non-negative" });
    }
    if epsilon >= lattice.min_xi() {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "must be below the band minimum" });
    }
    let xi = lattice.xi();
    let omega: Vec<f64> = xi.iter().map(|&x| (x * x - epsilon * epsilon).sqrt()).collect();
    // (ξ − ω)/ε rewritten as ε/(ξ + ω), which is exact at ε = 0.
    let theta = xi.iter().zip(&omega).map(|(&x, &w)| (epsilon / (x + w)).atanh()).collect();
    Ok(BogoliubovTable { theta, omega })
}

/// `i𝒢₀^R(k; t, 0)` for `ξ² > ε²`, written as the two Bogoliubov-rotated
/// oscillating pieces.
pub fn bare_gf_stable(xi: f64, epsilon: f64, t: f64) -> Result<Mat2> {
    let w2 = xi * xi - epsilon * epsilon;
    if !(w2 > 0.0) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "needs xi^2 > epsilon^2" });
    }
    let w = w2.sqrt();
    let fwd = C64::new(0.0, -w * t).exp() / (2.0 * w);
    let bwd = C64::new(0.0, w * t).exp() / (2.0 * w);
    let a = Mat2::real(w + xi, epsilon, epsilon, -w + xi).scale(fwd);
    let b = Mat2::real(-w + xi, epsilon, epsilon, w + xi).scale(bwd);
    Ok(a - b)
}

/// `i𝒢₀^R(k; t, 0)` for `ξ² < ε²`, growing like `e^{κt}`, `κ = sqrt(ε² − ξ²)`.
pub fn bare_gf_unstable(xi: f64, epsilon: f64, t: f64) -> Result<Mat2> {
    let k2 = epsilon * epsilon - xi * xi;
    if !(k2 > 0.0) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "needs epsilon^2 > xi^2" });
    }
    let k = k2.sqrt();
    let up = C64::new((k * t).exp(), 0.0) / (2.0 * I * k);
    let down = C64::new((-k * t).exp(), 0.0) / (2.0 * I * k);
    let a = Mat2::new(I * k + xi, epsilon.into(), epsilon.into(), -I * k + xi).scale(up);
    let b = Mat2::new(-I * k + xi, epsilon.into(), epsilon.into(), I * k + xi).scale(down);
    Ok(a - b)
}

/// `i𝒢₀^R(t) = [cos(ωt) − i sin(ωt)/ω · A] σ³` with `A = [[ξ, −ε], [ε, −ξ]]`.
/// Covers both branches and the exceptional point `ξ² = ε²`.
pub fn bare_gf(xi: f64, epsilon: f64, t: f64) -> Mat2 {
    let w2 = xi * xi - epsilon * epsilon;
    let (c, s) = if w2 > 0.0 {
        let w = w2.sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else if w2 < 0.0 {
        let k = (-w2).sqrt();
        ((k * t).cosh(), (k * t).sinh() / k)
    } else {
        (1.0, t)
    };
    let a = Mat2::real(xi, -epsilon, epsilon, -xi);
    (Mat2::IDENTITY.scale_re(c) - a.scale(I * s)) * Mat2::SIGMA3
}

/// `(k, sqrt(ε² − ξ_k²))` for every grid momentum with `ξ_k < ε`.
pub fn unstable_rates(lattice: &LatticeModel, epsilon: f64) -> Vec<(usize, f64)> {
    lattice
        .xi()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x < epsilon)
        .map(|(k, &x)| (k, (epsilon * epsilon - x * x).sqrt()))
        .collect()
}

pub fn max_unstable_rate(lattice: &LatticeModel, epsilon: f64) -> Option<f64> {
    unstable_rates(lattice, epsilon).into_iter().map(|(_, r)| r).reduce(f64::max)
}

/// `(Σ(τ), Σ'(τ))`, both independent of the external momentum.
pub fn self_energies(lattice: &LatticeModel, drive_strength: f64, table: &BogoliubovTable, tau: f64) -> (f64, f64) {
    let l = table.theta.len();
    let c = (lattice.gap() * tau).cos();
    let env = drive_strength / l as f64 * c * c;
    let term = |q: usize| {
        let s = (2.0 * table.theta[q]).sinh();
        let w = (table.omega[q] * tau).sin();
        (s, (2.0 * table.theta[q]).cosh(), w * w)
    };
    let diag = pairwise_sum_by(l, &|q| {
        let (s, ch, w) = term(q);
        s * (2.0 * s + ch) * w
    });
    let off = pairwise_sum_by(l, &|q| {
        let (s, _, w) = term(q);
        s * s * w
    });
    (env * diag, env * off)
}

/// `Σ(τ_i) + Σ'(τ_i) σ¹` on the time grid of `params`.
pub fn self_energy_grid<E: Executor>(params: &PerturbedParams, table: &BogoliubovTable, exec: &E) -> Vec<Mat2> {
    let n = params.steps() + 1;
    exec.map(n, |i| {
        let (s, sp) = self_energies(&params.lattice, params.drive_strength, table, i as f64 * params.dt);
        Mat2::real(s, sp, sp, s)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DysonSolution {
    /// `𝒢^R(k; t_i, 0)` on the time grid.
    pub g: Vec<Mat2>,
    pub iterations: usize,
    pub last_delta: f64,
}

fn bare_series(xi: f64, epsilon: f64, steps: usize, dt: f64) -> Vec<Mat2> {
    (0..=steps).map(|i| bare_gf(xi, epsilon, i as f64 * dt).scale(-I)).collect()
}

fn sup_delta(a: &[Mat2], b: &[Mat2]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((*x - *y).max_abs()))
}

/// Damped fixed-point iteration of
/// `𝒢(t) = 𝒢₀(t) + ∫₀ᵗ dτ 𝒢₀(t − τ) S(τ) 𝒢(τ)`, `S = Σ + Σ'σ¹`, with trapezoid
/// quadrature. The memory integral factorises as `𝒢₀(t − τ) = −i e^{−iAt} e^{iAτ} σ³`,
/// so each sweep is a cumulative sum.
///
/// Non-finite iterates abort at once. Otherwise, after a warm-up of the order
/// of the Picard transient, a change that doubles over 10 sweeps aborts.
pub fn dyson_solve(params: &PerturbedParams, k: usize, sigma: &[Mat2]) -> Result<DysonSolution> {
    let steps = params.steps();
    if sigma.len() != steps + 1 {
        return Err(Error::DimensionMismatch { expected: steps + 1, found: sigma.len() });
    }
    let (xi, eps, dt) = (params.lattice.xi_at(k), params.epsilon, params.dt);
    if !(xi * xi > eps * eps) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "must be below the band minimum" });
    }
    let g0 = bare_series(xi, eps, steps, dt);
    // e^{−iAt} = i𝒢₀(t) σ³ and e^{iAτ} is its value at −τ.
    let fwd: Vec<Mat2> = (0..=steps).map(|i| bare_gf(xi, eps, i as f64 * dt) * Mat2::SIGMA3).collect();
    let bwd: Vec<Mat2> = (0..=steps).map(|i| bare_gf(xi, eps, -(i as f64) * dt) * Mat2::SIGMA3).collect();
    let weights: Vec<Mat2> = bwd.iter().zip(sigma).map(|(b, s)| *b * Mat2::SIGMA3 * *s).collect();

    let gamma = params.fp_damping;
    let sup_g0 = g0.iter().fold(0.0, |m: f64, x| m.max(x.max_abs()));
    let sup_s = sigma.iter().fold(0.0, |m: f64, x| m.max(x.max_abs()));
    let warmup = (core::f64::consts::E * 2.0 * sup_g0 * 2.0 * sup_s * params.t_max / gamma).ceil() as usize + 10;

    let mut g = g0.clone();
    let mut next = g0.clone();
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=params.max_iter {
        let mut acc = Mat2::ZERO;
        let mut first = Mat2::ZERO;
        for i in 0..=steps {
            let h = weights[i] * g[i];
            if i == 0 {
                first = h;
            }
            acc = acc + h;
            let integral = if i == 0 { Mat2::ZERO } else { (acc - (first + h).scale_re(0.5)).scale_re(dt) };
            let image = g0[i] + (fwd[i] * integral).scale(-I);
            next[i] = g[i] + (image - g[i]).scale_re(gamma);
        }
        let delta = sup_delta(&next, &g);
        core::mem::swap(&mut g, &mut next);
        if !delta.is_finite() {
            return Err(Error::Unstable { what: "Dyson fixed point", iterations: it });
        }
        if delta < params.fp_tol {
            return Ok(DysonSolution { g, iterations: it, last_delta: delta });
        }
        history.push(delta);
        if it > warmup && history.len() > 10 && delta > 2.0 * history[history.len() - 11] {
            return Err(Error::Unstable { what: "Dyson fixed point", iterations: it });
        }
    }
    Err(Error::NotConverged {
        what: "Dyson fixed point",
        iterations: params.max_iter,
        last_delta: history.last().copied().unwrap_or(0.0),
    })
}

/// Direct trapezoid forward substitution of the same Volterra equation,
/// `O(n²)` per momentum; the implicit endpoint term is solved exactly.
pub fn dyson_forward_substitution(params: &PerturbedParams, k: usize, sigma: &[Mat2]) -> Result<Vec<Mat2>> {
    let steps = params.steps();
    if sigma.len() != steps + 1 {
        return Err(Error::DimensionMismatch { expected: steps + 1, found: sigma.len() });
    }
    let (xi, eps, dt) = (params.lattice.xi_at(k), params.epsilon, params.dt);
    let g0 = bare_series(xi, eps, steps, dt);
    let mut g: Vec<Mat2> = Vec::with_capacity(steps + 1);
    g.push(g0[0]);
    for i in 1..=steps {
        let mut rhs = g0[0].scale_re(0.0);
        for j in 0..i {
            let w = if j == 0 { 0.5 } else { 1.0 };
            rhs = rhs + (g0[i - j] * sigma[j] * g[j]).scale_re(w * dt);
        }
        let lhs = Mat2::IDENTITY - (g0[0] * sigma[i]).scale_re(0.5 * dt);
        let inv = lhs.inverse().ok_or(Error::Unstable { what: "forward substitution", iterations: i })?;
        g.push(inv * (g0[i] + rhs));
    }
    Ok(g)
}

/// `|𝒢₁₁|² + |𝒢₁₂|²`.
pub fn otoc_component(g: &Mat2) -> f64 {
    g.get(0, 0).norm_sqr() + g.get(0, 1).norm_sqr()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    /// `Σ_k C_k(t)`.
    pub c_tilde: Vec<f64>,
    /// `C_{k=0}(t)` when the grid contains `k = 0`.
    pub c_k0: Option<Vec<f64>>,
    pub iterations: Vec<usize>,
}

fn sum_channels(series: &[Vec<f64>], n_t: usize) -> Vec<f64> {
    (0..n_t).map(|i| pairwise_sum_by(series.len(), &|k| series[k][i])).collect()
}

/// Full OTOC below the gap: Dyson solve for every momentum.
pub fn otoc_perturbed<E: Executor>(params: &PerturbedParams, exec: &E) -> Result<OtocSeries> {
    let table = bogoliubov_table(&params.lattice, params.epsilon)?;
    let sigma = self_energy_grid(params, &table, exec);
    let solved: Vec<Result<(Vec<f64>, usize)>> = exec.map(params.lattice.sites(), |k| {
        let sol = dyson_solve(params, k, &sigma)?;
        Ok((sol.g.iter().map(otoc_component).collect(), sol.iterations))
    });
    let mut series = Vec::with_capacity(solved.len());
    let mut iterations = Vec::with_capacity(solved.len());
    for r in solved {
        let (c, it) = r?;
        series.push(c);
        iterations.push(it);
    }
    let times = params.times();
    let c_tilde = sum_channels(&series, times.len());
    let c_k0 = params.lattice.grid().zero_index().map(|k| series[k].clone());
    Ok(OtocSeries { times, c_tilde, c_k0, iterations })
}

/// Leading-order OTOC built from the bare propagator alone; valid on either
/// side of the gap and used for the `ε > E` contrast runs.
pub fn otoc_bare(lattice: &LatticeModel, epsilon: f64, times: &[f64]) -> OtocSeries {
    let series: Vec<Vec<f64>> = lattice
        .xi()
        .iter()
        .map(|&x| times.iter().map(|&t| otoc_component(&bare_gf(x, epsilon, t))).collect())
        .collect();
    let c_tilde = sum_channels(&series, times.len());
    let c_k0 = lattice.grid().zero_index().map(|k| series[k].clone());
    OtocSeries { times: times.to_vec(), c_tilde, c_k0, iterations: vec![0; lattice.sites()] }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubexpReport {
    pub window: f64,
    pub window_starts: Vec<f64>,
    /// Least-squares slope of `log C` in each window.
    pub slopes: Vec<f64>,
    /// Each slope is at most the previous one plus `NOISE_FLOOR`.
    pub non_increasing: bool,
    /// Final slope above `0.9 · 2 · max_rate`, when a rate was supplied.
    pub exponential_regime: Option<bool>,
}

pub const NOISE_FLOOR: f64 = 1e-3;

fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let den: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    num / den
}

/// Window-wise growth rates of `log C` over consecutive windows of length `window`.
pub fn subexp_diagnostic(times: &[f64], values: &[f64], window: f64, max_rate: Option<f64>) -> Result<SubexpReport> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    if !(window > 0.0) || times.len() < 2 {
        return Err(Error::InvalidParameter { name: "window", reason: "must be positive" });
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let count = (span / window + 1e-9).floor() as usize;
    if count < 2 {
        return Err(Error::InvalidParameter { name: "window", reason: "series must cover at least two windows" });
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter { name: "values", reason: "must be positive" });
    }
    let constant = values.iter().all(|&v| v == values[0]);
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mut starts = Vec::with_capacity(count);
    let mut slopes = Vec::with_capacity(count);
    for w in 0..count {
        let (a, b) = (t0 + w as f64 * window, t0 + (w + 1) as f64 * window);
        let slack = 1e-9 * window;
        let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= a - slack && times[i] <= b + slack).collect();
        starts.push(a);
        if constant || idx.len() < 2 {
            slopes.push(0.0);
            continue;
        }
        let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| logs[i]).collect();
        slopes.push(ls_slope(&t, &y));
    }
    let non_increasing = slopes.windows(2).all(|s| s[1] <= s[0] + NOISE_FLOOR);
    let exponential_regime = max_rate.map(|r| slopes[slopes.len() - 1] > 0.9 * 2.0 * r);
    Ok(SubexpReport { window, window_starts: starts, slopes, non_increasing, exponential_regime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn lattice(l: usize) -> LatticeModel {
        LatticeModel::with_default_eta(l, 1.0, 2.5).unwrap()
    }

    fn params(l: usize, eps: f64, g: f64, t_max: f64, dt: f64) -> PerturbedParams {
        PerturbedParams { dt, t_max, ..PerturbedParams::new(lattice(l), eps, g).unwrap() }
    }

    #[test]
    fn table_examples() {
        let lat = lattice(16);
        let t = bogoliubov_table(&lat, 0.0).unwrap();
        assert!(t.theta.iter().all(|&x| x == 0.0));
        assert_eq!(t.omega, lat.xi().to_vec());
        let t = bogoliubov_table(&lat, 0.3).unwrap();
        let k0 = lat.grid().zero_index().unwrap();
        assert!((t.omega[k0] - 0.4).abs() < 1e-15);
        assert!((t.theta[k0] - 0.346_573_590_279_972_6).abs() < 1e-12);
        // Direct form of the angle.
        for q in 0..16 {
            let x = lat.xi_at(q);
            let direct = ((x - t.omega[q]) / 0.3).atanh();
            assert!((t.theta[q] - direct).abs() < 1e-12);
        }
        assert!(bogoliubov_table(&lat, 0.5).is_err());
        assert!(bogoliubov_table(&lat, 0.6).is_err());
    }

    #[test]
    fn stable_form_matches_closed_form() {
        for &(xi, eps) in &[(0.5, 0.3), (2.0, 0.0), (4.5, 1.2), (1.0, 0.999)] {
            for &t in &[0.0, 0.3, 1.7, 25.0] {
                let a = bare_gf_stable(xi, eps, t).unwrap();
                let b = bare_gf(xi, eps, t);
                assert!((a - b).max_abs() < 1e-12 * a.max_abs().max(1.0), "{xi} {eps} {t}");
                let sympl = a.get(0, 0).norm_sqr() - a.get(0, 1).norm_sqr();
                assert!((sympl - 1.0).abs() < 1e-10);
            }
        }
        assert!((bare_gf_stable(0.5, 0.3, 0.0).unwrap() - Mat2::SIGMA3).max_abs() < 1e-15);
        assert!(bare_gf_stable(0.3, 0.3, 1.0).is_err());
    }

    #[test]
    fn unstable_form_matches_closed_form() {
        for &(xi, eps) in &[(0.5, 1.0), (0.0, 0.3), (2.0, 2.5)] {
            for &t in &[0.0, 0.5, 3.0, 12.0] {
                let a = bare_gf_unstable(xi, eps, t).unwrap();
                let b = bare_gf(xi, eps, t);
                assert!((a - b).max_abs() < 1e-11 * a.max_abs().max(1.0));
            }
        }
        assert!(bare_gf_unstable(0.5, 0.4, 1.0).is_err());
    }

    #[test]
    fn exceptional_point_is_continuous() {
        let a = bare_gf(0.5, 0.5, 3.0);
        let b = bare_gf(0.5, 0.5 - 1e-7, 3.0);
        let c = bare_gf(0.5, 0.5 + 1e-7, 3.0);
        assert!((a - b).max_abs() < 1e-5 && (a - c).max_abs() < 1e-5);
    }

    #[test]
    fn zero_epsilon_is_diagonal() {
        let ig = bare_gf_stable(1.3, 0.0, 2.0).unwrap();
        let expect = Mat2::new(C64::new(0.0, -2.6).exp(), 0.0.into(), 0.0.into(), -C64::new(0.0, 2.6).exp());
        assert!((ig - expect).max_abs() < 1e-14);
    }

    #[test]
    fn rates() {
        let lat = lattice(256);
        let r = max_unstable_rate(&lat, 1.0).unwrap();
        assert!((r - 0.75f64.sqrt()).abs() < 1e-12);
        assert!(unstable_rates(&lat, 0.4).is_empty());
        assert_eq!(unstable_rates(&lat, 4.5).len(), 255);
    }

    #[test]
    fn self_energy_examples() {
        let lat = lattice(256);
        let t0 = bogoliubov_table(&lat, 0.0).unwrap();
        assert_eq!(self_energies(&lat, 3.0, &t0, 1.3), (0.0, 0.0));
        let t = bogoliubov_table(&lat, 0.3).unwrap();
        let (s, sp) = self_energies(&lat, 3.0, &t, 0.0);
        assert_eq!((s, sp), (0.0, 0.0));
        let (s, sp) = self_energies(&lat, 3.0, &t, core::f64::consts::PI / (2.0 * lat.gap()));
        assert!(s.abs() < 1e-30 && sp.abs() < 1e-30);
        for tau in [0.5, 1.0, 7.3] {
            let (s, sp) = self_energies(&lat, 3.0, &t, tau);
            assert!(s >= sp && sp >= 0.0);
        }
    }

    #[test]
    fn undriven_solve_is_bare() {
        let p = params(16, 0.2, 0.0, 5.0, 0.01);
        let table = bogoliubov_table(&p.lattice, p.epsilon).unwrap();
        let sigma = self_energy_grid(&p, &table, &Sequential);
        let sol = dyson_solve(&p, 3, &sigma).unwrap();
        assert_eq!(sol.iterations, 1);
        for (i, g) in sol.g.iter().enumerate() {
            let ig = bare_gf_stable(p.lattice.xi_at(3), 0.2, i as f64 * p.dt).unwrap();
            assert!((*g - ig.scale(-I)).max_abs() < 1e-12);
        }
        assert_eq!(sol.g[0], Mat2::SIGMA3.scale(-I));
    }

    #[test]
    fn zero_epsilon_converges_immediately() {
        let p = params(16, 0.0, 3.0, 5.0, 0.01);
        let table = bogoliubov_table(&p.lattice, 0.0).unwrap();
        let sigma = self_energy_grid(&p, &table, &Sequential);
        let sol = dyson_solve(&p, 0, &sigma).unwrap();
        assert_eq!(sol.iterations, 1);
        let s = otoc_perturbed(&p, &Sequential).unwrap();
        assert!(s.c_tilde.iter().all(|c| (c - 16.0).abs() < 1e-10));
    }

    #[test]
    fn fixed_point_matches_forward_substitution() {
        let p = PerturbedParams { fp_tol: 1e-12, ..params(8, 0.3, 3.0, 4.0, 0.01) };
        let table = bogoliubov_table(&p.lattice, p.epsilon).unwrap();
        let sigma = self_energy_grid(&p, &table, &Sequential);
        for k in [0, 4, 7] {
            let fp = dyson_solve(&p, k, &sigma).unwrap();
            let fs = dyson_forward_substitution(&p, k, &sigma).unwrap();
            assert!(sup_delta(&fp.g, &fs) < 10.0 * p.fp_tol, "k={k}");
        }
    }

    #[test]
    fn epsilon_continuity() {
        let a = params(16, 0.0, 3.0, 10.0, 0.01);
        let b = PerturbedParams { epsilon: 1e-4, ..a.clone() };
        let ta = bogoliubov_table(&a.lattice, 0.0).unwrap();
        let tb = bogoliubov_table(&b.lattice, 1e-4).unwrap();
        let sa = self_energy_grid(&a, &ta, &Sequential);
        let sb = self_energy_grid(&b, &tb, &Sequential);
        for k in 0..16 {
            let ga = dyson_solve(&a, k, &sa).unwrap();
            let gb = dyson_solve(&b, k, &sb).unwrap();
            assert!(sup_delta(&ga.g, &gb.g) < 1e-3);
        }
    }

    #[test]
    fn dimension_checked() {
        let p = params(8, 0.3, 3.0, 1.0, 0.1);
        assert!(matches!(dyson_solve(&p, 0, &[Mat2::ZERO; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn diagnostic_examples() {
        let t: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|x| (0.5 * x).exp()).collect();
        let r = subexp_diagnostic(&t, &e, 10.0, None).unwrap();
        assert_eq!(r.slopes.len(), 4);
        assert!(r.slopes.iter().all(|s| (s - 0.5).abs() < 1e-10));
        assert!(r.non_increasing);
        let c = vec![3.0; t.len()];
        let r = subexp_diagnostic(&t, &c, 10.0, None).unwrap();
        assert!(r.slopes.iter().all(|&s| s == 0.0) && r.non_increasing);
        let r = subexp_diagnostic(&t, &e, 10.0, Some(0.25)).unwrap();
        assert_eq!(r.exponential_regime, Some(true));
        assert!(subexp_diagnostic(&t, &e, 30.0, None).is_err());
        let up: Vec<f64> = t.iter().map(|x| (0.01 * x * x).exp()).collect();
        assert!(!subexp_diagnostic(&t, &up, 10.0, None).unwrap().non_increasing);
    }

    #[test]
    fn bare_otoc_above_gap_grows_at_closed_form_rate() {
        let lat = lattice(64);
        let times: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let s = otoc_bare(&lat, 1.0, &times);
        let rate = max_unstable_rate(&lat, 1.0).unwrap();
        let r = subexp_diagnostic(&times, &s.c_tilde, 20.0, Some(rate)).unwrap();
        let last = r.slopes[r.slopes.len() - 1];
        assert!((last / 2.0 - rate).abs() < 0.02 * rate);
        assert_eq!(r.exponential_regime, Some(true));
    }
}

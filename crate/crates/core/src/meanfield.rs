//! Equilibrium large-N saddle point of the two-flavour boson model.
//!
//! The auxiliary fields `(Δ_a, Δ_b, v_a, v_b)` decouple the interaction into
//! two Bogoliubov problems with quasiparticle energies
//! `E_ka = sqrt(ξ(ξ − 2Δ_a))` and `E_kb = sqrt(ξ'(ξ' − 2Δ_b))`, `ξ' = ξ + J v_a v_b`.
//! Momentum integrals are grid averages `(1/L) Σ_k`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::linalg::solve_dense;
use crate::sum::grid_mean;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldParams {
    pub lattice: LatticeModel,
    pub coupling: f64,
    pub temperature: f64,
}

impl MeanFieldParams {
    /// `coupling ≥ 0` (zero gives the decoupled free gas) and `temperature > 0`.
    pub fn new(lattice: LatticeModel, coupling: f64, temperature: f64) -> Result<Self> {
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidParameter { name: "J", reason: "must be non-negative" });
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter { name: "temperature", reason: "must be positive" });
        }
        Ok(MeanFieldParams { lattice, coupling, temperature })
    }
}

/// A point `(Δ_a, Δ_b, v_a, v_b)` in auxiliary-field space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldFields {
    pub delta_a: f64,
    pub delta_b: f64,
    pub v_a: f64,
    pub v_b: f64,
}

impl MeanFieldFields {
    pub fn new(delta_a: f64, delta_b: f64, v_a: f64, v_b: f64) -> Self {
        MeanFieldFields { delta_a, delta_b, v_a, v_b }
    }

    fn to_array(self) -> [f64; 4] {
        [self.delta_a, self.delta_b, self.v_a, self.v_b]
    }

    fn from_array(a: [f64; 4]) -> Self {
        MeanFieldFields::new(a[0], a[1], a[2], a[3])
    }

    /// The exact `J = 0` fixed point `(0, 0, v_free, v_free)`.
    pub fn free(params: &MeanFieldParams) -> Self {
        let v = free_v(params);
        MeanFieldFields::new(0.0, 0.0, v, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldSolution {
    pub fields: MeanFieldFields,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial mixing factor γ of the damped fixed-point map.
    pub damping: f64,
    /// Consecutive non-improving sweeps before a Newton step is attempted.
    pub stall_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-12, max_iter: 20_000, damping: 0.3, stall_window: 25 }
    }
}

/// `coth(x/2)` written as `1 + 2/(e^x − 1)`; exactly 1 once `x > 50`.
pub fn coth_half(x: f64) -> f64 {
    if x > 50.0 {
        1.0
    } else {
        1.0 + 2.0 / x.exp_m1()
    }
}

fn free_v(params: &MeanFieldParams) -> f64 {
    let xi = params.lattice.xi();
    let t = params.temperature;
    grid_mean(xi.len(), &|k| coth_half(xi[k] / t))
}

/// `(E_ka, E_kb)` at grid index `k`.
pub fn quasiparticle_energies(fields: &MeanFieldFields, params: &MeanFieldParams, k: usize) -> Result<(f64, f64)> {
    let xi = params.lattice.xi_at(k);
    let shifted = xi + params.coupling * fields.v_a * fields.v_b;
    let ra = xi * (xi - 2.0 * fields.delta_a);
    let rb = shifted * (shifted - 2.0 * fields.delta_b);
    if !(ra > 0.0) {
        return Err(Error::Domain { k, value: ra });
    }
    if !(rb > 0.0) {
        return Err(Error::Domain { k, value: rb });
    }
    Ok((ra.sqrt(), rb.sqrt()))
}

struct Spectrum {
    e_a: Vec<f64>,
    e_b: Vec<f64>,
    shifted: Vec<f64>,
}

fn spectrum(fields: &MeanFieldFields, params: &MeanFieldParams) -> Result<Spectrum> {
    let n = params.lattice.sites();
    let mut s = Spectrum { e_a: vec![0.0; n], e_b: vec![0.0; n], shifted: vec![0.0; n] };
    for k in 0..n {
        let (ea, eb) = quasiparticle_energies(fields, params, k)?;
        s.e_a[k] = ea;
        s.e_b[k] = eb;
        s.shifted[k] = params.lattice.xi_at(k) + params.coupling * fields.v_a * fields.v_b;
    }
    Ok(s)
}

/// Right-hand sides of the four self-consistency equations.
fn update_map(fields: &MeanFieldFields, params: &MeanFieldParams) -> Result<[f64; 4]> {
    let s = spectrum(fields, params)?;
    let xi = params.lattice.xi();
    let (j, t) = (params.coupling, params.temperature);
    let n = xi.len();
    let pair = grid_mean(n, &|k| (s.shifted[k] - fields.delta_b) / s.e_b[k] * coth_half(s.e_b[k] / t));
    let v_a = grid_mean(n, &|k| xi[k] / s.e_a[k] * coth_half(s.e_a[k] / t));
    let v_b = grid_mean(n, &|k| s.shifted[k] / s.e_b[k] * coth_half(s.e_b[k] / t));
    Ok([-j * fields.v_b * pair, -j * fields.v_a * pair, v_a, v_b])
}

/// `lhs − rhs` of the four mean-field equations, in the order `(Δ_a, Δ_b, v_a, v_b)`.
pub fn mf_residual(fields: &MeanFieldFields, params: &MeanFieldParams) -> Result<[f64; 4]> {
    let rhs = update_map(fields, params)?;
    let lhs = fields.to_array();
    Ok([lhs[0] - rhs[0], lhs[1] - rhs[1], lhs[2] - rhs[2], lhs[3] - rhs[3]])
}

fn sup_norm(v: &[f64; 4]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Damped fixed-point iteration with a Newton fallback when progress stalls.
pub fn solve_mf(params: &MeanFieldParams, init: MeanFieldFields, opts: SolverOptions) -> Result<MeanFieldSolution> {
    let mut x = init;
    let mut res = mf_residual(&x, params)?;
    let mut norm = sup_norm(&res);
    let mut best = norm;
    let mut stalled = 0usize;
    for it in 0..opts.max_iter {
        if norm < opts.tol {
            return Ok(MeanFieldSolution { fields: x, residual_norm: norm, iterations: it });
        }
        if stalled >= opts.stall_window {
            stalled = 0;
            if let Some((nx, nres)) = newton_step(params, x, norm) {
                x = nx;
                res = nres;
                norm = sup_norm(&res);
                best = best.min(norm);
                continue;
            }
        }
        let current = x.to_array();
        let mut gamma = opts.damping;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = MeanFieldFields::from_array(core::array::from_fn(|i| current[i] - gamma * res[i]));
            if let Ok(r) = mf_residual(&trial, params) {
                accepted = Some((trial, r));
                break;
            }
            gamma *= 0.5;
        }
        let Some((nx, nres)) = accepted else {
            return Err(Error::NotConverged { what: "mean-field solver", iterations: it, last_delta: norm });
        };
        x = nx;
        res = nres;
        norm = sup_norm(&res);
        if norm < 0.999 * best {
            best = norm;
            stalled = 0;
        } else {
            stalled += 1;
        }
    }
    if norm < opts.tol {
        return Ok(MeanFieldSolution { fields: x, residual_norm: norm, iterations: opts.max_iter });
    }
    Err(Error::NotConverged { what: "mean-field solver", iterations: opts.max_iter, last_delta: norm })
}

/// One Newton step on `F(x) = x − rhs(x)` with a central-difference Jacobian
/// and backtracking; `None` if no feasible decrease was found.
pub fn newton_step(params: &MeanFieldParams, x: MeanFieldFields, norm: f64) -> Option<(MeanFieldFields, [f64; 4])> {
    let base = x.to_array();
    let f0 = mf_residual(&x, params).ok()?;
    let mut jac = vec![0.0; 16];
    for col in 0..4 {
        let h = 1e-7 * base[col].abs().max(1.0);
        let mut plus = base;
        let mut minus = base;
        plus[col] += h;
        minus[col] -= h;
        let fp = mf_residual(&MeanFieldFields::from_array(plus), params).ok()?;
        let fm = mf_residual(&MeanFieldFields::from_array(minus), params).ok()?;
        for row in 0..4 {
            jac[row * 4 + col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    let step = solve_dense(jac, f0.iter().map(|v| -v).collect())?;
    let mut scale = 1.0;
    for _ in 0..40 {
        let trial = MeanFieldFields::from_array(core::array::from_fn(|i| base[i] + scale * step[i]));
        if let Ok(r) = mf_residual(&trial, params) {
            if sup_norm(&r) < norm {
                return Some((trial, r));
            }
        }
        scale *= 0.5;
    }
    None
}

/// Runs the solver from each start and keeps the distinct converged solutions
/// (two solutions are merged when every field agrees within `10·tol`).
pub fn solve_mf_multistart(
    params: &MeanFieldParams,
    inits: &[MeanFieldFields],
    opts: SolverOptions,
) -> Vec<MeanFieldSolution> {
    let mut found: Vec<MeanFieldSolution> = Vec::new();
    for init in inits {
        let Ok(sol) = solve_mf(params, *init, opts) else { continue };
        let a = sol.fields.to_array();
        let duplicate = found.iter().any(|f| {
            let b = f.fields.to_array();
            (0..4).all(|i| (a[i] - b[i]).abs() <= 10.0 * opts.tol)
        });
        if !duplicate {
            found.push(sol);
        }
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoReport {
    pub free_energy_density: f64,
    pub energy_density: f64,
    /// `(1/L) Σ_k ⟨b†_k b_k⟩` from the Bogoliubov rotation (normal ordered).
    pub rho_b_occupation: f64,
    /// `−Δ_a/(2 J v_b)`; `None` when `J v_b` vanishes (the free-gas limit).
    pub rho_b_relation: Option<f64>,
    /// `−Δ_b/(2 J v_a)`, the second form of the same relation.
    pub rho_b_relation_alt: Option<f64>,
}

impl ThermoReport {
    /// `ρ_occ − ρ_rel`. The saddle-point relation counts the symmetrised
    /// density `⟨b†b⟩ + 1/2`, so this is `−1/2` up to round-off.
    pub fn density_mismatch(&self) -> Option<f64> {
        self.rho_b_relation.map(|rel| self.rho_b_occupation - rel)
    }
}

/// Free energy, energy, and the two estimates of the b-boson density.
pub fn thermo_report(fields: &MeanFieldFields, params: &MeanFieldParams) -> Result<ThermoReport> {
    let s = spectrum(fields, params)?;
    let xi = params.lattice.xi();
    let (j, t) = (params.coupling, params.temperature);
    let n = xi.len();
    // log(e^{x} − e^{−x}) = x + log(1 − e^{−2x})
    let log_2sinh = |e: f64| {
        let x = e / (2.0 * t);
        x + (-(-2.0 * x).exp()).ln_1p()
    };
    let free = t * grid_mean(n, &|k| log_2sinh(s.e_a[k]) + log_2sinh(s.e_b[k]))
        + 0.5 * (fields.delta_a * fields.v_a + fields.delta_b * fields.v_b);
    let energy = grid_mean(n, &|k| xi[k] * (xi[k] - fields.delta_a) / (2.0 * s.e_a[k]) * coth_half(s.e_a[k] / t))
        + grid_mean(n, &|k| {
            s.shifted[k] * (s.shifted[k] - fields.delta_b) / (2.0 * s.e_b[k]) * coth_half(s.e_b[k] / t) - xi[k]
        })
        - 0.5 * j * fields.v_a * fields.v_b;
    let occupation =
        grid_mean(n, &|k| (s.shifted[k] - fields.delta_b) / (2.0 * s.e_b[k]) * coth_half(s.e_b[k] / t) - 0.5);
    let guard = 1e-14;
    let relation = (j * fields.v_b).abs().gt(&guard).then(|| -fields.delta_a / (2.0 * j * fields.v_b));
    let relation_alt = (j * fields.v_a).abs().gt(&guard).then(|| -fields.delta_b / (2.0 * j * fields.v_a));
    Ok(ThermoReport {
        free_energy_density: free,
        energy_density: energy,
        rho_b_occupation: occupation,
        rho_b_relation: relation,
        rho_b_relation_alt: relation_alt,
    })
}

/// Zero-temperature condensates `((1/N)Σa², (1/N)Σb²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsbSolution {
    pub a_sq: f64,
    pub b_sq: f64,
    /// Set when `E = 0`, where the symmetric and broken branches meet.
    pub degenerate: bool,
}

pub fn ssb_solution(gap_e: f64, coupling: f64) -> Result<SsbSolution> {
    if !(coupling > 0.0) {
        return Err(Error::InvalidParameter { name: "J", reason: "must be positive" });
    }
    if gap_e >= 0.0 {
        return Ok(SsbSolution { a_sq: 0.0, b_sq: 0.0, degenerate: gap_e == 0.0 });
    }
    let root = (-gap_e / coupling).sqrt();
    Ok(SsbSolution { a_sq: root / 8.0, b_sq: root / 4.0, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(j: f64, t: f64) -> MeanFieldParams {
        MeanFieldParams::new(LatticeModel::with_default_eta(256, 1.0, 2.5).unwrap(), j, t).unwrap()
    }

    #[test]
    fn coth_half_matches_definition() {
        for x in [0.01f64, 0.5, 3.0, 20.0] {
            let direct = 1.0 / (x / 2.0).tanh();
            assert!((coth_half(x) - direct).abs() < 1e-12 * direct);
        }
        assert_eq!(coth_half(51.0), 1.0);
    }

    #[test]
    fn free_energies_without_pairing() {
        let p = params(1.0, 1.0);
        let f = MeanFieldFields::new(0.0, 0.0, 0.7, 0.9);
        for k in [0, 17, 128] {
            let (ea, eb) = quasiparticle_energies(&f, &p, k).unwrap();
            let xi = p.lattice.xi_at(k);
            assert!((ea - xi).abs() < 1e-14);
            assert!((eb - (xi + 0.63)).abs() < 1e-14);
        }
        let g = MeanFieldFields::new(0.0, 0.0, 0.0, 0.0);
        let (ea, eb) = quasiparticle_energies(&g, &p, 3).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn domain_error_on_negative_radicand() {
        let p = params(1.0, 1.0);
        // ξ_min = 0.5, so Δ_a = 0.3 makes ξ − 2Δ_a negative at k = 0.
        let f = MeanFieldFields::new(0.3, 0.0, 1.0, 1.0);
        assert!(matches!(quasiparticle_energies(&f, &p, 128), Err(Error::Domain { k: 128, .. })));
        assert!(mf_residual(&f, &p).is_err());
    }

    #[test]
    fn residual_vanishes_at_free_point() {
        let p = params(0.0, 1.0);
        let r = mf_residual(&MeanFieldFields::free(&p), &p).unwrap();
        assert!(sup_norm(&r) < 1e-15, "{r:?}");
    }

    #[test]
    fn residual_at_origin_with_coupling() {
        let p = params(1.0, 1.0);
        let r = mf_residual(&MeanFieldFields::new(0.0, 0.0, 0.0, 0.0), &p).unwrap();
        let v = free_v(&p);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 0.0);
        assert!((r[2] + v).abs() < 1e-14 && (r[3] + v).abs() < 1e-14);
    }

    #[test]
    fn decoupled_solver_returns_closed_form() {
        let p = params(0.0, 0.8);
        let sol = solve_mf(&p, MeanFieldFields::new(-0.1, -0.2, 2.0, 3.0), SolverOptions::default()).unwrap();
        let v = free_v(&p);
        assert!(sol.fields.delta_a.abs() < 1e-12 && sol.fields.delta_b.abs() < 1e-12);
        assert!((sol.fields.v_a - v).abs() < 1e-11 && (sol.fields.v_b - v).abs() < 1e-11);
    }

    #[test]
    fn coupled_solution_has_negative_delta_a() {
        let p = params(1.0, 1.0);
        let sol = solve_mf(&p, MeanFieldFields::free(&p), SolverOptions::default()).unwrap();
        assert!(sol.residual_norm < 1e-10);
        assert!(sol.fields.delta_a < 0.0 && sol.fields.delta_b < 0.0);
        for k in 0..p.lattice.sites() {
            let (ea, eb) = quasiparticle_energies(&sol.fields, &p, k).unwrap();
            assert!(ea > 0.0 && eb > 0.0);
        }
    }

    #[test]
    fn newton_step_reduces_residual() {
        let p = params(1.0, 1.0);
        let loose = SolverOptions { tol: 1e-3, ..SolverOptions::default() };
        let x = solve_mf(&p, MeanFieldFields::free(&p), loose).unwrap().fields;
        let n0 = sup_norm(&mf_residual(&x, &p).unwrap());
        let (mut y, r) = newton_step(&p, x, n0).unwrap();
        let mut ny = sup_norm(&r);
        assert!(ny < n0);
        // Near the root a few Newton steps finish the job.
        for _ in 0..8 {
            if ny < 1e-13 {
                break;
            }
            let (a, b) = newton_step(&p, y, ny).unwrap();
            y = a;
            ny = sup_norm(&b);
        }
        assert!(ny < 1e-12, "newton residual {ny}");
        let fp = solve_mf(&p, MeanFieldFields::free(&p), SolverOptions::default()).unwrap();
        assert!((y.delta_a - fp.fields.delta_a).abs() < 1e-10);
    }

    #[test]
    fn free_gas_occupation() {
        let p = params(0.0, 1.0);
        let rep = thermo_report(&MeanFieldFields::free(&p), &p).unwrap();
        let xi = p.lattice.xi();
        let bose = grid_mean(xi.len(), &|k| 1.0 / xi[k].exp_m1());
        assert!((rep.rho_b_occupation - bose).abs() < 1e-12);
        assert!(rep.rho_b_relation.is_none());
    }

    #[test]
    fn ssb_examples() {
        assert_eq!(ssb_solution(0.5, 1.0).unwrap(), SsbSolution { a_sq: 0.0, b_sq: 0.0, degenerate: false });
        let s = ssb_solution(-1.0, 1.0).unwrap();
        assert_eq!((s.a_sq, s.b_sq), (0.125, 0.25));
        let s = ssb_solution(-4.0, 1.0).unwrap();
        assert_eq!((s.a_sq, s.b_sq), (0.25, 0.5));
        assert!(ssb_solution(0.0, 1.0).unwrap().degenerate);
        assert!(ssb_solution(-1.0, 0.0).is_err());
    }
}

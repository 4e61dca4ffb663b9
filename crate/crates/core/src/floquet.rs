//! Periodically driven quadratic bosonic problems: fundamental matrix of
//! `i dΦ/dt = σ³ M(t) Φ`, Floquet exponents, and leading-order OTOC envelopes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::lattice::LatticeModel;
use crate::linalg::{Mat2, C64};
use crate::sum::pairwise_sum_by;

/// Pseudo-unitarity gate on `‖Φ†σ³Φ − σ³‖_∞`.
pub const DEFECT_GATE: f64 = 1e-9;
/// Multipliers closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
pub const MIN_STEPS_PER_PERIOD: usize = 64;

/// Family of Hermitian 2×2 generators `M_k(t)`, periodic in `t`.
pub trait PeriodicDrive: Sync {
    fn period(&self) -> f64;
    /// Number of independent channels `k`.
    fn channels(&self) -> usize;
    fn matrix(&self, k: usize, t: f64) -> Mat2;
}

/// `M_k(t) = [[ξ_k + 𝒥, 𝒥], [𝒥, ξ_k + 𝒥]]` with `𝒥(t) = 4Jβ² cos²(Et)`, period `π/E`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDrive {
    pub lattice: LatticeModel,
    pub coupling: f64,
    pub beta_sq: f64,
}

impl LatticeDrive {
    pub fn new(lattice: LatticeModel, coupling: f64, beta_sq: f64) -> Result<Self> {
        if !(lattice.gap() > 0.0) {
            return Err(Error::InvalidParameter { name: "mu", reason: "gap mu - 2t must be positive" });
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidParameter { name: "J", reason: "must be non-negative" });
        }
        if !(beta_sq >= 0.0 && beta_sq.is_finite()) {
            return Err(Error::InvalidParameter { name: "beta_sq", reason: "must be non-negative" });
        }
        Ok(LatticeDrive { lattice, coupling, beta_sq })
    }

    pub fn pump(&self, t: f64) -> f64 {
        let c = (self.lattice.gap() * t).cos();
        4.0 * self.coupling * self.beta_sq * c * c
    }
}

impl PeriodicDrive for LatticeDrive {
    fn period(&self) -> f64 {
        core::f64::consts::PI / self.lattice.gap()
    }

    fn channels(&self) -> usize {
        self.lattice.sites()
    }

    fn matrix(&self, k: usize, t: f64) -> Mat2 {
        let j = self.pump(t);
        let d = self.lattice.xi_at(k) + j;
        Mat2::real(d, j, j, d)
    }
}

/// One generator sampled uniformly over a period (`t_i = i·T/n`) and
/// linearly interpolated, wrapping at the period. A single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDrive {
    period: f64,
    samples: Vec<Mat2>,
}

impl TabulatedDrive {
    pub fn new(period: f64, samples: Vec<Mat2>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter { name: "period", reason: "must be positive" });
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter { name: "samples", reason: "need at least one sample" });
        }
        for m in &samples {
            if (*m - m.adjoint()).max_abs() > 1e-12 * m.max_abs().max(1.0) {
                return Err(Error::InvalidParameter { name: "samples", reason: "matrix is not Hermitian" });
            }
        }
        Ok(TabulatedDrive { period, samples })
    }

    pub fn samples(&self) -> &[Mat2] {
        &self.samples
    }
}

impl PeriodicDrive for TabulatedDrive {
    fn period(&self) -> f64 {
        self.period
    }

    fn channels(&self) -> usize {
        1
    }

    fn matrix(&self, _k: usize, t: f64) -> Mat2 {
        let n = self.samples.len();
        let r = t / self.period;
        let x = (r - r.floor()) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let w = x - i as f64;
        let a = self.samples[i];
        let b = self.samples[(i + 1) % n];
        a.scale_re(1.0 - w) + b.scale_re(w)
    }
}

fn generator(m: Mat2, phi: Mat2) -> Mat2 {
    // −i σ³ M Φ
    (Mat2::SIGMA3 * m * phi).scale(C64::new(0.0, -1.0))
}

fn rk4_step<D: PeriodicDrive + ?Sized>(drive: &D, k: usize, t: f64, h: f64, phi: Mat2) -> Mat2 {
    let mid = drive.matrix(k, t + 0.5 * h);
    let k1 = generator(drive.matrix(k, t), phi);
    let k2 = generator(mid, phi + k1.scale_re(0.5 * h));
    let k3 = generator(mid, phi + k2.scale_re(0.5 * h));
    let k4 = generator(drive.matrix(k, t + h), phi + k3.scale_re(h));
    phi + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0)
}

/// Fixed-step RK4 from `Φ(0) = I`; returns `Φ` after every `record_every`
/// steps, starting with the identity. Step size is `period/steps_per_period`.
pub fn evolve<D: PeriodicDrive + ?Sized>(
    drive: &D,
    k: usize,
    steps_per_period: usize,
    total_steps: usize,
    record_every: usize,
) -> Vec<Mat2> {
    let h = drive.period() / steps_per_period as f64;
    let mut out = Vec::with_capacity(total_steps / record_every.max(1) + 1);
    let mut phi = Mat2::IDENTITY;
    out.push(phi);
    for n in 0..total_steps {
        // Times are taken modulo the period so long runs stay bit-periodic.
        let t = (n % steps_per_period) as f64 * h;
        phi = rk4_step(drive, k, t, h, phi);
        if (n + 1) % record_every.max(1) == 0 {
            out.push(phi);
        }
    }
    out
}

pub fn pseudo_unitarity_defect(phi: &Mat2) -> f64 {
    (phi.adjoint() * Mat2::SIGMA3 * *phi - Mat2::SIGMA3).max_abs()
}

/// Floquet modes `u_α(0)` together with the dual rows of `[u₁ u₂]⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetModes {
    pub vectors: [[C64; 2]; 2],
    pub duals: [[C64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyResult {
    pub fundamental: Mat2,
    pub period: f64,
    pub multipliers: [C64; 2],
    /// `log(μ_α)/T` with the principal logarithm.
    pub exponents: [C64; 2],
    /// `None` when the multipliers are degenerate.
    pub modes: Option<FloquetModes>,
    pub pseudo_unitarity_defect: f64,
    pub degenerate: bool,
}

impl MonodromyResult {
    pub fn max_re_exponent(&self) -> f64 {
        self.exponents[0].re.max(self.exponents[1].re)
    }

    /// `Φ(t) = Σ_α e^{λ_α t} u_α(t) w_α` for `t = s + nT`, with the periodic
    /// part `u_α(s) = e^{−λ_α s} Φ(s) u_α(0)` built from `phi_s = Φ(s)`.
    pub fn reconstruct(&self, phi_s: Mat2, s: f64, n: u32) -> Option<Mat2> {
        let modes = self.modes?;
        let t = s + n as f64 * self.period;
        let mut out = Mat2::ZERO;
        for a in 0..2 {
            let lam = self.exponents[a];
            let u_s = phi_s.mul_vec(modes.vectors[a]);
            let periodic = [u_s[0] * (-lam * s).exp(), u_s[1] * (-lam * s).exp()];
            let growth = (lam * t).exp();
            let w = modes.duals[a];
            let term = Mat2::new(periodic[0] * w[0], periodic[0] * w[1], periodic[1] * w[0], periodic[1] * w[1]);
            out = out + term.scale(growth);
        }
        Some(out)
    }
}

fn monodromy_from(fundamental: Mat2, period: f64) -> Result<MonodromyResult> {
    let defect = pseudo_unitarity_defect(&fundamental);
    if !(defect <= DEFECT_GATE) {
        return Err(Error::IntegratorDefect { defect, gate: DEFECT_GATE });
    }
    let multipliers = fundamental.eigenvalues();
    let exponents = [multipliers[0].ln() / period, multipliers[1].ln() / period];
    let degenerate = (multipliers[0] - multipliers[1]).norm() < DEGENERACY_TOL;
    let modes = if degenerate {
        None
    } else {
        let u1 = fundamental.eigenvector(multipliers[0]);
        let u2 = fundamental.eigenvector(multipliers[1]);
        Mat2::new(u1[0], u2[0], u1[1], u2[1]).inverse().map(|inv| FloquetModes {
            vectors: [u1, u2],
            duals: [[inv.get(0, 0), inv.get(0, 1)], [inv.get(1, 0), inv.get(1, 1)]],
        })
    };
    Ok(MonodromyResult {
        fundamental,
        period,
        multipliers,
        exponents,
        modes,
        pseudo_unitarity_defect: defect,
        degenerate,
    })
}

/// One-period monodromy `Φ_k(T)` and its Floquet data.
pub fn integrate_monodromy<D: PeriodicDrive + ?Sized>(
    drive: &D,
    k: usize,
    steps_per_period: usize,
) -> Result<MonodromyResult> {
    if steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(Error::InvalidParameter { name: "steps_per_period", reason: "must be at least 64" });
    }
    let phi = *evolve(drive, k, steps_per_period, steps_per_period, steps_per_period).last().unwrap_or(&Mat2::IDENTITY);
    monodromy_from(phi, drive.period())
}

/// Monodromy data for every channel of the drive.
pub fn lyapunov_scan<D: PeriodicDrive + ?Sized, E: Executor>(
    drive: &D,
    steps_per_period: usize,
    exec: &E,
) -> Result<Vec<MonodromyResult>> {
    exec.map(drive.channels(), |k| integrate_monodromy(drive, k, steps_per_period)).into_iter().collect()
}

/// `max_α Re λ_{kα}` per channel.
pub fn max_exponents(scan: &[MonodromyResult]) -> Vec<f64> {
    scan.iter().map(MonodromyResult::max_re_exponent).collect()
}

/// Retarded Bogoliubov propagator `𝒢^R(t, 0) = −i Φ(t) σ³`.
pub fn retarded_from_fundamental(phi: &Mat2) -> Mat2 {
    (*phi * Mat2::SIGMA3).scale(C64::new(0.0, -1.0))
}

/// Single-particle leading-order OTOC `ℏ² |Φ₁₁(t)|²`.
pub fn single_particle_otoc(phi: &Mat2, hbar: f64) -> f64 {
    hbar * hbar * phi.get(0, 0).norm_sqr()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtocEnvelope {
    pub times: Vec<f64>,
    /// `|Φ_k(t)₁₁|²` per channel, when requested.
    pub per_k: Option<Vec<Vec<f64>>>,
    /// `(1/L) Σ_k |Φ_k(t)₁₁|²`.
    pub aggregate: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    pub steps_per_period: usize,
    /// Output samples per period; must divide `steps_per_period`.
    pub samples_per_period: usize,
    pub t_max: f64,
    pub keep_per_k: bool,
}

/// Leading-order OTOC on `t_i = i·T/samples_per_period`, `t_i ≤ t_max`. One
/// period is integrated per channel; later times use `Φ(nT + s) = Φ(s) Φ(T)ⁿ`.
pub fn otoc_envelope<D: PeriodicDrive + ?Sized, E: Executor>(
    drive: &D,
    opts: EnvelopeOptions,
    exec: &E,
) -> Result<OtocEnvelope> {
    let (steps, m) = (opts.steps_per_period, opts.samples_per_period);
    if steps < MIN_STEPS_PER_PERIOD {
        return Err(Error::InvalidParameter { name: "steps_per_period", reason: "must be at least 64" });
    }
    if m == 0 || steps % m != 0 {
        return Err(Error::InvalidParameter { name: "dt", reason: "must divide the period commensurately" });
    }
    if !(opts.t_max >= 0.0 && opts.t_max.is_finite()) {
        return Err(Error::InvalidParameter { name: "t_max", reason: "must be non-negative" });
    }
    let period = drive.period();
    let dt = period / m as f64;
    let n_t = (opts.t_max / dt + 1e-9).floor() as usize + 1;
    let series: Vec<Result<Vec<f64>>> = exec.map(drive.channels(), |k| {
        let within = evolve(drive, k, steps, steps, steps / m);
        let mono = within[m];
        let defect = pseudo_unitarity_defect(&mono);
        if !(defect <= DEFECT_GATE) {
            return Err(Error::IntegratorDefect { defect, gate: DEFECT_GATE });
        }
        let mut out = vec![0.0; n_t];
        let mut power = Mat2::IDENTITY;
        for (i, slot) in out.iter_mut().enumerate() {
            let (n, j) = (i / m, i % m);
            if j == 0 && n > 0 {
                power = power * mono;
            }
            *slot = (within[j] * power).get(0, 0).norm_sqr();
        }
        Ok(out)
    });
    let series: Vec<Vec<f64>> = series.into_iter().collect::<Result<_>>()?;
    let channels = series.len();
    let aggregate = (0..n_t).map(|i| pairwise_sum_by(channels, &|k| series[k][i]) / channels as f64).collect();
    Ok(OtocEnvelope {
        times: (0..n_t).map(|i| i as f64 * dt).collect(),
        per_k: opts.keep_per_k.then_some(series),
        aggregate,
    })
}

/// Slope of `log C` between the last sample and the sample one period earlier.
pub fn last_period_log_slope(env: &OtocEnvelope, samples_per_period: usize) -> Option<f64> {
    let n = env.aggregate.len();
    if n <= samples_per_period {
        return None;
    }
    let (a, b) = (env.aggregate[n - 1 - samples_per_period], env.aggregate[n - 1]);
    let dt = env.times[n - 1] - env.times[n - 1 - samples_per_period];
    Some((b.ln() - a.ln()) / dt)
}

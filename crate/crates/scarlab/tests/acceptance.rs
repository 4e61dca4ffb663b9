//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on FAIL.

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use scarlab::exec::RayonExecutor;
use scarlab::{parse_config, run, Experiment};
use scarlab_core::floquet::{self, LatticeDrive};
use scarlab_core::linalg::C64;
use scarlab_core::meanfield::{self, MeanFieldFields, MeanFieldParams, SolverOptions};
use scarlab_core::perturbed_scar::{self, PerturbedParams};
use scarlab_core::scar_kinetics::{self, PowerOptions, SelfEnergyTable};
use scarlab_core::LatticeModel;

struct Suite {
    failed: usize,
    exec: RayonExecutor,
}

impl Suite {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn lattice(l: usize) -> LatticeModel {
    LatticeModel::with_default_eta(l, 1.0, 2.5).unwrap()
}

fn lambda_tilde(s: &Suite, l: usize) -> f64 {
    let kernel = scar_kinetics::rung_kernel(&lattice(l), 0, &s.exec);
    scar_kinetics::lyapunov_bs(&kernel, None, PowerOptions::default(), &s.exec).unwrap().lambda.lambda_tilde
}

fn criterion_1(s: &mut Suite) {
    let lam = lambda_tilde(s, 1024);
    let rel = (lam / 0.06567 - 1.0).abs();
    s.check(
        "1 bs-lyapunov L=1024",
        rel < 0.02,
        format!("lambda_tilde = {lam:.6}, target 0.06567, rel err {rel:.2e} (tol 2e-2)"),
    );
    let (a, b) = (lambda_tilde(s, 256), lambda_tilde(s, 512));
    let rel = (a / b - 1.0).abs();
    s.check("1 bs-lyapunov L=256 vs L=512", rel < 0.05, format!("{a:.6} vs {b:.6}, rel diff {rel:.3} (tol 0.05)"));
}

fn criterion_2(s: &mut Suite) {
    for l in [256, 1024] {
        let t0 = Instant::now();
        let table = SelfEnergyTable::compute(&lattice(l), &s.exec);
        let secs = t0.elapsed().as_secs_f64();
        s.check(
            &format!("2 self-energy positivity L={l}"),
            table.min() > 0.0,
            format!("min Im Sigma = {:.6}, max {:.6}, {secs:.1} s", table.min(), table.max()),
        );
    }
}

fn criterion_3(s: &mut Suite) {
    let opts = SolverOptions::default();
    let (mut res, mut rho, mut mismatch) = (0.0f64, f64::INFINITY, 0.0f64);
    for t in [0.5, 1.0, 2.0, 5.0] {
        let p = MeanFieldParams::new(lattice(256), 1.0, t).unwrap();
        let sol = meanfield::solve_mf(&p, MeanFieldFields::free(&p), opts).unwrap();
        let rep = meanfield::thermo_report(&sol.fields, &p).unwrap();
        res = res.max(sol.residual_norm);
        rho = rho.min(rep.rho_b_occupation);
        mismatch = mismatch.max(rep.density_mismatch().unwrap().abs());
    }
    s.check("3 mean-field residual", res < 1e-10, format!("max residual {res:.2e} (tol 1e-10)"));
    s.check("3 mean-field rho_b > 0", rho > 0.0, format!("min rho_b = {rho:.6}"));
    s.check(
        "3 mean-field density relation",
        mismatch < 1e-8,
        format!("max |rho_occ - rho_rel| = {mismatch:.3e} (tol 1e-8)"),
    );

    // Free Bose gas, written out independently of the solver.
    let mut gap = 0.0f64;
    for t in [0.5, 1.0, 2.0, 5.0] {
        let model = lattice(256);
        let p = MeanFieldParams::new(model.clone(), 0.0, t).unwrap();
        let sol = meanfield::solve_mf(&p, MeanFieldFields::new(-0.2, -0.1, 1.0, 1.0), opts).unwrap();
        let rep = meanfield::thermo_report(&sol.fields, &p).unwrap();
        let xi = model.xi();
        let l = xi.len() as f64;
        let v: f64 = xi.iter().map(|x| 1.0 / (x / (2.0 * t)).tanh()).sum::<f64>() / l;
        let n: f64 = xi.iter().map(|x| 1.0 / ((x / t).exp() - 1.0)).sum::<f64>() / l;
        let f: f64 = xi.iter().map(|x| 2.0 * t * (2.0 * (x / (2.0 * t)).sinh()).ln()).sum::<f64>() / l;
        let f_ = sol.fields;
        for d in [f_.delta_a, f_.delta_b, f_.v_a - v, f_.v_b - v, rep.rho_b_occupation - n, rep.free_energy_density - f]
        {
            gap = gap.max(d.abs());
        }
    }
    s.check("3 mean-field J=0 free gas", gap < 1e-8, format!("max deviation {gap:.2e} (tol 1e-8)"));
}

fn criterion_4(s: &mut Suite) {
    let sol = meanfield::ssb_solution(-1.0, 1.0).unwrap();
    s.check(
        "4 ssb closed form",
        (sol.a_sq, sol.b_sq) == (0.125, 0.25),
        format!("(a^2, b^2) = ({}, {})", sol.a_sq, sol.b_sq),
    );
}

fn criterion_5(s: &mut Suite) {
    let mut worst_defect = 0.0f64;
    for beta_sq in [0.0, 1.0, 2.0, 3.0] {
        let drive = LatticeDrive::new(lattice(1024), 0.1, beta_sq).unwrap();
        let scan = floquet::lyapunov_scan(&drive, 4096, &s.exec).unwrap();
        let lam = floquet::max_exponents(&scan);
        let max = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_abs = lam.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst_defect = scan.iter().fold(worst_defect, |m, r| m.max(r.pseudo_unitarity_defect));
        if beta_sq == 0.0 {
            s.check(
                "5 floquet beta^2=0 stable",
                max_abs < 1e-10,
                format!("max |Re lambda| = {max_abs:.2e} (tol 1e-10)"),
            );
        } else {
            s.check(&format!("5 floquet beta^2={beta_sq} unstable"), max > 0.0, format!("max Re lambda = {max:.6}"));
        }
    }
    s.check("5 floquet pseudo-unitarity", worst_defect < 1e-9, format!("max defect {worst_defect:.2e} (tol 1e-9)"));
}

fn perturbed(eps: f64) -> PerturbedParams {
    PerturbedParams::new(lattice(256), eps, 3.0).unwrap()
}

fn criterion_6(s: &mut Suite) {
    let t0 = Instant::now();
    let series = perturbed_scar::otoc_perturbed(&perturbed(0.3), &s.exec).unwrap();
    let c = &series.c_tilde;
    let secs = t0.elapsed().as_secs_f64();
    let grows = c[c.len() - 1] > c[0];
    s.check("6 perturbed OTOC grows", grows, format!("c(0) = {:.6}, c(40) = {:.6}, {secs:.1} s", c[0], c[c.len() - 1]));
    let diag = perturbed_scar::subexp_diagnostic(&series.times, c, 20.0, None).unwrap();
    s.check(
        "6 perturbed OTOC window slopes non-increasing",
        diag.non_increasing,
        format!("slopes over 20-wide windows {:?} (noise floor {:e})", diag.slopes, perturbed_scar::NOISE_FLOOR),
    );

    let flat = perturbed_scar::otoc_perturbed(&perturbed(0.0), &s.exec).unwrap();
    let drift = flat.c_tilde.iter().fold(0.0f64, |m, v| m.max((v - flat.c_tilde[0]).abs()));
    s.check("6 epsilon=0 OTOC constant", drift < 1e-10, format!("max drift {drift:.2e} (tol 1e-10)"));

    let times: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
    let model = lattice(256);
    let bare = perturbed_scar::otoc_bare(&model, 1.0, &times);
    let diag = perturbed_scar::subexp_diagnostic(&times, &bare.c_tilde, 20.0, None).unwrap();
    let rate = diag.slopes[diag.slopes.len() - 1] / 2.0;
    let expected = model.xi().iter().map(|x| (1.0 - x * x).max(0.0).sqrt()).fold(0.0, f64::max);
    let rel = (rate / expected - 1.0).abs();
    s.check(
        "6 epsilon=1 growth rate",
        rel < 0.02,
        format!("rate {rate:.6} vs {expected:.6}, rel err {rel:.2e} (tol 2e-2)"),
    );
}

fn im_sr_oracle(model: &LatticeModel, omega: f64, k: usize, p: usize, q: usize) -> f64 {
    let ks = model.grid().momenta();
    let at = |m: f64| {
        let j = ((m + PI) / (2.0 * PI) * model.sites() as f64).round() as i64;
        model.xi_at(j.rem_euclid(model.sites() as i64) as usize)
    };
    let im = |x: f64| (C64::new(1.0, 0.0) / C64::new(x, model.eta())).im;
    let (kk, pp, qq) = (ks[k], ks[p], ks[q]);
    im(omega - at(pp) - at(qq) - at(kk - pp - qq)) + 2.0 * im(omega + at(pp) - at(qq) - at(kk + pp - qq))
        - im(omega + at(pp) + at(qq) - at(kk + pp + qq))
}

fn criterion_7(s: &mut Suite) {
    let model = lattice(8);
    let kernel = scar_kinetics::rung_kernel(&model, 0, &s.exec);
    let dense = DMatrix::from_fn(8, 8, |i, j| kernel.matrix.get(i, j));
    let eig = dense.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let opts = PowerOptions { tol: 1e-13, max_iter: 1_000_000 };
    let pow = scar_kinetics::lyapunov_bs(&kernel, None, opts, &s.exec).unwrap().lambda.lambda_tilde;
    s.check(
        "7 dense eigen vs power iteration L=8",
        (eig - pow).abs() < 1e-10,
        format!("|diff| = {:.2e} (tol 1e-10)", (eig - pow).abs()),
    );

    let mut params = perturbed(0.3);
    params.lattice = lattice(16);
    params.t_max = 10.0;
    let table = perturbed_scar::bogoliubov_table(&params.lattice, params.epsilon).unwrap();
    let sigma = perturbed_scar::self_energy_grid(&params, &table, &s.exec);
    let mut gap = 0.0f64;
    for k in 0..16 {
        let fp = perturbed_scar::dyson_solve(&params, k, &sigma).unwrap();
        let fs = perturbed_scar::dyson_forward_substitution(&params, k, &sigma).unwrap();
        gap = fp.g.iter().zip(&fs).fold(gap, |m, (a, b)| m.max((*a - *b).max_abs()));
    }
    let tol = 10.0 * params.fp_tol;
    s.check("7 Dyson fixed point vs Volterra oracle", gap < tol, format!("sup diff {gap:.2e} (tol {tol:.0e})"));

    let model = lattice(12);
    let table = SelfEnergyTable::compute(&model, &s.exec);
    let e2 = 2.0 * model.gap();
    let mut gap = 0.0f64;
    for k in 0..12 {
        let w = model.xi_at(k);
        let mut acc = 0.0;
        for p in 0..12 {
            for q in 0..12 {
                acc += im_sr_oracle(&model, w, k, p, q)
                    + 0.25 * (im_sr_oracle(&model, w + e2, k, p, q) + im_sr_oracle(&model, w - e2, k, p, q));
            }
        }
        gap = gap.max((table.im_sigma_tilde[k] + acc / 144.0).abs());
    }
    s.check("7 self-energy duplicate-loop oracle", gap < 1e-12, format!("max diff {gap:.2e} (tol 1e-12)"));
}

fn criterion_8(s: &mut Suite) {
    let tmp = tempfile::tempdir().unwrap();
    for e in Experiment::ALL {
        let defaults = scarlab::RunConfig::defaults(e);
        // The 1024-site defaults only change the cost, not the code path.
        let size = if defaults.sites > 256 { "L = 256\n" } else { "" };
        let extra = if e == Experiment::Ssb { "" } else { size };
        let mut outputs = Vec::new();
        for workers in [1, 8] {
            let dir = tmp.path().join(format!("{e}-{workers}"));
            let text = format!("experiment = {e}\nworkers = {workers}\noutput_dir = {}\n{extra}", dir.display());
            let cfg = parse_config(&text, Some(e)).unwrap();
            let report = run(&cfg).unwrap();
            let mut csv: Vec<(String, Vec<u8>)> =
                report.outcome.tables.iter().map(|(f, _)| (f.clone(), fs::read(dir.join(f)).unwrap())).collect();
            csv.sort();
            outputs.push(csv);
        }
        let same = outputs[0] == outputs[1];
        s.check(&format!("8 determinism {e}"), same, format!("{} CSV file(s), workers 1 vs 8", outputs[0].len()));
    }
}

fn main() -> ExitCode {
    // Worker count comes from the usual override, default 8.
    let workers = scarlab::exec::resolve_workers(8);
    let mut s = Suite { failed: 0, exec: RayonExecutor::new(workers).unwrap() };
    let start = Instant::now();
    criterion_1(&mut s);
    criterion_2(&mut s);
    criterion_3(&mut s);
    criterion_4(&mut s);
    criterion_5(&mut s);
    criterion_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    println!("acceptance: {} failing check(s), {:.1} s", s.failed, start.elapsed().as_secs_f64());
    if s.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

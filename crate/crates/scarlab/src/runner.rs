//! Experiment orchestration: compute, tabulate, and write outputs atomically.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use scarlab_core::floquet::{self, EnvelopeOptions, LatticeDrive, PeriodicDrive, TabulatedDrive};
use scarlab_core::linalg::{Mat2, C64};
use scarlab_core::meanfield::{self, MeanFieldFields, MeanFieldParams, SolverOptions};
use scarlab_core::perturbed_scar::{self, PerturbedParams};
use scarlab_core::scar_kinetics::{self, PowerOptions, SelfEnergyTable};
use scarlab_core::{Executor, LatticeModel};

use crate::config::{ConfigError, Experiment, RunConfig};
use crate::exec::{resolve_workers, RayonExecutor};
use crate::format::{g17, Table};
use crate::svg;

pub const METADATA_FILE: &str = "metadata.txt";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(#[from] scarlab_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

impl RunError {
    /// 2 for solver failures, 1 for everything the user has to fix first.
    pub fn exit_code(&self) -> u8 {
        use scarlab_core::Error as E;
        match self {
            RunError::Numerical(
                E::NotConverged { .. } | E::Unstable { .. } | E::IntegratorDefect { .. } | E::Domain { .. },
            ) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Everything an experiment produces before anything touches the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    /// Derived quantities, written as comment lines of the metadata file.
    pub derived: Vec<(String, String)>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { tables: Vec::new(), derived: Vec::new() }
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.derived.push((key.to_string(), value.to_string()));
    }

    fn put_num(&mut self, key: &str, value: f64) {
        self.put(key, g17(value));
    }

    pub fn derived(&self, key: &str) -> Option<&str> {
        self.derived.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|(f, _)| f == file).map(|(_, t)| t)
    }
}

/// Runs the experiment named in `cfg` without writing anything.
pub fn execute<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Outcome, RunError> {
    match cfg.experiment {
        Experiment::Meanfield => run_meanfield(cfg),
        Experiment::Selfenergy => run_selfenergy(cfg, exec),
        Experiment::BsLyapunov => run_bs(cfg, exec),
        Experiment::FloquetScan => run_floquet_scan(cfg, exec),
        Experiment::OtocEnvelope => run_envelope(cfg, exec),
        Experiment::PerturbedOtoc => run_perturbed(cfg, exec),
        Experiment::Ssb => run_ssb(cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
    pub workers: usize,
    pub wall_time: f64,
}

/// Executes `cfg` on a worker pool and writes CSVs, optional SVGs and the
/// metadata file. Files are staged under `.tmp` names and renamed at the end.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let workers = resolve_workers(cfg.workers);
    let exec = RayonExecutor::new(workers).map_err(|e| RunError::Input(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let outcome = execute(cfg, &exec)?;
    let wall_time = start.elapsed().as_secs_f64();

    let mut staged: Vec<(String, String)> = Vec::new();
    for (file, table) in &outcome.tables {
        staged.push((file.clone(), table.to_csv()));
        if cfg.emit_svg {
            let stem = file.trim_end_matches(".csv");
            let plot = svg::render(table, 1, stem).map_err(RunError::Input)?;
            staged.push((format!("{stem}.svg"), plot));
        }
    }
    staged.push((METADATA_FILE.to_string(), metadata(cfg, &outcome, workers, wall_time)));

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut temps = Vec::new();
    for (file, content) in &staged {
        let tmp = dir.join(format!("{file}.tmp"));
        if let Err(e) = fs::write(&tmp, content) {
            for t in &temps {
                let _ = fs::remove_file(t);
            }
            return Err(RunError::Io { path: tmp, source: e });
        }
        temps.push(tmp);
    }
    let mut files = Vec::new();
    for ((file, _), tmp) in staged.iter().zip(&temps) {
        let dest = dir.join(file);
        fs::rename(tmp, &dest).map_err(io_err(&dest))?;
        files.push(dest);
    }
    Ok(RunReport { outcome, files, workers, wall_time })
}

/// Resolved config plus provenance; derived values are comments so the
/// file can be fed straight back as a config.
pub fn metadata(cfg: &RunConfig, outcome: &Outcome, workers: usize, wall_time: f64) -> String {
    let mut s = format!("# scarlab {} {}\n", env!("CARGO_PKG_VERSION"), cfg.experiment);
    s.push_str(&format!("# wall_time_s = {wall_time:.3}\n"));
    s.push_str(&format!("# workers_used = {workers}\n"));
    for (k, v) in &outcome.derived {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&cfg.to_config_text());
    s
}

fn run_meanfield(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let lattice = cfg.lattice()?;
    let opts =
        SolverOptions { tol: cfg.tol, max_iter: cfg.max_iter, damping: cfg.fp_damping, ..SolverOptions::default() };
    let mut table = Table::new(&[
        "T",
        "delta_a",
        "delta_b",
        "v_a",
        "v_b",
        "free_energy",
        "energy",
        "rho_b_occ",
        "rho_b_rel",
        "residual",
    ]);
    let mut out = Outcome::new();
    let (mut rho_min, mut res_max, mut mismatch, mut corrected, mut symmetry) =
        (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut distinct = Vec::new();
    for &t in &cfg.temperatures {
        let params = MeanFieldParams::new(lattice.clone(), cfg.coupling, t)?;
        let free = MeanFieldFields::free(&params);
        let sol = meanfield::solve_mf(&params, free, opts)?;
        let rep = meanfield::thermo_report(&sol.fields, &params)?;
        let f = sol.fields;
        let alt = MeanFieldFields::new(-0.5, -0.5, 1.5 * free.v_a, 1.5 * free.v_b);
        distinct.push(meanfield::solve_mf_multistart(&params, &[free, alt], opts).len().to_string());
        let rel = rep.rho_b_relation.unwrap_or(f64::NAN);
        table.push(vec![
            t,
            f.delta_a,
            f.delta_b,
            f.v_a,
            f.v_b,
            rep.free_energy_density,
            rep.energy_density,
            rep.rho_b_occupation,
            rel,
            sol.residual_norm,
        ]);
        rho_min = rho_min.min(rep.rho_b_occupation);
        res_max = res_max.max(sol.residual_norm);
        if let Some(rel) = rep.rho_b_relation {
            mismatch = mismatch.max((rep.rho_b_occupation - rel).abs());
            corrected = corrected.max((rep.rho_b_occupation + 0.5 - rel).abs());
            if let Some(alt) = rep.rho_b_relation_alt {
                symmetry = symmetry.max((rel - alt).abs());
            }
        }
    }
    out.put_num("rho_b_occ_min", rho_min);
    out.put("rho_b_all_positive", rho_min > 0.0);
    out.put_num("residual_max", res_max);
    out.put_num("density_mismatch_max", mismatch);
    out.put_num("density_mismatch_zero_point_corrected_max", corrected);
    out.put_num("density_relation_symmetry_max", symmetry);
    out.put("distinct_solutions_per_T", distinct.join(", "));
    out.tables.push(("meanfield.csv".into(), table));
    Ok(out)
}

fn selfenergy_table<E: Executor>(lattice: &LatticeModel, exec: &E) -> (SelfEnergyTable, Table) {
    let se = SelfEnergyTable::compute(lattice, exec);
    let mut table = Table::new(&["k", "im_sigma_tilde"]);
    for (j, v) in se.im_sigma_tilde.iter().enumerate() {
        table.push(vec![lattice.grid().momentum(j), *v]);
    }
    (se, table)
}

fn run_selfenergy<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Outcome, RunError> {
    let lattice = cfg.lattice()?;
    let (se, table) = selfenergy_table(&lattice, exec);
    let mut out = Outcome::new();
    out.put_num("im_sigma_tilde_min", se.min());
    out.put_num("im_sigma_tilde_max", se.max());
    out.put("all_positive", se.min() > 0.0);
    out.tables.push(("selfenergy.csv".into(), table));
    Ok(out)
}

fn run_bs<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Outcome, RunError> {
    let lattice = cfg.lattice()?;
    let kernel = scar_kinetics::rung_kernel(&lattice, 0, exec);
    let se = SelfEnergyTable::compute(&lattice, exec);
    let opts = PowerOptions { tol: cfg.tol, max_iter: cfg.max_iter };
    let ladder = scar_kinetics::lyapunov_bs(&kernel, Some(&se), opts, exec)?;
    let mut out = Outcome::new();
    out.put_num("lambda_tilde", ladder.lambda.lambda_tilde);
    out.put("iterations", ladder.lambda.iterations);
    out.put_num("residual", ladder.lambda.residual);
    if let Some(d) = &ladder.with_decay {
        out.put_num("lambda_tilde_with_decay", d.lambda_tilde);
        out.put("iterations_with_decay", d.iterations);
    }
    let sums = kernel.matrix.row_sums();
    out.put_num("kernel_row_sum_min", sums.iter().copied().fold(f64::INFINITY, f64::min));
    out.put_num("kernel_row_sum_max", sums.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    out.put_num("im_sigma_tilde_min", se.min());
    if let Some(n) = cfg.n_flavours {
        let scale = cfg.coupling * cfg.coupling * cfg.alpha_sq * cfg.alpha_sq / n;
        out.put_num("lambda_physical", ladder.lambda.lambda_tilde * scale);
    }
    out.put("units", "J^2 alpha^4 / N");
    let mut table = Table::new(&["k", "f_k"]);
    for (j, f) in ladder.lambda.eigenvector.iter().enumerate() {
        table.push(vec![lattice.grid().momentum(j), *f]);
    }
    out.tables.push(("bs_mode.csv".into(), table));
    Ok(out)
}

/// Tabulated single-channel drive: period line, sample-count line, then one
/// row per sample holding the four entries (real) or four re/im pairs.
pub fn parse_drive_file(text: &str) -> Result<TabulatedDrive, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, period) = lines.next().ok_or("drive file: missing period line")?;
    let period: f64 = period.parse().map_err(|_| format!("drive file line {ln}: bad period `{period}`"))?;
    let (ln, count) = lines.next().ok_or("drive file: missing sample-count line")?;
    let count: usize = count.parse().map_err(|_| format!("drive file line {ln}: bad sample count `{count}`"))?;
    let mut samples = Vec::with_capacity(count);
    for (ln, line) in lines {
        let nums: Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let nums = nums.map_err(|_| format!("drive file line {ln}: not a list of numbers"))?;
        let m = match nums.len() {
            4 => Mat2::real(nums[0], nums[1], nums[2], nums[3]),
            8 => Mat2::new(
                C64::new(nums[0], nums[1]),
                C64::new(nums[2], nums[3]),
                C64::new(nums[4], nums[5]),
                C64::new(nums[6], nums[7]),
            ),
            n => return Err(format!("drive file line {ln}: expected 4 or 8 numbers, found {n}")),
        };
        samples.push(m);
    }
    if samples.len() != count {
        return Err(format!("drive file: header announces {count} samples, found {}", samples.len()));
    }
    TabulatedDrive::new(period, samples).map_err(|e| format!("drive file: {e}"))
}

enum Drive {
    Lattice(LatticeDrive),
    Table(TabulatedDrive),
}

impl Drive {
    fn from_config(cfg: &RunConfig) -> Result<Self, RunError> {
        match &cfg.drive_file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                Ok(Drive::Table(parse_drive_file(&text).map_err(RunError::Input)?))
            }
            None => Ok(Drive::Lattice(LatticeDrive::new(cfg.lattice()?, cfg.coupling, cfg.beta_sq)?)),
        }
    }

    fn as_dyn(&self) -> &dyn PeriodicDrive {
        match self {
            Drive::Lattice(d) => d,
            Drive::Table(d) => d,
        }
    }

    /// Label for channel `j`: the momentum for the lattice drive.
    fn label(&self, j: usize) -> f64 {
        match self {
            Drive::Lattice(d) => d.lattice.grid().momentum(j),
            Drive::Table(_) => j as f64,
        }
    }
}

fn run_floquet_scan<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Outcome, RunError> {
    let drive = Drive::from_config(cfg)?;
    let scan = floquet::lyapunov_scan(drive.as_dyn(), cfg.steps_per_period, exec)?;
    let mut table = Table::new(&["k", "re_lambda_max", "im_lambda_1", "defect"]);
    for (j, r) in scan.iter().enumerate() {
        table.push(vec![drive.label(j), r.max_re_exponent(), r.exponents[0].im, r.pseudo_unitarity_defect]);
    }
    let lam = floquet::max_exponents(&scan);
    let (arg, max) =
        lam.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    let n = lam.len();
    let peaks =
        (0..n).filter(|&j| lam[j] > 1e-6 && lam[j] >= lam[(j + n - 1) % n] && lam[j] > lam[(j + 1) % n]).count();
    let mut out = Outcome::new();
    out.put_num("max_re_lambda", max);
    out.put_num("argmax_k", drive.label(arg));
    out.put_num("max_abs_re_lambda", lam.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    out.put("unstable", max > 1e-10);
    out.put("peak_count", peaks);
    out.put_num("max_defect", scan.iter().fold(0.0f64, |m, r| m.max(r.pseudo_unitarity_defect)));
    out.put("degenerate_channels", scan.iter().filter(|r| r.degenerate).count());
    out.put_num("period", drive.as_dyn().period());
    out.tables.push(("floquet_scan.csv".into(), table));
    Ok(out)
}

fn run_envelope<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Outcome, RunError> {
    let drive = Drive::from_config(cfg)?;
    let d = drive.as_dyn();
    let m = (d.period() / cfg.dt).round().max(1.0) as usize;
    if cfg.drive_file.is_some()
        && (!cfg.steps_per_period.is_multiple_of(m) || (m as f64 * cfg.dt - d.period()).abs() > 1e-9 * d.period())
    {
        return Err(RunError::Input("dt must be period / m with m dividing steps_per_period".into()));
    }
    let opts = EnvelopeOptions {
        steps_per_period: cfg.steps_per_period,
        samples_per_period: m,
        t_max: cfg.t_max,
        keep_per_k: false,
    };
    let env = floquet::otoc_envelope(d, opts, exec)?;
    let scan = floquet::lyapunov_scan(d, cfg.steps_per_period, exec)?;
    let max = floquet::max_exponents(&scan).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let prefactor = if cfg.drive_file.is_some() { cfg.hbar * cfg.hbar } else { 1.0 };
    let mut table = Table::new(&["t", "C_aggregate"]);
    for (t, c) in env.times.iter().zip(&env.aggregate) {
        table.push(vec![*t, prefactor * c]);
    }
    let mut out = Outcome::new();
    out.put_num("max_re_lambda", max);
    if let Some(slope) = floquet::last_period_log_slope(&env, m) {
        out.put_num("last_period_log_slope", slope);
        if max > 0.0 {
            out.put_num("slope_over_two_lambda", slope / (2.0 * max));
        }
    }
    out.put("samples_per_period", m);
    out.tables.push(("otoc_envelope.csv".into(), table));
    Ok(out)
}

/// `PerturbedParams` for a perturbed-otoc config (`g = 8Jα²`).
pub fn perturbed_params(cfg: &RunConfig) -> Result<PerturbedParams, RunError> {
    Ok(PerturbedParams {
        lattice: cfg.lattice()?,
        epsilon: cfg.epsilon,
        drive_strength: 8.0 * cfg.coupling * cfg.alpha_sq,
        dt: cfg.dt,
        t_max: cfg.t_max,
        fp_tol: cfg.tol,
        fp_damping: cfg.fp_damping,
        max_iter: cfg.max_iter,
    }
    .validated()?)
}

fn run_perturbed<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Outcome, RunError> {
    let params = perturbed_params(cfg)?;
    let series = perturbed_scar::otoc_perturbed(&params, exec)?;
    let mut out = Outcome::new();
    out.put_num("g", params.drive_strength);
    let its = &series.iterations;
    out.put("iterations_max", its.iter().max().copied().unwrap_or(0));
    out.put_num("iterations_mean", its.iter().sum::<usize>() as f64 / its.len().max(1) as f64);
    let first = series.c_tilde[0];
    let last = series.c_tilde[series.c_tilde.len() - 1];
    out.put("grows", last > first);
    let diag = perturbed_scar::subexp_diagnostic(&series.times, &series.c_tilde, cfg.window, None)?;
    out.put("window_slopes", diag.slopes.iter().map(|s| g17(*s)).collect::<Vec<_>>().join(", "));
    out.put("non_increasing", diag.non_increasing);
    let mut k0 = Table::new(&["t", "C_k0"]);
    if let Some(c) = &series.c_k0 {
        let d0 = perturbed_scar::subexp_diagnostic(&series.times, c, cfg.window, None)?;
        out.put("k0_window_slopes", d0.slopes.iter().map(|s| g17(*s)).collect::<Vec<_>>().join(", "));
        out.put("k0_grows", c[c.len() - 1] > c[0]);
        for (t, v) in series.times.iter().zip(c) {
            k0.push(vec![*t, *v]);
        }
    }
    out.put("otoc_component", perturbed_scar::OTOC_COMPONENT_NOTE);
    out.put("c_tilde_normalisation", "sum over k without 1/L");
    let mut table = Table::new(&["t", "c_tilde"]);
    for (t, c) in series.times.iter().zip(&series.c_tilde) {
        table.push(vec![*t, *c]);
    }
    out.tables.push(("otoc_perturbed.csv".into(), table));
    out.tables.push(("otoc_k0.csv".into(), k0));
    Ok(out)
}

fn run_ssb(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let gap = cfg.gap();
    let s = meanfield::ssb_solution(gap, cfg.coupling)?;
    let mut table = Table::new(&["gap_e", "J", "a_sq", "b_sq", "degenerate"]);
    table.push(vec![gap, cfg.coupling, s.a_sq, s.b_sq, if s.degenerate { 1.0 } else { 0.0 }]);
    let mut out = Outcome::new();
    out.put("symmetry_broken", s.a_sq > 0.0);
    out.tables.push(("ssb.csv".into(), table));
    Ok(out)
}

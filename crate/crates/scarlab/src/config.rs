//! `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, sweeps are comma lists. Every
//! experiment accepts a fixed key set; anything else is reported together
//! with the line it came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use scarlab_core::lattice::default_eta;
use scarlab_core::LatticeModel;

use crate::format::g17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Experiment {
    Meanfield,
    Selfenergy,
    BsLyapunov,
    FloquetScan,
    OtocEnvelope,
    PerturbedOtoc,
    Ssb,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Meanfield,
        Experiment::Selfenergy,
        Experiment::BsLyapunov,
        Experiment::FloquetScan,
        Experiment::OtocEnvelope,
        Experiment::PerturbedOtoc,
        Experiment::Ssb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Meanfield => "meanfield",
            Experiment::Selfenergy => "selfenergy",
            Experiment::BsLyapunov => "bs-lyapunov",
            Experiment::FloquetScan => "floquet-scan",
            Experiment::OtocEnvelope => "otoc-envelope",
            Experiment::PerturbedOtoc => "perturbed-otoc",
            Experiment::Ssb => "ssb",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Keys accepted besides the common ones, in output order.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Meanfield => &["L", "hopping", "mu", "J", "temperature", "tol", "fp_damping", "max_iter"],
            Experiment::Selfenergy => &["L", "hopping", "mu", "eta"],
            Experiment::BsLyapunov => &["L", "hopping", "mu", "eta", "J", "alpha_sq", "N", "tol", "max_iter"],
            Experiment::FloquetScan => &["L", "hopping", "mu", "J", "beta_sq", "steps_per_period", "drive_file"],
            Experiment::OtocEnvelope => {
                &["L", "hopping", "mu", "J", "beta_sq", "steps_per_period", "dt", "t_max", "hbar", "drive_file"]
            }
            Experiment::PerturbedOtoc => &[
                "L",
                "hopping",
                "mu",
                "J",
                "alpha_sq",
                "epsilon",
                "dt",
                "t_max",
                "tol",
                "fp_damping",
                "max_iter",
                "window",
            ],
            Experiment::Ssb => &["hopping", "mu", "J"],
        }
    }

    fn accepts(self, key: &str) -> bool {
        COMMON_KEYS.contains(&key) || self.keys().contains(&key)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const COMMON_KEYS: &[&str] = &["experiment", "workers", "output_dir", "emit_svg"];

fn all_keys() -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = COMMON_KEYS.to_vec();
    for e in Experiment::ALL {
        for k in e.keys() {
            if !keys.contains(k) {
                keys.push(k);
            }
        }
    }
    keys
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub sites: usize,
    pub hopping: f64,
    pub mu: f64,
    pub eta: f64,
    pub coupling: f64,
    pub alpha_sq: f64,
    pub beta_sq: f64,
    pub epsilon: f64,
    pub temperatures: Vec<f64>,
    pub dt: f64,
    pub t_max: f64,
    pub steps_per_period: usize,
    pub tol: f64,
    pub fp_damping: f64,
    pub max_iter: usize,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    /// Number of flavours `N`, only used to turn rescaled rates into physical ones.
    pub n_flavours: Option<f64>,
    pub hbar: f64,
    pub window: f64,
    pub drive_file: Option<PathBuf>,
}

impl RunConfig {
    /// All defaults for `experiment`, as if parsed from an empty file.
    pub fn defaults(experiment: Experiment) -> Self {
        parse_config("", Some(experiment)).expect("defaults are valid")
    }

    pub fn lattice(&self) -> Result<LatticeModel, scarlab_core::Error> {
        LatticeModel::new(self.sites, self.hopping, self.mu, self.eta)
    }

    /// `E = μ − 2t`.
    pub fn gap(&self) -> f64 {
        self.mu - 2.0 * self.hopping
    }

    /// Period `π/E` of the lattice drive.
    pub fn drive_period(&self) -> f64 {
        std::f64::consts::PI / self.gap()
    }

    fn value_of(&self, key: &str) -> Option<String> {
        let list = |v: &[f64]| v.iter().map(|x| g17(*x)).collect::<Vec<_>>().join(", ");
        Some(match key {
            "experiment" => self.experiment.name().to_string(),
            "L" => self.sites.to_string(),
            "hopping" => g17(self.hopping),
            "mu" => g17(self.mu),
            "eta" => g17(self.eta),
            "J" => g17(self.coupling),
            "alpha_sq" => g17(self.alpha_sq),
            "beta_sq" => g17(self.beta_sq),
            "epsilon" => g17(self.epsilon),
            "temperature" => list(&self.temperatures),
            "dt" => g17(self.dt),
            "t_max" => g17(self.t_max),
            "steps_per_period" => self.steps_per_period.to_string(),
            "tol" => g17(self.tol),
            "fp_damping" => g17(self.fp_damping),
            "max_iter" => self.max_iter.to_string(),
            "workers" => self.workers.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "emit_svg" => self.emit_svg.to_string(),
            "N" => g17(self.n_flavours?),
            "hbar" => g17(self.hbar),
            "window" => g17(self.window),
            "drive_file" => self.drive_file.as_ref()?.display().to_string(),
            _ => return None,
        })
    }

    /// Fully resolved config in the input syntax; parsing it back gives `self`.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for key in COMMON_KEYS.iter().chain(self.experiment.keys()) {
            if let Some(v) = self.value_of(key) {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }
}

/// Reads and validates a config file for `experiment` (or the experiment
/// named inside the file when `None`).
pub fn load_config(path: &Path, experiment: Option<Experiment>) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        violations: vec![Violation { line: None, message: format!("cannot read {}: {e}", path.display()) }],
    })?;
    parse_config(&text, experiment)
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn suggestion(key: &str, candidates: &[&'static str]) -> Option<&'static str> {
    let lower = key.to_ascii_lowercase();
    if let Some(c) = candidates.iter().find(|c| c.to_ascii_lowercase() == lower) {
        return Some(c);
    }
    if let Some(c) = candidates.iter().find(|c| c.starts_with(key) || key.starts_with(*c) && c.len() > 1) {
        return Some(c);
    }
    candidates
        .iter()
        .map(|c| (edit_distance(&lower, &c.to_ascii_lowercase()), *c))
        .filter(|(d, _)| *d <= 2)
        .min()
        .map(|(_, c)| c)
}

struct Raw {
    values: BTreeMap<String, (usize, String)>,
    violations: Vec<Violation>,
}

impl Raw {
    fn line(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|(l, _)| *l)
    }

    fn fail(&mut self, key: &str, message: String) {
        let line = self.line(key);
        self.violations.push(Violation { line, message });
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let (line, text) = self.values.get(key)?.clone();
        match text.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.violations
                    .push(Violation { line: Some(line), message: format!("`{key}` must be {what}, got `{text}`") });
                None
            }
        }
    }

    fn real(&mut self, key: &str, default: f64) -> f64 {
        match self.parsed::<f64>(key, "a number") {
            Some(v) if v.is_finite() => v,
            Some(_) => {
                self.fail(key, format!("`{key}` must be finite"));
                default
            }
            None => default,
        }
    }

    fn int(&mut self, key: &str, default: usize) -> usize {
        self.parsed::<usize>(key, "a non-negative integer").unwrap_or(default)
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        self.parsed::<bool>(key, "true or false").unwrap_or(default)
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        let Some((line, text)) = self.values.get(key).cloned() else { return default.to_vec() };
        let parsed: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => v,
            _ => {
                self.violations.push(Violation {
                    line: Some(line),
                    message: format!("`{key}` must be a comma list of numbers, got `{text}`"),
                });
                default.to_vec()
            }
        }
    }

    fn require(&mut self, ok: bool, key: &str, message: &str) {
        if !ok {
            self.fail(key, format!("`{key}` {message}"));
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Parses and validates config text. Every problem is collected before returning.
pub fn parse_config(text: &str, experiment: Option<Experiment>) -> Result<RunConfig, ConfigError> {
    let known = all_keys();
    let mut raw = Raw { values: BTreeMap::new(), violations: Vec::new() };
    let mut lines: Vec<(usize, String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            raw.violations
                .push(Violation { line: Some(n), message: format!("expected `key = value`, got `{content}`") });
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if let Some((first, _)) = raw.values.get(&k) {
            raw.violations
                .push(Violation { line: Some(n), message: format!("duplicate key `{k}` (first set on line {first})") });
            continue;
        }
        raw.values.insert(k.clone(), (n, v.clone()));
        lines.push((n, k, v));
    }

    let named = raw.values.get("experiment").cloned();
    let experiment = match (experiment, named) {
        (Some(e), Some((line, name))) => {
            if name != e.name() {
                raw.violations.push(Violation {
                    line: Some(line),
                    message: format!("config is for experiment `{name}` but `{}` was requested", e.name()),
                });
            }
            e
        }
        (Some(e), None) => e,
        (None, Some((line, name))) => match Experiment::from_name(&name) {
            Some(e) => e,
            None => {
                raw.violations.push(Violation { line: Some(line), message: format!("unknown experiment `{name}`") });
                return Err(ConfigError { violations: raw.violations });
            }
        },
        (None, None) => {
            raw.violations.push(Violation { line: None, message: "missing required key `experiment`".into() });
            return Err(ConfigError { violations: raw.violations });
        }
    };

    for (n, k, _) in &lines {
        if experiment.accepts(k) {
            continue;
        }
        let message = if known.contains(&k.as_str()) {
            format!("key `{k}` is not used by experiment {experiment}")
        } else {
            let allowed: Vec<&'static str> = COMMON_KEYS.iter().chain(experiment.keys()).copied().collect();
            match suggestion(k, &allowed).or_else(|| suggestion(k, &known)) {
                Some(s) => format!("unknown key `{k}`; did you mean `{s}`?"),
                None => format!("unknown key `{k}`"),
            }
        };
        raw.violations.push(Violation { line: Some(*n), message });
    }
    // Values of rejected keys are not interpreted further.
    raw.values.retain(|k, _| experiment.accepts(k));

    let small = matches!(experiment, Experiment::Meanfield | Experiment::PerturbedOtoc);
    let sites = raw.int("L", if small { 256 } else { 1024 });
    let hopping = raw.real("hopping", 1.0);
    let mu = raw.real("mu", 2.5);
    let eta = raw.real("eta", default_eta(sites.max(1)));
    let j_default = match experiment {
        Experiment::FloquetScan | Experiment::OtocEnvelope => 0.1,
        // 8 J α² = 3 with α² = 1.
        Experiment::PerturbedOtoc => 0.375,
        _ => 1.0,
    };
    let coupling = raw.real("J", j_default);
    let alpha_sq = raw.real("alpha_sq", 1.0);
    let beta_sq = raw.real("beta_sq", 1.0);
    let epsilon = raw.real("epsilon", 0.3);
    let temperatures = raw.list("temperature", &[0.5, 1.0, 2.0, 5.0]);
    let steps_per_period = raw.int("steps_per_period", 4096);
    let t_max = raw.real("t_max", if experiment == Experiment::OtocEnvelope { 1000.0 } else { 40.0 });
    let period = std::f64::consts::PI / (mu - 2.0 * hopping);
    let dt = raw.real("dt", if experiment == Experiment::OtocEnvelope { period / 16.0 } else { 0.01 });
    let tol = raw.real(
        "tol",
        match experiment {
            Experiment::Meanfield => 1e-12,
            _ => 1e-10,
        },
    );
    let fp_damping = raw.real("fp_damping", if experiment == Experiment::Meanfield { 0.3 } else { 0.5 });
    let max_iter = raw.int(
        "max_iter",
        match experiment {
            Experiment::Meanfield => 20_000,
            Experiment::BsLyapunov => 100_000,
            _ => 5000,
        },
    );
    let workers = raw.int("workers", default_workers());
    let output_dir =
        raw.values.get("output_dir").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| PathBuf::from("output"));
    let emit_svg = raw.boolean("emit_svg", false);
    let n_flavours = raw.values.contains_key("N").then(|| raw.real("N", 1.0));
    let hbar = raw.real("hbar", 1.0);
    let window = raw.real("window", t_max / 2.0);
    let drive_file = raw.values.get("drive_file").map(|(_, v)| PathBuf::from(v));

    // Domain checks.
    let uses = |k: &str| experiment.keys().contains(&k);
    if uses("L") {
        raw.require(sites >= 4, "L", "must be at least 4");
        if experiment == Experiment::PerturbedOtoc {
            raw.require(sites.is_multiple_of(2), "L", "must be even so that k = 0 lies on the grid");
        }
    }
    raw.require(hopping > 0.0, "hopping", "must be positive");
    if uses("eta") {
        raw.require(eta > 0.0, "eta", "must be positive");
    }
    let gap = mu - 2.0 * hopping;
    if experiment != Experiment::Ssb && drive_file.is_none() {
        if experiment == Experiment::Meanfield {
            if sites >= 4 && hopping > 0.0 {
                if let Err(scarlab_core::Error::NotGapped { min_xi }) = LatticeModel::new(sites, hopping, mu, 1.0) {
                    raw.fail("mu", format!("dispersion must be positive on the grid (min xi = {min_xi})"));
                }
            }
        } else {
            raw.require(gap > 0.0, "mu", "must exceed 2 * hopping (gapped band)");
        }
    }
    match experiment {
        Experiment::Meanfield => raw.require(coupling >= 0.0, "J", "must be non-negative"),
        Experiment::FloquetScan | Experiment::OtocEnvelope => raw.require(coupling >= 0.0, "J", "must be non-negative"),
        Experiment::PerturbedOtoc => raw.require(coupling >= 0.0, "J", "must be non-negative"),
        _ => raw.require(coupling > 0.0, "J", "must be positive"),
    }
    if uses("alpha_sq") {
        let ok = if experiment == Experiment::PerturbedOtoc { alpha_sq >= 0.0 } else { alpha_sq > 0.0 };
        raw.require(ok, "alpha_sq", "must be positive");
    }
    if uses("beta_sq") {
        raw.require(beta_sq >= 0.0, "beta_sq", "must be non-negative");
    }
    if uses("epsilon") {
        raw.require(epsilon >= 0.0, "epsilon", "must be non-negative");
        if epsilon >= 0.0 && gap > 0.0 && epsilon >= gap {
            let line = raw.line("epsilon").or(raw.line("mu")).or(raw.line("hopping"));
            raw.violations.push(Violation {
                line,
                message: format!("`epsilon` = {} must be below the gap mu - 2 * hopping = {}", g17(epsilon), g17(gap)),
            });
        }
    }
    if uses("temperature") {
        raw.require(temperatures.iter().all(|&t| t > 0.0), "temperature", "must be positive");
    }
    if uses("steps_per_period") {
        raw.require(steps_per_period >= 64, "steps_per_period", "must be at least 64");
    }
    if uses("t_max") {
        raw.require(t_max > 0.0, "t_max", "must be positive");
    }
    if uses("dt") {
        raw.require(dt > 0.0, "dt", "must be positive");
        if experiment == Experiment::OtocEnvelope && dt > 0.0 && drive_file.is_none() && gap > 0.0 {
            let m = (period / dt).round();
            let commensurate = m >= 1.0 && (m * dt - period).abs() <= 1e-9 * period;
            let divides = commensurate && steps_per_period.is_multiple_of(m as usize);
            raw.require(divides, "dt", "must be period / m with m dividing steps_per_period");
        }
    }
    if uses("tol") {
        raw.require(tol > 0.0, "tol", "must be positive");
    }
    if uses("fp_damping") {
        raw.require(fp_damping > 0.0 && fp_damping <= 1.0, "fp_damping", "must lie in (0, 1]");
    }
    if uses("max_iter") {
        raw.require(max_iter >= 1, "max_iter", "must be positive");
    }
    raw.require(workers >= 1, "workers", "must be positive");
    if let Some(n) = n_flavours {
        raw.require(n > 0.0, "N", "must be positive");
    }
    if uses("hbar") {
        raw.require(hbar > 0.0, "hbar", "must be positive");
    }
    if uses("window") {
        raw.require(window > 0.0 && window <= t_max / 2.0 + 1e-12, "window", "must be positive and at most t_max / 2");
    }

    if !raw.violations.is_empty() {
        raw.violations.sort_by_key(|v| v.line.unwrap_or(usize::MAX));
        return Err(ConfigError { violations: raw.violations });
    }
    Ok(RunConfig {
        experiment,
        sites,
        hopping,
        mu,
        eta,
        coupling,
        alpha_sq,
        beta_sq,
        epsilon,
        temperatures,
        dt,
        t_max,
        steps_per_period,
        tol,
        fp_damping,
        max_iter,
        workers,
        output_dir,
        emit_svg,
        n_flavours,
        hbar,
        window,
        drive_file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bs_defaults() {
        let c = parse_config("# nothing else\n", Some(Experiment::BsLyapunov)).unwrap();
        assert_eq!(c.sites, 1024);
        assert_eq!(c.eta, 3.0 / 1024.0);
        assert_eq!((c.hopping, c.mu), (1.0, 2.5));
    }

    #[test]
    fn perturbed_defaults() {
        let c = RunConfig::defaults(Experiment::PerturbedOtoc);
        assert_eq!(8.0 * c.coupling * c.alpha_sq, 3.0);
        assert_eq!((c.epsilon, c.dt, c.t_max, c.sites), (0.3, 0.01, 40.0, 256));
        assert_eq!(RunConfig::defaults(Experiment::FloquetScan).coupling, 0.1);
    }

    #[test]
    fn epsilon_above_gap_rejected() {
        let text = "epsilon = 0.6\nmu = 2.5\nhopping = 1\n";
        let err = parse_config(text, Some(Experiment::PerturbedOtoc)).unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert_eq!(err.violations[0].line, Some(1));
        assert!(err.violations[0].message.contains("gap"));
    }

    #[test]
    fn unknown_key_suggests() {
        let err = parse_config("alpha = 2\n", Some(Experiment::PerturbedOtoc)).unwrap_err();
        assert!(err.violations[0].message.contains("did you mean `alpha_sq`"), "{err}");
        let err = parse_config("tmax = 2\n", Some(Experiment::PerturbedOtoc)).unwrap_err();
        assert!(err.violations[0].message.contains("`t_max`"), "{err}");
    }

    #[test]
    fn every_violation_reported() {
        let text = "L = 2\nhopping = -1\nbogus = 3\nJ = x\nL = 8\nline without equals\n";
        let err = parse_config(text, Some(Experiment::Selfenergy)).unwrap_err();
        let lines: Vec<_> = err.violations.iter().map(|v| v.line).collect();
        for l in 1..=6 {
            assert!(lines.contains(&Some(l)), "line {l} missing: {err}");
        }
    }

    #[test]
    fn foreign_key_rejected() {
        let err = parse_config("beta_sq = 1\n", Some(Experiment::Meanfield)).unwrap_err();
        assert!(err.violations[0].message.contains("not used by experiment meanfield"));
    }

    #[test]
    fn experiment_mismatch_and_missing() {
        assert!(parse_config("experiment = ssb\n", Some(Experiment::Meanfield)).is_err());
        assert!(parse_config("J = 1\n", None).is_err());
        let c = parse_config("experiment = ssb\nmu = 1.5\n", None).unwrap();
        assert_eq!(c.experiment, Experiment::Ssb);
    }

    #[test]
    fn temperature_list() {
        let c = parse_config("temperature = 0.5, 1, 2\n", Some(Experiment::Meanfield)).unwrap();
        assert_eq!(c.temperatures, vec![0.5, 1.0, 2.0]);
        assert!(parse_config("temperature = 1, -2\n", Some(Experiment::Meanfield)).is_err());
    }

    #[test]
    fn envelope_dt_must_be_commensurate() {
        assert!(parse_config("dt = 0.1\n", Some(Experiment::OtocEnvelope)).is_err());
        let period = std::f64::consts::PI / 0.5;
        let ok = format!("dt = {}\n", g17(period / 64.0));
        assert!(parse_config(&ok, Some(Experiment::OtocEnvelope)).is_ok());
    }

    #[test]
    fn resolved_text_round_trips() {
        for e in Experiment::ALL {
            let c = RunConfig::defaults(e);
            let again = parse_config(&c.to_config_text(), Some(e)).unwrap();
            assert_eq!(again, c, "{e}");
        }
        let c = parse_config("N = 64\nL = 16\n", Some(Experiment::BsLyapunov)).unwrap();
        assert_eq!(parse_config(&c.to_config_text(), None).unwrap(), c);
    }
}

//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment. Keys are case-sensitive and
//! listed in [`KEYS`]; anything else is rejected.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use blowup_core::dynamics::SolverConfig;
use blowup_core::shooting::{PerturbationShape, ShootConfig};
use blowup_core::Params;

use crate::CliError;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "p",
    "q",
    "mu",
    "s0",
    "s_end",
    "ds",
    "y_max",
    "n_grid",
    "K",
    "A",
    "M_trunc",
    "quad_order",
    "out_every",
    "d0",
    "d1",
    "audit_window",
    "horizon",
    "levels",
    "boundary_samples",
    "dd_width",
    "probe",
    "stability_horizon",
    "eps0",
    "perturbation",
    "base_d0",
    "base_d0_lo",
    "x_min",
    "x_max",
    "n_x",
    "seed",
    "trajectory",
    "snapshot",
    "report",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub solver: SolverConfig,
    pub shoot: ShootConfig,
    /// Initial data coefficients for `simulate`.
    pub d0: f64,
    pub d1: f64,
    /// Length of the step-halving audit window; 0 disables it.
    pub audit_window: f64,
    pub stability_horizon: f64,
    pub eps0: Vec<f64>,
    pub perturbation: PerturbationShape,
    /// Trapped `d₀` (high and low parts) for `stability`; searched for when absent.
    pub base_d0: Option<(f64, f64)>,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub seed: u64,
    pub trajectory: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: Params::new(3.0, 3.0, 2.0).expect("default parameters are valid"),
            solver: SolverConfig {
                s0: 20.0,
                s_end: 60.0,
                ds: 0.1,
                y_max: 170.0,
                n_grid: 2273,
                k: 10.0,
                a: 20.0,
                m_trunc: 10,
                quad_order: 60,
                out_every: 1,
            },
            shoot: ShootConfig::default(),
            d0: 0.0,
            d1: 0.0,
            audit_window: 1.0,
            stability_horizon: 20.0,
            eps0: vec![0.0, 1e-3, 1e-4, 1e-5],
            perturbation: PerturbationShape::Shifted,
            base_d0: None,
            x_min: 1e-3,
            x_max: 0.3,
            n_x: 300,
            seed: 20240601,
            trajectory: None,
            snapshot: None,
            report: None,
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, format!("cannot parse {v:?} ({e})")))
}

impl RunConfig {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "p" => self.params.p = num(key, v)?,
            "q" => self.params.q = num(key, v)?,
            "mu" => self.params.mu = num(key, v)?,
            "s0" => self.solver.s0 = num(key, v)?,
            "s_end" => self.solver.s_end = num(key, v)?,
            "ds" => self.solver.ds = num(key, v)?,
            "y_max" => self.solver.y_max = num(key, v)?,
            "n_grid" => self.solver.n_grid = num(key, v)?,
            "K" => self.solver.k = num(key, v)?,
            "A" => self.solver.a = num(key, v)?,
            "M_trunc" => self.solver.m_trunc = num(key, v)?,
            "quad_order" => self.solver.quad_order = num(key, v)?,
            "out_every" => self.solver.out_every = num(key, v)?,
            "d0" => self.d0 = num(key, v)?,
            "d1" => self.d1 = num(key, v)?,
            "audit_window" => self.audit_window = num(key, v)?,
            "horizon" => self.shoot.horizon = num(key, v)?,
            "levels" => self.shoot.levels = num(key, v)?,
            "boundary_samples" => self.shoot.boundary_samples = num(key, v)?,
            "dd_width" => self.shoot.dd_width = num(key, v)?,
            "probe" => self.shoot.probe = num(key, v)?,
            "stability_horizon" => self.stability_horizon = num(key, v)?,
            "eps0" => {
                self.eps0 = v
                    .split(',')
                    .map(|x| num::<f64>(key, x.trim()))
                    .collect::<Result<_, _>>()?
            }
            "perturbation" => {
                self.perturbation = match v {
                    "even" => PerturbationShape::Even,
                    "shifted" => PerturbationShape::Shifted,
                    _ => return Err(bad(key, format!("{v:?} is not one of even, shifted"))),
                }
            }
            "base_d0" => self.base_d0 = Some((num(key, v)?, self.base_d0.map_or(0.0, |b| b.1))),
            "base_d0_lo" => {
                let hi = self.base_d0.map(|b| b.0);
                self.base_d0 = Some((hi.unwrap_or(f64::NAN), num(key, v)?))
            }
            "x_min" => self.x_min = num(key, v)?,
            "x_max" => self.x_max = num(key, v)?,
            "n_x" => self.n_x = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "trajectory" => self.trajectory = Some(PathBuf::from(v)),
            "snapshot" => self.snapshot = Some(PathBuf::from(v)),
            "report" => self.report = Some(PathBuf::from(v)),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses file contents on top of the defaults. Does not validate.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(bad(k, format!("duplicate key on line {}", i + 1)));
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Checks every constraint; errors name the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let pr = self.params;
        for (key, v) in [("p", pr.p), ("q", pr.q), ("mu", pr.mu)] {
            if !v.is_finite() {
                return Err(bad(key, format!("{v} is not finite")));
            }
        }
        if !(pr.p > 1.0) {
            return Err(bad("p", format!("{} violates the standing assumption p > 1", pr.p)));
        }
        if !(pr.q > 1.0) {
            return Err(bad("q", format!("{} violates the standing assumption q > 1", pr.q)));
        }
        if !(pr.mu > 0.0) {
            return Err(bad("mu", format!("{} violates the standing assumption μ > 0", pr.mu)));
        }
        self.solver.validate()?;
        self.shoot.validate()?;
        if !(self.audit_window >= 0.0 && self.audit_window.is_finite()) {
            return Err(bad("audit_window", format!("{} must be finite and nonnegative", self.audit_window)));
        }
        if !(self.stability_horizon > 0.0 && self.stability_horizon.is_finite()) {
            return Err(bad("stability_horizon", format!("{} must be positive", self.stability_horizon)));
        }
        if self.eps0.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(bad("eps0", "entries must be finite and nonnegative"));
        }
        if let Some((hi, lo)) = self.base_d0 {
            if !hi.is_finite() || !lo.is_finite() {
                return Err(bad("base_d0", "base_d0_lo needs base_d0"));
            }
        }
        let lim = (-1.0f64).exp();
        if !(self.x_min > 0.0 && self.x_min < self.x_max && self.x_max < lim) {
            return Err(bad("x_min", format!("need 0 < x_min < x_max < 1/e, got [{}, {}]", self.x_min, self.x_max)));
        }
        if self.n_x < 2 {
            return Err(bad("n_x", format!("{} must be at least 2", self.n_x)));
        }
        for (key, path) in [("trajectory", &self.trajectory), ("snapshot", &self.snapshot), ("report", &self.report)] {
            if let Some(p) = path {
                check_writable(key, p)?;
            }
        }
        Ok(())
    }
}

fn check_writable(key: &str, path: &Path) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let meta = fs::metadata(dir).map_err(|e| bad(key, format!("directory {} is not usable ({e})", dir.display())))?;
    if !meta.is_dir() || meta.permissions().readonly() {
        return Err(bad(key, format!("{} is not a writable directory", dir.display())));
    }
    if path.is_dir() {
        return Err(bad(key, format!("{} is a directory", path.display())));
    }
    Ok(())
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

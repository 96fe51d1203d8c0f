//! Subcommand implementations.

use std::path::Path;

use serde::Serialize;

use blowup_core::dynamics::{simulate, Sample, Snapshots, SolverConfig, Trajectory};
use blowup_core::field::FieldPair;
use blowup_core::identities::{default_grid, run_all, SuiteConfig};
use blowup_core::profile::{final_profile, initial_data, intermediate_profile, Constants};
use blowup_core::shooting::{
    find_trapped, stability_scan, with_horizon, LevelRecord, Perturbation, ShootConfig, ShotResult, StabilityBase,
    StabilityFit,
};
use blowup_core::spectral::{eigenpair, Branch};
use blowup_core::{Dd, Params};

use crate::output::{cells, fmt_f64, write_json, Table};
use crate::{CliError, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Constants,
    Eigen,
    Verify { grid: bool, fault_b: Option<f64> },
    Simulate,
    Shoot,
    Stability,
    FinalProfile,
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match cmd {
        Command::Constants => constants(cfg),
        Command::Eigen => eigen(cfg),
        Command::Verify { grid, fault_b } => verify(cfg, *grid, *fault_b),
        Command::Simulate => run_simulate(cfg),
        Command::Shoot => shoot(cfg),
        Command::Stability => stability(cfg),
        Command::FinalProfile => final_profile_table(cfg),
    }
}

#[derive(Debug, Serialize)]
struct ConstantsOut {
    #[serde(rename = "Gamma")]
    big_gamma: f64,
    gamma: f64,
    b: f64,
    c1: f64,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "E")]
    e: f64,
}

fn constants(cfg: &RunConfig) -> Result<(), CliError> {
    let c = Constants::new(&cfg.params)?;
    let out = ConstantsOut {
        big_gamma: c.big_gamma,
        gamma: c.gamma,
        b: c.b,
        c1: c.c1,
        d: c.d,
        e: c.e,
    };
    write_json(&out, cfg.report.as_deref())
}

/// Plus and minus eigenpairs for `n = 0..=M_trunc`, monomial coefficients
/// padded with zeros to degree `M_trunc`.
pub fn eigen_table(params: &Params, m: usize) -> Result<Table, CliError> {
    let mut header = vec!["n".to_string(), "branch".into(), "lambda".into()];
    header.extend((0..=m).map(|k| format!("f_{k}")));
    header.extend((0..=m).map(|k| format!("g_{k}")));
    let mut t = Table::new(header);
    let pad = |c: &[f64]| (0..=m).map(|k| c.get(k).copied().unwrap_or(0.0)).collect::<Vec<_>>();
    for n in 0..=m {
        for branch in [Branch::Plus, Branch::Minus] {
            let e = eigenpair(n, branch, params)?;
            let name = match branch {
                Branch::Plus => "plus",
                Branch::Minus => "minus",
            };
            let mut row = vec![n.to_string(), name.to_string(), fmt_f64(e.lambda)];
            row.extend(cells(pad(&e.f.coeffs)));
            row.extend(cells(pad(&e.g.coeffs)));
            t.push(row);
        }
    }
    Ok(t)
}

fn eigen(cfg: &RunConfig) -> Result<(), CliError> {
    eigen_table(&cfg.params, cfg.solver.m_trunc)?.write(cfg.report.as_deref())
}

fn verify(cfg: &RunConfig, full_grid: bool, fault_b: Option<f64>) -> Result<(), CliError> {
    let grid = if full_grid { default_grid() } else { vec![cfg.params] };
    let suite = SuiteConfig {
        m_trunc: cfg.solver.m_trunc,
        seed: cfg.seed,
        fault_b,
    };
    let report = run_all(&grid, &suite)?;
    write_json(&report, cfg.report.as_deref())?;
    let failed = report.failures().count();
    eprintln!("verify: {} checks, {failed} failed", report.checks.len());
    if failed > 0 {
        let first = report.failures().next().map(|c| c.id.clone()).unwrap_or_default();
        return Err(CliError::Check(format!("{failed} identity checks failed, first {first}")));
    }
    Ok(())
}

/// Trajectory CSV: modes, sup norms, outer and weighted minus norms, `in_set`.
pub fn trajectory_table(samples: &[Sample], m: usize) -> Table {
    let mut header = vec!["s".to_string()];
    header.extend((0..=m).map(|j| format!("theta_{j}")));
    header.extend((0..=m).map(|j| format!("ttheta_{j}")));
    for h in [
        "sup_Lambda",
        "sup_Upsilon",
        "sup_Lambda_e",
        "sup_Upsilon_e",
        "wnorm_minus_L",
        "wnorm_minus_U",
        "in_set",
    ] {
        header.push(h.into());
    }
    let mut t = Table::new(header);
    for smp in samples {
        let (oe_l, oe_u) = smp.outer();
        let (mn_l, mn_u) = smp.minus();
        let mut row = vec![fmt_f64(smp.s)];
        row.extend(cells(smp.modes.theta.iter().copied()));
        row.extend(cells(smp.modes.theta_tilde.iter().copied()));
        row.extend(cells([smp.sup_lambda, smp.sup_upsilon, oe_l, oe_u, mn_l, mn_u]));
        row.push(smp.report.in_set.to_string());
        t.push(row);
    }
    t
}

/// Snapshot CSV of `(Λ, Υ)` and the full `(Φ, Ψ)`.
pub fn snapshot_table(fields: &FieldPair, params: &Params) -> Result<Table, CliError> {
    let c = Constants::new(params)?;
    let mut t = Table::new(["y", "Lambda", "Upsilon", "phi", "psi"]);
    for (i, y) in fields.grid.nodes().into_iter().enumerate() {
        let (ph, ps) = intermediate_profile(y, fields.s, &c, params);
        let (l, u) = (fields.u[i], fields.v[i]);
        t.push(cells([y, l, u, ph + l, ps + u]));
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitInfo {
    pub s: f64,
    pub clause: String,
}

/// Step-halving audit: sup differences of `(Λ, Υ)` at the end of a window
/// between runs with `ds`, `ds/2` and `ds/4`.
#[derive(Debug, Clone, Serialize)]
pub struct StepAudit {
    pub window: f64,
    pub ds: [f64; 3],
    pub diff_half: f64,
    pub diff_quarter: f64,
    pub observed_order: f64,
}

pub fn step_audit(solver: &SolverConfig, initial: &FieldPair, params: &Params, window: f64) -> Result<Option<StepAudit>, CliError> {
    let span = window.min(solver.s_end - solver.s0);
    let steps = (span / solver.ds).round();
    if !(steps >= 1.0) {
        return Ok(None);
    }
    let span = steps * solver.ds;
    let mut ends = Vec::with_capacity(3);
    let mut dss = [0.0; 3];
    for (i, div) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let cfg = SolverConfig {
            ds: solver.ds / div,
            s_end: solver.s0 + span,
            out_every: (steps * div) as usize,
            ..solver.clone()
        };
        dss[i] = cfg.ds;
        let traj = simulate(&cfg, initial, params, Snapshots::Every(0))?;
        let last = traj
            .samples
            .last()
            .and_then(|s| s.fields.clone())
            .ok_or_else(|| CliError::Check(format!("audit run with ds = {} produced no end state", cfg.ds)))?;
        ends.push(last);
    }
    let diff = |a: &FieldPair, b: &FieldPair| {
        a.u.iter()
            .zip(&b.u)
            .chain(a.v.iter().zip(&b.v))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let d1 = diff(&ends[0], &ends[1]);
    let d2 = diff(&ends[1], &ends[2]);
    Ok(Some(StepAudit {
        window: span,
        ds: dss,
        diff_half: d1,
        diff_quarter: d2,
        observed_order: (d1 / d2).log2(),
    }))
}

#[derive(Debug, Serialize)]
struct SimulateReport<'a> {
    params: &'a Params,
    solver: &'a SolverConfig,
    d0: f64,
    d1: f64,
    termination: String,
    samples: usize,
    final_s: f64,
    all_in_set: bool,
    first_exit: Option<ExitInfo>,
    audit: Option<StepAudit>,
}

fn first_exit(samples: &[Sample]) -> Option<ExitInfo> {
    samples.iter().find(|s| !s.report.in_set).map(|s| ExitInfo {
        s: s.s,
        clause: s.report.first_violated.map(|c| c.to_string()).unwrap_or_default(),
    })
}

fn write_trajectory_outputs(cfg: &RunConfig, traj: &Trajectory) -> Result<(), CliError> {
    if let Some(path) = cfg.trajectory.as_deref() {
        trajectory_table(&traj.samples, traj.config.m_trunc).write(Some(path))?;
    }
    if let Some(path) = cfg.snapshot.as_deref() {
        match traj.samples.iter().rev().find_map(|s| s.fields.as_ref()) {
            Some(fields) => snapshot_table(fields, &cfg.params)?.write(Some(path))?,
            None => eprintln!("simulate: no end state to write to {}", path.display()),
        }
    }
    Ok(())
}

fn run_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.solver;
    let c = Constants::new(&cfg.params)?;
    let grid = s.grid()?;
    let initial = initial_data(cfg.d0, cfg.d1, s.s0, s.a, s.k, &c, &cfg.params, &grid)?;
    let traj = simulate(s, &initial, &cfg.params, Snapshots::Every(0))?;
    write_trajectory_outputs(cfg, &traj)?;
    let audit = step_audit(s, &initial, &cfg.params, cfg.audit_window)?;
    let report = SimulateReport {
        params: &cfg.params,
        solver: s,
        d0: cfg.d0,
        d1: cfg.d1,
        termination: blowup_core::dynamics::termination_name(&traj.termination),
        samples: traj.samples.len(),
        final_s: traj.samples.last().map_or(s.s0, |x| x.s),
        all_in_set: traj.samples.iter().all(|x| x.report.in_set),
        first_exit: first_exit(&traj.samples),
        audit,
    };
    write_json(&report, cfg.report.as_deref())?;
    if let blowup_core::dynamics::Termination::NonFinite { last_s } = traj.termination {
        return Err(CliError::Check(format!("state became non-finite after s = {last_s}")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CertificateSummary {
    samples: usize,
    final_s: f64,
    all_in_set: bool,
    first_exit: Option<ExitInfo>,
    termination: String,
}

impl CertificateSummary {
    fn new(traj: &Trajectory) -> Self {
        CertificateSummary {
            samples: traj.samples.len(),
            final_s: traj.samples.last().map_or(traj.config.s0, |x| x.s),
            all_in_set: traj.samples.iter().all(|x| x.report.in_set),
            first_exit: first_exit(&traj.samples),
            termination: blowup_core::dynamics::termination_name(&traj.termination),
        }
    }
}

#[derive(Debug, Serialize)]
struct ShootReport<'a> {
    params: &'a Params,
    solver: SolverConfig,
    shoot: &'a ShootConfig,
    d0: Dd,
    d1: Dd,
    captured: bool,
    stop_reason: &'a str,
    shots: usize,
    best: &'a ShotResult,
    levels: &'a [LevelRecord],
    certificate: CertificateSummary,
}

fn shoot(cfg: &RunConfig) -> Result<(), CliError> {
    let res = find_trapped(&cfg.solver, &cfg.shoot, &cfg.params)?;
    if let Some(path) = cfg.trajectory.as_deref() {
        trajectory_table(&res.certificate.samples, cfg.solver.m_trunc).write(Some(path))?;
    }
    if let Some(path) = cfg.snapshot.as_deref() {
        if let Some(f) = res.certificate.samples.last().and_then(|s| s.fields.as_ref()) {
            snapshot_table(f, &cfg.params)?.write(Some(path))?;
        }
    }
    let cert = CertificateSummary::new(&res.certificate);
    let ok = res.search.captured && cert.all_in_set;
    let report = ShootReport {
        params: &cfg.params,
        solver: with_horizon(&cfg.solver, cfg.shoot.horizon),
        shoot: &cfg.shoot,
        d0: res.d0,
        d1: res.d1,
        captured: res.search.captured,
        stop_reason: &res.search.stop_reason,
        shots: res.search.shots,
        best: &res.search.best,
        levels: &res.search.levels,
        certificate: cert,
    };
    write_json(&report, cfg.report.as_deref())?;
    eprintln!(
        "shoot: d0 = {}, d1 = {}, captured = {}, {} shots",
        fmt_f64(res.d0.hi),
        fmt_f64(res.d1.hi),
        res.search.captured,
        res.search.shots
    );
    if !ok {
        return Err(CliError::Check(format!("no trapped trajectory: {}", res.search.stop_reason)));
    }
    Ok(())
}

/// True when `|T−T̂|+|a−â|` strictly decreases as the nonzero `ε₀` decrease.
pub fn ladder_monotone(fits: &[StabilityFit]) -> bool {
    let mut pts: Vec<(f64, f64)> = fits.iter().filter(|f| f.eps0 > 0.0).map(|f| (f.eps0, f.distance)).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    pts.windows(2).all(|w| w[1].1 < w[0].1)
}

#[derive(Debug, Serialize)]
struct StabilityReport<'a> {
    params: &'a Params,
    sigma0: f64,
    t_hat: f64,
    a_hat: f64,
    base_d0: Dd,
    base_d1: Dd,
    horizon: f64,
    fits: &'a [StabilityFit],
    monotone: bool,
}

fn stability(cfg: &RunConfig) -> Result<(), CliError> {
    let (d0, d1) = match cfg.base_d0 {
        Some((hi, lo)) => (Dd::new(hi, lo), Dd::new(0.0, 0.0)),
        None => {
            eprintln!("stability: searching for the base trapped datum");
            let res = find_trapped(&cfg.solver, &cfg.shoot, &cfg.params)?;
            if !res.search.captured {
                return Err(CliError::Check(format!("no trapped base datum: {}", res.search.stop_reason)));
            }
            (res.d0, res.d1)
        }
    };
    let base = StabilityBase {
        d0,
        d1,
        sigma0: cfg.solver.s0,
    };
    let perts: Vec<Perturbation> = cfg
        .eps0
        .iter()
        .map(|&eps0| Perturbation {
            eps0,
            shape: cfg.perturbation,
        })
        .collect();
    let shoot = ShootConfig {
        horizon: cfg.stability_horizon,
        ..cfg.shoot.clone()
    };
    let fits = stability_scan(&base, &perts, &cfg.solver, &shoot, &cfg.params)?;
    let monotone = ladder_monotone(&fits);
    let report = StabilityReport {
        params: &cfg.params,
        sigma0: base.sigma0,
        t_hat: base.t_hat(),
        a_hat: base.a_hat(),
        base_d0: d0,
        base_d1: d1,
        horizon: cfg.stability_horizon,
        fits: &fits,
        monotone,
    };
    write_json(&report, cfg.report.as_deref())?;
    if !monotone {
        return Err(CliError::Check("|T - T^| + |a - a^| is not decreasing along the eps0 ladder".into()));
    }
    Ok(())
}

fn final_profile_table(cfg: &RunConfig) -> Result<(), CliError> {
    let c = Constants::new(&cfg.params)?;
    let mut t = Table::new(["x", "u", "v"]);
    let n = cfg.n_x;
    for i in 0..n {
        let x = cfg.x_min + (cfg.x_max - cfg.x_min) * i as f64 / (n - 1) as f64;
        let (u, v) = final_profile(x, &c, &cfg.params)?;
        t.push(cells([x, u, v]));
    }
    t.write(cfg.report.as_deref())
}

/// Writes the command's primary output to `path` instead of the configured one.
pub fn with_output(cfg: &RunConfig, path: Option<&Path>) -> RunConfig {
    let mut c = cfg.clone();
    if let Some(p) = path {
        c.report = Some(p.to_path_buf());
    }
    c
}

//! Time integration of the `(Φ, Ψ)` system in similarity variables, the
//! Mehler-kernel semigroup, mode tracking and the shrinking-set test.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldKind, FieldPair, Grid};
use crate::profile::{cutoff, exponents, intermediate_profile, Constants};
use crate::real::Real;
use crate::spectral::{extract_modes, projection_table, split_parts, ModeBasis, ModeCoeffs, Params, ProjectionTable};
use crate::stats::centered_derivative;

/// Transition density of `e^{τ𝓛_η}`:
/// `(4πη(1-e^{-τ}))^{-1/2} exp(-(y e^{-τ/2} - x)²/(4η(1-e^{-τ})))`.
pub fn mehler_kernel(eta: f64, tau: f64, y: f64, x: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("kernel needs tau > 0, got {tau}")));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("kernel needs eta > 0, got {eta}")));
    }
    let v = 4.0 * eta * -libm::expm1(-tau);
    let d = y * libm::exp(-0.5 * tau) - x;
    Ok(libm::exp(-d * d / v) / libm::sqrt(core::f64::consts::PI * v))
}

#[derive(Debug, Clone)]
struct KernelRow {
    start: usize,
    w: Vec<f64>,
    tail_lo: f64,
    tail_hi: f64,
}

/// Banded quadrature of `e^{τ𝓛_η}` on a grid. Values beyond the grid are the
/// boundary values extended as constants. Rows for `y < 0` mirror those for
/// `y > 0`, so even and odd data keep their parity exactly.
#[derive(Debug, Clone)]
pub struct SemigroupOp {
    n: usize,
    first: usize,
    rows: Vec<KernelRow>,
    pub eta: f64,
    pub tau: f64,
}

const KERNEL_WIDTH: f64 = 12.0;
/// Below `σ = POINT_RULE_MIN·h` the kernel is integrated exactly against a
/// local cubic interpolant instead of sampled at the nodes.
const POINT_RULE_MIN: f64 = 1.5;

fn point_weights(grid: &Grid, lo: usize, hi: usize, c: f64, sigma2: f64) -> Vec<f64> {
    let (h, n) = (grid.h, grid.n);
    (lo..=hi)
        .map(|j| {
            let d = grid.y(j) - c;
            let mut v = h * libm::exp(-0.5 * d * d / sigma2);
            if j == 0 || j == n - 1 {
                v *= 0.5;
            }
            v
        })
        .collect()
}

/// `∫ φ(u) u^k du` over `[u0, u1]` for `k = 0..=3`, `φ` the standard normal density.
fn normal_moments(u0: f64, u1: f64) -> [f64; 4] {
    let pdf = |u: f64| libm::exp(-0.5 * u * u) / libm::sqrt(2.0 * core::f64::consts::PI);
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let i0 = if u0 >= 0.0 {
        0.5 * (libm::erfc(u0 * r) - libm::erfc(u1 * r))
    } else if u1 <= 0.0 {
        0.5 * (libm::erfc(-u1 * r) - libm::erfc(-u0 * r))
    } else {
        0.5 * (libm::erf(u1 * r) - libm::erf(u0 * r))
    };
    let (p0, p1) = (pdf(u0), pdf(u1));
    let i1 = p0 - p1;
    let i2 = i0 + u0 * p0 - u1 * p1;
    let i3 = 2.0 * i1 + u0 * u0 * p0 - u1 * u1 * p1;
    [i0, i1, i2, i3]
}

/// Monomial coefficients of the Lagrange basis on four nodes.
fn lagrange_cubic(t: [f64; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut deg = 0;
        let mut denom = 1.0;
        for m in 0..4 {
            if m == j {
                continue;
            }
            for k in (0..=deg).rev() {
                poly[k + 1] += poly[k];
                poly[k] *= -t[m];
            }
            deg += 1;
            denom *= t[j] - t[m];
        }
        for k in 0..4 {
            out[j][k] = poly[k] / denom;
        }
    }
    out
}

fn cubic_weights(grid: &Grid, lo: usize, hi: usize, c: f64, sigma: f64) -> Vec<f64> {
    let (h, n) = (grid.h, grid.n);
    let mut w = vec![0.0; hi - lo + 1];
    let lo_cell = lo;
    let hi_cell = hi.min(n - 2);
    let alpha = sigma / h;
    for m in lo_cell..=hi_cell {
        let start = m.saturating_sub(1).min(n - 4);
        let nodes = [0, 1, 2, 3].map(|j| (start + j) as f64 - m as f64);
        let basis = lagrange_cubic(nodes);
        let u0 = (grid.y(m) - c) / sigma;
        let mom = normal_moments(u0, u0 + h / sigma);
        // t = αu + β on the cell
        let beta = (c - grid.y(m)) / h;
        let tk = [
            mom[0],
            alpha * mom[1] + beta * mom[0],
            alpha * alpha * mom[2] + 2.0 * alpha * beta * mom[1] + beta * beta * mom[0],
            alpha * alpha * alpha * mom[3]
                + 3.0 * alpha * alpha * beta * mom[2]
                + 3.0 * alpha * beta * beta * mom[1]
                + beta * beta * beta * mom[0],
        ];
        for (j, l) in basis.iter().enumerate() {
            let node = start + j;
            let v: f64 = (0..4).map(|k| l[k] * tk[k]).sum();
            if node >= lo && node <= hi {
                w[node - lo] += v;
            }
        }
    }
    w
}

impl SemigroupOp {
    pub fn new(grid: &Grid, eta: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("semigroup needs tau > 0, got {tau}")));
        }
        let n = grid.n;
        let first = n / 2;
        let sigma2 = 2.0 * eta * -libm::expm1(-tau);
        let sigma = libm::sqrt(sigma2);
        let decay = libm::exp(-0.5 * tau);
        let h = grid.h;
        let mut rows = Vec::with_capacity(n - first);
        for i in first..n {
            let c = grid.y(i) * decay;
            let point = sigma >= POINT_RULE_MIN * h;
            let pad = if point { 0.0 } else { 2.0 };
            let lo = (libm::floor((c - KERNEL_WIDTH * sigma + grid.y_max) / h) - pad).max(0.0) as usize;
            let hi = ((libm::ceil((c + KERNEL_WIDTH * sigma + grid.y_max) / h) + pad) as usize).min(n - 1);
            let mut w = if point {
                point_weights(grid, lo, hi, c, sigma2)
            } else {
                cubic_weights(grid, lo, hi, c, sigma)
            };
            let sq = sigma * core::f64::consts::SQRT_2;
            let tail_lo = 0.5 * libm::erfc((c + grid.y_max) / sq);
            let tail_hi = 0.5 * libm::erfc((grid.y_max - c) / sq);
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                let target = 1.0 - tail_lo - tail_hi;
                for x in w.iter_mut() {
                    *x *= target / total;
                }
            }
            rows.push(KernelRow {
                start: lo,
                w,
                tail_lo,
                tail_hi,
            });
        }
        Ok(SemigroupOp {
            n,
            first,
            rows,
            eta,
            tau,
        })
    }

    pub fn apply<T: Real>(&self, g: &[T], out: &mut [T]) {
        let n = self.n;
        let (g_lo, g_hi) = (g[0], g[n - 1]);
        for (r, row) in self.rows.iter().enumerate() {
            let i = self.first + r;
            let mut acc = g_lo.scale(row.tail_lo) + g_hi.scale(row.tail_hi);
            for (k, &w) in row.w.iter().enumerate() {
                acc = acc + g[row.start + k].scale(w);
            }
            out[i] = acc;
            let m = n - 1 - i;
            if m < self.first {
                let mut acc = g_hi.scale(row.tail_lo) + g_lo.scale(row.tail_hi);
                for (k, &w) in row.w.iter().enumerate() {
                    acc = acc + g[n - 1 - (row.start + k)].scale(w);
                }
                out[m] = acc;
            }
        }
    }
}

/// `e^{τ𝓛_η} g` on the grid for `τ ∈ (0, 5]`.
pub fn semigroup_apply(eta: f64, tau: f64, field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau <= 5.0) {
        return Err(Error::Domain(format!("tau = {tau} outside (0, 5]")));
    }
    if field.len() != grid.n {
        return Err(Error::Config("field length does not match grid".into()));
    }
    let op = SemigroupOp::new(grid, eta, tau)?;
    let mut out = vec![0.0; grid.n];
    op.apply(field, &mut out);
    Ok(out)
}

/// Grid and time-step parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub s0: f64,
    pub s_end: f64,
    pub ds: f64,
    pub y_max: f64,
    pub n_grid: usize,
    pub k: f64,
    pub a: f64,
    pub m_trunc: usize,
    pub quad_order: usize,
    /// Output spacing in units of `ds`.
    pub out_every: usize,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        if !(self.ds > 0.0 && self.ds <= 0.1) {
            return bad("ds", format!("{} must lie in (0, 0.1]", self.ds));
        }
        if !(self.s0 >= core::f64::consts::E) {
            return bad("s0", format!("{} must be at least e", self.s0));
        }
        if !(self.s_end > self.s0) {
            return bad("s_end", format!("{} must exceed s0 = {}", self.s_end, self.s0));
        }
        if !(self.k > 0.0) {
            return bad("K", format!("{} must be positive", self.k));
        }
        if !(self.a >= 1.0) {
            return bad("A", format!("{} must be at least 1", self.a));
        }
        if self.m_trunc % 2 != 0 || self.m_trunc < 4 {
            return bad("M_trunc", format!("{} must be even and at least 4", self.m_trunc));
        }
        if self.quad_order < self.m_trunc + 2 {
            return bad("quad_order", format!("{} must be at least M_trunc + 2", self.quad_order));
        }
        if self.n_grid < 5 {
            return bad("n_grid", format!("{} is too small", self.n_grid));
        }
        if self.out_every == 0 {
            return bad("out_every", "must be positive".into());
        }
        let need = 2.0 * self.k * libm::sqrt(self.s_end);
        if !(self.y_max >= need) {
            return Err(Error::DomainCoverage {
                node: need,
                y_max: self.y_max,
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_grid, self.y_max)
    }

    pub fn steps(&self) -> usize {
        libm::round((self.s_end - self.s0) / self.ds) as usize
    }
}

/// Strang splitting for the `(Φ, Ψ)` system: half a step of the pure
/// drift-diffusion semigroups, a full explicit-midpoint step of
/// `Φ' = -aΦ + |Ψ|^{p-1}Ψ`, `Ψ' = -cΨ + |Φ|^{q-1}Φ`, and another half step.
/// The boundary nodes are then reset to the intermediate profile.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub grid: Grid,
    pub ds: f64,
    pub params: Params,
    pub constants: Constants,
    pub clamp_boundary: bool,
    op1: SemigroupOp,
    op_mu: SemigroupOp,
    ea: f64,
    ec: f64,
}

impl Stepper {
    pub fn new(grid: &Grid, ds: f64, params: &Params, c: &Constants) -> Result<Self> {
        if !(ds > 0.0) {
            return Err(Error::Config(format!("ds: {ds} must be positive")));
        }
        let (ea, ec) = exponents(params);
        Ok(Stepper {
            grid: grid.clone(),
            ds,
            params: *params,
            constants: *c,
            clamp_boundary: true,
            op1: SemigroupOp::new(grid, 1.0, 0.5 * ds)?,
            op_mu: SemigroupOp::new(grid, params.mu, 0.5 * ds)?,
            ea,
            ec,
        })
    }

    fn reaction<T: Real>(&self, phi: &mut [T], psi: &mut [T]) {
        let (p, q) = (self.params.p, self.params.q);
        let h = self.ds;
        for (u, v) in phi.iter_mut().zip(psi.iter_mut()) {
            let (u0, v0) = (*u, *v);
            let fu = u0.scale(-self.ea) + v0.spow(p);
            let fv = v0.scale(-self.ec) + u0.spow(q);
            let um = u0 + fu.scale(0.5 * h);
            let vm = v0 + fv.scale(0.5 * h);
            let gu = um.scale(-self.ea) + vm.spow(p);
            let gv = vm.scale(-self.ec) + um.spow(q);
            *u = u0 + gu.scale(h);
            *v = v0 + gv.scale(h);
        }
    }

    /// Advances `(Φ, Ψ)` from `s` to `s + ds`.
    pub fn step<T: Real>(&self, phi: &mut [T], psi: &mut [T], scratch: &mut [T], s: f64) {
        self.op1.apply(phi, scratch);
        phi.copy_from_slice(scratch);
        self.op_mu.apply(psi, scratch);
        psi.copy_from_slice(scratch);
        self.reaction(phi, psi);
        self.op1.apply(phi, scratch);
        phi.copy_from_slice(scratch);
        self.op_mu.apply(psi, scratch);
        psi.copy_from_slice(scratch);
        if self.clamp_boundary {
            let (bu, bv) = intermediate_profile(self.grid.y_max, s + self.ds, &self.constants, &self.params);
            let n = self.grid.n;
            phi[0] = T::from_f64(bu);
            phi[n - 1] = T::from_f64(bu);
            psi[0] = T::from_f64(bv);
            psi[n - 1] = T::from_f64(bv);
        }
    }
}

/// One step of the `(Φ, Ψ)` flow for a sampled state.
pub fn step(state: &FieldPair, ds: f64, params: &Params, c: &Constants) -> Result<FieldPair> {
    if state.kind != FieldKind::PhiPsi {
        return Err(Error::Config("step expects a (Φ, Ψ) field".into()));
    }
    let st = Stepper::new(&state.grid, ds, params, c)?;
    let mut u = state.u.clone();
    let mut v = state.v.clone();
    let mut scratch = vec![0.0; u.len()];
    st.step(&mut u, &mut v, &mut scratch, state.s);
    let out = FieldPair::new(state.grid.clone(), u, v, state.s + ds, FieldKind::PhiPsi);
    if !out.is_finite() {
        return Err(Error::NonFinite { last_s: state.s });
    }
    Ok(out)
}

/// Identifier of one inequality of the shrinking set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseId {
    OuterLambda,
    OuterUpsilon,
    MinusLambda,
    MinusUpsilon,
    Theta(usize),
    ThetaTilde(usize),
}

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseId::OuterLambda => write!(f, "outer_Lambda"),
            ClauseId::OuterUpsilon => write!(f, "outer_Upsilon"),
            ClauseId::MinusLambda => write!(f, "minus_Lambda"),
            ClauseId::MinusUpsilon => write!(f, "minus_Upsilon"),
            ClauseId::Theta(j) => write!(f, "theta_{j}"),
            ClauseId::ThetaTilde(j) => write!(f, "ttheta_{j}"),
        }
    }
}

impl Serialize for ClauseId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clause {
    pub id: ClauseId,
    pub value: f64,
    pub bound: f64,
}

impl Clause {
    pub fn pass(&self) -> bool {
        self.value <= self.bound
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }
}

/// Bounds of the shrinking set at time `s` for truncation `m`.
pub fn shrink_bound(id: ClauseId, s: f64, a: f64, m: usize) -> f64 {
    let mf = m as f64;
    match id {
        ClauseId::OuterLambda | ClauseId::OuterUpsilon => libm::pow(a, mf + 2.0) / libm::sqrt(s),
        ClauseId::MinusLambda | ClauseId::MinusUpsilon => {
            libm::pow(a, mf + 1.0) / libm::pow(s, (mf + 2.0) / 2.0)
        }
        ClauseId::Theta(0) | ClauseId::Theta(1) => a / (s * s),
        ClauseId::Theta(2) => libm::pow(a, 4.0) * libm::log(s) / (s * s),
        ClauseId::ThetaTilde(i) if i <= 2 => a * a / (s * s),
        ClauseId::Theta(j) | ClauseId::ThetaTilde(j) => {
            libm::pow(a, j as f64) / libm::pow(s, (j as f64 + 1.0) / 2.0)
        }
    }
}

/// Every inequality of the shrinking set evaluated at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkReport {
    pub s: f64,
    pub clauses: Vec<Clause>,
    pub in_set: bool,
    pub first_violated: Option<ClauseId>,
}

impl ShrinkReport {
    pub fn clause(&self, id: ClauseId) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.id == id)
    }

    pub fn violated(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.pass())
    }
}

/// Outer sup norms `‖(1-χ)Λ‖`, `‖(1-χ)Υ‖`.
pub fn outer_norms(fields: &FieldPair, k: f64) -> (f64, f64) {
    let mut out = (0.0f64, 0.0f64);
    for (i, y) in fields.grid.nodes().into_iter().enumerate() {
        let w = 1.0 - cutoff(y, fields.s, k);
        out.0 = out.0.max((w * fields.u[i]).abs());
        out.1 = out.1.max((w * fields.v[i]).abs());
    }
    out
}

/// Weighted norms `‖Λ₋/(1+|y|^{M+1})‖`, `‖Υ₋/(1+|y|^{M+1})‖`.
pub fn minus_norms(fields: &FieldPair, modes: &ModeCoeffs, basis: &ModeBasis) -> (f64, f64) {
    let (_, minus) = split_parts(fields, modes, basis);
    let e = (basis.m_trunc + 1) as i32;
    let mut out = (0.0f64, 0.0f64);
    for (i, y) in fields.grid.nodes().into_iter().enumerate() {
        let w = 1.0 + libm::pow(y.abs(), e as f64);
        out.0 = out.0.max((minus.u[i] / w).abs());
        out.1 = out.1.max((minus.v[i] / w).abs());
    }
    out
}

/// Evaluates all shrinking-set inequalities for `(Λ, Υ)` at `fields.s`.
pub fn shrink_check(fields: &FieldPair, modes: &ModeCoeffs, a: f64, k: f64, basis: &ModeBasis) -> ShrinkReport {
    let s = fields.s;
    let m = basis.m_trunc;
    let (oe_l, oe_u) = outer_norms(fields, k);
    let (mn_l, mn_u) = minus_norms(fields, modes, basis);
    let mut clauses = Vec::with_capacity(2 * m + 8);
    let mut push = |id: ClauseId, value: f64| {
        clauses.push(Clause {
            id,
            value,
            bound: shrink_bound(id, s, a, m),
        })
    };
    push(ClauseId::OuterLambda, oe_l);
    push(ClauseId::OuterUpsilon, oe_u);
    push(ClauseId::MinusLambda, mn_l);
    push(ClauseId::MinusUpsilon, mn_u);
    for j in 3..=m {
        push(ClauseId::Theta(j), modes.theta[j].abs());
        push(ClauseId::ThetaTilde(j), modes.theta_tilde[j].abs());
    }
    for i in 0..=2 {
        push(ClauseId::ThetaTilde(i), modes.theta_tilde[i].abs());
    }
    push(ClauseId::Theta(2), modes.theta[2].abs());
    push(ClauseId::Theta(0), modes.theta[0].abs());
    push(ClauseId::Theta(1), modes.theta[1].abs());
    let first_violated = clauses.iter().find(|c| !c.pass()).map(|c| c.id);
    ShrinkReport {
        s,
        in_set: first_violated.is_none(),
        first_violated,
        clauses,
    }
}

/// Diagnostics recorded at one output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub s: f64,
    pub modes: ModeCoeffs,
    pub report: ShrinkReport,
    pub sup_lambda: f64,
    pub sup_upsilon: f64,
    /// `Φ(0, s)`.
    pub phi_center: f64,
    /// `(Λ, Υ)` on the grid, kept when snapshots are requested.
    pub fields: Option<FieldPair>,
}

impl Sample {
    pub fn outer(&self) -> (f64, f64) {
        (
            self.report.clause(ClauseId::OuterLambda).map_or(0.0, |c| c.value),
            self.report.clause(ClauseId::OuterUpsilon).map_or(0.0, |c| c.value),
        )
    }

    pub fn minus(&self) -> (f64, f64) {
        (
            self.report.clause(ClauseId::MinusLambda).map_or(0.0, |c| c.value),
            self.report.clause(ClauseId::MinusUpsilon).map_or(0.0, |c| c.value),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    Horizon,
    Stopped,
    NonFinite { last_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub config: SolverConfig,
    pub termination: Termination,
}

/// What to keep while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Snapshots {
    None,
    /// Every `n`-th output sample, plus the last one.
    Every(usize),
}

/// Precomputed tables shared by all runs with one configuration.
#[derive(Debug, Clone)]
pub struct Engine {
    pub config: SolverConfig,
    pub params: Params,
    pub constants: Constants,
    pub grid: Grid,
    pub table: ProjectionTable,
    pub basis: ModeBasis,
    pub stepper: Stepper,
    profile: Vec<(f64, f64)>,
}

impl Engine {
    pub fn new(config: &SolverConfig, params: &Params) -> Result<Self> {
        config.validate()?;
        let constants = Constants::new(params)?;
        let grid = config.grid()?;
        let table = projection_table(config.m_trunc, params)?;
        let basis = ModeBasis::new(config.m_trunc, params.mu, config.quad_order)?;
        basis.check_coverage(grid.y_max)?;
        let stepper = Stepper::new(&grid, config.ds, params, &constants)?;
        Ok(Engine {
            config: config.clone(),
            params: *params,
            constants,
            grid,
            table,
            basis,
            stepper,
            profile: Vec::new(),
        })
    }

    fn profile_at(&mut self, s: f64) -> &[(f64, f64)] {
        let (c, p) = (self.constants, self.params);
        self.profile.clear();
        self.profile
            .extend(self.grid.nodes().into_iter().map(|y| intermediate_profile(y, s, &c, &p)));
        &self.profile
    }

    /// `(Λ, Υ) = (Φ - φ, Ψ - ψ)` in `f64`.
    pub fn perturbation<T: Real>(&mut self, phi: &[T], psi: &[T], s: f64) -> FieldPair {
        let grid = self.grid.clone();
        let prof = self.profile_at(s);
        let u = phi.iter().zip(prof).map(|(x, pr)| (*x - T::from_f64(pr.0)).to_f64()).collect();
        let v = psi.iter().zip(prof).map(|(x, pr)| (*x - T::from_f64(pr.1)).to_f64()).collect();
        FieldPair::new(grid, u, v, s, FieldKind::LambdaUpsilon)
    }

    /// `(Φ, Ψ) = (φ + Λ, ψ + Υ)` in precision `T`.
    pub fn full_state<T: Real>(&mut self, lam: &FieldPair) -> (Vec<T>, Vec<T>) {
        let s = lam.s;
        let prof = self.profile_at(s).to_vec();
        let u = lam.u.iter().zip(&prof).map(|(l, pr)| T::from_f64(pr.0) + T::from_f64(*l)).collect();
        let v = lam.v.iter().zip(&prof).map(|(l, pr)| T::from_f64(pr.1) + T::from_f64(*l)).collect();
        (u, v)
    }

    pub fn observe(&self, lam: &FieldPair, phi_center: f64) -> Result<Sample> {
        let modes = extract_modes(lam, &self.table, &self.basis)?;
        let report = shrink_check(lam, &modes, self.config.a, self.config.k, &self.basis);
        Ok(Sample {
            s: lam.s,
            sup_lambda: lam.sup_u(),
            sup_upsilon: lam.sup_v(),
            phi_center,
            modes,
            report,
            fields: None,
        })
    }

    /// Runs from `(Φ, Ψ)` at `s_start` to `s_end`. `observer` sees every
    /// output sample and returns `false` to stop early.
    pub fn run<T: Real, F>(
        &mut self,
        mut phi: Vec<T>,
        mut psi: Vec<T>,
        s_start: f64,
        snapshots: Snapshots,
        mut observer: F,
    ) -> Result<Trajectory>
    where
        F: FnMut(&Sample) -> bool,
    {
        let n = self.grid.n;
        if phi.len() != n || psi.len() != n {
            return Err(Error::Config("state length does not match grid".into()));
        }
        if !(s_start < self.config.s_end) {
            return Err(Error::Config(format!("start time {s_start} is past s_end")));
        }
        let ds = self.config.ds;
        let steps = libm::round((self.config.s_end - s_start) / ds) as usize;
        let time = |k: usize| s_start + k as f64 * ds;
        let every = self.config.out_every;
        let mut scratch = vec![T::zero(); n];
        let mut samples = Vec::new();
        let mut termination = Termination::Horizon;
        let mut out_index = 0usize;
        let mid = n / 2;
        for k in 0..=steps {
            let s = time(k);
            if k > 0 {
                self.stepper.step(&mut phi, &mut psi, &mut scratch, time(k - 1));
                if !phi.iter().chain(psi.iter()).all(|x| x.is_finite()) {
                    termination = Termination::NonFinite { last_s: time(k - 1) };
                    break;
                }
            }
            if k % every != 0 && k != steps {
                continue;
            }
            let lam = self.perturbation(&phi, &psi, s);
            let center = if n % 2 == 1 {
                phi[mid].to_f64()
            } else {
                0.5 * (phi[mid - 1].to_f64() + phi[mid].to_f64())
            };
            let mut sample = self.observe(&lam, center)?;
            let keep = match snapshots {
                Snapshots::None => false,
                Snapshots::Every(m) => k == steps || (m > 0 && out_index % m == 0),
            };
            if keep {
                sample.fields = Some(lam);
            }
            out_index += 1;
            let go_on = observer(&sample);
            samples.push(sample);
            if !go_on {
                termination = Termination::Stopped;
                break;
            }
        }
        Ok(Trajectory {
            samples,
            config: self.config.clone(),
            termination,
        })
    }
}

/// Runs the configured horizon from `(Λ, Υ)` (or `(Φ, Ψ)`) data at `s0`.
pub fn simulate(config: &SolverConfig, initial: &FieldPair, params: &Params, snapshots: Snapshots) -> Result<Trajectory> {
    let mut engine = Engine::new(config, params)?;
    if initial.grid != engine.grid {
        return Err(Error::Config("initial data grid differs from the configured grid".into()));
    }
    let (phi, psi): (Vec<f64>, Vec<f64>) = match initial.kind {
        FieldKind::PhiPsi => (initial.u.clone(), initial.v.clone()),
        FieldKind::LambdaUpsilon => {
            let mut lam = initial.clone();
            lam.s = config.s0;
            engine.full_state(&lam)
        }
    };
    engine.run(phi, psi, config.s0, snapshots, |_| true)
}

/// Finite-difference mode derivatives against the drift terms of the mode
/// equations, one row per interior sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeResidualRow {
    pub s: f64,
    /// `θ₀' - θ₀`
    pub res0: f64,
    /// `θ₁' - θ₁/2`
    pub res1: f64,
    /// `θ₂' - 2θ₂/s`
    pub res2: f64,
    /// `θ₂' + 2θ₂/s`
    pub res2_alt: f64,
    /// `θ_j' - (1 - j/2)θ_j` for `j = 3..=M`
    pub res_j: Vec<f64>,
    /// `θ̃_j' - λ₋(j) θ̃_j` for `j = 0..=M`
    pub res_tilde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeResiduals {
    pub rows: Vec<ModeResidualRow>,
    pub sup_s2_res0: f64,
    pub sup_s2_res1: f64,
    pub sup_s3_res2: f64,
    pub sup_s3_res2_alt: f64,
    /// `sup s^{(j+1)/2}|θ_j' - (1 - j/2)θ_j|` for `j = 3..=M`
    pub sup_scaled_j: Vec<f64>,
}

pub fn mode_ode_residuals(samples: &[Sample], params: &Params) -> Result<ModeResiduals> {
    if samples.len() < 5 {
        return Err(Error::TooFewSamples {
            needed: 5,
            got: samples.len(),
        });
    }
    let h = samples[1].s - samples[0].s;
    for w in samples.windows(2) {
        if ((w[1].s - w[0].s) - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(Error::Domain("mode residuals need uniformly spaced samples".into()));
        }
    }
    let m = samples[0].modes.theta.len() - 1;
    let series = |f: &dyn Fn(&Sample) -> f64| -> Vec<Option<f64>> {
        let v: Vec<f64> = samples.iter().map(f).collect();
        centered_derivative(&v, h)
    };
    let d_theta: Vec<Vec<Option<f64>>> = (0..=m).map(|j| series(&|x: &Sample| x.modes.theta[j])).collect();
    let d_tilde: Vec<Vec<Option<f64>>> =
        (0..=m).map(|j| series(&|x: &Sample| x.modes.theta_tilde[j])).collect();
    let kappa = params.kappa();
    let mut rows = Vec::new();
    let mut out = ModeResiduals {
        rows: Vec::new(),
        sup_s2_res0: 0.0,
        sup_s2_res1: 0.0,
        sup_s3_res2: 0.0,
        sup_s3_res2_alt: 0.0,
        sup_scaled_j: vec![0.0; m.saturating_sub(2)],
    };
    for (i, smp) in samples.iter().enumerate() {
        if d_theta[0][i].is_none() {
            continue;
        }
        let s = smp.s;
        let th = &smp.modes.theta;
        let tt = &smp.modes.theta_tilde;
        let d = |j: usize| d_theta[j][i].unwrap_or(0.0);
        let row = ModeResidualRow {
            s,
            res0: d(0) - th[0],
            res1: d(1) - 0.5 * th[1],
            res2: d(2) - 2.0 * th[2] / s,
            res2_alt: d(2) + 2.0 * th[2] / s,
            res_j: (3..=m).map(|j| d(j) - (1.0 - j as f64 / 2.0) * th[j]).collect(),
            res_tilde: (0..=m)
                .map(|j| d_tilde[j][i].unwrap_or(0.0) + (j as f64 / 2.0 + kappa) * tt[j])
                .collect(),
        };
        out.sup_s2_res0 = out.sup_s2_res0.max(s * s * row.res0.abs());
        out.sup_s2_res1 = out.sup_s2_res1.max(s * s * row.res1.abs());
        out.sup_s3_res2 = out.sup_s3_res2.max(s * s * s * row.res2.abs());
        out.sup_s3_res2_alt = out.sup_s3_res2_alt.max(s * s * s * row.res2_alt.abs());
        for (k, r) in row.res_j.iter().enumerate() {
            let j = (k + 3) as f64;
            let v = libm::pow(s, (j + 1.0) / 2.0) * r.abs();
            out.sup_scaled_j[k] = out.sup_scaled_j[k].max(v);
        }
        rows.push(row);
    }
    out.rows = rows;
    Ok(out)
}

/// Physical-variable snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Inverse similarity transform with `T - t = T_ref·e^{-(s - s_ref)}`;
/// `s_ref = -log T_ref` is the standard frame `T - t = e^{-s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t_blowup: f64,
    pub a: f64,
    pub t_ref: f64,
    pub s_ref: f64,
}

impl Frame {
    /// `T - t = e^{-s}`.
    pub fn standard(t_blowup: f64, a: f64) -> Self {
        Frame {
            t_blowup,
            a,
            t_ref: 1.0,
            s_ref: 0.0,
        }
    }

    /// `T - t = T·e^{-(s - s_start)}`, so that `t = 0` at `s = s_start`.
    pub fn starting_at(t_blowup: f64, a: f64, s_start: f64) -> Self {
        Frame {
            t_blowup,
            a,
            t_ref: t_blowup,
            s_ref: s_start,
        }
    }

    pub fn remaining(&self, s: f64) -> f64 {
        self.t_ref * libm::exp(-(s - self.s_ref))
    }
}

/// `u(x,t) = (T-t)^{-(p+1)/(pq-1)} Φ(y,s)`, `x = a + y√(T-t)`.
pub fn unscale(fields: &FieldPair, frame: &Frame, params: &Params, c: &Constants) -> PhysicalSnapshot {
    let (ea, ec) = exponents(params);
    let rem = frame.remaining(fields.s);
    let sq = libm::sqrt(rem);
    let nodes = fields.grid.nodes();
    let (add_u, add_v): (Vec<f64>, Vec<f64>) = match fields.kind {
        FieldKind::PhiPsi => (vec![0.0; nodes.len()], vec![0.0; nodes.len()]),
        FieldKind::LambdaUpsilon => nodes.iter().map(|&y| intermediate_profile(y, fields.s, c, params)).unzip(),
    };
    PhysicalSnapshot {
        t: frame.t_blowup - rem,
        x: nodes.iter().map(|y| frame.a + y * sq).collect(),
        u: fields.u.iter().zip(&add_u).map(|(l, f)| (l + f) * libm::pow(rem, -ea)).collect(),
        v: fields.v.iter().zip(&add_v).map(|(l, f)| (l + f) * libm::pow(rem, -ec)).collect(),
    }
}

/// Inverse of [`unscale`]: `(Φ, Ψ)` on the similarity grid.
pub fn rescale(snap: &PhysicalSnapshot, frame: &Frame, params: &Params, grid: &Grid) -> FieldPair {
    let (ea, ec) = exponents(params);
    let rem = frame.t_blowup - snap.t;
    let s = frame.s_ref - libm::log(rem / frame.t_ref);
    FieldPair::new(
        grid.clone(),
        snap.u.iter().map(|u| u * libm::pow(rem, ea)).collect(),
        snap.v.iter().map(|v| v * libm::pow(rem, ec)).collect(),
        s,
        FieldKind::PhiPsi,
    )
}

/// Sup norms over the points of a snapshot with `|x - a| ≥ delta`.
pub fn away_sup(snap: &PhysicalSnapshot, a: f64, delta: f64) -> Option<(f64, f64)> {
    let mut out: Option<(f64, f64)> = None;
    for i in 0..snap.x.len() {
        if (snap.x[i] - a).abs() >= delta {
            let o = out.get_or_insert((0.0, 0.0));
            o.0 = o.0.max(snap.u[i].abs());
            o.1 = o.1.max(snap.v[i].abs());
        }
    }
    out
}

/// Human-readable name of a termination.
pub fn termination_name(t: &Termination) -> String {
    match t {
        Termination::Horizon => "horizon".into(),
        Termination::Stopped => "stopped".into(),
        Termination::NonFinite { last_s } => format!("non-finite after s = {last_s}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_rejects_nonpositive_tau() {
        assert!(mehler_kernel(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(mehler_kernel(1.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn kernel_integrates_to_one() {
        for &(eta, tau, y) in &[(1.0, 0.1, 0.0), (2.0, 1.0, 3.0), (0.5, 0.05, -2.0)] {
            let h = 1e-3;
            let mut acc = 0.0;
            let mut x = -40.0;
            while x <= 40.0 {
                acc += h * mehler_kernel(eta, tau, y, x).unwrap();
                x += h;
            }
            assert!((acc - 1.0).abs() < 1e-10, "{acc}");
        }
    }

    #[test]
    fn config_rejects_narrow_grid() {
        let cfg = SolverConfig {
            s0: 20.0,
            s_end: 60.0,
            ds: 0.1,
            y_max: 100.0,
            n_grid: 1001,
            k: 10.0,
            a: 20.0,
            m_trunc: 10,
            quad_order: 60,
            out_every: 1,
        };
        assert!(matches!(cfg.validate(), Err(Error::DomainCoverage { .. })));
        let ok = SolverConfig { y_max: 160.0, ..cfg.clone() };
        assert!(ok.validate().is_ok());
        let bad = SolverConfig { ds: 0.0, ..ok };
        assert!(bad.validate().unwrap_err().to_string().contains("ds"));
    }
}

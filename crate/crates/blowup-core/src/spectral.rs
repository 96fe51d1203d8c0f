//! The linearized operator `𝓗 + 𝓜`: eigenpolynomials from the downward
//! recursion, a dense eigen oracle, the projection table onto the modes and
//! mode extraction from sampled fields.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldPair, Interpolator};
use crate::hermite::{hermite_expand, hermite_norm_sq, hermite_weighted, Poly, Quadrature, Weight};
use crate::profile::Constants;

/// Exponents `p, q` and diffusivity ratio `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
}

impl Params {
    pub fn new(p: f64, q: f64, mu: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Config(format!("p = {p} violates p > 1")));
        }
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::Config(format!("q = {q} violates q > 1")));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Config(format!("mu = {mu} violates μ > 0")));
        }
        Ok(Params { p, q, mu })
    }

    /// `pq - 1`.
    pub fn k(&self) -> f64 {
        self.p * self.q - 1.0
    }

    /// `(p+1)(q+1)/(pq-1)`, minus the constant eigenvalue of `𝓜`.
    pub fn kappa(&self) -> f64 {
        (self.p + 1.0) * (self.q + 1.0) / self.k()
    }

    /// `p ↔ q` symmetric with equal diffusion.
    pub fn is_symmetric(&self) -> bool {
        self.p == self.q && self.mu == 1.0
    }
}

/// Entries of `𝓜`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl CouplingMatrix {
    pub fn new(params: &Params, c: &Constants) -> Self {
        let (p, q, k) = (params.p, params.q, params.k());
        CouplingMatrix {
            m11: -(p + 1.0) / k,
            m12: p * libm::pow(c.gamma, p - 1.0),
            m21: q * libm::pow(c.big_gamma, q - 1.0),
            m22: -(q + 1.0) / k,
        }
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.m11 * x[0] + self.m12 * x[1],
            self.m21 * x[0] + self.m22 * x[1],
        ]
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let tr = self.m11 + self.m22;
        let det = self.m11 * self.m22 - self.m12 * self.m21;
        let disc = libm::sqrt((0.25 * tr * tr - det).max(0.0));
        [0.5 * tr - disc, 0.5 * tr + disc]
    }

    /// Row-sum norm `‖𝓜‖_∞`.
    pub fn norm_inf(&self) -> f64 {
        (self.m11.abs() + self.m12.abs()).max(self.m21.abs() + self.m22.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

/// Set when the plus-branch recursion is resonant with the minus mode of
/// degree `minus_degree`: `(𝓗+𝓜-λ)(f_n,g_n) = coupling·(f̃_k,g̃_k)`.
/// A zero coupling means the eigenvalue is double but semisimple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JordanLink {
    pub minus_degree: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub n: usize,
    pub lambda: f64,
    pub branch: Branch,
    pub f: Poly,
    pub g: Poly,
    /// Coefficients of `f` on `h_k = h̃_k(·;1)`.
    pub hermite_d: Vec<f64>,
    /// Coefficients of `g` on `ĥ_k = h̃_k(·;μ)`.
    pub hermite_e: Vec<f64>,
    pub jordan: Option<JordanLink>,
}

impl EigenPair {
    /// True when the pair is an eigenvector (no Jordan coupling).
    pub fn is_eigenvector(&self) -> bool {
        self.jordan.map_or(true, |j| j.coupling == 0.0)
    }
}

/// `λ₊ = 1 - n/2`, `λ₋ = -n/2 - (p+1)(q+1)/(pq-1)`.
pub fn eigenvalue(n: usize, branch: Branch, params: &Params) -> f64 {
    match branch {
        Branch::Plus => 1.0 - n as f64 / 2.0,
        Branch::Minus => -(n as f64) / 2.0 - params.kappa(),
    }
}

/// `(𝓗+𝓜)(f,g)` on polynomial coefficients.
pub fn apply_operator(f: &Poly, g: &Poly, params: &Params, c: &Constants) -> (Poly, Poly) {
    let m = CouplingMatrix::new(params, c);
    let lf = crate::hermite::apply_ou(f, 1.0);
    let lg = crate::hermite::apply_ou(g, params.mu);
    (
        lf.add(&f.scale(m.m11)).add(&g.scale(m.m12)),
        lg.add(&f.scale(m.m21)).add(&g.scale(m.m22)),
    )
}

fn solve2(a: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (r[0] * a[1][1] - a[0][1] * r[1]) / det,
        (a[0][0] * r[1] - a[1][0] * r[0]) / det,
    ]
}

/// Monomial coefficients `(a_k, b_k)` of the recursion, `k = 0..=n`.
fn recursion(
    n: usize,
    branch: Branch,
    params: &Params,
    c: &Constants,
    minus_partner: Option<&[[f64; 2]]>,
) -> (Vec<[f64; 2]>, Option<JordanLink>) {
    let m = CouplingMatrix::new(params, c);
    let lambda = eigenvalue(n, branch, params);
    let kappa = params.kappa();
    let mut a = vec![[0.0; 2]; n + 1];
    a[n] = match branch {
        Branch::Plus => [(params.p + 1.0) * c.big_gamma, (params.q + 1.0) * c.gamma],
        Branch::Minus => [params.p * c.big_gamma, -params.q * c.gamma],
    };
    let mut link = None;
    let mut coupling = 0.0;
    let mut j = n;
    while j >= 2 {
        j -= 2;
        let shift = lambda + j as f64 / 2.0;
        let rhs = [
            (j + 2) as f64 * (j + 1) as f64 * a[j + 2][0],
            (j + 2) as f64 * (j + 1) as f64 * params.mu * a[j + 2][1],
        ];
        let mat = [[m.m11 - shift, m.m12], [m.m21, m.m22 - shift]];
        let partner = |jj: usize| -> [f64; 2] {
            match (link, minus_partner) {
                (Some(_), Some(t)) if jj < t.len() => t[jj],
                _ => [0.0, 0.0],
            }
        };
        if branch == Branch::Plus && ((shift + kappa).abs() < 1e-9) {
            // resonant level: M - shift = M + κ has left null vector ℓ
            let t = minus_partner.expect("minus partner required at a resonant level");
            let ell = [m.m21, -(kappa + m.m11)];
            let ell = if ell[0] == 0.0 && ell[1] == 0.0 {
                [kappa + m.m22, -m.m12]
            } else {
                ell
            };
            let tk = t[j];
            let cc = (ell[0] * rhs[0] + ell[1] * rhs[1]) / (ell[0] * tk[0] + ell[1] * tk[1]);
            let scale = rhs[0].abs().max(rhs[1].abs()).max(1.0);
            coupling = if cc.abs() <= 1e-10 * scale { 0.0 } else { cc };
            link = Some(JordanLink {
                minus_degree: j,
                coupling,
            });
            a[j] = [
                (coupling * tk[0] - rhs[0]) / (1.0 + kappa),
                (coupling * tk[1] - rhs[1]) / (1.0 + kappa),
            ];
            continue;
        }
        let t = partner(j);
        a[j] = solve2(mat, [coupling * t[0] - rhs[0], coupling * t[1] - rhs[1]]);
    }
    (a, link)
}

fn resonant_degree(n: usize, branch: Branch, params: &Params) -> Option<usize> {
    if branch == Branch::Minus {
        return None;
    }
    let gap = 2.0 * params.kappa() + 2.0;
    let r = libm::round(gap);
    if (gap - r).abs() > 1e-9 || r as usize > n {
        return None;
    }
    let gap = r as usize;
    if gap % 2 != 0 {
        return None;
    }
    Some(n - gap)
}

/// Eigenpolynomial pair of `𝓗+𝓜` for degree `n` on `branch`.
pub fn eigenpair(n: usize, branch: Branch, params: &Params) -> Result<EigenPair> {
    let c = Constants::new(params)?;
    let q1 = Quadrature::gauss_hermite(quad_order_for(n), 1.0)?;
    let qmu = Quadrature::gauss_hermite(quad_order_for(n), params.mu)?;
    eigenpair_with(n, branch, params, &c, &q1, &qmu)
}

fn quad_order_for(n: usize) -> usize {
    (n + 2).max(80)
}

pub(crate) fn eigenpair_with(
    n: usize,
    branch: Branch,
    params: &Params,
    c: &Constants,
    q1: &Quadrature,
    qmu: &Quadrature,
) -> Result<EigenPair> {
    let partner = resonant_degree(n, branch, params)
        .map(|k| recursion(k, Branch::Minus, params, c, None).0);
    let (a, link) = recursion(n, branch, params, c, partner.as_deref());
    let f = Poly::new(a.iter().map(|x| x[0]).collect());
    let g = Poly::new(a.iter().map(|x| x[1]).collect());
    let hermite_d = hermite_expand(&f, &Weight::new(1.0)?, n, q1)?;
    let hermite_e = hermite_expand(&g, &Weight::new(params.mu)?, n, qmu)?;
    Ok(EigenPair {
        n,
        lambda: eigenvalue(n, branch, params),
        branch,
        f,
        g,
        hermite_d,
        hermite_e,
        jordan: link,
    })
}

/// Eigenvalue of the dense matrix with its null space.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEigen {
    pub lambda: f64,
    /// Number of times the eigenvalue occurs among the dense eigenvalues.
    pub algebraic: usize,
    /// Null-space basis of `A - λI` as unit-norm monomial coefficient pairs.
    pub null_space: Vec<(Poly, Poly)>,
}

/// Matrix of `𝓗+𝓜` on pairs of degree `≤ m`, basis `(y^0,0),(0,y^0),(y^1,0),...`.
pub fn operator_matrix(m: usize, params: &Params, c: &Constants) -> DMatrix<f64> {
    let cm = CouplingMatrix::new(params, c);
    let dim = 2 * (m + 1);
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..=m {
        let kf = k as f64;
        // column for (y^k, 0)
        let col = 2 * k;
        a[(2 * k, col)] = -kf / 2.0 + cm.m11;
        a[(2 * k + 1, col)] = cm.m21;
        if k >= 2 {
            a[(2 * (k - 2), col)] = kf * (kf - 1.0);
        }
        // column for (0, y^k)
        let col = 2 * k + 1;
        a[(2 * k, col)] = cm.m12;
        a[(2 * k + 1, col)] = -kf / 2.0 + cm.m22;
        if k >= 2 {
            a[(2 * (k - 2) + 1, col)] = params.mu * kf * (kf - 1.0);
        }
    }
    a
}

fn vector_to_pair(v: &DVector<f64>) -> (Poly, Poly) {
    let m = v.len() / 2;
    (
        Poly::new((0..m).map(|k| v[2 * k]).collect()),
        Poly::new((0..m).map(|k| v[2 * k + 1]).collect()),
    )
}

/// Dense eigen-decomposition of `𝓗+𝓜` on degree `≤ m_trunc`, eigenvalues
/// ascending with multiplicity merged.
pub fn dense_eigen_oracle(m_trunc: usize, params: &Params) -> Result<Vec<OracleEigen>> {
    if m_trunc > 30 {
        return Err(Error::Config(format!("m_trunc = {m_trunc} exceeds 30")));
    }
    let c = Constants::new(params)?;
    // balance with the diagonal similarity y^k -> y^k/k!, which makes the
    // degree-lowering entries O(1)
    let fact: Vec<f64> = (0..=m_trunc)
        .scan(1.0, |acc, k| {
            if k > 0 {
                *acc *= k as f64;
            }
            Some(*acc)
        })
        .collect();
    let mut a = operator_matrix(m_trunc, params, &c);
    let dim = a.nrows();
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] *= fact[i / 2] / fact[j / 2];
        }
    }
    let schur = a.clone().schur();
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::OracleMismatch("dense spectrum has complex eigenvalues".into()))?;
    let mut vals: Vec<f64> = ev.iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out: Vec<OracleEigen> = Vec::new();
    for v in vals {
        if let Some(last) = out.last_mut() {
            if (v - last.lambda).abs() < 1e-6 {
                last.algebraic += 1;
                continue;
            }
        }
        out.push(OracleEigen {
            lambda: v,
            algebraic: 1,
            null_space: Vec::new(),
        });
    }
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    for e in out.iter_mut() {
        let shifted = &a - DMatrix::<f64>::identity(dim, dim) * e.lambda;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.as_ref().expect("right singular vectors requested");
        for (i, sv) in svd.singular_values.iter().enumerate() {
            if *sv < 1e-9 * scale {
                let mut row = vt.row(i).transpose();
                for (k, x) in row.iter_mut().enumerate() {
                    *x /= fact[k / 2];
                }
                let nrm = row.norm();
                e.null_space.push(vector_to_pair(&(row / nrm)));
            }
        }
    }
    Ok(out)
}

/// Coefficients of `θ_n = Σ_j A_{n+2j,n} Q_{n+2j} + B_{n+2j,n} Q̂_{n+2j}` and the
/// tilde analogues, stored densely as `a[k][n]` for `k ≥ n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTable {
    pub m_trunc: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub a_tilde: Vec<Vec<f64>>,
    pub b_tilde: Vec<Vec<f64>>,
    pub plus: Vec<EigenPair>,
    pub minus: Vec<EigenPair>,
}

/// Block matrix taking `(θ_0, θ̃_0, θ_1, θ̃_1, ...)` to `(Q_0, Q̂_0, Q_1, Q̂_1, ...)`.
pub fn mode_to_hermite_matrix(plus: &[EigenPair], minus: &[EigenPair]) -> DMatrix<f64> {
    let m = plus.len() - 1;
    let dim = 2 * (m + 1);
    let mut s = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..=m {
        for k in 0..=n {
            s[(2 * k, 2 * n)] = plus[n].hermite_d[k];
            s[(2 * k + 1, 2 * n)] = plus[n].hermite_e[k];
            s[(2 * k, 2 * n + 1)] = minus[n].hermite_d[k];
            s[(2 * k + 1, 2 * n + 1)] = minus[n].hermite_e[k];
        }
    }
    s
}

pub fn projection_table(m_trunc: usize, params: &Params) -> Result<ProjectionTable> {
    if m_trunc % 2 != 0 || m_trunc < 4 {
        return Err(Error::Config(format!(
            "M_trunc = {m_trunc} must be even and at least 4"
        )));
    }
    let c = Constants::new(params)?;
    let order = quad_order_for(m_trunc);
    let q1 = Quadrature::gauss_hermite(order, 1.0)?;
    let qmu = Quadrature::gauss_hermite(order, params.mu)?;
    let plus: Vec<EigenPair> = (0..=m_trunc)
        .map(|n| eigenpair_with(n, Branch::Plus, params, &c, &q1, &qmu))
        .collect::<Result<_>>()?;
    let minus: Vec<EigenPair> = (0..=m_trunc)
        .map(|n| eigenpair_with(n, Branch::Minus, params, &c, &q1, &qmu))
        .collect::<Result<_>>()?;
    let s = mode_to_hermite_matrix(&plus, &minus);
    let inv = s
        .try_inverse()
        .ok_or_else(|| Error::OracleMismatch("mode matrix is singular".into()))?;
    let dim = m_trunc + 1;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut b = vec![vec![0.0; dim]; dim];
    let mut at = vec![vec![0.0; dim]; dim];
    let mut bt = vec![vec![0.0; dim]; dim];
    for n in 0..dim {
        for k in n..dim {
            a[k][n] = inv[(2 * n, 2 * k)];
            b[k][n] = inv[(2 * n, 2 * k + 1)];
            at[k][n] = inv[(2 * n + 1, 2 * k)];
            bt[k][n] = inv[(2 * n + 1, 2 * k + 1)];
        }
    }
    Ok(ProjectionTable {
        m_trunc,
        a,
        b,
        a_tilde: at,
        b_tilde: bt,
        plus,
        minus,
    })
}

impl ProjectionTable {
    /// Block matrix of the table, `(Q,Q̂) ↦ (θ,θ̃)`.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        let dim = 2 * (self.m_trunc + 1);
        let mut t = DMatrix::<f64>::zeros(dim, dim);
        for n in 0..=self.m_trunc {
            for k in n..=self.m_trunc {
                t[(2 * n, 2 * k)] = self.a[k][n];
                t[(2 * n, 2 * k + 1)] = self.b[k][n];
                t[(2 * n + 1, 2 * k)] = self.a_tilde[k][n];
                t[(2 * n + 1, 2 * k + 1)] = self.b_tilde[k][n];
            }
        }
        t
    }

    /// `(θ, θ̃)` from `(Q, Q̂)`.
    pub fn project(&self, q: &[f64], qhat: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m_trunc;
        let mut th = vec![0.0; m + 1];
        let mut tt = vec![0.0; m + 1];
        for n in 0..=m {
            for k in n..=m {
                th[n] += self.a[k][n] * q[k] + self.b[k][n] * qhat[k];
                tt[n] += self.a_tilde[k][n] * q[k] + self.b_tilde[k][n] * qhat[k];
            }
        }
        (th, tt)
    }

    /// `(Q, Q̂)` from `(θ, θ̃)`.
    pub fn unproject(&self, theta: &[f64], theta_tilde: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m_trunc;
        let mut q = vec![0.0; m + 1];
        let mut qh = vec![0.0; m + 1];
        for n in 0..=m {
            for k in 0..=n {
                q[k] += theta[n] * self.plus[n].hermite_d[k]
                    + theta_tilde[n] * self.minus[n].hermite_d[k];
                qh[k] += theta[n] * self.plus[n].hermite_e[k]
                    + theta_tilde[n] * self.minus[n].hermite_e[k];
            }
        }
        (q, qh)
    }
}

/// Mode coordinates at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoeffs {
    pub s: f64,
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    pub q: Vec<f64>,
    pub qhat: Vec<f64>,
}

/// Precomputed Hermite values at quadrature nodes for repeated extraction.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub m_trunc: usize,
    pub mu: f64,
    pub quad1: Quadrature,
    pub quad_mu: Quadrature,
    /// `h_n(node)·w/‖h_n‖²` for the `η = 1` rule.
    proj1: Vec<Vec<f64>>,
    proj_mu: Vec<Vec<f64>>,
    pub h1: Vec<Poly>,
    pub h_mu: Vec<Poly>,
}

/// Nodes carrying less weight than this may lie outside the grid.
pub const COVERAGE_WEIGHT_TOL: f64 = 1e-14;

impl ModeBasis {
    pub fn new(m_trunc: usize, mu: f64, order: usize) -> Result<Self> {
        let quad1 = Quadrature::gauss_hermite(order, 1.0)?;
        let quad_mu = Quadrature::gauss_hermite(order, mu)?;
        let h1: Vec<Poly> = (0..=m_trunc).map(|n| hermite_weighted(n, 1.0)).collect();
        let h_mu: Vec<Poly> = (0..=m_trunc).map(|n| hermite_weighted(n, mu)).collect();
        let table = |quad: &Quadrature, hs: &[Poly], eta: f64| -> Vec<Vec<f64>> {
            hs.iter()
                .enumerate()
                .map(|(n, h)| {
                    let nrm = hermite_norm_sq(n, eta);
                    quad.nodes
                        .iter()
                        .zip(quad.weights.iter())
                        .map(|(&y, &w)| w * h.eval(y) / nrm)
                        .collect()
                })
                .collect()
        };
        let proj1 = table(&quad1, &h1, 1.0);
        let proj_mu = table(&quad_mu, &h_mu, mu);
        Ok(ModeBasis {
            m_trunc,
            mu,
            quad1,
            quad_mu,
            proj1,
            proj_mu,
            h1,
            h_mu,
        })
    }

    /// Checks that every node with non-negligible weight lies in `[-y_max, y_max]`.
    pub fn check_coverage(&self, y_max: f64) -> Result<()> {
        for quad in [&self.quad1, &self.quad_mu] {
            for y in quad.support(COVERAGE_WEIGHT_TOL) {
                if y.abs() > y_max {
                    return Err(Error::DomainCoverage { node: y, y_max });
                }
            }
        }
        Ok(())
    }

    /// `(Q_n, Q̂_n)` of a pair of functions.
    pub fn hermite_coefficients<F, G>(&self, f: F, g: G) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let fv: Vec<f64> = self.quad1.nodes.iter().map(|&y| f(y)).collect();
        let gv: Vec<f64> = self.quad_mu.nodes.iter().map(|&y| g(y)).collect();
        let q = self
            .proj1
            .iter()
            .map(|row| row.iter().zip(fv.iter()).map(|(a, b)| a * b).sum())
            .collect();
        let qh = self
            .proj_mu
            .iter()
            .map(|row| row.iter().zip(gv.iter()).map(|(a, b)| a * b).sum())
            .collect();
        (q, qh)
    }
}

/// Mode coordinates of sampled fields.
pub fn extract_modes(fields: &FieldPair, table: &ProjectionTable, basis: &ModeBasis) -> Result<ModeCoeffs> {
    if basis.m_trunc != table.m_trunc {
        return Err(Error::Config("basis and table truncations differ".into()));
    }
    basis.check_coverage(fields.grid.y_max)?;
    let iu = Interpolator::new(&fields.grid, &fields.u);
    let iv = Interpolator::new(&fields.grid, &fields.v);
    let (q, qhat) = basis.hermite_coefficients(|y| iu.eval(y), |y| iv.eval(y));
    let (theta, theta_tilde) = table.project(&q, &qhat);
    Ok(ModeCoeffs {
        s: fields.s,
        theta,
        theta_tilde,
        q,
        qhat,
    })
}

/// `(Π₊, Π₋)` split: the plus part is `Σ Q_n(h_n,0) + Q̂_n(0,ĥ_n)`.
pub fn split_parts(fields: &FieldPair, modes: &ModeCoeffs, basis: &ModeBasis) -> (FieldPair, FieldPair) {
    let ys = fields.grid.nodes();
    let mut plus_u = vec![0.0; ys.len()];
    let mut plus_v = vec![0.0; ys.len()];
    for (i, &y) in ys.iter().enumerate() {
        plus_u[i] = modes.q.iter().zip(basis.h1.iter()).map(|(c, h)| c * h.eval(y)).sum();
        plus_v[i] = modes.qhat.iter().zip(basis.h_mu.iter()).map(|(c, h)| c * h.eval(y)).sum();
    }
    let minus_u: Vec<f64> = fields.u.iter().zip(plus_u.iter()).map(|(a, b)| a - b).collect();
    let minus_v: Vec<f64> = fields.v.iter().zip(plus_v.iter()).map(|(a, b)| a - b).collect();
    let kind = fields.kind;
    (
        FieldPair::new(fields.grid.clone(), plus_u, plus_v, fields.s, kind),
        FieldPair::new(fields.grid.clone(), minus_u, minus_v, fields.s, kind),
    )
}

/// Smallest even `M ≥ 4(1 + ‖𝓜‖_∞ + 2 v_sup)`.
pub fn choose_m(params: &Params, v_sup: f64) -> Result<usize> {
    let c = Constants::new(params)?;
    let bound = 4.0 * (1.0 + CouplingMatrix::new(params, &c).norm_inf() + 2.0 * v_sup.max(0.0));
    let mut m = libm::ceil(bound - 1e-12) as usize;
    if m % 2 == 1 {
        m += 1;
    }
    Ok(m)
}

/// Modes of the exact pair `(f_n, g_n)` or `(f̃_n, g̃_n)` sampled from the table.
pub fn mode_pair(table: &ProjectionTable, n: usize, branch: Branch) -> &EigenPair {
    match branch {
        Branch::Plus => &table.plus[n],
        Branch::Minus => &table.minus[n],
    }
}

//! Closed-form ingredients: blowup constants, the profile and intermediate
//! profile, the potential, nonlinear remainder, residual, cut-off, initial data
//! and the final-time asymptote.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldKind, FieldPair, Grid};
use crate::real::spow;
use crate::spectral::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "Gamma")]
    pub big_gamma: f64,
    pub gamma: f64,
    pub b: f64,
    pub c1: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

impl Constants {
    /// `γ^p = Γ(p+1)/(pq-1)`, `Γ^q = γ(q+1)/(pq-1)` solved in logarithms.
    pub fn new(params: &Params) -> Result<Self> {
        let Params { p, q, mu } = *params;
        let k = params.k();
        if !(k > 0.0) {
            return Err(Error::Config("pq - 1 must be positive".into()));
        }
        let r1 = libm::log((p + 1.0) / k);
        let r2 = libm::log((q + 1.0) / k);
        let log_big = (r1 + p * r2) / k;
        let log_small = (q * r1 + r2) / k;
        let big_gamma = libm::exp(log_big);
        let gamma = libm::exp(log_small);
        let s = 2.0 * p * q + p + q;
        let b = k * s / (4.0 * p * q * (p + 1.0) * (q + 1.0) * (1.0 + mu));
        let c1 = s / (8.0 * p * q * (p + 1.0) * (q + 1.0));
        Ok(Constants {
            big_gamma,
            gamma,
            b,
            c1,
            d: 2.0 * b * big_gamma * (p * mu + 1.0) / k,
            e: 2.0 * b * gamma * (q + mu) / k,
        })
    }

    /// Same constants with `b` replaced (fault injection and sensitivity runs).
    pub fn with_b(&self, params: &Params, b: f64) -> Self {
        let k = params.k();
        Constants {
            b,
            d: 2.0 * b * self.big_gamma * (params.p * params.mu + 1.0) / k,
            e: 2.0 * b * self.gamma * (params.q + params.mu) / k,
            ..*self
        }
    }
}

/// Exponents `((p+1)/(pq-1), (q+1)/(pq-1))`.
pub fn exponents(params: &Params) -> (f64, f64) {
    let k = params.k();
    ((params.p + 1.0) / k, (params.q + 1.0) / k)
}

/// `(Φ*(z), Ψ*(z)) = (Γ, γ)(1 + b z²)^{-(p+1)/(pq-1), -(q+1)/(pq-1)}`.
pub fn profile_star(z: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let (ea, ec) = exponents(params);
    let w = 1.0 + c.b * z * z;
    (c.big_gamma * libm::pow(w, -ea), c.gamma * libm::pow(w, -ec))
}

/// `(φ, ψ)(y, s) = profile_star(y/√s) + (D, E)/s`.
pub fn intermediate_profile(y: f64, s: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let (a, b) = profile_star(y / libm::sqrt(s), c, params);
    (a + c.d / s, b + c.e / s)
}

/// Values and derivatives `(f, ∂_y f, ∂_yy f, ∂_s f)` of one component of the
/// intermediate profile, `f = A w^{-e} + C/s`, `w = 1 + b y²/s`.
fn profile_jet(amp: f64, expo: f64, cst: f64, b: f64, y: f64, s: f64) -> [f64; 4] {
    let w = 1.0 + b * y * y / s;
    let w_e = libm::pow(w, -expo);
    let wy = 2.0 * b * y / s;
    let f = amp * w_e + cst / s;
    let fy = -expo * amp * w_e / w * wy;
    let fyy = -expo * amp * (w_e / w) * ((-expo - 1.0) / w * wy * wy + 2.0 * b / s);
    let fs = -expo * amp * w_e / w * (-b * y * y / (s * s)) - cst / (s * s);
    [f, fy, fyy, fs]
}

/// `(V₁, V₂) = (p(ψ^{p-1} - γ^{p-1}), q(φ^{q-1} - Γ^{q-1}))`.
pub fn potential_v(y: f64, s: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let (phi, psi) = intermediate_profile(y, s, c, params);
    let (p, q) = (params.p, params.q);
    (
        p * (spow(psi, p - 1.0) - libm::pow(c.gamma, p - 1.0)),
        q * (spow(phi, q - 1.0) - libm::pow(c.big_gamma, q - 1.0)),
    )
}

/// `f₂ = Γ((p+1)y² - 2(pμ+1))`, `g₂ = γ((q+1)y² - 2(q+μ))`.
pub fn f2_g2(y: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let Params { p, q, mu } = *params;
    (
        c.big_gamma * ((p + 1.0) * y * y - 2.0 * (p * mu + 1.0)),
        c.gamma * ((q + 1.0) * y * y - 2.0 * (q + mu)),
    )
}

/// Order-`1/s` approximation of the potential.
pub fn potential_leading(y: f64, s: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let Params { p, q, .. } = *params;
    let k = params.k();
    let (f2, g2) = f2_g2(y, c, params);
    (
        -p * (p - 1.0) * libm::pow(c.gamma, p - 2.0) * c.b / (k * s) * g2,
        -q * (q - 1.0) * libm::pow(c.big_gamma, q - 2.0) * c.b / (k * s) * f2,
    )
}

/// Estimate of `sup_{y, s ≥ 1} |V_i|` on a log-spaced scan.
pub fn potential_sup(c: &Constants, params: &Params) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..=80 {
        let s = libm::pow(10.0, 4.0 * i as f64 / 80.0);
        for j in 0..=120 {
            let z = if j == 0 { 0.0 } else { libm::pow(10.0, -2.0 + 5.0 * j as f64 / 120.0) };
            let (v1, v2) = potential_v(z * libm::sqrt(s), s, c, params);
            best = best.max(v1.abs()).max(v2.abs());
        }
    }
    best
}

/// Quadratic remainder `F₁ = |Υ+ψ|^{p-1}(Υ+ψ) - ψ^p - pψ^{p-1}Υ` and its
/// analogue `F₂`.
pub fn nonlinear_f(lam: f64, ups: f64, y: f64, s: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let (phi, psi) = intermediate_profile(y, s, c, params);
    let (p, q) = (params.p, params.q);
    (
        spow(ups + psi, p) - spow(psi, p) - p * spow(psi, p - 1.0) * ups,
        spow(lam + phi, q) - spow(phi, q) - q * spow(phi, q - 1.0) * lam,
    )
}

/// Residual of the intermediate profile in the `(Φ,Ψ)` equations, with
/// analytic derivatives.
pub fn residual_r(y: f64, s: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let (ea, ec) = exponents(params);
    let [phi, phi_y, phi_yy, phi_s] = profile_jet(c.big_gamma, ea, c.d, c.b, y, s);
    let [psi, psi_y, psi_yy, psi_s] = profile_jet(c.gamma, ec, c.e, c.b, y, s);
    (
        -phi_s + phi_yy - 0.5 * y * phi_y - ea * phi + spow(psi, params.p),
        -psi_s + params.mu * psi_yy - 0.5 * y * psi_y - ec * psi + spow(phi, params.q),
    )
}

/// Coefficients `(c₂, c₀)` of `R_{i,1}(y) = c₂ y² + c₀`, the `1/s²` term of the
/// residual, from the large-`s` expansion.
pub fn residual_leading_coeffs(c: &Constants, params: &Params) -> [(f64, f64); 2] {
    let Params { p, q, mu } = *params;
    let k = params.k();
    let b = c.b;
    let y2_1 = b * c.big_gamma * (p + 1.0) / k
        * (-1.0 + 6.0 * b * p * (q + 1.0) / k
            - 2.0 * b * p * (q + 1.0) * (p - 1.0) * (q + mu) / (k * k));
    let y2_2 = b * c.gamma * (q + 1.0) / k
        * (-1.0 + 6.0 * b * mu * q * (p + 1.0) / k
            - 2.0 * b * q * (p + 1.0) * (q - 1.0) * (p * mu + 1.0) / (k * k));
    let c0_1 = c.d
        + 2.0 * p * (p - 1.0) * b * b * libm::pow(c.gamma, p) * (q + mu) * (q + mu) / (k * k);
    let c0_2 = c.e
        + 2.0 * q * (q - 1.0) * b * b * libm::pow(c.big_gamma, q) * (p * mu + 1.0) * (p * mu + 1.0)
            / (k * k);
    [(y2_1, c0_1), (y2_2, c0_2)]
}

/// `(R_{1,1}(y), R_{2,1}(y))` with `R_i = R_{i,1}/s² + O(log s/s³)`.
pub fn residual_leading(y: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let [(a1, c1), (a2, c2)] = residual_leading_coeffs(c, params);
    (a1 * y * y + c1, a2 * y * y + c2)
}

/// The constants of `R_{1,1}, R_{2,1}` in the closed form used for comparison,
/// kept for the discrepancy report.
pub fn residual_leading_displayed(y: f64, c: &Constants, params: &Params) -> (f64, f64) {
    let Params { p, q, mu } = *params;
    let k = params.k();
    let b = c.b;
    let [(a1, _), (a2, _)] = residual_leading_coeffs(c, params);
    let c1 = 2.0 * b * c.big_gamma * (p * mu + 1.0) / k
        - 4.0 * b * b * q * (q - 1.0) * libm::pow(c.gamma, p) * (q + mu) * (q + mu) / (k * k * k);
    let c2 = 2.0 * b * c.gamma * (q + mu) / k
        - 4.0 * b * b * p * (p - 1.0) * libm::pow(c.big_gamma, q) * (p * mu + 1.0) * (p * mu + 1.0)
            / (k * k * k);
    (a1 * y * y + c1, a2 * y * y + c2)
}

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::exp(-1.0 / x)
    }
}

/// `χ₀(t)`: 1 on `[0,1]`, 0 on `[2,∞)`, `e^{-1/x}`-mollified step in between.
pub fn chi0(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = bump(2.0 - t);
        a / (a + bump(t - 1.0))
    }
}

/// `χ(y, s) = χ₀(|y|/(K√s))`.
pub fn cutoff(y: f64, s: f64, k: f64) -> f64 {
    chi0(y.abs() / (k * libm::sqrt(s)))
}

/// Shape of the initial perturbation per unit `d₀`, `d₁`:
/// `(A/s₀²)(f_i, g_i)χ(2y, s₀)` for `i = 0, 1`.
pub fn initial_shapes(
    y: f64,
    s0: f64,
    a: f64,
    k: f64,
    c: &Constants,
    params: &Params,
) -> [(f64, f64); 2] {
    let w = a / (s0 * s0) * cutoff(2.0 * y, s0, k);
    let f0 = (params.p + 1.0) * c.big_gamma;
    let g0 = (params.q + 1.0) * c.gamma;
    [(w * f0, w * g0), (w * f0 * y, w * g0 * y)]
}

/// `(Λ₀, Υ₀) = (A/s₀²)(d₀(f₀,g₀) + d₁(f₁,g₁))χ(2y, s₀)` on `grid`.
#[allow(clippy::too_many_arguments)]
pub fn initial_data(
    d0: f64,
    d1: f64,
    s0: f64,
    a: f64,
    k: f64,
    c: &Constants,
    params: &Params,
    grid: &Grid,
) -> Result<FieldPair> {
    if !(s0 >= core::f64::consts::E) {
        return Err(Error::Config(alloc::format!("s0 = {s0} must be at least e")));
    }
    if !(a >= 1.0) {
        return Err(Error::Config(alloc::format!("A = {a} must be at least 1")));
    }
    let mut u = alloc::vec::Vec::with_capacity(grid.n);
    let mut v = alloc::vec::Vec::with_capacity(grid.n);
    for y in grid.nodes() {
        let [(f0, g0), (f1, g1)] = initial_shapes(y, s0, a, k, c, params);
        u.push(d0 * f0 + d1 * f1);
        v.push(d0 * g0 + d1 * g1);
    }
    Ok(FieldPair::new(grid.clone(), u, v, s0, FieldKind::LambdaUpsilon))
}

/// `u*(x) ∼ Γ(b x²/(2|log|x||))^{-(p+1)/(pq-1)}` and the `v*` analogue.
pub fn final_profile(x: f64, c: &Constants, params: &Params) -> Result<(f64, f64)> {
    let ax = x.abs();
    if !(ax > 0.0 && ax < libm::exp(-1.0)) {
        return Err(Error::Domain(alloc::format!(
            "final profile needs 0 < |x| < 1/e, got {x}"
        )));
    }
    let (ea, ec) = exponents(params);
    let base = c.b * ax * ax / (2.0 * libm::log(ax).abs());
    Ok((c.big_gamma * libm::pow(base, -ea), c.gamma * libm::pow(base, -ec)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p333() -> Params {
        Params::new(3.0, 3.0, 1.0).unwrap()
    }

    #[test]
    fn symmetric_constants() {
        let c = Constants::new(&p333()).unwrap();
        assert!((c.big_gamma - libm::sqrt(0.5)).abs() < 1e-15);
        assert!((c.gamma - libm::sqrt(0.5)).abs() < 1e-15);
        assert!((c.b - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.d - c.big_gamma / 6.0).abs() < 1e-15);
    }

    #[test]
    fn profile_values() {
        let pr = p333();
        let c = Constants::new(&pr).unwrap();
        let (a, b) = profile_star(1.0, &c, &pr);
        assert!((a - libm::sqrt(0.5) * libm::pow(7.0 / 6.0, -0.5)).abs() < 1e-14);
        assert_eq!(a, b);
        let (phi, _) = intermediate_profile(0.0, 10.0, &c, &pr);
        assert!((phi - c.big_gamma * (1.0 + 1.0 / 60.0)).abs() < 1e-14);
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(3.0, 4.0, 2.0), 1.0);
        assert_eq!(cutoff(8.0, 4.0, 2.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=200 {
            let v = chi0(1.0 + i as f64 / 200.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        assert!((chi0(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn final_profile_domain() {
        let pr = p333();
        let c = Constants::new(&pr).unwrap();
        assert!(final_profile(0.5, &c, &pr).is_err());
        assert!(final_profile(0.0, &c, &pr).is_err());
        let (u, v) = final_profile(1e-3, &c, &pr).unwrap();
        let want = c.big_gamma * libm::pow((1.0 / 6.0) * 1e-6 / (2.0 * libm::log(1e3)), -0.5);
        assert!((u / want - 1.0).abs() < 1e-14);
        assert_eq!(u, v);
    }
}

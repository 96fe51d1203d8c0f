//! Weighted Hermite polynomials, Gaussian weights and Gauss–Hermite quadrature
//! for the spaces `L²(ρ_η)` with `ρ_η(y) = (4πη)^{-1/2} e^{-y²/(4η)}`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigenvalues;

/// Gaussian weight `ρ_η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub eta: f64,
}

impl Weight {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Config(alloc::format!("eta must be positive, got {eta}")));
        }
        Ok(Weight { eta })
    }

    pub fn density(&self, y: f64) -> f64 {
        libm::exp(-y * y / (4.0 * self.eta)) / libm::sqrt(4.0 * PI * self.eta)
    }

    /// Closed-form moment `E[y^k]` under `ρ_η`: zero for odd `k`,
    /// `(2η)^{k/2} (k-1)!!` for even `k`.
    pub fn moment(&self, k: usize) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let mut m = 1.0;
        let mut j = 1;
        while j < k {
            m *= j as f64 * 2.0 * self.eta;
            j += 2;
        }
        m
    }
}

/// Real polynomial, `coeffs[k]` multiplies `y^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    pub fn monomial(k: usize, c: f64) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        Poly::new(v)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| a * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `y · p(y)`.
    pub fn shift_up(&self) -> Poly {
        let mut v = vec![0.0];
        v.extend_from_slice(&self.coeffs);
        Poly::new(v)
    }

    /// Largest coefficient-wise difference.
    pub fn max_coeff_diff(&self, other: &Poly) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|k| (self.coeff(k) - other.coeff(k)).abs())
            .fold(0.0, f64::max)
    }
}

/// `h̃_n(y; η) = η^{n/2} Σ_j n!/((n-2j)! j!) (-1)^j (y/√η)^{n-2j}`, monic.
pub fn hermite_weighted(n: usize, eta: f64) -> Poly {
    let mut c = vec![0.0; n + 1];
    // coefficient of y^{n-2j}: n!/((n-2j)! j!) (-η)^j
    let mut term = 1.0;
    let mut j = 0;
    loop {
        c[n - 2 * j] = term;
        if 2 * (j + 1) > n {
            break;
        }
        let m = (n - 2 * j) as f64;
        term *= -eta * m * (m - 1.0) / (j + 1) as f64;
        j += 1;
    }
    Poly::new(c)
}

/// Closed-form squared norm `‖h̃_n‖²_{ρ_η} = (2η)^n n!`.
pub fn hermite_norm_sq(n: usize, eta: f64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * 2.0 * eta * k as f64)
}

/// `𝓛_η p = η p'' - (y/2) p'`, applied to coefficients.
pub fn apply_ou(p: &Poly, eta: f64) -> Poly {
    let d1 = p.derivative();
    let d2 = d1.derivative();
    d2.scale(eta).sub(&d1.shift_up().scale(0.5))
}

/// Gauss–Hermite rule for `ρ_η`: `Σ w_k f(y_k) ≈ ∫ f ρ_η dy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub eta: f64,
    pub order: usize,
}

/// Orthonormal Hermite values `p_0..p_{n}` at `x` for the measure
/// `e^{-x²}/√π dx`.
fn orthonormal_hermite(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = core::f64::consts::SQRT_2 * x;
    }
    for k in 1..n {
        let a_k = libm::sqrt(k as f64 / 2.0);
        let a_k1 = libm::sqrt((k + 1) as f64 / 2.0);
        p[k + 1] = (x * p[k] - a_k * p[k - 1]) / a_k1;
    }
    p
}

impl Quadrature {
    /// Nodes from the eigenvalues of the Jacobi matrix (Golub–Welsch), polished
    /// by Newton steps on the three-term recurrence; weights from the
    /// Christoffel function.
    pub fn gauss_hermite(order: usize, eta: f64) -> Result<Self> {
        Weight::new(eta)?;
        if order == 0 {
            return Err(Error::Config("quadrature order must be positive".into()));
        }
        let n = order;
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|k| libm::sqrt(k as f64 / 2.0)).collect();
        let mut xs = tridiagonal_eigenvalues(&diag, &off);
        for x in xs.iter_mut() {
            for _ in 0..3 {
                let p = orthonormal_hermite(n, *x);
                let dp = libm::sqrt(2.0 * n as f64) * p[n - 1];
                if dp == 0.0 {
                    break;
                }
                *x -= p[n] / dp;
            }
        }
        // enforce exact symmetry of the rule
        let half = n / 2;
        for k in 0..half {
            let a = 0.5 * (xs[n - 1 - k] - xs[k]);
            xs[k] = -a;
            xs[n - 1 - k] = a;
        }
        if n % 2 == 1 {
            xs[half] = 0.0;
        }
        let mut ws: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let p = orthonormal_hermite(n - 1, x);
                1.0 / p.iter().map(|v| v * v).sum::<f64>()
            })
            .collect();
        for k in 0..half {
            let w = 0.5 * (ws[k] + ws[n - 1 - k]);
            ws[k] = w;
            ws[n - 1 - k] = w;
        }
        let scale = 2.0 * libm::sqrt(eta);
        Ok(Quadrature {
            nodes: xs.iter().map(|x| scale * x).collect(),
            weights: ws,
            eta,
            order,
        })
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.order - 1
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&y, &w)| w * f(y))
            .sum()
    }

    /// Nodes carrying weight above `tol`.
    pub fn support(&self, tol: f64) -> impl Iterator<Item = f64> + '_ {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .filter(move |(_, &w)| w > tol)
            .map(|(&y, _)| y)
    }
}

/// `⟨f, g⟩_{ρ_η}` evaluated with `quad`.
pub fn inner_product<F, G>(f: F, g: G, w: &Weight, quad: &Quadrature) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if (quad.eta - w.eta).abs() > 1e-14 * w.eta {
        return Err(Error::WeightMismatch {
            quad: quad.eta,
            weight: w.eta,
        });
    }
    Ok(quad.integrate(|y| f(y) * g(y)))
}

/// Coefficients `c_k` of `f = Σ c_k h̃_k(·; η)`, `k ≤ max_deg`.
pub fn hermite_expand(f: &Poly, w: &Weight, max_deg: usize, quad: &Quadrature) -> Result<Vec<f64>> {
    let deg = f.degree();
    if deg > max_deg {
        return Err(Error::DegreeOverflow {
            degree: deg,
            max: max_deg,
        });
    }
    if deg + max_deg > quad.exact_degree() {
        return Err(Error::DegreeOverflow {
            degree: deg + max_deg,
            max: quad.exact_degree(),
        });
    }
    (0..=max_deg)
        .map(|k| {
            let h = hermite_weighted(k, w.eta);
            let num = inner_product(|y| f.eval(y), |y| h.eval(y), w, quad)?;
            let den = inner_product(|y| h.eval(y), |y| h.eval(y), w, quad)?;
            Ok(num / den)
        })
        .collect()
}

/// `Σ c_k h̃_k(·; η)` as a monomial polynomial.
pub fn hermite_reconstruct(c: &[f64], eta: f64) -> Poly {
    c.iter()
        .enumerate()
        .fold(Poly::zero(), |acc, (k, &ck)| acc.add(&hermite_weighted(k, eta).scale(ck)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_polynomials_match_listed_forms() {
        assert_eq!(hermite_weighted(0, 3.0).coeffs, vec![1.0]);
        assert_eq!(hermite_weighted(2, 1.0).coeffs, vec![-2.0, 0.0, 1.0]);
        assert_eq!(hermite_weighted(4, 2.0).coeffs, vec![48.0, 0.0, -24.0, 0.0, 1.0]);
        assert_eq!(hermite_weighted(3, 1.0).coeffs, vec![0.0, -6.0, 0.0, 1.0]);
    }

    #[test]
    fn quadrature_reproduces_gaussian_moments() {
        for &eta in &[0.5, 1.0, 2.0] {
            let q = Quadrature::gauss_hermite(80, eta).unwrap();
            let w = Weight::new(eta).unwrap();
            for k in 0..=20 {
                let got = q.integrate(|y| libm::pow(y, k as f64));
                let want = w.moment(k);
                if k % 2 == 1 {
                    assert!(got.abs() < 1e-12 * w.moment(k + 1).max(1.0));
                } else {
                    assert!((got / want - 1.0).abs() < 1e-12, "eta={eta} k={k} {got} {want}");
                }
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        // trapezoid on a wide grid as an independent check of the normalisation
        let w = Weight::new(2.0).unwrap();
        let h = 0.01;
        let s: f64 = (-4000..=4000).map(|i| w.density(i as f64 * h) * h).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_hermite_norm() {
        let q = Quadrature::gauss_hermite(40, 1.0).unwrap();
        let w = Weight::new(1.0).unwrap();
        let h2 = hermite_weighted(2, 1.0);
        let v = inner_product(|y| h2.eval(y), |y| h2.eval(y), &w, &q).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_eta_is_rejected() {
        let q = Quadrature::gauss_hermite(10, 1.0).unwrap();
        let w = Weight::new(2.0).unwrap();
        assert!(matches!(
            inner_product(|_| 1.0, |_| 1.0, &w, &q),
            Err(Error::WeightMismatch { .. })
        ));
    }

    #[test]
    fn expansion_of_simple_polynomials() {
        let q = Quadrature::gauss_hermite(80, 1.0).unwrap();
        let w = Weight::new(1.0).unwrap();
        let c = hermite_expand(&Poly::monomial(2, 1.0), &w, 2, &q).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && c[1].abs() < 1e-12 && (c[2] - 1.0).abs() < 1e-12);
        let w2 = Weight::new(2.0).unwrap();
        let q2 = Quadrature::gauss_hermite(80, 2.0).unwrap();
        let c = hermite_expand(&hermite_weighted(4, 2.0), &w2, 4, &q2).unwrap();
        for (k, ck) in c.iter().enumerate() {
            let want = if k == 4 { 1.0 } else { 0.0 };
            assert!((ck - want).abs() < 1e-10);
        }
        assert!(matches!(
            hermite_expand(&Poly::monomial(5, 1.0), &w, 4, &q),
            Err(Error::DegreeOverflow { .. })
        ));
    }
}

//! Uniform symmetric grids and sampled field pairs.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `y_k = (k - (n-1)/2)·h`, `h = 2 y_max/(n-1)`. The node formula makes
/// the grid exactly symmetric under `y ↦ -y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub y_max: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize, y_max: f64) -> Result<Self> {
        if n < 5 {
            return Err(Error::Config(alloc::format!("n_grid = {n} is too small (need ≥ 5)")));
        }
        if !(y_max > 0.0) || !y_max.is_finite() {
            return Err(Error::Config(alloc::format!("y_max = {y_max} must be positive")));
        }
        Ok(Grid {
            n,
            y_max,
            h: 2.0 * y_max / (n - 1) as f64,
        })
    }

    #[inline]
    pub fn y(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.n - 1) as f64) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.y(k)).collect()
    }

    /// Index of the mirror node `-y_k`.
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        self.n - 1 - k
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|k| f(self.y(k))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    PhiPsi,
    LambdaUpsilon,
}

/// Two components sampled on a grid at time `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub s: f64,
    pub kind: FieldKind,
}

impl FieldPair {
    pub fn new(grid: Grid, u: Vec<f64>, v: Vec<f64>, s: f64, kind: FieldKind) -> Self {
        debug_assert_eq!(u.len(), grid.n);
        debug_assert_eq!(v.len(), grid.n);
        FieldPair { grid, u, v, s, kind }
    }

    pub fn from_fns<F, G>(grid: Grid, f: F, g: G, s: f64, kind: FieldKind) -> Self
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let u = grid.sample(f);
        let v = grid.sample(g);
        FieldPair { grid, u, v, s, kind }
    }

    pub fn zeros(grid: Grid, s: f64, kind: FieldKind) -> Self {
        let n = grid.n;
        FieldPair::new(grid, alloc::vec![0.0; n], alloc::vec![0.0; n], s, kind)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    pub fn sup_u(&self) -> f64 {
        sup_abs(&self.u)
    }

    pub fn sup_v(&self) -> f64 {
        sup_abs(&self.v)
    }
}

pub fn sup_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Number of nodes in the local Lagrange stencil (degree 7).
pub const STENCIL: usize = 8;

/// Local Lagrange interpolation on a uniform grid with an 8-node stencil.
pub struct Interpolator<'a> {
    grid: &'a Grid,
    values: &'a [f64],
}

impl<'a> Interpolator<'a> {
    pub fn new(grid: &'a Grid, values: &'a [f64]) -> Self {
        Interpolator { grid, values }
    }

    /// Interpolated value; points outside the grid are clamped to the end
    /// values (callers check coverage first).
    pub fn eval(&self, x: f64) -> f64 {
        let g = self.grid;
        let n = g.n;
        let t = x / g.h + 0.5 * (n - 1) as f64;
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let m = STENCIL.min(n);
        let j = libm::floor(t) as usize;
        let start = j.saturating_sub(m / 2 - 1).min(n - m);
        let u = t - start as f64;
        let f = &self.values[start..start + m];
        let mut acc = 0.0;
        for i in 0..m {
            let mut l = 1.0;
            for k in 0..m {
                if k != i {
                    l *= (u - k as f64) / (i as f64 - k as f64);
                }
            }
            acc += l * f[i];
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_exactly_symmetric() {
        for n in [11, 12, 4097] {
            let g = Grid::new(n, 37.3).unwrap();
            for k in 0..n {
                assert_eq!(g.y(k), -g.y(g.mirror(k)));
            }
            assert!((g.y(n - 1) - 37.3).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_is_exact_on_degree_seven() {
        let g = Grid::new(41, 5.0).unwrap();
        let f = |y: f64| 1.0 - 2.0 * y + 0.5 * y * y - 0.1 * y * y * y + 0.01 * y.powi(7);
        let v = g.sample(f);
        let it = Interpolator::new(&g, &v);
        for x in [-4.99, -3.3, 0.0, 0.77, 4.95] {
            assert!((it.eval(x) - f(x)).abs() < 1e-9 * f(x).abs().max(1.0));
        }
    }
}

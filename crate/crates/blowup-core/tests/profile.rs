use blowup_core::field::Grid;
use blowup_core::profile::*;
use blowup_core::Params;
use proptest::prelude::*;

fn grid_params() -> Vec<Params> {
    let mut out = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        for q in [1.5, 2.0, 3.0] {
            for mu in [0.5, 1.0, 2.0] {
                out.push(Params::new(p, q, mu).unwrap());
            }
        }
    }
    out
}

#[test]
fn constant_state_solves_the_algebraic_system() {
    for pr in grid_params() {
        let c = Constants::new(&pr).unwrap();
        let k = pr.p * pr.q - 1.0;
        let r1 = c.gamma.powf(pr.p) / (c.big_gamma * (pr.p + 1.0) / k);
        let r2 = c.big_gamma.powf(pr.q) / (c.gamma * (pr.q + 1.0) / k);
        assert!((r1 - 1.0).abs() < 1e-13 && (r2 - 1.0).abs() < 1e-13, "{pr:?}");
    }
}

#[test]
fn scalar_case_b_and_c1() {
    for p in [1.5, 2.0, 3.0] {
        let pr = Params::new(p, p, 1.0).unwrap();
        let c = Constants::new(&pr).unwrap();
        assert!((c.b - (p - 1.0) / (4.0 * p)).abs() < 1e-15);
        assert!((c.b - (p * p - 1.0) * c.c1).abs() < 1e-15);
        assert!((c.big_gamma - (p - 1.0).powf(-1.0 / (p - 1.0))).abs() < 1e-14);
    }
}

#[test]
fn with_b_rescales_d_and_e() {
    let pr = Params::new(2.0, 3.0, 0.5).unwrap();
    let c = Constants::new(&pr).unwrap();
    let c2 = c.with_b(&pr, 2.0 * c.b);
    assert!((c2.d - 2.0 * c.d).abs() < 1e-15 && (c2.e - 2.0 * c.e).abs() < 1e-15);
    assert_eq!((c2.big_gamma, c2.gamma, c2.c1), (c.big_gamma, c.gamma, c.c1));
}

#[test]
fn intermediate_profile_centre_value() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let c = Constants::new(&pr).unwrap();
    let (phi, psi) = intermediate_profile(0.0, 20.0, &c, &pr);
    assert!((phi - (c.big_gamma + c.d / 20.0)).abs() < 1e-15);
    assert!((psi - (c.gamma + c.e / 20.0)).abs() < 1e-15);
}

/// Residual from centred differences of `intermediate_profile`.
fn residual_fd(y: f64, s: f64, c: &Constants, pr: &Params) -> (f64, f64) {
    let (hy, hs) = (1e-3 * (1.0 + y.abs()), 1e-3 * s);
    let f = |y: f64, s: f64| intermediate_profile(y, s, c, pr);
    let (ea, ec) = exponents(pr);
    let (u, v) = f(y, s);
    let (up, vp) = f(y + hy, s);
    let (um, vm) = f(y - hy, s);
    let (us, vs) = f(y, s + hs);
    let (ums, vms) = f(y, s - hs);
    let d = |a: f64, b: f64, h: f64| (a - b) / (2.0 * h);
    let dd = |a: f64, m: f64, b: f64, h: f64| (a - 2.0 * m + b) / (h * h);
    (
        -d(us, ums, hs) + dd(up, u, um, hy) - 0.5 * y * d(up, um, hy) - ea * u + v.powf(pr.p),
        -d(vs, vms, hs) + pr.mu * dd(vp, v, vm, hy) - 0.5 * y * d(vp, vm, hy) - ec * v + u.powf(pr.q),
    )
}

#[test]
fn residual_matches_finite_differences() {
    for pr in [Params::new(3.0, 3.0, 1.0).unwrap(), Params::new(1.5, 2.0, 0.5).unwrap()] {
        let c = Constants::new(&pr).unwrap();
        for (y, s) in [(0.0, 5.0), (1.3, 10.0), (-4.0, 20.0), (9.0, 40.0)] {
            let (r1, r2) = residual_r(y, s, &c, &pr);
            let (f1, f2) = residual_fd(y, s, &c, &pr);
            assert!((r1 - f1).abs() < 1e-6 && (r2 - f2).abs() < 1e-6, "{pr:?} y={y} s={s}: {r1} {f1}");
        }
    }
}

#[test]
fn residual_scales_like_inverse_square() {
    let pr = Params::new(2.0, 3.0, 2.0).unwrap();
    let c = Constants::new(&pr).unwrap();
    for y in [0.0, 1.0, 2.5] {
        let (l1, l2) = residual_leading(y, &c, &pr);
        for s in [1e4, 1e5] {
            let (r1, r2) = residual_r(y, s, &c, &pr);
            let tol = 40.0 * s.ln() / s;
            assert!((s * s * r1 - l1).abs() < tol * (1.0 + l1.abs()), "y={y} s={s}");
            assert!((s * s * r2 - l2).abs() < tol * (1.0 + l2.abs()), "y={y} s={s}");
        }
    }
}

#[test]
fn potential_leading_term() {
    let pr = Params::new(3.0, 2.0, 0.5).unwrap();
    let c = Constants::new(&pr).unwrap();
    for y in [0.0, 1.5] {
        let errs: Vec<f64> = [1e3, 1e4]
            .iter()
            .map(|&s| {
                let (v1, v2) = potential_v(y, s, &c, &pr);
                let (l1, l2) = potential_leading(y, s, &c, &pr);
                s * (v1 - l1).abs().max((v2 - l2).abs())
            })
            .collect();
        assert!(errs[1] < 0.2 * errs[0] + 1e-12, "y={y}: {errs:?}");
    }
    let sup = potential_sup(&c, &pr);
    assert!(sup.is_finite() && sup > 0.0);
}

#[test]
fn nonlinear_remainder_is_quadratic() {
    let pr = Params::new(3.0, 2.0, 1.0).unwrap();
    let c = Constants::new(&pr).unwrap();
    let (y, s) = (0.7, 25.0);
    let (phi, psi) = intermediate_profile(y, s, &c, &pr);
    let eps = 1e-4;
    let (f1, _) = nonlinear_f(0.0, eps, y, s, &c, &pr);
    let (_, f2) = nonlinear_f(eps, 0.0, y, s, &c, &pr);
    let want1 = 0.5 * pr.p * (pr.p - 1.0) * psi.powf(pr.p - 2.0);
    let want2 = 0.5 * pr.q * (pr.q - 1.0) * phi.powf(pr.q - 2.0);
    assert!((f1 / (eps * eps) - want1).abs() < 1e-3 * want1);
    assert!((f2 / (eps * eps) - want2).abs() < 1e-3 * want2);
    assert_eq!(nonlinear_f(0.0, 0.0, y, s, &c, &pr), (0.0, 0.0));
}

#[test]
fn final_profile_asymptote() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let c = Constants::new(&pr).unwrap();
    let (ea, ec) = exponents(&pr);
    for x in [1e-4, -0.01, 0.2] {
        let (u, v) = final_profile(x, &c, &pr).unwrap();
        let base = c.b * x * x / (2.0 * x.abs().ln().abs());
        assert!((u * base.powf(ea) - c.big_gamma).abs() < 1e-13);
        assert!((v * base.powf(ec) - c.gamma).abs() < 1e-13);
    }
    assert!(final_profile(0.0, &c, &pr).is_err());
    assert!(final_profile(0.5, &c, &pr).is_err());
}

#[test]
fn initial_data_shape() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let c = Constants::new(&pr).unwrap();
    let grid = Grid::new(2049, 155.0).unwrap();
    let (s0, a, k) = (20.0, 20.0, 10.0);
    let f = initial_data(1.0, 0.5, s0, a, k, &c, &pr, &grid).unwrap();
    let mid = grid.n / 2;
    assert_eq!(grid.y(mid), 0.0);
    assert!((f.u[mid] - a / (s0 * s0) * 4.0 * c.big_gamma).abs() < 1e-15);
    assert!((f.v[mid] - a / (s0 * s0) * 4.0 * c.gamma).abs() < 1e-15);
    // χ(2y) vanishes for |y| ≥ K√s₀
    for (i, y) in grid.nodes().into_iter().enumerate() {
        if y.abs() >= k * s0.sqrt() {
            assert_eq!((f.u[i], f.v[i]), (0.0, 0.0));
        }
    }
    assert!(initial_data(1.0, 0.0, 2.0, a, k, &c, &pr, &grid).is_err());
    assert!(initial_data(1.0, 0.0, s0, 0.5, k, &c, &pr, &grid).is_err());
}

proptest! {
    #[test]
    fn cutoff_is_a_monotone_plateau(y in 0.0f64..100.0, dy in 0.0f64..5.0, s in 3.0f64..60.0) {
        let k = 2.0;
        let a = cutoff(y, s, k);
        let b = cutoff(y + dy, s, k);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
        prop_assert_eq!(cutoff(-y, s, k), a);
        if y <= k * s.sqrt() { prop_assert_eq!(a, 1.0); }
        if y >= 2.0 * k * s.sqrt() { prop_assert_eq!(a, 0.0); }
    }

    #[test]
    fn profile_star_is_even_and_decreasing(z in 0.0f64..50.0, dz in 0.01f64..5.0) {
        let pr = Params::new(2.0, 3.0, 1.0).unwrap();
        let c = Constants::new(&pr).unwrap();
        let (a, b) = profile_star(z, &c, &pr);
        let (a2, b2) = profile_star(z + dz, &c, &pr);
        prop_assert_eq!(profile_star(-z, &c, &pr), (a, b));
        prop_assert!(a2 < a && b2 < b);
        prop_assert!(a <= c.big_gamma && b <= c.gamma);
    }
}

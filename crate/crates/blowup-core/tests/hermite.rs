use blowup_core::hermite::*;
use blowup_core::Error;
use proptest::prelude::*;

/// Probabilists' `He_n(x)` by the three-term recurrence.
fn he(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

#[test]
fn weighted_hermite_is_rescaled_probabilists_hermite() {
    for eta in [0.5, 1.0, 2.0] {
        let s = (2.0f64 * eta).sqrt();
        for n in 0..=12 {
            let h = hermite_weighted(n, eta);
            assert_eq!(h.degree(), n);
            assert_eq!(h.coeff(n), 1.0);
            for y in [-3.1, -0.7, 0.0, 0.4, 2.5] {
                let want = s.powi(n as i32) * he(n, y / s);
                assert!((h.eval(y) - want).abs() <= 1e-11 * want.abs().max(1.0), "n={n} eta={eta} y={y}");
            }
        }
    }
}

#[test]
fn orthogonality_under_quadrature() {
    for eta in [0.5, 1.0, 2.0] {
        let w = Weight::new(eta).unwrap();
        let quad = Quadrature::gauss_hermite(20, eta).unwrap();
        for m in 0..=10 {
            for n in 0..=10 {
                let (hm, hn) = (hermite_weighted(m, eta), hermite_weighted(n, eta));
                let ip = inner_product(|y| hm.eval(y), |y| hn.eval(y), &w, &quad).unwrap();
                let want = if m == n { hermite_norm_sq(n, eta) } else { 0.0 };
                let scale = (hermite_norm_sq(m, eta) * hermite_norm_sq(n, eta)).sqrt();
                assert!((ip - want).abs() <= 1e-11 * scale, "m={m} n={n} eta={eta}: {ip}");
            }
        }
    }
}

#[test]
fn ou_eigenfunctions() {
    for eta in [0.5, 1.0, 2.0] {
        for n in 0..=10 {
            let h = hermite_weighted(n, eta);
            let lh = apply_ou(&h, eta);
            let want = h.scale(-(n as f64) / 2.0);
            assert!(lh.max_coeff_diff(&want) <= 1e-12 * (1.0 + h.coeff(0).abs()), "n={n}");
        }
    }
}

#[test]
fn gaussian_characteristic_function() {
    // E[cos(ty)] = e^{-ηt²} for y ~ N(0, 2η)
    for eta in [0.5, 1.0, 2.0] {
        let quad = Quadrature::gauss_hermite(60, eta).unwrap();
        for t in [0.3, 1.0, 1.7] {
            let got = quad.integrate(|y| (t * y).cos());
            assert!((got - (-eta * t * t).exp()).abs() < 1e-13, "eta={eta} t={t}");
        }
        assert!((quad.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn quadrature_nodes_are_symmetric_and_sorted() {
    let q = Quadrature::gauss_hermite(31, 1.5).unwrap();
    assert_eq!(q.exact_degree(), 61);
    for k in 0..31 {
        assert_eq!(q.nodes[k], -q.nodes[30 - k]);
        assert_eq!(q.weights[k], q.weights[30 - k]);
    }
    assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(q.nodes[15], 0.0);
}

#[test]
fn expansion_errors() {
    let w = Weight::new(1.0).unwrap();
    let quad = Quadrature::gauss_hermite(4, 1.0).unwrap();
    let f = Poly::monomial(5, 1.0);
    assert!(matches!(hermite_expand(&f, &w, 4, &quad), Err(Error::DegreeOverflow { .. })));
    assert!(matches!(hermite_expand(&f, &w, 5, &quad), Err(Error::DegreeOverflow { .. })));
    let other = Quadrature::gauss_hermite(10, 2.0).unwrap();
    assert!(matches!(
        hermite_expand(&Poly::constant(1.0), &w, 2, &other),
        Err(Error::WeightMismatch { .. })
    ));
    assert!(Weight::new(0.0).is_err());
    assert!(Quadrature::gauss_hermite(0, 1.0).is_err());
}

proptest! {
    #[test]
    fn expand_reconstruct_round_trip(
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..9),
        eta in 0.3f64..3.0,
    ) {
        let w = Weight::new(eta).unwrap();
        let quad = Quadrature::gauss_hermite(12, eta).unwrap();
        let f = Poly::new(coeffs);
        let c = hermite_expand(&f, &w, 8, &quad).unwrap();
        let back = hermite_reconstruct(&c, eta);
        prop_assert!(back.max_coeff_diff(&f) < 1e-9);
    }

    #[test]
    fn moments_match_closed_form(k in 0usize..16, eta in 0.3f64..3.0) {
        let w = Weight::new(eta).unwrap();
        let quad = Quadrature::gauss_hermite(10, eta).unwrap();
        let got = quad.integrate(|y| y.powi(k as i32));
        let want = w.moment(k);
        let scale = quad.integrate(|y| y.abs().powi(k as i32));
        prop_assert!((got - want).abs() <= 1e-12 * scale.max(1.0));
    }
}

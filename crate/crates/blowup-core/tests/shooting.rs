use blowup_core::dynamics::{ClauseId, SolverConfig};
use blowup_core::dynamics::Engine;
use blowup_core::real::{Dd, Real};
use blowup_core::shooting::*;
use blowup_core::{Error, Params};
use proptest::prelude::*;

fn short_config() -> SolverConfig {
    SolverConfig {
        s0: 20.0,
        s_end: 24.0,
        ds: 0.1,
        y_max: 110.0,
        n_grid: 1025,
        k: 10.0,
        a: 20.0,
        m_trunc: 10,
        quad_order: 60,
        out_every: 1,
    }
}

/// Unstable linear flow: the exit vector is `(x - x*, y - y*)` and capture
/// happens inside a box of half-width `tol`.
fn linear_shot(target: (f64, f64), tol: f64) -> impl FnMut(Dd, Dd, Precision) -> blowup_core::Result<ShotResult> {
    move |x, y, precision| {
        let (dx, dy) = (x.to_f64() - target.0, y.to_f64() - target.1);
        let captured = dx.abs() < tol && dy.abs() < tol;
        let r = dx.abs().max(dy.abs()).max(1e-300);
        let clause = if captured {
            None
        } else if dx.abs() >= dy.abs() {
            Some(ClauseId::Theta(0))
        } else {
            Some(ClauseId::Theta(1))
        };
        Ok(ShotResult {
            d0: x.hi,
            d1: y.hi,
            d0_lo: x.lo,
            d1_lo: y.lo,
            start_s: 0.0,
            exit_s: -r.ln(),
            horizon: -tol.ln(),
            captured,
            exit_clause: clause,
            anomaly: false,
            end_theta: (dx, dy),
            rescaled: (dx, dy),
            transverse: Some(true),
            precision,
        })
    }
}

fn unit_box() -> [Dd; 4] {
    [Dd::from_f64(-2.0), Dd::from_f64(2.0), Dd::from_f64(-2.0), Dd::from_f64(2.0)]
}

#[test]
fn winding_number_of_simple_rings() {
    let square = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    assert_eq!(winding_number(&square), 1);
    let rev: Vec<_> = square.iter().rev().copied().collect();
    assert_eq!(winding_number(&rev), -1);
    let off = [(2.0, 1.0), (3.0, 1.0), (3.0, 2.0), (2.0, 2.0)];
    assert_eq!(winding_number(&off), 0);
    let twice: Vec<_> = (0..16)
        .map(|k| {
            let t = 4.0 * std::f64::consts::PI * k as f64 / 16.0;
            (t.cos(), t.sin())
        })
        .collect();
    assert_eq!(winding_number(&twice), 2);
    assert_eq!(winding_number(&square[..2]), 0);
}

#[test]
fn refine_locates_an_off_lattice_zero() {
    let target = (0.3141592653, -1.2718281828);
    let out = refine(linear_shot(target, 1e-7), unit_box(), &ShootConfig::default(), false).unwrap();
    assert!(out.captured, "{}", out.stop_reason);
    assert!((out.best.d0 - target.0).abs() < 1e-7 && (out.best.d1 - target.1).abs() < 1e-7);
    assert!(out.levels.iter().all(|l| l.phase == Phase::Lattice && l.winding != Some(0)));
    let widths: Vec<f64> = out.levels.iter().map(|l| l.width.0).collect();
    assert!(widths.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn refine_bisects_on_the_parity_line() {
    let target = (-0.00235, 0.0);
    let cfg = ShootConfig {
        dd_width: 1e-9,
        ..ShootConfig::default()
    };
    let out = refine(linear_shot(target, 1e-12), unit_box(), &cfg, true).unwrap();
    assert!(out.captured, "{}", out.stop_reason);
    assert!((out.best.d0 - target.0).abs() < 1e-12);
    assert_eq!(out.best.d1, 0.0);
    assert!(out.levels.iter().any(|l| l.phase == Phase::Bisection));
    assert_eq!(out.best.precision, Precision::DoubleDouble);
}

#[test]
fn refine_rejects_a_box_without_zero() {
    let r = refine(linear_shot((5.0, 5.0), 1e-6), unit_box(), &ShootConfig::default(), false);
    assert!(matches!(r, Err(Error::NoCapture(_))));
}

#[test]
fn refine_stops_at_the_level_limit() {
    let cfg = ShootConfig {
        levels: 3,
        ..ShootConfig::default()
    };
    let out = refine(linear_shot((0.1, 0.2), 1e-12), unit_box(), &cfg, false).unwrap();
    assert!(!out.captured);
    assert_eq!(out.stop_reason, "level limit reached");
}

#[test]
fn shoot_config_validation() {
    assert!(ShootConfig::default().validate().is_ok());
    let bad = [
        ShootConfig { horizon: 0.0, ..ShootConfig::default() },
        ShootConfig { horizon: f64::NAN, ..ShootConfig::default() },
        ShootConfig { levels: 0, ..ShootConfig::default() },
        ShootConfig { boundary_samples: 8, ..ShootConfig::default() },
        ShootConfig { dd_width: -1.0, ..ShootConfig::default() },
        ShootConfig { probe: -1.0, ..ShootConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn large_d0_exits_through_theta0_with_its_sign() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let mut engine = Engine::new(&short_config(), &pr).unwrap();
    for d0 in [2.0f64, -2.0] {
        let r = flow_map(&mut engine, Dd::from_f64(d0), Dd::from_f64(0.0), Precision::Double).unwrap();
        assert!(!r.captured && !r.anomaly);
        assert_eq!(r.exit_clause, Some(ClauseId::Theta(0)));
        assert_eq!(r.end_theta.0.signum(), d0.signum());
        assert!(r.exit_s < 24.0);
    }
}

#[test]
fn symmetric_data_keep_theta1_at_zero() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let mut cfg = short_config();
    cfg.s_end = 22.0;
    let mut engine = Engine::new(&cfg, &pr).unwrap();
    let traj = certificate_run(&mut engine, Dd::from_f64(0.0), Dd::from_f64(0.0), Precision::Double).unwrap();
    assert!(traj.samples.len() > 10);
    for smp in &traj.samples {
        assert!(smp.modes.theta[1].abs() < 1e-10, "s={} {}", smp.s, smp.modes.theta[1]);
    }
}

#[test]
fn exit_map_respects_reflection() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let mut cfg = short_config();
    cfg.s_end = 21.0;
    let mut engine = Engine::new(&cfg, &pr).unwrap();
    let a = flow_map(&mut engine, Dd::from_f64(0.5), Dd::from_f64(0.3), Precision::Double).unwrap();
    let b = flow_map(&mut engine, Dd::from_f64(0.5), Dd::from_f64(-0.3), Precision::Double).unwrap();
    let scale = a.end_theta.0.abs() + a.end_theta.1.abs();
    assert_eq!(a.exit_s, b.exit_s);
    assert_eq!(a.exit_clause, b.exit_clause);
    assert!((a.end_theta.0 - b.end_theta.0).abs() < 1e-12 * scale);
    assert!((a.end_theta.1 + b.end_theta.1).abs() < 1e-12 * scale);
}

#[test]
fn double_double_agrees_with_double() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let mut cfg = short_config();
    cfg.s_end = 21.0;
    let mut engine = Engine::new(&cfg, &pr).unwrap();
    let x = Dd::from_f64(0.01);
    let a = flow_map(&mut engine, x, Dd::from_f64(0.0), Precision::Double).unwrap();
    let b = flow_map(&mut engine, x, Dd::from_f64(0.0), Precision::DoubleDouble).unwrap();
    assert_eq!(b.precision, Precision::DoubleDouble);
    assert!((a.end_theta.0 - b.end_theta.0).abs() < 1e-12 * (1.0 + a.end_theta.0.abs()));
}

#[test]
fn stability_box_and_perturbations() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let (t, a) = stability_box(20.0, 20.0, &pr, 1.0 / 9.0);
    assert!((t - 2.0 * 20.0 * 8.0 / 400.0).abs() < 1e-15);
    assert!((a - 20.0 * 8.0 * 9.0 / 20.0).abs() < 1e-12);
    assert_eq!(Perturbation::zero().eval(0.3), (0.0, 0.0));
    let e = Perturbation { eps0: 1e-3, shape: PerturbationShape::Even };
    assert_eq!(e.eval(2.0), e.eval(-2.0));
    let s = Perturbation { eps0: 1e-3, shape: PerturbationShape::Shifted };
    assert_eq!(s.eval(1.0).0, 1e-3);
    assert_eq!(s.eval(-2.0).1, 5e-4);
}

#[test]
fn stability_initial_state_at_zero_shift_is_the_base() {
    let pr = Params::new(3.0, 3.0, 2.0).unwrap();
    let engine = Engine::new(&short_config(), &pr).unwrap();
    let base = StabilityBase { d0: Dd::from_f64(-2e-3), d1: Dd::from_f64(0.0), sigma0: 20.0 };
    let (u, v, s) = stability_initial_state(&engine, &base, &Perturbation::zero(), 0.0, 0.0);
    let (u0, v0) = trapped_initial_state::<f64>(&engine, base.d0, base.d1);
    assert_eq!(s, 20.0);
    for k in 0..u.len() {
        assert!((u[k] - u0[k]).abs() < 1e-15 && (v[k] - v0[k]).abs() < 1e-15);
    }
    assert!((base.t_hat() - (-20.0f64).exp()).abs() < 1e-30);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn winding_is_invariant_under_rotation_and_scaling(theta in 0.0f64..6.28, r in 0.1f64..10.0, n in 5usize..40) {
        let ring: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let t = theta + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (r * t.cos(), r * t.sin())
            })
            .collect();
        prop_assert_eq!(winding_number(&ring), 1);
        let shifted: Vec<(f64, f64)> = ring.iter().map(|&(x, y)| (x + 3.0 * r, y)).collect();
        prop_assert_eq!(winding_number(&shifted), 0);
    }
}

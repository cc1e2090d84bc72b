use bcaplab::snake::*;
use proptest::prelude::*;

#[test]
fn d6_coefficients_are_linear() {
    let r = series_coefficients(6, 6.0, 200).unwrap();
    for (n, a) in r.coeffs.iter().enumerate() {
        let want = 6.0 * (n + 1) as f64;
        assert!((a - want).abs() <= 1e-10 * want, "a_{n} = {a}");
    }
    // ratio (n+2)/(n+1) → 1, radius s = 1, t = 1
    assert!((r.ratio_limit - 1.0).abs() < 1e-6);
    assert!((r.radius_t - 1.0).abs() < 1e-6);
}

#[test]
fn d6_closed_form_values() {
    let c = RadialSolution::closed_form_d6(50);
    assert!((c.u(2.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((c.u(3.0).unwrap() - 0.09375).abs() < 1e-12);
    let s = RadialSolution::from_series(6, 6.0, 4000).unwrap();
    assert!((s.u(2.0).unwrap() - 2.0 / 3.0).abs() < 1e-6);
    assert!((s.u(3.0).unwrap() - 0.09375).abs() < 1e-6);
    // the series still converges, slowly, close to the boundary
    let t = 1.01;
    assert!((s.u(t).unwrap() - c.u(t).unwrap()).abs() < 1e-6 * c.u(t).unwrap());
}

#[test]
fn a0_search_recovers_six_in_d6() {
    let est = find_a0(6, 1.05, 1000, 1e-6).unwrap();
    assert!((est.a0 - 6.0).abs() < 1e-4, "{est:?}");
    assert!(est.bracket[0] <= 6.0 + 1e-6 && 6.0 - 1e-6 <= est.bracket[1]);
}

#[test]
fn a0_search_and_shooting_agree() {
    for d in [5, 7] {
        let est = find_a0(d, 1.05, 1000, 1e-6).unwrap();
        let sh = shoot_radial(d, &ShootParams::default()).unwrap();
        assert!((est.a0 - sh.a0).abs() < 1e-3, "d={d}: {} vs {}", est.a0, sh.a0);
        let [lo, hi] = sh.bracket.unwrap();
        assert!(lo <= sh.a0 && sh.a0 <= hi && hi - lo < 1e-9);
    }
    let sh = shoot_radial(6, &ShootParams::default()).unwrap();
    assert!((sh.a0 - 6.0).abs() < 1e-6);
    assert!(sh.ode_residual.unwrap() < 1e-6);
}

#[test]
fn series_and_shooting_agree_on_a_range() {
    for d in [5, 6, 7] {
        let est = find_a0(d, 1.05, 1000, 1e-6).unwrap();
        let ser = RadialSolution::from_series(d, est.a0, 3000).unwrap();
        let sh = shoot_radial(d, &ShootParams::default()).unwrap();
        for i in 0..=85 {
            let t = 1.5 + 0.1 * i as f64;
            let (a, b) = (ser.u(t).unwrap(), sh.u(t).unwrap());
            assert!((a - b).abs() < 1e-4 * a, "d={d} t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn integral_formula_reproduces_a0() {
    let c = integral_identity_check(&RadialSolution::closed_form_d6(10), 1e4).unwrap();
    assert!(c.residual < 1e-4, "{c:?}");
    let sh6 = shoot_radial(6, &ShootParams::default()).unwrap();
    assert!(integral_identity_check(&sh6, 1e4).unwrap().residual < 1e-4);
    let sh5 = shoot_radial(5, &ShootParams::default()).unwrap();
    let c5 = integral_identity_check(&sh5, 1e4).unwrap();
    assert!(c5.residual < 1e-3 && c5.tail_bound < 1e-3, "{c5:?}");
}

#[test]
fn normalizer_in_low_dimension() {
    assert_eq!(phi_low_dim(3, 2.0).unwrap(), 8.0);
    assert_eq!(phi_low_dim(1, 3.0).unwrap(), 6.0);
    assert!((phi_low_dim(4, std::f64::consts::E).unwrap() - 2.0 * std::f64::consts::E.powi(2)).abs() < 1e-12);
    assert!(phi_low_dim(5, 2.0).is_err());
    assert!(phi_low_dim(3, 1.0).is_err());
}

#[test]
fn invalid_inputs() {
    assert!(series_coefficients(4, 1.0, 10).is_err());
    assert!(series_coefficients(5, -1.0, 10).is_err());
    assert!(find_a0(5, 0.9, 1000, 1e-6).is_err());
    assert!(RadialSolution::closed_form_d6(5).u(1.0).is_err());
    // a series past its radius reports non-convergence rather than a number
    let s = RadialSolution::from_series(6, 7.0, 200).unwrap();
    assert!(matches!(s.u(1.01), Err(bcaplab::Error::NonConvergence(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn ball_solution_scales(r in 0.2f64..20.0, x in 1.05f64..30.0) {
        let c = RadialSolution::closed_form_d6(10);
        let xn = x * r;
        let v = c.u_ball(r, xn).unwrap();
        prop_assert!((v * r * r - c.u(x).unwrap()).abs() <= 1e-12 * c.u(x).unwrap());
        // u_{B(0,λr)}(λx) = λ^{−2} u_{B(0,r)}(x)
        let w = c.u_ball(2.0 * r, 2.0 * xn).unwrap();
        prop_assert!((4.0 * w - v).abs() <= 1e-12 * v);
    }

    #[test]
    fn homogeneity_of_coefficients(lambda in 0.3f64..3.0, d in 5usize..9) {
        let a = series_coefficients(d, 1.0, 20).unwrap();
        let b = series_coefficients(d, lambda, 20).unwrap();
        for n in 0..=20 {
            let want = a.coeffs[n] * lambda.powi(n as i32 + 1);
            prop_assert!((b.coeffs[n] - want).abs() <= 1e-12 * want);
        }
    }
}

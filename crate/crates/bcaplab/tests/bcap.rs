use bcaplab::bcap::*;
use bcaplab::brw_mc::EscapeConfig;
use bcaplab::field::{solve_all, BoundaryPolicy, SolverOptions};
use bcaplab::lattice::{make_step_law, StepKind, StepLaw};
use bcaplab::offspring::{make_offspring, OffspringKind, OffspringLaw};
use bcaplab::point::{self, from_slice, MAX_D};
use bcaplab::sets::LatticeSet;

fn simple5() -> StepLaw {
    make_step_law(StepKind::Simple, 5, None).unwrap()
}

fn binary() -> OffspringLaw {
    make_offspring(OffspringKind::BinaryCritical, &[]).unwrap()
}

fn solver(r_box: i32) -> Mode {
    Mode::Solver(SolverOptions { r_box, ..Default::default() })
}

#[test]
fn rate_exponent() {
    assert_eq!(rate_alpha(5), 0.125);
    assert_eq!(rate_alpha(6), 0.2);
}

#[test]
fn solver_routes_agree_for_a_point() {
    let (mu, step) = (binary(), simple5());
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let opts = SolverOptions { r_box: 12, ..Default::default() };
    let fs = solve_all(&k, &step, &mu, &opts).unwrap();
    let sum = sum_escape_from(&fs, &mu, &Mode::Solver(opts.clone())).unwrap();
    assert!(sum.value > 0.0 && sum.flags.iter().all(|f| !f.contains("envelope")));
    // the Dirichlet box can only raise escape probabilities
    assert!(sum.high.unwrap() >= sum.value);
    for rho in [1.0, 2.0] {
        let b = LatticeSet::ball(5, rho, &[0; MAX_D]).unwrap();
        let h = harmonic_from(&fs, &b, &mu).unwrap();
        assert!((h.value - sum.value).abs() < 1e-6, "B radius {rho}: {} vs {}", h.value, sum.value);
    }
    let ladder = axis_ladder(&k, &[2, 4, 6, 8, 10]);
    let far = bcap_far_field(&k, &mu, &step, &ladder, &Mode::Solver(opts), 2.0, Some(sum.value)).unwrap();
    for w in far.cauchy.windows(2) {
        assert!(w[1] < w[0], "{:?}", far.cauchy);
    }
    assert!((far.estimate.value - sum.value).abs() < 0.05 * sum.value);
    assert_eq!(far.alpha, 0.125);
    assert!(far.slope.is_some());
}

#[test]
fn translation_invariance() {
    let (mu, step) = (binary(), simple5());
    let a = from_slice(&[3, -2, 0, 7, 1]);
    let k0 = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let ka = k0.translate(&a);
    let s0 = bcap_sum_escape(&k0, &mu, &step, &solver(8)).unwrap();
    let sa = bcap_sum_escape(&ka, &mu, &step, &solver(8)).unwrap();
    assert_eq!(s0.value, sa.value);
    let mc = Mode::Mc(McParams { samples: 300, seed: 9, escape: EscapeConfig::default(), ..Default::default() });
    let m0 = bcap_sum_escape(&k0, &mu, &step, &mc).unwrap();
    let ma = bcap_sum_escape(&ka, &mu, &step, &mc).unwrap();
    assert_eq!(m0.value, ma.value);
    assert_eq!((m0.low, m0.high), (ma.low, ma.high));
}

#[test]
fn capacity_grows_with_the_set() {
    let (mu, step) = (binary(), simple5());
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let k2 = k.union(&LatticeSet::single(5, point::axis(5, 0, 1)).unwrap());
    let k3 = LatticeSet::ball(5, 1.0, &[0; MAX_D]).unwrap();
    let v: Vec<f64> = [&k, &k2, &k3].iter().map(|s| bcap_sum_escape(s, &mu, &step, &solver(8)).unwrap().value).collect();
    assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
    assert!(v[2] < k3.len() as f64);
}

#[test]
fn monte_carlo_and_solver_escape_sums_agree() {
    let (mu, step) = (binary(), simple5());
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let mc = Mode::Mc(McParams { samples: 4000, seed: 3, ..Default::default() });
    let m = bcap_sum_escape(&k, &mu, &step, &mc).unwrap();
    let s = bcap_sum_escape(&k, &mu, &step, &solver(12)).unwrap();
    assert!((m.value - s.value).abs() < 1.5 * m.uncertainty + s.uncertainty, "mc {} ± {} solver {} ± {}", m.value, m.uncertainty, s.value, s.uncertainty);
    assert!(m.low.unwrap() <= s.value && s.value <= m.high.unwrap());
}

#[test]
fn ratio_plateaus_near_half_variance() {
    let step = simple5();
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let ladder = axis_ladder(&k, &[2, 4, 6, 8, 10]);
    let opts = SolverOptions { r_box: 12, ..Default::default() };
    for kind in [OffspringKind::BinaryCritical, OffspringKind::GeometricHalf] {
        let mu = make_offspring(kind, &[]).unwrap();
        let rep = adjoint_ratio_diag(&k, &mu, &step, &ladder, &opts, None).unwrap();
        assert_eq!(rep.target, mu.sigma2() / 2.0);
        for dev in [rep.dev_adj, rep.dev_infinite, rep.dev_minus] {
            assert!(dev < 0.15, "{}: {rep:?}", mu.name());
        }
        assert!((rep.plateau_infinite - rep.plateau_minus).abs() < 0.05 * rep.target);
    }
}

#[test]
fn far_field_rejects_points_too_close() {
    let (mu, step) = (binary(), simple5());
    let k = LatticeSet::ball(5, 2.0, &[0; MAX_D]).unwrap();
    let ladder = axis_ladder(&k, &[3]);
    let r = bcap_far_field(&k, &mu, &step, &ladder, &solver(8), 2.0, None);
    assert!(matches!(r, Err(bcaplab::Error::Budget(_))));
    let opts = SolverOptions { r_box: 8, policy: BoundaryPolicy::DirichletZero, ..Default::default() };
    assert!(bcap_far_field(&k, &mu, &step, &ladder, &Mode::Solver(opts), 0.5, None).is_err());
}

#[test]
fn envelope_flags_large_values() {
    assert_eq!(envelope(5, 0.0, 2.0), 2.0);
    assert_eq!(envelope(6, 3.0, 2.0), 18.0);
}

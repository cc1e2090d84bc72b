use bcaplab::bcap::{bcap_sum_escape, Mode};
use bcaplab::field::SolverOptions;
use bcaplab::lattice::{make_step_law, StepKind};
use bcaplab::offspring::{make_offspring, OffspringKind};
use bcaplab::point::MAX_D;
use bcaplab::scaling_limit::*;
use bcaplab::sets::LatticeSet;
use std::f64::consts::PI;

#[test]
fn simple_walk_constants() {
    assert!((simple_walk_constant(6, 2.0) - PI.powi(3) / 2.0).abs() < 1e-12);
    let step = make_step_law(StepKind::Simple, 6, None).unwrap();
    let mu = make_offspring(OffspringKind::GeometricHalf, &[]).unwrap();
    let t = continuum_target(1.0, &mu, &step, A0Source::for_dim(6).unwrap()).unwrap();
    assert!((t.with_simple_walk_constant.unwrap() - 3.0 * PI.powi(3)).abs() < 1e-10);
    // M_θ = I/6 maps B(0,1) to B(0,√6)
    assert!((t.continuum_radius - 6f64.sqrt()).abs() < 1e-14);
    assert!((t.value - t.c_theta * 6.0 * 6.0).abs() < 1e-9);
}

#[test]
fn lazy_walk_rescales_c_theta_by_the_determinant() {
    // halving M_θ multiplies c_θ by 2^{−d/2}
    let mu = make_offspring(OffspringKind::BinaryCritical, &[]).unwrap();
    let s = make_step_law(StepKind::Simple, 5, None).unwrap();
    let lazy = make_step_law(StepKind::LazySimple, 5, None).unwrap();
    let ratio = c_theta(&mu, &lazy).unwrap().value / c_theta(&mu, &s).unwrap().value;
    let m_ratio = lazy.isotropic_scale().unwrap() / s.isotropic_scale().unwrap();
    assert!((ratio - m_ratio.powf(2.5)).abs() < 1e-12);
}

#[test]
fn target_scales_with_the_radius() {
    let step = make_step_law(StepKind::Simple, 5, None).unwrap();
    let mu = make_offspring(OffspringKind::BinaryCritical, &[]).unwrap();
    let a0 = A0Source::for_dim(5).unwrap();
    assert!(a0.bracket[1] - a0.bracket[0] < 1e-6);
    let t1 = continuum_target(1.0, &mu, &step, a0.clone()).unwrap();
    let t2 = continuum_target(2.0, &mu, &step, a0).unwrap();
    assert!((t2.value / t1.value - 2.0).abs() < 1e-12);
}

#[test]
fn anisotropic_walk_has_no_target() {
    let custom = vec![(vec![1, 0, 0, 0, 0], 0.3), (vec![-1, 0, 0, 0, 0], 0.3)]
        .into_iter()
        .chain((1..5).flat_map(|i| {
            let mut e = vec![0; 5];
            e[i] = 1;
            let mut f = vec![0; 5];
            f[i] = -1;
            [(e, 0.05), (f, 0.05)]
        }))
        .collect::<Vec<_>>();
    let step = make_step_law(StepKind::Custom, 5, Some(&custom)).unwrap();
    let mu = make_offspring(OffspringKind::BinaryCritical, &[]).unwrap();
    let r = continuum_target(1.0, &mu, &step, A0Source::for_dim(5).unwrap());
    assert!(matches!(r, Err(bcaplab::Error::Validation(_))));
}

#[test]
fn short_ladder_properties() {
    let step = make_step_law(StepKind::Simple, 5, None).unwrap();
    let mu = make_offspring(OffspringKind::BinaryCritical, &[]).unwrap();
    let target = continuum_target(1.0, &mu, &step, A0Source::for_dim(5).unwrap()).unwrap();
    let method = ScalingMethod::default();
    let run = run_scaling(1.0, &[1, 2], &mu, &step, &method, Some(target)).unwrap();
    assert!(run.positive() && run.within_envelope());
    assert_eq!(run.rows.len(), 2);
    // n = 1 is plain Bcap(K) with the same box rule
    let k = LatticeSet::ball(5, 1.0, &[0; MAX_D]).unwrap();
    let plain = bcap_sum_escape(&k, &mu, &step, &Mode::Solver(SolverOptions { r_box: 8, ..Default::default() })).unwrap();
    assert_eq!(run.rows[0].rescaled, plain.value);
    assert!(run.rows[1].cauchy_diff.is_some() && run.rows[0].cauchy_diff.is_none());
    assert!(run.warnings.iter().any(|w| w.contains("sphere")));
}

#[test]
fn infeasible_points_are_skipped() {
    let step = make_step_law(StepKind::Simple, 5, None).unwrap();
    let mu = make_offspring(OffspringKind::BinaryCritical, &[]).unwrap();
    let method = ScalingMethod::Solver { options: SolverOptions::default(), box_factor: 3.0, min_box: 6, max_box: 7 };
    let run = run_scaling(1.0, &[2, 3], &mu, &step, &method, None).unwrap();
    assert_eq!(run.rows.len(), 1);
    assert_eq!(run.skipped.len(), 1);
    assert_eq!(run.skipped[0].n, 3);
    assert!(run_scaling(1.0, &[2, 2], &mu, &step, &method, None).is_err());
}

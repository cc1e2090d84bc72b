use bcaplab::brw_mc::{escape_probability, hit_probability, EscapeConfig, McBudget, RootKind};
use bcaplab::field::*;
use bcaplab::lattice::{make_step_law, StepKind, StepLaw};
use bcaplab::offspring::{make_offspring, OffspringKind, OffspringLaw};
use bcaplab::point::{self, from_slice, Point, MAX_D};
use bcaplab::sets::LatticeSet;

fn simple5() -> StepLaw {
    make_step_law(StepKind::Simple, 5, None).unwrap()
}

fn binary() -> OffspringLaw {
    make_offspring(OffspringKind::BinaryCritical, &[]).unwrap()
}

fn opts(r_box: i32, policy: BoundaryPolicy) -> SolverOptions {
    SolverOptions { r_box, policy, ..Default::default() }
}

fn e(i: usize, n: i32) -> Point {
    point::axis(5, i, n)
}

#[test]
fn probability_fields_and_boundary_condition() {
    let k = LatticeSet::ball(5, 1.0, &[0; MAX_D]).unwrap();
    for policy in [BoundaryPolicy::DirichletZero, BoundaryPolicy::MatchedAsymptotic] {
        let fs = solve_all(&k, &simple5(), &binary(), &opts(8, policy)).unwrap();
        let g = fs.geometry();
        for f in [&fs.p_c, &fs.p_adj, &fs.p_minus, &fs.p_i] {
            assert!(f.values.iter().all(|v| (0.0..=1.0).contains(v)), "{:?}", f.quantity);
        }
        for (i, &in_k) in g.in_k.iter().enumerate() {
            if in_k {
                assert_eq!(fs.p_c.values[i], 1.0);
                assert_eq!(fs.p_adj.values[i], 1.0);
            }
        }
        assert!(fs.p_c.residual < 1e-11, "{:e}", fs.p_c.residual);
        assert_eq!(fs.p_c.policy(), policy);
    }
}

#[test]
fn exact_identities_on_small_boxes() {
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let b = LatticeSet::ball(5, 1.0, &[0; MAX_D]).unwrap();
    for policy in [BoundaryPolicy::DirichletZero, BoundaryPolicy::MatchedAsymptotic] {
        let fs = solve_all(&k, &simple5(), &binary(), &opts(8, policy)).unwrap();
        let rep = identity_report(&fs, &b, &[e(0, 3), e(0, 5)]).unwrap();
        for row in &rep.rows {
            assert!(row.pass, "{} {:?}: {:e}", row.name, policy, row.value);
        }
        assert!((rep.bcap_sum - rep.bcap_harmonic).abs() < 1e-10);
        for row in inequality_report(&fs, &binary()) {
            assert!(row.pass, "{} {:?}: {:e}", row.name, policy, row.value);
        }
    }
}

#[test]
fn orbit_reduction_matches_full_box() {
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    for policy in [BoundaryPolicy::DirichletZero, BoundaryPolicy::MatchedAsymptotic] {
        let reduced = solve_all(&k, &simple5(), &binary(), &opts(6, policy)).unwrap();
        let full = solve_all(&k, &simple5(), &binary(), &SolverOptions { symmetry: false, ..opts(6, policy) }).unwrap();
        assert!(reduced.geometry().len() * 100 < full.geometry().len());
        let gf = full.geometry();
        let mut worst = 0.0f64;
        for i in 0..gf.len() {
            let x = gf.domain.point(i);
            for (a, b) in [(&reduced.p_c, &full.p_c), (&reduced.p_i, &full.p_i), (&reduced.p_minus, &full.p_minus)] {
                worst = worst.max((a.value_at(&x) - b.values[i]).abs());
            }
        }
        assert!(worst < 1e-12, "{policy:?}: {worst:e}");
    }
}

#[test]
fn geometric_half_adjoint_equals_critical_update() {
    let mu = make_offspring(OffspringKind::GeometricHalf, &[]).unwrap();
    let adj = mu.adjoint();
    for s in [0.0, 0.1, 0.37, 0.5, 0.9, 0.999] {
        assert!((adj.f(s) - mu.f(s)).abs() < 1e-15);
    }
    let k = LatticeSet::ball(5, 1.0, &[0; MAX_D]).unwrap();
    let fs = solve_all(&k, &simple5(), &mu, &opts(8, BoundaryPolicy::MatchedAsymptotic)).unwrap();
    let gap = fs.p_c.values.iter().zip(&fs.p_adj.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 10.0 * fs.p_c.residual.max(1e-15), "{gap:e}");
    for row in inequality_report(&fs, &mu) {
        assert!(row.pass, "{}: {:e}", row.name, row.value);
    }
}

#[test]
fn monte_carlo_agrees_at_probe_points() {
    let (mu, step) = (binary(), simple5());
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let fs = solve_all(&k, &step, &mu, &opts(16, BoundaryPolicy::MatchedAsymptotic)).unwrap();
    let probes = [e(0, 1), e(0, 2), point::add(&e(0, 1), &e(1, 1)), e(0, 3), from_slice(&[2, 1, 1, 0, 0])];
    for (j, x) in probes.iter().enumerate() {
        let mc = hit_probability(RootKind::Critical, &k, x, &mu, &step, 20_000, McBudget::default(), 40 + j as u64).unwrap();
        let sol = fs.p_c.value_at(x);
        assert!((mc.p_hat - sol).abs() < 1.5 * mc.ci_half, "p_c at {:?}: mc {} ± {} solver {sol}", mc.x, mc.p_hat, mc.ci_half);
    }
    for (j, x) in [[0; MAX_D], e(0, 1)].iter().enumerate() {
        let mc = escape_probability(&k, x, &mu, &step, 3000, &EscapeConfig::default(), McBudget::default(), 70 + j as u64).unwrap();
        let sol = 1.0 - fs.p_minus.value_at(x);
        assert!(mc.low - mc.ci_half <= sol && sol <= mc.high + mc.ci_half, "e_K at {:?}: [{}, {}] solver {sol}", mc.x, mc.low, mc.high);
    }
}

#[test]
fn escape_is_positive_somewhere_on_k() {
    let k = LatticeSet::ball(5, 1.5, &[0; MAX_D]).unwrap();
    let fs = solve_all(&k, &simple5(), &binary(), &opts(8, BoundaryPolicy::DirichletZero)).unwrap();
    let esc = fs.escape();
    assert_eq!(esc.len(), k.len());
    assert!(esc.iter().any(|v| v.e_k > 0.01));
    assert!(esc.iter().all(|v| v.e_k >= 0.0));
}

#[test]
fn killed_green_defect_shrinks_with_distance() {
    let k = LatticeSet::ball(5, 1.0, &[0; MAX_D]).unwrap();
    let fs = solve_all(&k, &simple5(), &binary(), &opts(12, BoundaryPolicy::MatchedAsymptotic)).unwrap();
    let rows = green_defect_trend(&fs.p_adj, 1.0, &[2.0, 4.0, 8.0]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].max_defect <= w[0].max_defect, "{rows:?}");
    }
    assert!(rows.iter().all(|r| r.min_defect >= 0.0 && r.max_defect <= 1.0));
}

#[test]
fn geometry_validation() {
    let k = LatticeSet::ball(5, 3.0, &[0; MAX_D]).unwrap();
    assert!(Geometry::new(&k, &simple5(), &opts(4, BoundaryPolicy::DirichletZero)).is_err());
    let step3 = make_step_law(StepKind::Simple, 3, None).unwrap();
    let k3 = LatticeSet::single(3, [0; MAX_D]).unwrap();
    assert!(Geometry::new(&k3, &step3, &opts(6, BoundaryPolicy::MatchedAsymptotic)).is_err());
    assert!(Geometry::new(&k3, &step3, &opts(6, BoundaryPolicy::DirichletZero)).is_ok());
}

#[test]
fn csv_has_one_row_per_orbit() {
    let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
    let fs = solve_all(&k, &simple5(), &binary(), &opts(5, BoundaryPolicy::DirichletZero)).unwrap();
    let mut buf = Vec::new();
    fs.p_c.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), fs.geometry().len() + 1);
    assert!(text.starts_with("x1,x2,x3,x4,x5,orbit_size,p_c"));
}

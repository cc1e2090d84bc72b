use bcaplab::lattice::{
    c_g_constant, green_asymptotic, make_step_law, midpoint_green, second_order_kernel, GreenMethod, GreenTable,
    LaplaceKernel, StepKind,
};
use bcaplab::point::{axis, from_slice, MAX_D};

#[test]
fn fourier_and_neumann_agree_at_origin() {
    let law = make_step_law(StepKind::Simple, 5, None).unwrap();
    let tol = 1e-7;
    let f = GreenTable::build(&law, 3, GreenMethod::Fourier, tol).unwrap();
    let n = GreenTable::build(&law, 3, GreenMethod::Neumann, tol).unwrap();
    let origin = [0; MAX_D];
    let (gf, gn) = (f.get(&origin).unwrap(), n.get(&origin).unwrap());
    println!("fourier {gf:.12} neumann {gn:.12}");
    assert!((gf - gn).abs() < 1e-6);
    let (lo, hi) = n.bracket().unwrap();
    assert!(lo[0] <= gf && gf <= hi[0]);
    for (a, b) in f.values().iter().zip(n.values()) {
        assert!((a - b).abs() < 2e-6, "{a} vs {b}");
    }
}

#[test]
fn table_invariants() {
    let law = make_step_law(StepKind::Simple, 5, None).unwrap();
    let t = GreenTable::build(&law, 12, GreenMethod::Fourier, 1e-10).unwrap();
    assert!(t.get(&[0; MAX_D]).unwrap() >= 1.0);
    assert!(t.values().iter().all(|&v| v > 0.0));
    let x = from_slice(&[3, -1, 2, 0, 5]);
    let mx = x.map(|c| -c);
    assert_eq!(t.get(&x), t.get(&mx));
    let res = t.harmonicity_residual();
    assert!(res < 1e-9, "harmonicity residual {res:e}");
}

#[test]
fn asymptotic_ratio_simple_walk() {
    let law = make_step_law(StepKind::Simple, 5, None).unwrap();
    let k = LaplaceKernel::new(&law, 40).unwrap();
    let norm = law.theta_norm();
    let mut last = f64::INFINITY;
    for r in [10, 15, 20, 30, 40] {
        let x = axis(5, 0, r);
        let ratio = k.g(&x).unwrap() / green_asymptotic(&law, &norm, &x);
        let rr = r as f64;
        assert!(ratio >= 1.0 - 5.0 / rr && ratio <= 1.0 + 5.0 / rr, "r={r} ratio={ratio}");
        assert!((ratio - 1.0).abs() <= last);
        last = (ratio - 1.0).abs();
    }
    // off-axis direction
    let x = from_slice(&[12, 12, 12, 0, 0]);
    let ratio = k.g(&x).unwrap() / green_asymptotic(&law, &norm, &x);
    assert!((ratio - 1.0).abs() < 5.0 / 20.8);
}

#[test]
fn axis_custom_law_harmonic() {
    let mut s = Vec::new();
    for i in 0..5 {
        for sg in [1, -1] {
            let mut v = vec![0; 5];
            v[i] = sg;
            s.push((v, 3.0 / 40.0));
        }
    }
    s.push((vec![2, 0, 0, 0, 0], 0.125));
    s.push((vec![-2, 0, 0, 0, 0], 0.125));
    let law = make_step_law(StepKind::Custom, 5, Some(&s)).unwrap();
    let t = GreenTable::build(&law, 8, GreenMethod::Fourier, 1e-10).unwrap();
    assert!(t.harmonicity_residual() < 1e-9);
    let lazy = make_step_law(StepKind::LazySimple, 5, None).unwrap();
    let t = GreenTable::build(&lazy, 6, GreenMethod::Fourier, 1e-10).unwrap();
    assert!(t.harmonicity_residual() < 1e-9);
    // lazy walk spends twice as long at each site
    let simple = LaplaceKernel::new(&make_step_law(StepKind::Simple, 5, None).unwrap(), 4).unwrap();
    let x = from_slice(&[1, 2, 0, 0, 0]);
    assert!((t.get(&x).unwrap() - 2.0 * simple.g(&x).unwrap()).abs() < 1e-10);
}

#[test]
fn midpoint_fallback_matches_spectral() {
    let law = make_step_law(StepKind::Simple, 5, None).unwrap();
    let k = LaplaceKernel::new(&law, 2).unwrap();
    for x in [[0; MAX_D], axis(5, 0, 1)] {
        let m = midpoint_green(&law, &x, 1e-6, 30).unwrap();
        let s = k.g(&x).unwrap();
        assert!((m - s).abs() < 2e-4, "{m} vs {s}");
    }
}

#[test]
fn second_order_convolution_matches_spectral() {
    let law = make_step_law(StepKind::Simple, 5, None).unwrap();
    let t = GreenTable::build(&law, 24, GreenMethod::Fourier, 1e-10).unwrap();
    let k = LaplaceKernel::new(&law, 24).unwrap();
    for x in [[0; MAX_D], axis(5, 0, 3), from_slice(&[2, 1, 0, 0, 0])] {
        let conv = second_order_kernel(&t, &x, 1e-2).unwrap();
        let spec = k.big_g(&x).unwrap();
        println!("x={:?} conv={} tail={} spec={}", &x[..5], conv.value, conv.tail, spec);
        assert!((conv.value - spec).abs() < 2.0 * conv.tail_uncertainty + 1e-6);
        let mx = x.map(|c| -c);
        assert!((second_order_kernel(&t, &mx, 1e-2).unwrap().value - conv.value).abs() < 1e-12);
    }
}

#[test]
fn second_order_kernel_decay() {
    let law = make_step_law(StepKind::Simple, 5, None).unwrap();
    let k = LaplaceKernel::new(&law, 40).unwrap();
    let vals: Vec<f64> = (10..=40).step_by(5).map(|r| k.big_g(&axis(5, 0, r)).unwrap() * r as f64).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo > 0.0 && hi / lo < 1.5, "{vals:?}");
}

#[test]
fn table_roundtrip() {
    let law = make_step_law(StepKind::Simple, 5, None).unwrap();
    let t = GreenTable::build(&law, 4, GreenMethod::Fourier, 1e-10).unwrap();
    let mut buf = Vec::new();
    t.write(&mut buf).unwrap();
    let back = GreenTable::read(&law, std::io::Cursor::new(buf)).unwrap();
    assert_eq!(back.values(), t.values());
    let other = make_step_law(StepKind::LazySimple, 5, None).unwrap();
    let mut buf = Vec::new();
    t.write(&mut buf).unwrap();
    assert!(GreenTable::read(&other, std::io::Cursor::new(buf)).is_err());
    assert!(c_g_constant(&law).unwrap() > 0.0);
}

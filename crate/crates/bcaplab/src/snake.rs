//! Radial solutions of Δu = 4u² outside the unit ball: the power series in
//! s = t^{−(d−4)}, the search for the maximal leading coefficient a0, inward
//! shooting, the d = 6 closed form, and the integral formula for a0.

use crate::error::{invalid, Error, Result};
use crate::quad;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use twofloat::TwoFloat;

pub fn delta(d: usize) -> f64 {
    (d as f64 - 4.0) / (d as f64 - 2.0)
}

fn check_dim(d: usize) -> Result<()> {
    if !(5..=20).contains(&d) {
        return invalid(format!("snake radial solutions need 5 <= d <= 20, got {d}"));
    }
    Ok(())
}

/// a_n = 4/(nδ(nδ+1))·(d−2)^{−2}·Σ_{k<n} a_k a_{n−k−1}, in double-double arithmetic.
fn recursion(d: usize, a0: f64, n: usize) -> Result<Vec<TwoFloat>> {
    let dl = delta(d);
    let inv = 1.0 / ((d - 2) * (d - 2)) as f64;
    let mut a = Vec::with_capacity(n + 1);
    a.push(TwoFloat::from_f64(a0));
    for m in 1..=n {
        let mut s = TwoFloat::from_f64(0.0);
        for k in 0..m {
            s += a[k] * a[m - k - 1];
        }
        let md = m as f64 * dl;
        let c = TwoFloat::from_f64(4.0 * inv) / (TwoFloat::new_mul(md, md) + md);
        let v = c * s;
        if !v.hi().is_finite() {
            return Err(Error::NonConvergence(format!(
                "series coefficients overflow at n = {m}: the series diverges before t = 1 + ε"
            )));
        }
        a.push(v);
    }
    Ok(a)
}

/// Least-squares fit r_n ≈ L + c1/n + c2/n² over n in [lo, hi]; returns L.
fn domb_sykes(a: &[TwoFloat], lo: usize, hi: usize) -> f64 {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for n in lo..=hi {
        let r = f64::from(a[n] / a[n - 1]);
        let x = 1.0 / n as f64;
        let row = nalgebra::Vector3::new(1.0, x, x * x);
        ata += row * row.transpose();
        atb += row * r;
    }
    ata.lu().solve(&atb).map(|c| c[0]).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub d: usize,
    pub a0: f64,
    pub coeffs: Vec<f64>,
    /// Extrapolated lim a_n/a_{n−1}.
    pub ratio_limit: f64,
    /// Radius of convergence in s = t^{−(d−4)}, and the matching t.
    pub radius_s: f64,
    pub radius_t: f64,
}

pub fn series_coefficients(d: usize, a0: f64, n: usize) -> Result<SeriesReport> {
    check_dim(d)?;
    if !(a0 > 0.0) {
        return invalid("a0 must be positive");
    }
    let a = recursion(d, a0, n)?;
    let ratio_limit = if n >= 16 { domb_sykes(&a, 3 * n / 4, n) } else { f64::NAN };
    let radius_s = 1.0 / ratio_limit;
    Ok(SeriesReport {
        d,
        a0,
        coeffs: a.iter().map(|v| f64::from(*v)).collect(),
        ratio_limit,
        radius_s,
        radius_t: radius_s.powf(-1.0 / (d as f64 - 4.0)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct A0Estimate {
    pub d: usize,
    pub a0: f64,
    pub bracket: [f64; 2],
    pub t_probe: f64,
    pub terms: usize,
    /// Extrapolated coefficient ratio at the reference a.
    pub ratio_limit: f64,
    /// Change of the extrapolated ratio between the last N/4 and last N/8 terms.
    pub fit_spread: f64,
    pub bisections: usize,
}

/// Bisection for the largest a0 whose series converges for every t > 1.
///
/// The series converges at t_probe iff (a/a_ref)·L·s_probe < 1, with L the
/// extrapolated coefficient ratio at a_ref. Homogeneity a_n(λa) = λ^{n+1}a_n(a)
/// maps the probe threshold back to s = 1.
pub fn find_a0(d: usize, t_probe: f64, n: usize, tol: f64) -> Result<A0Estimate> {
    check_dim(d)?;
    if !(t_probe > 1.0) || n < 64 || !(tol > 0.0) {
        return invalid("find_a0 needs t_probe > 1, at least 64 terms and tol > 0");
    }
    let s_probe = t_probe.powf(-(d as f64 - 4.0));
    // scale so that the long run neither overflows nor underflows
    let rough = recursion(d, 1.0, 48)?;
    let a_ref = 1.0 / domb_sykes(&rough, 32, 48);
    let a = recursion(d, a_ref, n)?;
    let l = domb_sykes(&a, 3 * n / 4, n);
    let spread = (l - domb_sykes(&a, 7 * n / 8, n)).abs();
    let level = |x: f64| x / a_ref * l * s_probe;
    let mut lo = 0.0;
    let mut hi = a_ref;
    while level(hi) < 1.0 {
        hi *= 2.0;
    }
    let mut it = 0;
    let mut conclusive = true;
    while hi - lo > 0.25 * tol / s_probe && it < 200 {
        let mid = 0.5 * (lo + hi);
        let v = level(mid);
        if (v - 1.0).abs() <= spread / l {
            conclusive = false;
            break;
        }
        if v < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    let bracket = [lo * s_probe, hi * s_probe];
    if !conclusive && bracket[1] - bracket[0] > tol {
        return Err(Error::NonConvergence(format!(
            "convergence classification inconclusive with {n} terms; bracket [{:.10}, {:.10}]",
            bracket[0], bracket[1]
        )));
    }
    Ok(A0Estimate {
        d,
        a0: 0.5 * (bracket[0] + bracket[1]),
        bracket,
        t_probe,
        terms: n,
        ratio_limit: l,
        fit_spread: spread,
        bisections: it,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialMethod {
    Series,
    Shooting,
    ClosedFormD6,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Node {
    t: f64,
    u: f64,
    up: f64,
    upp: f64,
}

/// The maximal radial solution u on (1, ∞), u_{B(0,r)}(x) = r^{−2}u(|x|/r).
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub d: usize,
    pub a0: f64,
    pub delta: f64,
    pub method: RadialMethod,
    /// Series coefficients a_0..a_N.
    pub coeffs: Vec<f64>,
    /// Shooting: a with blow-up beyond 1 (lo) and before 1 (hi).
    pub bracket: Option<[f64; 2]>,
    /// Series evaluation is used for t ≥ series_from.
    pub series_from: f64,
    /// Scaled ODE residual of the integrated trajectory.
    pub ode_residual: Option<f64>,
    #[serde(skip)]
    dense: Vec<Node>,
}

impl RadialSolution {
    pub fn closed_form_d6(terms: usize) -> RadialSolution {
        RadialSolution {
            d: 6,
            a0: 6.0,
            delta: 0.5,
            method: RadialMethod::ClosedFormD6,
            coeffs: (0..=terms).map(|n| 6.0 * (n + 1) as f64).collect(),
            bracket: None,
            series_from: 1.0,
            ode_residual: None,
            dense: Vec::new(),
        }
    }

    pub fn from_series(d: usize, a0: f64, terms: usize) -> Result<RadialSolution> {
        let rep = series_coefficients(d, a0, terms)?;
        Ok(RadialSolution {
            d,
            a0,
            delta: delta(d),
            method: RadialMethod::Series,
            coeffs: rep.coeffs,
            bracket: None,
            series_from: 1.0,
            ode_residual: None,
            dense: Vec::new(),
        })
    }

    /// Smallest t at which `u` is available.
    pub fn t_min(&self) -> f64 {
        match self.method {
            RadialMethod::Shooting => self.dense.last().map(|n| n.t).unwrap_or(self.series_from),
            _ => 1.0,
        }
    }

    pub fn u(&self, t: f64) -> Result<f64> {
        if !(t > 1.0) {
            return invalid("u is defined for t > 1");
        }
        if self.method == RadialMethod::ClosedFormD6 {
            return Ok(6.0 / (t * t - 1.0).powi(2));
        }
        if t >= self.series_from {
            return self.series_value(t);
        }
        self.dense_value(t)
    }

    /// r^{−2}·u(|x|/r).
    pub fn u_ball(&self, r: f64, x_norm: f64) -> Result<f64> {
        if !(r > 0.0) {
            return invalid("ball radius must be positive");
        }
        Ok(self.u(x_norm / r)? / (r * r))
    }

    fn series_value(&self, t: f64) -> Result<f64> {
        let s = t.powf(-(self.d as f64 - 4.0));
        let mut sum = 0.0;
        let mut p = 1.0;
        for (n, a) in self.coeffs.iter().enumerate() {
            let term = a * p;
            sum += term;
            if n > 4 && term < 1e-17 * sum && self.coeffs[n - 1] * p / s < 1e-16 * sum {
                return Ok(t.powf(2.0 - self.d as f64) * sum);
            }
            p *= s;
        }
        Err(Error::NonConvergence(format!(
            "series with {} terms has not converged at t = {t}",
            self.coeffs.len()
        )))
    }

    fn dense_value(&self, t: f64) -> Result<f64> {
        let nodes = &self.dense;
        if nodes.is_empty() || t < nodes.last().unwrap().t || t > nodes[0].t {
            return invalid(format!("t = {t} lies outside the integrated range"));
        }
        // nodes run from t_far down towards 1
        let j = nodes.partition_point(|n| n.t > t).max(1);
        let (a, b) = (nodes[j - 1], nodes[j]);
        Ok(hermite(a, b, t).0)
    }
}

/// Cubic Hermite values of (u, u') between two nodes.
fn hermite(a: Node, b: Node, t: f64) -> (f64, f64) {
    let h = b.t - a.t;
    let x = (t - a.t) / h;
    let (x2, x3) = (x * x, x * x * x);
    let u = (2.0 * x3 - 3.0 * x2 + 1.0) * a.u
        + (x3 - 2.0 * x2 + x) * h * a.up
        + (-2.0 * x3 + 3.0 * x2) * b.u
        + (x3 - x2) * h * b.up;
    let up = (2.0 * x3 - 3.0 * x2 + 1.0) * a.up
        + (x3 - 2.0 * x2 + x) * h * a.upp
        + (-2.0 * x3 + 3.0 * x2) * b.up
        + (x3 - x2) * h * b.upp;
    (u, up)
}

#[derive(Debug, Clone, Serialize)]
#[serde(default)]
pub struct ShootParams {
    pub t_far: f64,
    pub rtol: f64,
    /// u level that counts as blow-up.
    pub blowup: f64,
    /// Bisection stops at this relative bracket width.
    pub a_rtol: f64,
    pub series_terms: usize,
}

impl Default for ShootParams {
    fn default() -> Self {
        ShootParams { t_far: 8.0, rtol: 1e-12, blowup: 1e8, a_rtol: 1e-13, series_terms: 400 }
    }
}

impl<'de> serde::Deserialize<'de> for ShootParams {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(default)]
        struct Raw {
            t_far: f64,
            rtol: f64,
            blowup: f64,
            a_rtol: f64,
            series_terms: usize,
        }
        impl Default for Raw {
            fn default() -> Self {
                let p = ShootParams::default();
                Raw { t_far: p.t_far, rtol: p.rtol, blowup: p.blowup, a_rtol: p.a_rtol, series_terms: p.series_terms }
            }
        }
        let r = Raw::deserialize(de)?;
        Ok(ShootParams { t_far: r.t_far, rtol: r.rtol, blowup: r.blowup, a_rtol: r.a_rtol, series_terms: r.series_terms })
    }
}

enum Outcome {
    /// Estimated blow-up point.
    BlowUp(f64),
    /// Reached the lower end without blowing up.
    Finite,
}

fn rhs(d: usize, t: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], 4.0 * y[0] * y[0] - (d as f64 - 1.0) / t * y[1]]
}

/// Dormand–Prince 5(4) from (t0, y0) towards t_end < t0, stopping when u exceeds `blowup`.
fn integrate(d: usize, t0: f64, y0: [f64; 2], t_end: f64, rtol: f64, blowup: f64, keep: bool) -> Result<(Outcome, Vec<Node>)> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut t = t0;
    let mut y = y0;
    let mut h = -(t0 - t_end).min(1e-3 * t0);
    let mut k = [[0.0; 2]; 7];
    k[0] = rhs(d, t, y);
    let mut nodes = Vec::new();
    if keep {
        nodes.push(Node { t, u: y[0], up: y[1], upp: k[0][1] });
    }
    while t > t_end {
        if t + h < t_end {
            h = t_end - t;
        }
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            k[s] = rhs(d, t + C[s] * h, ys);
        }
        let mut yn = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            yn[0] += h * A[6][j] * kj[0];
            yn[1] += h * A[6][j] * kj[1];
        }
        let mut err = 0.0f64;
        for i in 0..2 {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let sc = 1e-300 + rtol * y[i].abs().max(yn[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / 2.0).sqrt();
        if err <= 1.0 && yn[0].is_finite() {
            t += h;
            y = yn;
            k[0] = k[6];
            if keep {
                nodes.push(Node { t, u: y[0], up: y[1], upp: k[0][1] });
            }
            if y[0] > blowup {
                let tau0 = (1.5 / y[0]).sqrt();
                let tau = tau0 * (1.0 - (d as f64 - 1.0) * tau0 / (10.0 * t));
                return Ok((Outcome::BlowUp(t - tau), nodes));
            }
        }
        let fac = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
        h *= fac.clamp(0.2, 5.0);
        if h.abs() < 1e-15 * t {
            return Err(Error::NonConvergence(format!("step size underflow at t = {t} before classification")));
        }
    }
    Ok((Outcome::Finite, nodes))
}

/// Series coefficients with a0 = 1, so that a_n(a) = a^{n+1}·b_n.
fn unit_series(d: usize, terms: usize) -> Result<Vec<f64>> {
    Ok(recursion(d, 1.0, terms)?.iter().map(|v| f64::from(*v)).collect())
}

/// (u, u') at t from the series with leading coefficient a.
fn series_state(d: usize, b: &[f64], a: f64, t: f64) -> [f64; 2] {
    let m = d as f64 - 4.0;
    let s = t.powf(-m);
    let (mut u, mut up) = (0.0, 0.0);
    let mut p = a;
    for (n, bn) in b.iter().enumerate() {
        let c = bn * p;
        let e = 2.0 - d as f64 - n as f64 * m;
        let term = c * s.powi(n as i32);
        u += term;
        up += e * term;
        p *= a;
        if term.abs() < 1e-18 * u.abs() && n > 4 {
            break;
        }
    }
    let tp = t.powf(2.0 - d as f64);
    [tp * u, tp * up / t]
}

/// Inward shooting: the trial a sets the decaying data at t_far; bisection on
/// whether the trajectory blows up before or after t = 1.
pub fn shoot_radial(d: usize, params: &ShootParams) -> Result<RadialSolution> {
    check_dim(d)?;
    if !(params.t_far >= 2.0 && params.rtol > 0.0 && params.blowup > 1e3) {
        return invalid("shooting needs t_far >= 2, rtol > 0 and blowup > 1e3");
    }
    let b = unit_series(d, 200)?;
    let run = |a: f64, keep: bool| {
        let y0 = series_state(d, &b, a, params.t_far);
        integrate(d, params.t_far, y0, 0.5, params.rtol, params.blowup, keep)
    };
    let blows_early = |a: f64| -> Result<bool> {
        Ok(match run(a, false)?.0 {
            Outcome::BlowUp(tb) => tb > 1.0,
            Outcome::Finite => false,
        })
    };
    let mut lo = 1.0;
    while blows_early(lo)? {
        lo *= 0.5;
        if lo < 1e-6 {
            return Err(Error::NonConvergence("no trial a stays finite down to t = 1".into()));
        }
    }
    let mut hi = 2.0 * lo;
    while !blows_early(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NonConvergence("no trial a blows up before t = 1".into()));
        }
    }
    while hi - lo > params.a_rtol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if blows_early(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a0 = 0.5 * (lo + hi);
    let (_, dense) = run(a0, true)?;
    let mut coeffs = Vec::with_capacity(params.series_terms + 1);
    let mut p = a0;
    let full = unit_series(d, params.series_terms)?;
    for bn in &full {
        coeffs.push(bn * p);
        p *= a0;
    }
    let mut sol = RadialSolution {
        d,
        a0,
        delta: delta(d),
        method: RadialMethod::Shooting,
        coeffs,
        bracket: Some([lo, hi]),
        series_from: params.t_far,
        ode_residual: None,
        dense: dense.into_iter().filter(|n| n.t > 1.0).collect(),
    };
    sol.ode_residual = Some(ode_residual(&sol, 1.1));
    Ok(sol)
}

/// Max over integration steps above `t_lo` of |Δu' − ∫(4u² − (d−1)u'/t)| relative to ∫|·|.
pub fn ode_residual(sol: &RadialSolution, t_lo: f64) -> f64 {
    let (x, w) = quad::gauss_legendre(6);
    let d = sol.d as f64;
    let mut worst = 0.0f64;
    for pair in sol.dense.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.t < t_lo {
            break;
        }
        let h = b.t - a.t;
        let (mut integral, mut scale) = (0.0, 0.0);
        for (xi, wi) in x.iter().zip(&w) {
            let t = a.t + 0.5 * h * (xi + 1.0);
            let (u, up) = hermite(a, b, t);
            let f = 4.0 * u * u - (d - 1.0) / t * up;
            integral += 0.5 * h * wi * f;
            scale += 0.5 * h.abs() * wi * (4.0 * u * u + (d - 1.0) / t * up.abs());
        }
        worst = worst.max(((b.up - a.up) - integral).abs() / scale);
    }
    worst
}

/// Quintic bridge: 0 below 2, 1 above 3, two vanishing derivatives at both ends.
/// Returns (ψ, ψ', ψ'').
pub fn psi_cutoff(t: f64) -> (f64, f64, f64) {
    if t <= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 3.0 {
        return (1.0, 0.0, 0.0);
    }
    let s = t - 2.0;
    (
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s),
        30.0 * s * s * (1.0 - s) * (1.0 - s),
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
    )
}

/// Γ(d/2 − 1)/(2π^{d/2}).
pub fn c_d(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    gamma(h - 1.0) / (2.0 * PI.powf(h))
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralCheck {
    pub d: usize,
    pub a0: f64,
    /// −(c_d/2)∫(4ψu² − uΔψ).
    pub rhs: f64,
    /// |rhs − a0|/a0.
    pub residual: f64,
    pub t_max: f64,
    /// Half-width of the analytic bracket for ∫_{t_max}^∞ 4u² t^{d−1} dt, in units of a0.
    pub tail_bound: f64,
    /// Change of rhs when the quadrature order is doubled, in units of a0.
    pub quadrature_change: f64,
}

pub fn integral_identity_check(sol: &RadialSolution, t_max: f64) -> Result<IntegralCheck> {
    if !(t_max > 10.0) {
        return invalid("t_max must exceed 10");
    }
    if sol.t_min() > 2.0 {
        return invalid("solution must be available on [2, ∞)");
    }
    let d = sol.d;
    let df = d as f64;
    let omega = 2.0 * PI.powf(df / 2.0) / gamma(df / 2.0);
    let integral = |order: usize| -> Result<f64> {
        let mut total = 0.0;
        let (x, w) = quad::composite(2.0, 3.0, 8, order);
        for (t, wt) in x.iter().zip(&w) {
            let u = sol.u(*t)?;
            let (p, p1, p2) = psi_cutoff(*t);
            let lap = p2 + (df - 1.0) / t * p1;
            total += wt * (4.0 * p * u * u - u * lap) * t.powf(df - 1.0);
        }
        let (x, w) = quad::composite(3f64.ln(), t_max.ln(), 24, order);
        for (v, wv) in x.iter().zip(&w) {
            let t = v.exp();
            let u = sol.u(t)?;
            total += wv * 4.0 * u * u * t.powf(df);
        }
        Ok(total)
    };
    let lead = t_max.powf(df - 2.0) * sol.u(t_max)?;
    let tail_lo = 4.0 * sol.a0 * sol.a0 * t_max.powf(4.0 - df) / (df - 4.0);
    let tail_hi = 4.0 * lead * lead * t_max.powf(4.0 - df) / (df - 4.0);
    let tail = 0.5 * (tail_lo + tail_hi);
    let k = -0.5 * c_d(d) * omega;
    let rhs = k * (integral(8)? + tail);
    let rhs2 = k * (integral(16)? + tail);
    Ok(IntegralCheck {
        d,
        a0: sol.a0,
        rhs: rhs2,
        residual: (rhs2 - sol.a0).abs() / sol.a0,
        t_max,
        tail_bound: (k * 0.5 * (tail_hi - tail_lo)).abs() / sol.a0,
        quadrature_change: (rhs2 - rhs).abs() / sol.a0,
    })
}

/// Normalizer with φ_d(|x|)·u_{B(0,r)}(x) → 1 in d ≤ 4.
pub fn phi_low_dim(d: usize, t: f64) -> Result<f64> {
    if !(t > 1.0) {
        return invalid("φ_d is defined for t > 1");
    }
    match d {
        1..=3 => Ok(2.0 / (4.0 - d as f64) * t * t),
        4 => Ok(2.0 * t * t * t.ln()),
        _ => invalid(format!("φ_d is defined for d in 1..=4, got {d}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_coefficient() {
        for d in [5, 6, 7, 9] {
            let a0 = 2.5;
            let r = series_coefficients(d, a0, 3).unwrap();
            let dl = delta(d);
            let want = 4.0 * a0 * a0 / (((d - 2) * (d - 2)) as f64 * dl * (dl + 1.0));
            assert!((r.coeffs[1] - want).abs() < 1e-14 * want);
        }
    }

    #[test]
    fn cutoff_is_smooth_at_the_ends() {
        let (a, b, c) = psi_cutoff(2.0 + 1e-9);
        assert!(a < 1e-20 && b < 1e-12 && c < 1e-6);
        let (a, b, c) = psi_cutoff(3.0 - 1e-9);
        assert!((a - 1.0).abs() < 1e-20 && b < 1e-12 && c.abs() < 1e-6);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| (t * t * t - 2.0 * t, 3.0 * t * t - 2.0, 6.0 * t);
        let node = |t: f64| {
            let (u, up, upp) = f(t);
            Node { t, u, up, upp }
        };
        let (u, _) = hermite(node(2.0), node(1.5), 1.7);
        assert!((u - f(1.7).0).abs() < 1e-13);
    }
}

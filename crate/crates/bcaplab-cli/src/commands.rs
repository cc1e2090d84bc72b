//! One function per subcommand: resolved parameters in, artifacts out.

use crate::artifacts::{coords, num, opt, Artifacts};
use crate::config::{self, Sources};
use bcaplab::bcap::{
    axis_ladder, bcap_far_field, bcap_sum_escape, far_field_from_values, harmonic_from, sum_escape_from, CapacityEstimate,
    FarFieldReport, McParams, Mode,
};
use bcaplab::brw_mc::{escape_probability, hit_probability, EscapeConfig, HitEstimate, McBudget, RootKind};
use bcaplab::field::{identity_report, inequality_report, solve_all, BoundaryPolicy, SolverOptions};
use bcaplab::lattice::{c_g_constant, GreenMethod, GreenTable};
use bcaplab::offspring::tree_size_law;
use bcaplab::point::{self, MAX_D};
use bcaplab::riesz::{refine, riesz_capacity, RieszParams};
use bcaplab::scaling_limit::{continuum_target, run_scaling, A0Source, ScalingMethod};
use bcaplab::sets::LatticeSet;
use bcaplab::snake::{find_a0, integral_identity_check, series_coefficients, shoot_radial, RadialSolution, ShootParams};
use bcaplab::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// A resolved command, ready to run; `sources` holds the bytes of referenced files.
pub struct Prepared {
    pub config: serde_json::Value,
    pub sources: Sources,
    pub job: Box<dyn FnOnce() -> Result<Artifacts>>,
}

fn prepared<P: Serialize + 'static>(p: P, sources: Sources, job: impl FnOnce(P) -> Result<Artifacts> + 'static) -> Prepared {
    Prepared { config: serde_json::to_value(&p).unwrap(), sources, job: Box::new(move || job(p)) }
}

fn policy(s: &str) -> Result<BoundaryPolicy> {
    match s {
        "dirichlet_zero" => Ok(BoundaryPolicy::DirichletZero),
        "matched_asymptotic" => Ok(BoundaryPolicy::MatchedAsymptotic),
        _ => Err(Error::Validation(format!("unknown boundary policy {s:?}"))),
    }
}

fn hit_row(e: &HitEstimate) -> Vec<String> {
    vec![
        e.quantity.as_str().into(),
        coords(&e.x),
        num(e.p_hat),
        num(e.ci_half),
        num(e.low),
        num(e.high),
        e.samples.to_string(),
        e.capped.to_string(),
    ]
}

const HIT_HEADER: [&str; 8] = ["quantity", "x", "p_hat", "ci_half", "low", "high", "samples", "capped"];

// ---------------------------------------------------------------- green

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenParams {
    pub d: usize,
    pub step: String,
    pub radius: i32,
    pub method: String,
    pub tol: f64,
    /// Ray direction; empty means e_1.
    pub direction: Vec<i32>,
}

impl Default for GreenParams {
    fn default() -> Self {
        GreenParams { d: 5, step: "simple".into(), radius: 10, method: "fourier".into(), tol: 1e-10, direction: Vec::new() }
    }
}

pub fn green(p: GreenParams) -> Result<Prepared> {
    let mut src = Sources::default();
    let step = config::step(&p.step, p.d, &mut src)?;
    let method = match p.method.as_str() {
        "fourier" => GreenMethod::Fourier,
        "neumann" => GreenMethod::Neumann,
        m => return Err(Error::Validation(format!("unknown green method {m:?}"))),
    };
    let dir = if p.direction.is_empty() { point::axis(p.d, 0, 1) } else { config::axis_point(p.d, &p.direction)? };
    if point::sup_norm(&dir) == 0 {
        return Err(Error::Validation("ray direction must be nonzero".into()));
    }
    Ok(prepared(p, src, move |p| {
        let table = GreenTable::build(&step, p.radius, method, p.tol)?;
        let cg = c_g_constant(&step)?;
        let norm = step.theta_norm();
        let steps = p.radius / point::sup_norm(&dir);
        let rows = (0..=steps).map(|t| {
            let x: point::Point = std::array::from_fn(|i| dir[i] * t);
            let g = table.get(&x).unwrap();
            let (asym, ratio) = if t == 0 {
                (String::new(), String::new())
            } else {
                let a = cg * norm.norm(&x).powf(2.0 - p.d as f64);
                (num(a), num(g / a))
            };
            vec![t.to_string(), coords(&x[..p.d]), num(g), asym, ratio]
        });
        let mut a = Artifacts::default();
        a.csv("green_ray.csv", &["t", "x", "g", "asymptotic", "ratio"], rows.collect::<Vec<_>>());
        let mut buf = Vec::new();
        table.write(&mut buf)?;
        a.raw("green_table.csv", buf);
        a.summary = json!({
            "c_g": cg,
            "radius": p.radius,
            "method": method.as_str(),
            "harmonicity_residual": table.harmonicity_residual(),
            "g0": table.get(&[0; MAX_D]),
        });
        a.json("green.json", "bcaplab.green/1", &a.summary.clone());
        Ok(a)
    }))
}

// ---------------------------------------------------------------- tree-size-law

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub offspring: String,
    pub samples: u64,
    pub n_lo: usize,
    pub n_hi: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { offspring: "geometric_half".into(), samples: 1_000_000, n_lo: 50, n_hi: 500, bins: 8, seed: 1 }
    }
}

pub fn tree_size(p: TreeParams) -> Result<Prepared> {
    let law = config::offspring(&p.offspring)?;
    if p.samples == 0 || p.n_lo < 1 || p.n_hi <= p.n_lo || p.bins == 0 {
        return Err(Error::Validation("need samples > 0, 1 <= n_lo < n_hi and bins > 0".into()));
    }
    Ok(prepared(p, Sources::default(), move |p| {
        let rep = tree_size_law(&law, p.samples, p.n_lo, p.n_hi, p.bins, p.seed);
        let mut a = Artifacts::default();
        a.csv(
            "tree_size.csv",
            &["n", "count", "pmf", "normalized"],
            rep.rows.iter().map(|r| vec![r.n.to_string(), r.count.to_string(), num(r.pmf), num(r.normalized)]).collect::<Vec<_>>(),
        );
        a.csv(
            "tree_size_bins.csv",
            &["n_lo", "n_hi", "count", "predicted", "ratio"],
            rep.bins
                .iter()
                .map(|b| vec![b.n_lo.to_string(), b.n_hi.to_string(), b.count.to_string(), num(b.predicted), num(b.ratio)])
                .collect::<Vec<_>>(),
        );
        let ratios: Vec<f64> = rep.bins.iter().map(|b| b.ratio).collect();
        a.summary = json!({
            "offspring": law.name(),
            "sigma2": law.sigma2(),
            "samples": rep.samples,
            "above_range": rep.above_range,
            "period": rep.period,
            "bin_ratio_min": ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            "bin_ratio_max": ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
        a.json("tree_size.json", "bcaplab.tree_size_law/1", &a.summary.clone());
        Ok(a)
    }))
}

// ---------------------------------------------------------------- hit-mc / escape-mc

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McCommon {
    pub d: usize,
    pub set: String,
    /// Start point; empty means e_1 from the set's center for hit-mc, the center for escape-mc.
    pub x: Vec<i32>,
    pub offspring: String,
    pub step: String,
    pub samples: u64,
    pub vmax: usize,
    pub seed: u64,
    pub root: RootKind,
    pub r_stop: f64,
    pub r_max: f64,
    pub prune_factor: f64,
    pub safety: f64,
}

impl Default for McCommon {
    fn default() -> Self {
        let e = EscapeConfig::default();
        McCommon {
            d: 5,
            set: "point:0".into(),
            x: Vec::new(),
            offspring: "binary_critical".into(),
            step: "simple".into(),
            samples: 10_000,
            vmax: McBudget::default().v_max,
            seed: 1,
            root: RootKind::Critical,
            r_stop: e.r_stop,
            r_max: e.r_max,
            prune_factor: e.prune_factor,
            safety: e.safety,
        }
    }
}

pub fn mc(p: McCommon, escape: bool) -> Result<Prepared> {
    let mut src = Sources::default();
    let k = config::lattice_set(&p.set, p.d, &mut src)?;
    let mu = config::offspring(&p.offspring)?;
    let step = config::step(&p.step, p.d, &mut src)?;
    let x = match (p.x.is_empty(), escape) {
        (false, _) => config::axis_point(p.d, &p.x)?,
        (true, true) => k.center(),
        (true, false) => point::add(&k.center(), &point::axis(p.d, 0, k.radius_about(&k.center()).floor() as i32 + 1)),
    };
    Ok(prepared(p, src, move |p| {
        let budget = McBudget { v_max: p.vmax, ..Default::default() };
        let (est, name) = if escape {
            let cfg = EscapeConfig {
                r_stop: p.r_stop,
                r_max: p.r_max,
                prune_factor: p.prune_factor,
                safety: p.safety,
                ..Default::default()
            };
            (escape_probability(&k, &x, &mu, &step, p.samples, &cfg, budget, p.seed)?, "escape")
        } else {
            (hit_probability(p.root, &k, &x, &mu, &step, p.samples, budget, p.seed)?, "hit")
        };
        let mut a = Artifacts::default();
        a.csv(&format!("{name}.csv"), &HIT_HEADER, vec![hit_row(&est)]);
        a.summary = serde_json::to_value(&est).unwrap();
        a.json(&format!("{name}.json"), &format!("bcaplab.{name}_mc/1"), &est);
        Ok(a)
    }))
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub d: usize,
    pub set: String,
    pub offspring: String,
    pub step: String,
    #[serde(rename = "box")]
    pub r_box: i32,
    pub policy: String,
    pub tol: f64,
    pub symmetry: bool,
    pub identities: bool,
    /// Radius of the window B for the decompositions; 0 means radius(K) + 1.
    pub b_radius: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            d: 5,
            set: "point:0".into(),
            offspring: "binary_critical".into(),
            step: "simple".into(),
            r_box: 12,
            policy: "matched_asymptotic".into(),
            tol: 1e-12,
            symmetry: true,
            identities: true,
            b_radius: 0.0,
        }
    }
}

pub fn solve(p: SolveParams) -> Result<Prepared> {
    let mut src = Sources::default();
    let k = config::lattice_set(&p.set, p.d, &mut src)?;
    let mu = config::offspring(&p.offspring)?;
    let step = config::step(&p.step, p.d, &mut src)?;
    let opts = SolverOptions {
        r_box: p.r_box,
        policy: policy(&p.policy)?,
        tol: p.tol,
        symmetry: p.symmetry,
        center: point::to_vec(&k.center(), p.d),
        ..Default::default()
    };
    bcaplab::field::Geometry::new(&k, &step, &opts)?;
    Ok(prepared(p, src, move |p| {
        let fs = solve_all(&k, &step, &mu, &opts)?;
        let mut a = Artifacts::default();
        for f in [&fs.p_c, &fs.p_adj, &fs.p_minus, &fs.p_i] {
            let mut buf = Vec::new();
            f.write_csv(&mut buf)?;
            a.raw(&format!("{}.csv", f.quantity.as_str()), buf);
        }
        let esc = fs.escape();
        a.csv("escape.csv", &["a", "e_K"], esc.iter().map(|e| vec![coords(&e.a), num(e.e_k)]).collect::<Vec<_>>());
        let mut summary = json!({
            "policy": opts.policy.as_str(),
            "box": opts.r_box,
            "orbits": fs.geometry().len(),
            "bcap_sum": fs.bcap_sum(),
            "residual_p_c": fs.p_c.residual,
            "residual_p_minus": fs.p_minus.residual,
            "closure_p_c": fs.p_c.closure(),
        });
        if p.identities {
            let c = k.center();
            let rk = k.radius_about(&c);
            let b_r = if p.b_radius > 0.0 { p.b_radius } else { rk.floor() + 1.0 };
            let b = LatticeSet::ball(p.d, b_r, &c)?;
            let t0 = b_r.floor() as i32 + 1;
            let targets: Vec<_> = [t0, t0 + 2]
                .iter()
                .filter(|&&t| t <= opts.r_box - step.radius())
                .map(|&t| point::add(&c, &point::axis(p.d, 0, t)))
                .collect();
            let rep = identity_report(&fs, &b, &targets)?;
            let ineq = inequality_report(&fs, &mu);
            summary["identities_pass"] = json!(rep.all_pass() && ineq.iter().all(|r| r.pass));
            a.json("identities.json", "bcaplab.identities/1", json!({ "identities": rep, "inequalities": ineq }));
        }
        a.summary = summary;
        a.json("solve.json", "bcaplab.solve/1", &a.summary.clone());
        Ok(a)
    }))
}

// ---------------------------------------------------------------- bcap

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcapParams {
    pub d: usize,
    pub set: String,
    pub offspring: String,
    pub step: String,
    /// sum | far | harmonic | all
    pub method: String,
    /// solver | mc, for the escape sum and the far field; the harmonic route always solves.
    pub mode: String,
    #[serde(rename = "box")]
    pub r_box: i32,
    pub policy: String,
    pub tol: f64,
    pub samples: u64,
    pub seed: u64,
    pub vmax: usize,
    /// Far-field ladder distances along e_1 from the set's center.
    pub ladder: Vec<i32>,
    pub lambda: f64,
    /// 0 means radius(K) + 1.
    pub b_radius: f64,
}

impl Default for BcapParams {
    fn default() -> Self {
        BcapParams {
            d: 5,
            set: "point:0".into(),
            offspring: "binary_critical".into(),
            step: "simple".into(),
            method: "all".into(),
            mode: "solver".into(),
            r_box: 16,
            policy: "matched_asymptotic".into(),
            tol: 1e-12,
            samples: 20_000,
            seed: 1,
            vmax: McBudget::default().v_max,
            ladder: vec![4, 6, 8, 10, 12],
            lambda: 2.0,
            b_radius: 0.0,
        }
    }
}

pub fn bcap(p: BcapParams) -> Result<Prepared> {
    let mut src = Sources::default();
    let k = config::lattice_set(&p.set, p.d, &mut src)?;
    let mu = config::offspring(&p.offspring)?;
    let step = config::step(&p.step, p.d, &mut src)?;
    let (want_sum, want_far, want_harm) = match p.method.as_str() {
        "sum" => (true, false, false),
        "far" => (false, true, false),
        "harmonic" => (false, false, true),
        "all" => (true, true, true),
        m => return Err(Error::Validation(format!("unknown bcap method {m:?}"))),
    };
    let opts = SolverOptions { r_box: p.r_box, policy: policy(&p.policy)?, tol: p.tol, ..Default::default() };
    let mc = match p.mode.as_str() {
        "solver" => None,
        "mc" => Some(McParams {
            samples: p.samples,
            seed: p.seed,
            budget: McBudget { v_max: p.vmax, ..Default::default() },
            ..Default::default()
        }),
        m => return Err(Error::Validation(format!("unknown mode {m:?}"))),
    };
    if p.ladder.is_empty() && want_far {
        return Err(Error::Validation("far-field ladder is empty".into()));
    }
    Ok(prepared(p, src, move |p| {
        let c = k.center();
        let ladder = axis_ladder(&k, &p.ladder);
        let needs_solve = want_harm || mc.is_none();
        let fs = if needs_solve {
            Some(solve_all(&k, &step, &mu, &SolverOptions { center: point::to_vec(&c, p.d), ..opts.clone() })?)
        } else {
            None
        };
        let solver_mode = Mode::Solver(opts.clone());
        let mut sum: Option<CapacityEstimate> = None;
        if want_sum {
            sum = Some(match &mc {
                Some(m) => bcap_sum_escape(&k, &mu, &step, &Mode::Mc(m.clone()))?,
                None => sum_escape_from(fs.as_ref().unwrap(), &mu, &solver_mode)?,
            });
        }
        let reference = sum.as_ref().map(|s| s.value);
        let mut far: Option<FarFieldReport> = None;
        if want_far {
            far = Some(match (&mc, &fs) {
                (Some(m), _) => bcap_far_field(&k, &mu, &step, &ladder, &Mode::Mc(m.clone()), p.lambda, reference)?,
                (None, Some(fs)) => {
                    let inner = opts.r_box - step.radius();
                    far_field_from_values(&k, &mu, &step, &ladder, &solver_mode, p.lambda, reference, |x| {
                        (fs.p_c.value_at(x), point::sup_norm(&point::sub(x, &c)) <= inner)
                    })?
                }
                (None, None) => unreachable!(),
            });
        }
        let harmonic = match (&fs, want_harm) {
            (Some(fs), true) => {
                let rk = k.radius_about(&c);
                let b_r = if p.b_radius > 0.0 { p.b_radius } else { rk.floor() + 1.0 };
                Some(harmonic_from(fs, &LatticeSet::ball(p.d, b_r, &c)?, &mu)?)
            }
            _ => None,
        };
        let values: Vec<f64> = [sum.as_ref().map(|e| e.value), far.as_ref().map(|f| f.estimate.value), harmonic.as_ref().map(|e| e.value)]
            .into_iter()
            .flatten()
            .collect();
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut a = Artifacts::default();
        if let Some(f) = &far {
            a.csv(
                "ladder.csv",
                &["x", "norm", "r_over_x", "p_c", "g", "ratio", "ci_half", "reliable"],
                f.ladder
                    .iter()
                    .map(|r| {
                        vec![
                            coords(&r.x),
                            num(r.norm),
                            num(r.r_over_x),
                            num(r.p_c),
                            num(r.g),
                            num(r.ratio),
                            num(r.ci_half),
                            r.reliable.to_string(),
                        ]
                    })
                    .collect::<Vec<_>>(),
            );
        }
        a.summary = json!({
            "sum_escape": sum.as_ref().map(|e| json!({"value": e.value, "uncertainty": e.uncertainty})),
            "far_field": far.as_ref().map(|f| json!({"value": f.estimate.value, "uncertainty": f.estimate.uncertainty})),
            "harmonic_measure": harmonic.as_ref().map(|e| json!({"value": e.value, "uncertainty": e.uncertainty})),
            "relative_spread": if values.len() > 1 { Some((hi - lo) / lo) } else { None },
        });
        a.json(
            "bcap.json",
            "bcaplab.bcap/1",
            json!({ "summary": a.summary, "sum_escape": sum, "far_field": far, "harmonic_measure": harmonic }),
        );
        Ok(a)
    }))
}

// ---------------------------------------------------------------- snake

fn t_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_min > 1.0 && t_max > t_min) || points < 2 {
        return Err(Error::Validation("need 1 < t_min < t_max and at least 2 points".into()));
    }
    Ok((0..points).map(|i| t_min + (t_max - t_min) * i as f64 / (points - 1) as f64).collect())
}

/// u(t), or None where a truncated series has not converged.
fn u_or_none(sol: &RadialSolution, t: f64) -> Result<Option<f64>> {
    match sol.u(t) {
        Ok(u) => Ok(Some(u)),
        Err(Error::NonConvergence(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn u_table(a: &mut Artifacts, sol: &RadialSolution, grid: &[f64]) -> Result<()> {
    let rows = grid.iter().map(|&t| Ok(vec![num(t), opt(u_or_none(sol, t)?)])).collect::<Result<Vec<_>>>()?;
    a.csv("u.csv", &["t", "u"], rows);
    Ok(())
}

fn probes(sol: &RadialSolution, ts: &[f64]) -> Result<serde_json::Value> {
    ts.iter().map(|&t| Ok(json!({"t": t, "u": u_or_none(sol, t)?}))).collect::<Result<Vec<_>>>().map(serde_json::Value::from)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesParams {
    pub d: usize,
    /// Leading coefficient; absent means the maximal one (exact in d = 6, searched otherwise).
    pub a0: Option<f64>,
    pub terms: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub probes: Vec<f64>,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams { d: 6, a0: None, terms: 2000, t_min: 1.5, t_max: 10.0, points: 86, probes: vec![2.0, 3.0] }
    }
}

pub fn snake_series(p: SeriesParams) -> Result<Prepared> {
    let grid = t_grid(p.t_min, p.t_max, p.points)?;
    Ok(prepared(p, Sources::default(), move |p| {
        let a0 = match p.a0 {
            Some(a) => A0Source { a0: a, bracket: [a, a], provenance: "given".into() },
            None => A0Source::for_dim(p.d)?,
        };
        let rep = series_coefficients(p.d, a0.a0, p.terms)?;
        let sol = RadialSolution::from_series(p.d, a0.a0, p.terms)?;
        let mut a = Artifacts::default();
        a.csv("coefficients.csv", &["n", "a_n"], rep.coeffs.iter().enumerate().map(|(n, c)| vec![n.to_string(), num(*c)]).collect::<Vec<_>>());
        u_table(&mut a, &sol, &grid)?;
        a.summary = json!({
            "d": p.d,
            "a0": a0,
            "terms": p.terms,
            "ratio_limit": rep.ratio_limit,
            "radius_s": rep.radius_s,
            "radius_t": rep.radius_t,
            "probes": probes(&sol, &p.probes)?,
        });
        a.json("snake_series.json", "bcaplab.snake_series/1", &a.summary.clone());
        Ok(a)
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootCliParams {
    pub d: usize,
    pub t_far: f64,
    pub rtol: f64,
    pub blowup: f64,
    pub a_rtol: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub probes: Vec<f64>,
    /// Upper end of the integral check.
    pub integral_t_max: f64,
}

impl Default for ShootCliParams {
    fn default() -> Self {
        let s = ShootParams::default();
        ShootCliParams {
            d: 6,
            t_far: s.t_far,
            rtol: s.rtol,
            blowup: s.blowup,
            a_rtol: s.a_rtol,
            t_min: 1.5,
            t_max: 10.0,
            points: 86,
            probes: vec![2.0, 3.0],
            integral_t_max: 1e4,
        }
    }
}

pub fn snake_shoot(p: ShootCliParams) -> Result<Prepared> {
    let grid = t_grid(p.t_min, p.t_max, p.points)?;
    Ok(prepared(p, Sources::default(), move |p| {
        let sp = ShootParams { t_far: p.t_far, rtol: p.rtol, blowup: p.blowup, a_rtol: p.a_rtol, ..Default::default() };
        let sol = shoot_radial(p.d, &sp)?;
        let check = integral_identity_check(&sol, p.integral_t_max)?;
        let mut a = Artifacts::default();
        u_table(&mut a, &sol, &grid)?;
        a.summary = json!({
            "d": p.d,
            "a0": sol.a0,
            "bracket": sol.bracket,
            "ode_residual": sol.ode_residual,
            "integral_check": check,
            "probes": probes(&sol, &p.probes)?,
        });
        a.json("snake_shoot.json", "bcaplab.snake_shoot/1", &a.summary.clone());
        Ok(a)
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A0Params {
    pub d: usize,
    pub t_probe: f64,
    pub terms: usize,
    pub tol: f64,
}

impl Default for A0Params {
    fn default() -> Self {
        A0Params { d: 6, t_probe: 1.05, terms: 1000, tol: 1e-7 }
    }
}

pub fn snake_a0(p: A0Params) -> Result<Prepared> {
    Ok(prepared(p, Sources::default(), move |p| {
        let est = find_a0(p.d, p.t_probe, p.terms, p.tol)?;
        let mut a = Artifacts::default();
        a.summary = serde_json::to_value(&est).unwrap();
        a.json("snake_a0.json", "bcaplab.snake_a0/1", &est);
        Ok(a)
    }))
}

// ---------------------------------------------------------------- riesz

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RieszCliParams {
    pub d: usize,
    pub gamma: f64,
    pub set: String,
    pub h: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_points: usize,
    pub weights: bool,
    /// Also solve at h/2 and report the first-order extrapolation.
    pub refine: bool,
}

impl Default for RieszCliParams {
    fn default() -> Self {
        let r = RieszParams::default();
        RieszCliParams {
            d: 5,
            gamma: 1.0,
            set: "ball:1".into(),
            h: 0.4,
            tol: r.tol,
            max_iter: r.max_iter,
            max_points: r.max_points,
            weights: false,
            refine: false,
        }
    }
}

pub fn riesz(p: RieszCliParams) -> Result<Prepared> {
    let mut src = Sources::default();
    let set = config::compact(&p.set, p.d, p.h, &mut src)?;
    let spec = p.set.clone();
    let d = p.d;
    let fine_src = std::cell::RefCell::new(Sources::default());
    Ok(prepared(p, src, move |p| {
        let params = RieszParams { tol: p.tol, max_iter: p.max_iter, max_points: p.max_points };
        let res = riesz_capacity(&set, p.gamma, &params)?;
        let refinement = if p.refine {
            Some(refine(|h| config::compact(&spec, d, h, &mut fine_src.borrow_mut()), p.h, p.gamma, &params)?)
        } else {
            None
        };
        let mut a = Artifacts::default();
        if p.weights {
            let rows = set.points.iter().zip(&res.weights).map(|(x, w)| {
                let mut r: Vec<String> = x.iter().map(|v| num(*v)).collect();
                r.push(num(*w));
                r
            });
            let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
            header.push("weight".into());
            let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            a.csv("weights.csv", &h, rows.collect::<Vec<_>>());
        }
        a.summary = json!({
            "d": d,
            "gamma": res.gamma,
            "n_points": res.n_points,
            "energy": res.energy,
            "capacity": res.capacity,
            "kkt_residual": res.kkt_residual,
            "support_size": res.support_size,
            "iterations": res.iterations,
            "kernel_constant": res.kernel_constant,
            "refinement": refinement,
        });
        a.json("riesz.json", "bcaplab.riesz/1", json!({ "result": a.summary, "descriptor": res.descriptor, "h": res.h }));
        Ok(a)
    }))
}

// ---------------------------------------------------------------- scaling

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingParams {
    pub d: usize,
    pub rho: f64,
    pub ladder: Vec<u32>,
    pub offspring: String,
    pub step: String,
    /// solver | mc
    pub method: String,
    pub box_factor: f64,
    pub min_box: i32,
    pub max_box: i32,
    pub tol: f64,
    pub samples: u64,
    pub seed: u64,
    /// Compare against the continuum target (ball, isotropic walk).
    pub target: bool,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            d: 5,
            rho: 1.0,
            ladder: vec![2, 4, 8],
            offspring: "binary_critical".into(),
            step: "simple".into(),
            method: "solver".into(),
            box_factor: 3.0,
            min_box: 8,
            max_box: 32,
            tol: 1e-12,
            samples: 2000,
            seed: 1,
            target: true,
        }
    }
}

pub fn scaling(p: ScalingParams) -> Result<Prepared> {
    let mut src = Sources::default();
    let mu = config::offspring(&p.offspring)?;
    let step = config::step(&p.step, p.d, &mut src)?;
    let method = match p.method.as_str() {
        "solver" => ScalingMethod::Solver {
            options: SolverOptions { tol: p.tol, ..Default::default() },
            box_factor: p.box_factor,
            min_box: p.min_box,
            max_box: p.max_box,
        },
        "mc" => ScalingMethod::Mc { params: McParams { samples: p.samples, seed: p.seed, ..Default::default() } },
        m => return Err(Error::Validation(format!("unknown scaling method {m:?}"))),
    };
    if p.target && step.isotropic_scale().is_none() {
        return Err(Error::Validation("continuum target needs an isotropic walk; pass --target false".into()));
    }
    Ok(prepared(p, src, move |p| {
        let target = if p.target { Some(continuum_target(p.rho, &mu, &step, A0Source::for_dim(p.d)?)?) } else { None };
        let run = run_scaling(p.rho, &p.ladder, &mu, &step, &method, target)?;
        let mut a = Artifacts::default();
        a.csv(
            "scaling.csv",
            &["n", "estimate", "uncertainty", "rescaled", "ratio_to_target", "cauchy_diff"],
            run.rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        num(r.estimate.value),
                        num(r.estimate.uncertainty),
                        num(r.rescaled),
                        opt(r.ratio_to_target),
                        opt(r.cauchy_diff),
                    ]
                })
                .collect::<Vec<_>>(),
        );
        a.summary = json!({
            "d": run.d,
            "rho": run.rho,
            "c_theta": run.c_theta,
            "target": run.target.as_ref().map(|t| t.value),
            "target_with_simple_walk_constant": run.target.as_ref().and_then(|t| t.with_simple_walk_constant),
            "rescaled": run.rows.iter().map(|r| r.rescaled).collect::<Vec<_>>(),
            "positive": run.positive(),
            "within_envelope": run.within_envelope(),
            "cauchy_decreasing": run.cauchy_decreasing(),
            "last_ratio": run.last_ratio(),
            "skipped": run.skipped,
            "warnings": run.warnings,
        });
        a.json("scaling.json", "bcaplab.scaling/1", &run);
        Ok(a)
    }))
}

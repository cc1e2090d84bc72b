//! Branching capacity by three routes: the escape sum Σ_a e_K(a), far-field
//! ratios p_c(x)/g(x), and the harmonic-measure formula on a window B ⊇ K.

use crate::brw_mc::{escape_samples, hit_probability, EscapeConfig, EscapeSamples, McBudget, RootKind};
use crate::error::{invalid, Error, Result};
use crate::field::{harmonic_bcap_from, harmonic_measure, solve_all, BoundaryPolicy, FieldSet, SolverOptions};
use crate::lattice::{GreenModel, StepLaw};
use crate::offspring::OffspringLaw;
use crate::point::{self, Point};
use crate::rng;
use crate::sets::LatticeSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Seed lane for the per-point escape families of one set.
const LANE_ESCAPE_SUM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SumEscape,
    FarField,
    HarmonicMeasure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McParams {
    pub samples: u64,
    pub seed: u64,
    pub escape: EscapeConfig,
    pub budget: McBudget,
}

impl Default for McParams {
    fn default() -> Self {
        McParams { samples: 20_000, seed: 1, escape: EscapeConfig::default(), budget: McBudget::default() }
    }
}

#[derive(Debug, Clone)]
pub enum Mode {
    Mc(McParams),
    Solver(SolverOptions),
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Mc(_) => "mc",
            Mode::Solver(_) => "solver",
        }
    }

    fn params_json(&self) -> serde_json::Value {
        match self {
            Mode::Mc(p) => serde_json::to_value(p).unwrap(),
            Mode::Solver(o) => serde_json::to_value(o).unwrap(),
        }
    }
}

/// What an estimate was computed from.
#[derive(Debug, Clone, Serialize)]
pub struct Inputs {
    pub set_size: usize,
    pub set_radius: f64,
    pub offspring: String,
    pub step: String,
    pub params: serde_json::Value,
    /// sha256 over K's points, the laws and the parameters.
    pub digest: String,
}

impl Inputs {
    pub fn new(k: &LatticeSet, mu: &OffspringLaw, step: &StepLaw, params: serde_json::Value) -> Inputs {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&k.coords()).unwrap());
        h.update(mu.name().as_bytes());
        h.update(serde_json::to_vec(mu.pmf()).unwrap());
        h.update(step.content_hash().as_bytes());
        h.update(serde_json::to_vec(&params).unwrap());
        Inputs {
            set_size: k.len(),
            set_radius: k.radius_about(&k.center()),
            offspring: mu.name().into(),
            step: step.name().into(),
            params,
            digest: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityEstimate {
    pub method: Method,
    pub mode: String,
    pub value: f64,
    /// Half-width: Gaussian for Monte Carlo, worst case for solver brackets.
    pub uncertainty: f64,
    /// Certified bracket, when one is available.
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub inputs: Inputs,
    pub flags: Vec<String>,
}

impl CapacityEstimate {
    /// Flags estimates that are not positive or exceed c_env·r^{d−4}.
    pub fn check_sanity(&mut self, d: usize, c_env: f64) {
        if !(self.value > 0.0) {
            self.flags.push("estimate is not positive".into());
        }
        let env = envelope(d, self.inputs.set_radius, c_env);
        if self.value > env {
            self.flags.push(format!("estimate above the envelope {env:.4e}"));
        }
    }
}

/// c_env·max(r, 1)^{d−4}.
pub fn envelope(d: usize, r: f64, c_env: f64) -> f64 {
    c_env * r.max(1.0).powi(d as i32 - 4)
}

/// Default constant of the r^{d−4} sanity envelope.
pub const ENVELOPE_C: f64 = 50.0;

/// Exponent (d − 4)/(2(d − 1)) of the far-field rate.
pub fn rate_alpha(d: usize) -> f64 {
    (d as f64 - 4.0) / (2.0 * (d as f64 - 1.0))
}

fn escape_cfg_for(k: &LatticeSet, cfg: &EscapeConfig) -> EscapeConfig {
    let mut c = cfg.clone();
    if c.center.is_empty() {
        c.center = point::to_vec(&k.center(), k.dim());
    }
    c
}

/// Σ_{a∈K} e_K(a), from Monte Carlo escape families or from the solver fields.
pub fn bcap_sum_escape(k: &LatticeSet, mu: &OffspringLaw, step: &StepLaw, mode: &Mode) -> Result<CapacityEstimate> {
    match mode {
        Mode::Mc(p) => {
            let cfg = escape_cfg_for(k, &p.escape);
            let parts = k
                .points()
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let seed = rng::derive(p.seed, LANE_ESCAPE_SUM, j as u64);
                    escape_samples(k, a, mu, step, p.samples, &cfg, p.budget, seed, false)
                })
                .collect::<Result<Vec<EscapeSamples>>>()?;
            let b_hat = match cfg.bcap_hint {
                Some(b) => b,
                None => EscapeSamples::self_consistent_bcap(&parts),
            };
            let ests: Vec<_> = parts.iter().map(|es| es.estimate(b_hat)).collect();
            let value: f64 = ests.iter().map(|e| e.p_hat).sum();
            let uncertainty = ests.iter().map(|e| e.ci_half * e.ci_half).sum::<f64>().sqrt();
            let mut flags: Vec<String> = ests.iter().flat_map(|e| e.flags.iter().cloned()).collect();
            flags.sort();
            flags.dedup();
            flags.push("bracket is worst-case, uncertainty is Gaussian".into());
            let mut est = CapacityEstimate {
                method: Method::SumEscape,
                mode: mode.as_str().into(),
                value,
                uncertainty,
                low: Some(ests.iter().map(|e| e.low).sum()),
                high: Some(ests.iter().map(|e| e.high).sum()),
                inputs: Inputs::new(k, mu, step, mode.params_json()),
                flags,
            };
            est.check_sanity(k.dim(), ENVELOPE_C);
            Ok(est)
        }
        Mode::Solver(opts) => {
            let fs = solve_all(k, step, mu, &solver_opts(k, opts))?;
            sum_escape_from(&fs, mu, mode)
        }
    }
}

fn solver_opts(k: &LatticeSet, opts: &SolverOptions) -> SolverOptions {
    let mut o = opts.clone();
    if o.center.is_empty() {
        o.center = point::to_vec(&k.center(), k.dim());
    }
    o
}

/// Solver value of Σ e_K. Under the matched policy the Dirichlet box, whose
/// escape probabilities can only be larger, supplies the upper end.
pub fn sum_escape_from(fs: &FieldSet, mu: &OffspringLaw, mode: &Mode) -> Result<CapacityEstimate> {
    let geom = fs.geometry();
    let value = fs.bcap_sum();
    let (uncertainty, low, high, mut flags) = match geom.opts.policy {
        BoundaryPolicy::DirichletZero => (
            0.0,
            None,
            Some(value),
            vec!["dirichlet_zero box: value is an upper bound for the escape sum".to_string()],
        ),
        BoundaryPolicy::MatchedAsymptotic => {
            let mut o = geom.opts.clone();
            o.policy = BoundaryPolicy::DirichletZero;
            let dir = solve_all(&geom.k, &geom.law, mu, &o)?.bcap_sum();
            ((dir - value).abs(), None, Some(dir.max(value)), Vec::new())
        }
    };
    flags.push(format!("max residual {:.2e}", fs.p_c.residual.max(fs.p_minus.residual)));
    let mut est = CapacityEstimate {
        method: Method::SumEscape,
        mode: mode.as_str().into(),
        value,
        uncertainty,
        low,
        high,
        inputs: Inputs::new(&geom.k, mu, &geom.law, mode.params_json()),
        flags,
    };
    est.check_sanity(geom.law.dim(), ENVELOPE_C);
    Ok(est)
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRow {
    pub x: Vec<i32>,
    pub norm: f64,
    /// r/|x| with r = max(radius of K, 1).
    pub r_over_x: f64,
    pub p_c: f64,
    pub g: f64,
    pub ratio: f64,
    pub ci_half: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FarFieldReport {
    pub estimate: CapacityEstimate,
    pub alpha: f64,
    pub lambda: f64,
    pub ladder: Vec<LadderRow>,
    /// |ratio_{i+1} − ratio_i| over consecutive reliable rows.
    pub cauchy: Vec<f64>,
    pub reference: Option<f64>,
    /// Least-squares slope of log|ratio − reference| against log(r/|x|).
    pub slope: Option<f64>,
    /// "increasing", "decreasing" or "mixed" along the reliable rows.
    pub direction: String,
}

/// Axis points c + t·e_1 for t in `dists`.
pub fn axis_ladder(k: &LatticeSet, dists: &[i32]) -> Vec<Point> {
    let c = k.center();
    dists.iter().map(|&t| point::add(&c, &point::axis(k.dim(), 0, t))).collect()
}

/// p_c(x)/g(x − c) along a ladder of far points; the estimate is the farthest reliable ratio.
pub fn bcap_far_field(
    k: &LatticeSet,
    mu: &OffspringLaw,
    step: &StepLaw,
    ladder: &[Point],
    mode: &Mode,
    lambda: f64,
    reference: Option<f64>,
) -> Result<FarFieldReport> {
    if ladder.is_empty() {
        return invalid("far-field ladder is empty");
    }
    if !(lambda > 1.0) {
        return invalid("lambda must exceed 1");
    }
    let c = k.center();
    let reach = ladder.iter().map(|x| point::sup_norm(&point::sub(x, &c))).max().unwrap();
    let model = GreenModel::new(step, reach as usize + 2 * step.radius() as usize)?;
    let values: Vec<(f64, f64, bool)> = match mode {
        Mode::Solver(opts) => {
            let opts = solver_opts(k, opts);
            let geom = crate::field::Geometry::new(k, step, &opts)?;
            let p_c = crate::field::solve_p_c(&geom, mu)?;
            let inner = opts.r_box - step.radius();
            ladder
                .iter()
                .map(|x| {
                    let inside = point::sup_norm(&point::sub(x, &c)) <= inner;
                    (p_c.value_at(x), 0.0, inside)
                })
                .collect()
        }
        Mode::Mc(p) => ladder
            .par_iter()
            .enumerate()
            .map(|(j, x)| {
                let seed = rng::derive(p.seed, LANE_ESCAPE_SUM + 1, j as u64);
                let e = hit_probability(RootKind::Critical, k, x, mu, step, p.samples, p.budget, seed)?;
                let ok = e.p_hat > 0.0 && e.ci_half < 0.5 * e.p_hat;
                Ok((e.p_hat, e.ci_half, ok))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    from_ladder(k, mu, step, ladder, mode, lambda, reference, &model, values)
}

/// Builds the far-field report from p_c values already available at the ladder points.
#[allow(clippy::too_many_arguments)]
pub fn far_field_from_values(
    k: &LatticeSet,
    mu: &OffspringLaw,
    step: &StepLaw,
    ladder: &[Point],
    mode: &Mode,
    lambda: f64,
    reference: Option<f64>,
    p_c: impl Fn(&Point) -> (f64, bool),
) -> Result<FarFieldReport> {
    let c = k.center();
    let reach = ladder.iter().map(|x| point::sup_norm(&point::sub(x, &c))).max().unwrap_or(0);
    let model = GreenModel::new(step, reach as usize + 2 * step.radius() as usize)?;
    let values = ladder
        .iter()
        .map(|x| {
            let (v, ok) = p_c(x);
            (v, 0.0, ok)
        })
        .collect();
    from_ladder(k, mu, step, ladder, mode, lambda, reference, &model, values)
}

#[allow(clippy::too_many_arguments)]
fn from_ladder(
    k: &LatticeSet,
    mu: &OffspringLaw,
    step: &StepLaw,
    ladder: &[Point],
    mode: &Mode,
    lambda: f64,
    reference: Option<f64>,
    model: &GreenModel,
    values: Vec<(f64, f64, bool)>,
) -> Result<FarFieldReport> {
    let d = k.dim();
    let c = k.center();
    let r = k.radius_about(&c).max(1.0);
    let norm = step.theta_norm();
    let mut rows: Vec<LadderRow> = ladder
        .iter()
        .zip(values)
        .map(|(x, (p, ci, ok))| {
            let off = point::sub(x, &c);
            let e = point::norm2(&off);
            let g = model.g(&off);
            LadderRow {
                x: point::to_vec(x, d),
                norm: norm.norm(&off),
                r_over_x: r / e,
                p_c: p,
                g,
                ratio: p / g,
                ci_half: ci / g,
                reliable: ok && e >= lambda * r && !k.contains(x),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.norm.total_cmp(&b.norm));
    let good: Vec<&LadderRow> = rows.iter().filter(|r| r.reliable).collect();
    let Some(last) = good.last() else {
        return Err(Error::Budget("no ladder point satisfies the reliability thresholds".into()));
    };
    let cauchy: Vec<f64> = good.windows(2).map(|w| (w[1].ratio - w[0].ratio).abs()).collect();
    let steps: Vec<f64> = good.windows(2).map(|w| w[1].ratio - w[0].ratio).collect();
    let direction = if steps.iter().all(|s| *s >= 0.0) {
        "increasing"
    } else if steps.iter().all(|s| *s <= 0.0) {
        "decreasing"
    } else {
        "mixed"
    };
    let slope = reference.and_then(|b| {
        let pts: Vec<(f64, f64)> = good
            .iter()
            .filter(|r| (r.ratio - b).abs() > 0.0)
            .map(|r| (r.r_over_x.ln(), (r.ratio - b).abs().ln()))
            .collect();
        least_squares_slope(&pts)
    });
    let mut flags = Vec::new();
    let uncertainty = match mode {
        Mode::Mc(_) => last.ci_half,
        Mode::Solver(_) => {
            flags.push("uncertainty is the last Cauchy difference".into());
            cauchy.last().copied().unwrap_or(0.0)
        }
    };
    let mut estimate = CapacityEstimate {
        method: Method::FarField,
        mode: mode.as_str().into(),
        value: last.ratio,
        uncertainty,
        low: None,
        high: None,
        inputs: Inputs::new(k, mu, step, mode.params_json()),
        flags,
    };
    estimate.check_sanity(d, ENVELOPE_C);
    Ok(FarFieldReport {
        estimate,
        alpha: rate_alpha(d),
        lambda,
        ladder: rows,
        cauchy,
        reference,
        slope,
        direction: direction.into(),
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Σ_{a∈K} Σ_{b∉B} H^B_K(b, a) e_K(b) with all inputs from one solve.
pub fn bcap_harmonic(
    k: &LatticeSet,
    b: &LatticeSet,
    mu: &OffspringLaw,
    step: &StepLaw,
    opts: &SolverOptions,
) -> Result<CapacityEstimate> {
    let fs = solve_all(k, step, mu, &solver_opts(k, opts))?;
    harmonic_from(&fs, b, mu)
}

pub fn harmonic_from(fs: &FieldSet, b: &LatticeSet, mu: &OffspringLaw) -> Result<CapacityEstimate> {
    let geom = fs.geometry();
    let hm = harmonic_measure(b, &fs.p_adj)?;
    let value = harmonic_bcap_from(&hm, &geom.k, |x| 1.0 - fs.p_minus.value_at(x));
    let gap = (value - fs.bcap_sum()).abs();
    let mut params = serde_json::to_value(&geom.opts).unwrap();
    params["b_size"] = serde_json::json!(b.len());
    params["b_digest"] = serde_json::json!(hex::encode(Sha256::digest(serde_json::to_vec(&b.coords()).unwrap())));
    let mut est = CapacityEstimate {
        method: Method::HarmonicMeasure,
        mode: "solver".into(),
        value,
        uncertainty: gap,
        low: None,
        high: None,
        inputs: Inputs::new(&geom.k, mu, &geom.law, params),
        flags: vec![format!("|B| = {}, shell = {}; uncertainty is the gap to the escape sum", b.len(), hm.shell.len())],
    };
    est.check_sanity(geom.law.dim(), ENVELOPE_C);
    Ok(est)
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub x: Vec<i32>,
    pub norm: f64,
    /// p_adj(x)/(g(x)·Bcap)
    pub adj: f64,
    /// p_I(x)/(G(x)·Bcap)
    pub infinite: f64,
    /// p_−(x)/(G(x)·Bcap)
    pub minus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub offspring: String,
    pub target: f64,
    pub bcap: f64,
    pub rows: Vec<RatioRow>,
    /// Values at the far end of the ladder.
    pub plateau_adj: f64,
    pub plateau_infinite: f64,
    pub plateau_minus: f64,
    /// Relative deviations of the plateaus from σ²/2.
    pub dev_adj: f64,
    pub dev_infinite: f64,
    pub dev_minus: f64,
    /// Last consecutive differences of the p_I and p_− ladders.
    pub slack_infinite: f64,
    pub slack_minus: f64,
}

/// Ladders of p_adj/g, p_I/G and p_−/G normalized by Bcap; all should level off at σ²/2.
/// Ladder points must lie in the solver box; Bcap defaults to the solver's escape sum.
pub fn adjoint_ratio_diag(
    k: &LatticeSet,
    mu: &OffspringLaw,
    step: &StepLaw,
    ladder: &[Point],
    opts: &SolverOptions,
    bcap: Option<f64>,
) -> Result<RatioReport> {
    if !mu.third_moment_finite() {
        return invalid("the ratio diagnostics need an offspring law with a finite third moment");
    }
    if ladder.is_empty() {
        return invalid("ratio ladder is empty");
    }
    let opts = solver_opts(k, opts);
    let fs = solve_all(k, step, mu, &opts)?;
    ratio_report_from(&fs, mu, ladder, bcap)
}

pub fn ratio_report_from(fs: &FieldSet, mu: &OffspringLaw, ladder: &[Point], bcap: Option<f64>) -> Result<RatioReport> {
    let geom = fs.geometry();
    let c = geom.center;
    let inner = geom.opts.r_box - geom.law.radius();
    if ladder.iter().any(|x| point::sup_norm(&point::sub(x, &c)) > inner || geom.k.contains(x)) {
        return invalid("ratio ladder points must lie off K and inside the solver box");
    }
    let b = bcap.unwrap_or_else(|| fs.bcap_sum());
    let model = match &geom.model {
        Some(m) => m.clone(),
        None => std::sync::Arc::new(GreenModel::new(&geom.law, (2 * geom.opts.r_box) as usize)?),
    };
    let norm = geom.law.theta_norm();
    let mut rows: Vec<RatioRow> = ladder
        .iter()
        .map(|x| {
            let off = point::sub(x, &c);
            let g = model.g(&off);
            let big = model.big_g(&off);
            RatioRow {
                x: point::to_vec(x, geom.law.dim()),
                norm: norm.norm(&off),
                adj: fs.p_adj.value_at(x) / (g * b),
                infinite: fs.p_i.value_at(x) / (big * b),
                minus: fs.p_minus.value_at(x) / (big * b),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.norm.total_cmp(&b.norm));
    let last = rows.last().unwrap();
    let target = mu.sigma2() / 2.0;
    let slack = |f: fn(&RatioRow) -> f64| match rows.len() {
        0 | 1 => f64::NAN,
        n => (f(&rows[n - 1]) - f(&rows[n - 2])).abs(),
    };
    Ok(RatioReport {
        offspring: mu.name().into(),
        target,
        bcap: b,
        plateau_adj: last.adj,
        plateau_infinite: last.infinite,
        plateau_minus: last.minus,
        dev_adj: (last.adj - target).abs() / target,
        dev_infinite: (last.infinite - target).abs() / target,
        dev_minus: (last.minus - target).abs() / target,
        slack_infinite: slack(|r| r.infinite),
        slack_minus: slack(|r| r.minus),
        rows,
    })
}

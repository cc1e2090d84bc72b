//! Rescaled capacities Bcap(nK)/n^{d−4} of lattice balls against the
//! continuum value c_θ·BScap(M_θ^{−1/2}K).

use crate::bcap::{bcap_sum_escape, envelope, CapacityEstimate, McParams, Mode, ENVELOPE_C};
use crate::error::{invalid, Error, Result};
use crate::field::SolverOptions;
use crate::lattice::{c_g_constant, StepLaw};
use crate::offspring::OffspringLaw;
use crate::point::MAX_D;
use crate::sets::LatticeSet;
use crate::snake::find_a0;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CTheta {
    pub value: f64,
    pub c_g: f64,
    /// 4π^{d/2}√det M_θ/(σ²Γ((d−2)/2)).
    pub explicit: f64,
}

/// c_θ = 2/(σ²c_g), checked against the explicit determinant form.
pub fn c_theta(mu: &OffspringLaw, step: &StepLaw) -> Result<CTheta> {
    let d = step.dim();
    if d < 5 {
        return invalid("c_θ is used for d >= 5");
    }
    let s2 = mu.sigma2();
    let c_g = c_g_constant(step)?;
    let value = 2.0 / (s2 * c_g);
    let df = d as f64;
    let explicit = 4.0 * PI.powf(df / 2.0) * step.det_cov().sqrt() / (s2 * gamma((df - 2.0) / 2.0));
    if ((value - explicit) / value).abs() > 1e-12 {
        return Err(Error::NonConvergence(format!("c_θ forms disagree: {value} vs {explicit}")));
    }
    Ok(CTheta { value, c_g, explicit })
}

/// 2π^{d/2}/(σ²Γ(d/2)), the closed-form constant for the simple walk.
pub fn simple_walk_constant(d: usize, sigma2: f64) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / (sigma2 * gamma(h))
}

#[derive(Debug, Clone, Serialize)]
pub struct A0Source {
    pub a0: f64,
    pub bracket: [f64; 2],
    pub provenance: String,
}

impl A0Source {
    /// Exact value in d = 6, the series search otherwise.
    pub fn for_dim(d: usize) -> Result<A0Source> {
        if d == 6 {
            return Ok(A0Source { a0: 6.0, bracket: [6.0, 6.0], provenance: "closed form (d = 6)".into() });
        }
        let e = find_a0(d, 1.05, 1000, 1e-8)?;
        Ok(A0Source {
            a0: e.a0,
            bracket: e.bracket,
            provenance: format!("find_a0(t_probe = {}, terms = {})", e.t_probe, e.terms),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Target {
    pub value: f64,
    pub c_theta: f64,
    /// Radius of M_θ^{−1/2}B(0,ρ).
    pub continuum_radius: f64,
    pub a0: A0Source,
    /// 2π^{d/2}/(σ²Γ(d/2))·BScap(B(0,ρ)), the simple-walk form; None unless M_θ = I/d.
    pub with_simple_walk_constant: Option<f64>,
}

/// c_θ·(ρ/√m)^{d−4}·a0 for M_θ = m·I.
pub fn continuum_target(rho: f64, mu: &OffspringLaw, step: &StepLaw, a0: A0Source) -> Result<Target> {
    let d = step.dim();
    if !(rho > 0.0) {
        return invalid("ρ must be positive");
    }
    let m = match step.isotropic_scale() {
        Some(m) => m,
        None => return invalid("anisotropic M_θ maps the ball to an ellipsoid; no continuum target"),
    };
    let ct = c_theta(mu, step)?;
    let r = rho / m.sqrt();
    let bscap = a0.a0 * r.powi(d as i32 - 4);
    Ok(Target {
        value: ct.value * bscap,
        c_theta: ct.value,
        continuum_radius: r,
        with_simple_walk_constant: ((m * d as f64 - 1.0).abs() < 1e-12)
            .then(|| simple_walk_constant(d, mu.sigma2()) * a0.a0 * rho.powi(d as i32 - 4)),
        a0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScalingMethod {
    /// Box radius max(ceil(box_factor·nρ), min_box), capped at max_box.
    Solver { options: SolverOptions, box_factor: f64, min_box: i32, max_box: i32 },
    Mc { params: McParams },
}

impl Default for ScalingMethod {
    fn default() -> Self {
        ScalingMethod::Solver { options: SolverOptions::default(), box_factor: 3.0, min_box: 8, max_box: 32 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n: u32,
    pub set_size: usize,
    pub estimate: CapacityEstimate,
    /// Bcap(nK)/n^{d−4} and its uncertainty.
    pub rescaled: f64,
    pub uncertainty: f64,
    pub envelope: f64,
    pub ratio_to_target: Option<f64>,
    /// |rescaled − previous rescaled|.
    pub cauchy_diff: Option<f64>,
    /// Lattice points exactly on the sphere of radius nρ.
    pub on_sphere: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub n: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRun {
    pub d: usize,
    pub rho: f64,
    pub ladder: Vec<u32>,
    pub offspring: String,
    pub step: String,
    pub c_theta: f64,
    pub target: Option<Target>,
    pub rows: Vec<ScalingRow>,
    pub skipped: Vec<Skipped>,
    pub envelope_c: f64,
    pub warnings: Vec<String>,
}

impl ScalingRun {
    pub fn positive(&self) -> bool {
        self.rows.iter().all(|r| r.rescaled > 0.0)
    }

    pub fn within_envelope(&self) -> bool {
        self.rows.iter().all(|r| r.rescaled <= r.envelope)
    }

    pub fn cauchy_decreasing(&self) -> bool {
        let c: Vec<f64> = self.rows.iter().filter_map(|r| r.cauchy_diff).collect();
        c.windows(2).all(|w| w[1] < w[0])
    }

    pub fn last_ratio(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.ratio_to_target)
    }
}

/// Runs the ladder over K = B(0, ρ); `target` is None for trend-only runs.
pub fn run_scaling(
    rho: f64,
    ladder: &[u32],
    mu: &OffspringLaw,
    step: &StepLaw,
    method: &ScalingMethod,
    target: Option<Target>,
) -> Result<ScalingRun> {
    let d = step.dim();
    if d < 5 {
        return invalid("the scaling harness needs d >= 5");
    }
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) || ladder[0] == 0 {
        return invalid("ladder must be positive and strictly increasing");
    }
    if !(rho > 0.0) {
        return invalid("ρ must be positive");
    }
    let ct = c_theta(mu, step)?;
    let scale = |n: u32| (n as f64).powi(d as i32 - 4);
    let results: Vec<(u32, Result<(CapacityEstimate, usize, usize)>)> = ladder
        .par_iter()
        .map(|&n| {
            let r = n as f64 * rho;
            let run = || -> Result<(CapacityEstimate, usize, usize)> {
                let k = LatticeSet::ball(d, r, &[0; MAX_D])?;
                let mode = match method {
                    ScalingMethod::Solver { options, box_factor, min_box, max_box } => {
                        let r_box = ((box_factor * r).ceil() as i32).max(*min_box);
                        if r_box > *max_box {
                            return Err(Error::Budget(format!("box radius {r_box} exceeds max_box = {max_box}")));
                        }
                        Mode::Solver(SolverOptions { r_box, ..options.clone() })
                    }
                    ScalingMethod::Mc { params } => Mode::Mc(params.clone()),
                };
                let est = bcap_sum_escape(&k, mu, step, &mode)?;
                Ok((est, k.len(), k.on_sphere(r, &[0; MAX_D])))
            };
            (n, run())
        })
        .collect();

    let mut rows: Vec<ScalingRow> = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    for (n, res) in results {
        match res {
            Ok((estimate, set_size, on_sphere)) => {
                let rescaled = estimate.value / scale(n);
                if on_sphere > 0 {
                    warnings.push(format!(
                        "n = {n}: {on_sphere} lattice points lie on the sphere; open and closed balls differ"
                    ));
                }
                rows.push(ScalingRow {
                    n,
                    set_size,
                    rescaled,
                    uncertainty: estimate.uncertainty / scale(n),
                    envelope: envelope(d, rho, ENVELOPE_C),
                    ratio_to_target: target.as_ref().map(|t| rescaled / t.value),
                    cauchy_diff: rows.last().map(|p: &ScalingRow| (rescaled - p.rescaled).abs()),
                    on_sphere,
                    estimate,
                });
            }
            Err(e @ (Error::Budget(_) | Error::NonConvergence(_))) => {
                skipped.push(Skipped { n, reason: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(t) = &target {
        let gaps: Vec<f64> = rows.iter().map(|r| (r.rescaled - t.value).abs()).collect();
        let inversions = gaps.windows(2).filter(|w| w[1] > w[0]).count();
        if inversions > 0 {
            warnings.push(format!("gap to the target grows at {inversions} ladder step(s)"));
        }
    }
    let run = ScalingRun {
        d,
        rho,
        ladder: ladder.to_vec(),
        offspring: mu.name().into(),
        step: step.name().into(),
        c_theta: ct.value,
        target,
        rows,
        skipped,
        envelope_c: ENVELOPE_C,
        warnings,
    };
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_step_law, StepKind};
    use crate::offspring::{make_offspring, OffspringKind};

    #[test]
    fn simple_walk_constant_in_d6() {
        assert!((simple_walk_constant(6, 2.0) - PI.powi(3) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn c_theta_identity() {
        let step = make_step_law(StepKind::Simple, 5, None).unwrap();
        for kind in [OffspringKind::BinaryCritical, OffspringKind::GeometricHalf] {
            let mu = make_offspring(kind, &[]).unwrap();
            let ct = c_theta(&mu, &step).unwrap();
            assert!((ct.value * ct.c_g * mu.sigma2() / 2.0 - 1.0).abs() < 1e-14);
        }
    }
}

//! Tabulated Green function on a symmetry-reduced box.

use super::neumann::neumann_sums;
use super::spectral::{midpoint_green, LaplaceKernel};
use super::{c_g_constant, StepLaw};
use crate::error::{invalid, Error, Result};
use crate::point::{self, Point, MAX_D};
use crate::symmetry::{SymBox, SymGroup};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    Fourier,
    Neumann,
}

impl GreenMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            GreenMethod::Fourier => "fourier",
            GreenMethod::Neumann => "neumann",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreenTable {
    law: StepLaw,
    method: GreenMethod,
    tol: f64,
    domain: SymBox,
    values: Vec<f64>,
    /// Lower/upper bracket, when the method provides one.
    bracket: Option<(Vec<f64>, Vec<f64>)>,
}

impl GreenTable {
    pub fn build(law: &StepLaw, r: i32, method: GreenMethod, tol: f64) -> Result<GreenTable> {
        if law.dim() < 5 {
            return invalid("green tables need d >= 5");
        }
        if r < 1 {
            return invalid("table radius must be at least 1");
        }
        let origin = [[0; MAX_D]];
        let group = SymGroup::largest_invariant(law, &[&origin]);
        match method {
            GreenMethod::Fourier => {
                let domain = SymBox::new(law.dim(), r, [0; MAX_D], group);
                let values: Vec<f64> = if law.is_axis_supported() {
                    let k = LaplaceKernel::new(law, r as usize)?;
                    domain.reps().par_iter().map(|x| k.g(x)).collect::<Result<_>>()?
                } else {
                    domain
                        .reps()
                        .par_iter()
                        .map(|x| midpoint_green(law, x, tol, 40))
                        .collect::<Result<_>>()?
                };
                Ok(GreenTable { law: law.clone(), method, tol, domain, values, bracket: None })
            }
            GreenMethod::Neumann => {
                let terms = neumann_terms(law, tol);
                let ns = neumann_sums(law, r, terms, tol)?;
                let width = ns.upper.iter().zip(&ns.partial).map(|(u, p)| u - p).fold(0.0, f64::max);
                let values = ns.estimate.clone();
                let est_err = ns.estimate.iter().zip(&ns.partial).map(|(e, p)| e - p).fold(0.0, f64::max);
                if !(est_err.is_finite()) || est_err > width * 2.0 + tol {
                    return Err(Error::NonConvergence("neumann tail fit inconsistent with its bound".into()));
                }
                Ok(GreenTable {
                    law: law.clone(),
                    method,
                    tol,
                    domain: ns.domain,
                    values,
                    bracket: Some((ns.partial, ns.upper)),
                })
            }
        }
    }

    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    pub fn method(&self) -> GreenMethod {
        self.method
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn radius(&self) -> i32 {
        self.domain.radius()
    }

    pub fn domain(&self) -> &SymBox {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bracket(&self) -> Option<(&[f64], &[f64])> {
        self.bracket.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    pub fn get(&self, x: &Point) -> Option<f64> {
        self.domain.find_offset(x).map(|i| self.values[i])
    }

    /// max over points with a full neighborhood inside the table of
    /// |g(x) − δ_{x,0} − Σ_z θ(z) g(x−z)|.
    pub fn harmonicity_residual(&self) -> f64 {
        let s = self.law.radius();
        self.domain
            .reps()
            .par_iter()
            .zip(&self.values)
            .filter(|(x, _)| point::sup_norm(x) + s <= self.radius())
            .map(|(x, &gx)| {
                let avg: f64 = self
                    .law
                    .support()
                    .iter()
                    .map(|(z, p)| p * self.get(&point::sub(x, z)).unwrap())
                    .sum();
                let delta = if point::sup_norm(x) == 0 { 1.0 } else { 0.0 };
                (gx - delta - avg).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.law.dim();
        writeln!(w, "# bcaplab green table v1")?;
        writeln!(w, "# d={d}")?;
        writeln!(w, "# R={}", self.radius())?;
        writeln!(w, "# method={}", self.method.as_str())?;
        writeln!(w, "# tol={:e}", self.tol)?;
        writeln!(w, "# step_hash={}", self.law.content_hash())?;
        writeln!(w, "# symmetry_mask={}", self.domain.group().mask())?;
        let cols: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},g", cols.join(","))?;
        for (x, g) in self.domain.reps().iter().zip(&self.values) {
            let c: Vec<String> = x[..d].iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{:.17e}", c.join(","), g)?;
        }
        Ok(())
    }

    /// Reads a table written by `write`, checking it belongs to `law`.
    pub fn read<R: BufRead>(law: &StepLaw, r: R) -> Result<GreenTable> {
        let mut header = std::collections::HashMap::new();
        let mut rows = Vec::new();
        for line in r.lines() {
            let line = line?;
            if let Some(h) = line.strip_prefix("# ") {
                if let Some((k, v)) = h.split_once('=') {
                    header.insert(k.to_string(), v.to_string());
                }
            } else if !line.starts_with('x') && !line.is_empty() {
                rows.push(line);
            }
        }
        let get = |k: &str| header.get(k).cloned().ok_or_else(|| Error::Validation(format!("table header lacks {k}")));
        if get("step_hash")? != law.content_hash() {
            return invalid("green table was computed for a different step law");
        }
        let parse_err = |e: String| Error::Validation(format!("bad table: {e}"));
        let radius: i32 = get("R")?.parse().map_err(|e| parse_err(format!("{e}")))?;
        let tol: f64 = get("tol")?.parse().map_err(|e| parse_err(format!("{e}")))?;
        let mask: u32 = get("symmetry_mask")?.parse().map_err(|e| parse_err(format!("{e}")))?;
        let method = match get("method")?.as_str() {
            "fourier" => GreenMethod::Fourier,
            "neumann" => GreenMethod::Neumann,
            m => return invalid(format!("unknown method {m}")),
        };
        let d = law.dim();
        let domain = SymBox::new(d, radius, [0; MAX_D], SymGroup::new(d, mask));
        let mut values = vec![f64::NAN; domain.len()];
        for row in rows {
            let f: Vec<&str> = row.split(',').collect();
            if f.len() != d + 1 {
                return invalid("bad table row");
            }
            let mut x = [0; MAX_D];
            for i in 0..d {
                x[i] = f[i].parse().map_err(|e| parse_err(format!("{e}")))?;
            }
            let i = domain.find_offset(&x).ok_or_else(|| parse_err("row outside box".into()))?;
            values[i] = f[d].parse().map_err(|e| parse_err(format!("{e}")))?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return invalid("green table is incomplete");
        }
        Ok(GreenTable { law: law.clone(), method, tol, domain, values, bracket: None })
    }
}

fn neumann_terms(law: &StepLaw, tol: f64) -> usize {
    // the fitted tail carries the accuracy; the truncation only has to reach the asymptotic regime
    let _ = (law, tol);
    128
}

/// Result of the truncated second-order convolution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondOrder {
    pub value: f64,
    pub tail: f64,
    pub tail_uncertainty: f64,
    pub cutoff: i32,
}

/// G(x) = Σ_y g(x−y) g(y): direct sum over |y|_∞ ≤ L with x − y inside the
/// table, plus c_g² ∫ |y|_θ^{4−2d} over the complement of the cube of half-side L + 1/2.
pub fn second_order_kernel(gt: &GreenTable, x: &Point, tol: f64) -> Result<SecondOrder> {
    let law = gt.law();
    let d = law.dim();
    let m = law
        .isotropic_scale()
        .ok_or_else(|| Error::Validation("second-order tail correction needs an isotropic covariance".into()))?;
    let l = gt.radius() - point::sup_norm(x);
    if l < 2 {
        return invalid("point too close to the table edge for a second-order convolution");
    }
    let mask = (0..d).filter(|&i| x[i] != 0).fold(0u32, |m, i| m | (1 << i)) | gt.domain().group().mask();
    let sum = crate::symmetry::sum_over_orbits(d, l, &SymGroup::new(d, mask), |y, w| {
        w * gt.get(&point::sub(x, y)).unwrap() * gt.get(y).unwrap()
    });
    let cg = c_g_constant(law)?;
    let h = l as f64 + 0.5;
    let q = d as f64 - 4.0;
    let tail = cg * cg * m.powf(d as f64 - 2.0) * h.powf(-q) / q * sphere_max_moment(d, q);
    let tail_uncertainty = tail * (2.0 / h).powi(2) + tail * (point::norm2(x) / h).powi(4);
    if tail_uncertainty > tol {
        return Err(Error::Budget(format!(
            "second-order tail uncertainty {tail_uncertainty:e} above tolerance {tol:e}; enlarge the table"
        )));
    }
    Ok(SecondOrder { value: sum + tail, tail, tail_uncertainty, cutoff: l })
}

/// ∫_{S^{d−1}} max_i |ω_i|^q dω, from the Gaussian moment E[max_i |ξ_i|^q].
fn sphere_max_moment(d: usize, q: f64) -> f64 {
    let df = d as f64;
    let (u, w) = crate::quad::composite(0.0, 12.0, 48, 10);
    let moment: f64 = u
        .iter()
        .zip(&w)
        .map(|(&t, &w)| w * q * t.powf(q - 1.0) * (1.0 - erf(t / 2f64.sqrt()).powi(d as i32)))
        .sum();
    moment * (2.0 * PI).powf(df / 2.0) / (2f64.powf((q + df - 2.0) / 2.0) * gamma((q + df) / 2.0))
}

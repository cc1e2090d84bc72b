//! Riesz capacities of discretized compact sets by minimizing the kernel
//! energy over probability vectors on a point cloud.

use crate::error::{invalid, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    Ball { center: Vec<f64>, radius: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Points { source: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscretizedCompact {
    pub d: usize,
    pub descriptor: Descriptor,
    pub h: f64,
    pub points: Vec<Vec<f64>>,
    /// Cell volumes, or patch areas on a sphere.
    pub weights: Vec<f64>,
    /// 0 for volume cells, 1 for surface patches.
    pub codim: usize,
    /// Integer offsets from `origin` when the cloud is a grid; distances are then exact multiples of h.
    #[serde(skip)]
    grid: Option<(Vec<f64>, Vec<Vec<i64>>)>,
}

fn lattice_in(d: usize, lo: &[f64], hi: &[f64], origin: &[f64], h: f64, keep: impl Fn(&[f64]) -> bool) -> (Vec<Vec<f64>>, Vec<Vec<i64>>) {
    let lo_k: Vec<i64> = (0..d).map(|i| ((lo[i] - origin[i]) / h).floor() as i64 - 1).collect();
    let hi_k: Vec<i64> = (0..d).map(|i| ((hi[i] - origin[i]) / h).ceil() as i64 + 1).collect();
    let mut k = lo_k.clone();
    let (mut pts, mut ks) = (Vec::new(), Vec::new());
    loop {
        let x: Vec<f64> = (0..d).map(|i| origin[i] + h * k[i] as f64).collect();
        if keep(&x) {
            pts.push(x);
            ks.push(k.clone());
        }
        let mut i = 0;
        while i < d {
            k[i] += 1;
            if k[i] <= hi_k[i] {
                break;
            }
            k[i] = lo_k[i];
            i += 1;
        }
        if i == d {
            break;
        }
    }
    (pts, ks)
}

impl DiscretizedCompact {
    fn check(d: usize, h: f64, dims: &[&[f64]]) -> Result<()> {
        if !(1..=8).contains(&d) || !(h > 0.0) {
            return invalid("dimension must be in 1..=8 and mesh size positive");
        }
        if dims.iter().any(|v| v.len() != d) {
            return invalid(format!("coordinates must have {d} entries"));
        }
        Ok(())
    }

    fn finish(self) -> Result<Self> {
        if self.points.is_empty() {
            return invalid("discretized set is empty; refine the mesh");
        }
        Ok(self)
    }

    /// Grid c + hZ^d intersected with the closed ball.
    pub fn ball(d: usize, center: &[f64], radius: f64, h: f64) -> Result<Self> {
        Self::check(d, h, &[center])?;
        if !(radius > 0.0) {
            return invalid("radius must be positive");
        }
        let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
        let r2 = radius * radius * (1.0 + 1e-12);
        let (points, ks) = lattice_in(d, &lo, &hi, center, h, |x| {
            x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r2
        });
        let n = points.len();
        DiscretizedCompact {
            d,
            descriptor: Descriptor::Ball { center: center.to_vec(), radius },
            h,
            points,
            weights: vec![h.powi(d as i32); n],
            codim: 0,
            grid: Some((center.to_vec(), ks)),
        }
        .finish()
    }

    /// Grid cells c + h·k + [−h/2, h/2]^d whose centers lie in the box.
    pub fn cuboid(d: usize, lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        Self::check(d, h, &[lo, hi])?;
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            return invalid("box needs lo <= hi");
        }
        let (points, ks) = lattice_in(d, lo, hi, lo, h, |x| {
            x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= a - 1e-12 * h && *v <= b + 1e-12 * h)
        });
        let n = points.len();
        DiscretizedCompact {
            d,
            descriptor: Descriptor::Box { lo: lo.to_vec(), hi: hi.to_vec() },
            h,
            points,
            weights: vec![h.powi(d as i32); n],
            codim: 0,
            grid: Some((lo.to_vec(), ks)),
        }
        .finish()
    }

    /// Grid points in the shell of width h around the sphere, pushed radially onto it;
    /// each carries area h^{d−1}.
    pub fn sphere(d: usize, center: &[f64], radius: f64, h: f64) -> Result<Self> {
        Self::check(d, h, &[center])?;
        if !(radius > 0.0) || d < 2 {
            return invalid("sphere needs d >= 2 and positive radius");
        }
        let lo: Vec<f64> = center.iter().map(|c| c - radius - h).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + radius + h).collect();
        let norm = |x: &[f64]| x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let (shell, _) = lattice_in(d, &lo, &hi, center, h, |x| {
            let r = norm(x);
            r >= radius - 0.5 * h && r < radius + 0.5 * h
        });
        let points: Vec<Vec<f64>> = shell
            .iter()
            .map(|x| {
                let r = norm(x);
                x.iter().zip(center).map(|(a, c)| c + (a - c) * radius / r).collect()
            })
            .collect();
        let n = points.len();
        DiscretizedCompact {
            d,
            descriptor: Descriptor::Sphere { center: center.to_vec(), radius },
            h,
            points,
            weights: vec![h.powi(d as i32 - 1); n],
            codim: 1,
            grid: None,
        }
        .finish()
    }

    /// An explicit cloud; every point gets cell volume h^d.
    pub fn from_points(d: usize, points: Vec<Vec<f64>>, h: f64, source: &str) -> Result<Self> {
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        Self::check(d, h, &refs)?;
        let n = points.len();
        DiscretizedCompact {
            d,
            descriptor: Descriptor::Points { source: source.into() },
            h,
            points,
            weights: vec![h.powi(d as i32); n],
            codim: 0,
            grid: None,
        }
        .finish()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translate(&self, a: &[f64]) -> Result<Self> {
        if a.len() != self.d {
            return invalid("translation has the wrong dimension");
        }
        let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(a).map(|(x, y)| x + y).collect() };
        let mut out = self.clone();
        out.points = self.points.iter().map(|p| shift(p)).collect();
        out.descriptor = match &self.descriptor {
            Descriptor::Ball { center, radius } => Descriptor::Ball { center: shift(center), radius: *radius },
            Descriptor::Sphere { center, radius } => Descriptor::Sphere { center: shift(center), radius: *radius },
            Descriptor::Box { lo, hi } => Descriptor::Box { lo: shift(lo), hi: shift(hi) },
            Descriptor::Points { source } => Descriptor::Points { source: format!("{source} (translated)") },
        };
        if let Some((o, ks)) = &self.grid {
            out.grid = Some((shift(o), ks.clone()));
        }
        Ok(out)
    }

    /// Union of two clouds; grid offsets survive when both share origin and spacing.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.d != other.d || self.codim != other.codim {
            return invalid("union needs clouds of the same dimension and kind");
        }
        let mut out = self.clone();
        out.points.extend(other.points.iter().cloned());
        out.weights.extend(other.weights.iter().cloned());
        out.descriptor = Descriptor::Points { source: "union".into() };
        out.grid = match (&self.grid, &other.grid) {
            (Some((o1, k1)), Some((o2, k2))) if o1 == o2 && self.h == other.h => {
                Some((o1.clone(), k1.iter().chain(k2).cloned().collect()))
            }
            _ => None,
        };
        Ok(out)
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        match &self.grid {
            Some((_, ks)) => {
                let s: i64 = ks[i].iter().zip(&ks[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                self.h * (s as f64).sqrt()
            }
            None => self.points[i].iter().zip(&self.points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        }
    }
}

/// π^{d/2−γ}Γ(γ/2)/Γ((d−γ)/2).
pub fn kernel_constant(d: usize, gamma_: f64) -> f64 {
    let df = d as f64;
    PI.powf(df / 2.0 - gamma_) * gamma(gamma_ / 2.0) / gamma((df - gamma_) / 2.0)
}

fn unit_ball_volume(m: usize) -> f64 {
    PI.powf(m as f64 / 2.0) / gamma(m as f64 / 2.0 + 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RieszParams {
    pub tol: f64,
    pub max_iter: usize,
    pub max_points: usize,
}

impl Default for RieszParams {
    fn default() -> Self {
        RieszParams { tol: 1e-9, max_iter: 50_000, max_points: 6000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumResult {
    pub d: usize,
    pub gamma: f64,
    pub descriptor: Descriptor,
    pub h: f64,
    pub n_points: usize,
    pub kernel_constant: f64,
    pub energy: f64,
    pub capacity: f64,
    /// max_i |min(n·ν_i, (φ_i − E)/E)| with φ the potential of ν.
    pub kkt_residual: f64,
    pub support_size: usize,
    pub iterations: usize,
    pub weights: Vec<f64>,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut theta) = (0.0, 0.0);
    for (j, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

struct Kernel {
    n: usize,
    k: Vec<f64>,
}

impl Kernel {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.k.par_chunks(self.n).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn kernel_matrix(set: &DiscretizedCompact, gamma_: f64) -> Result<Kernel> {
    let c = kernel_constant(set.d, gamma_);
    // dimension of the cells for the self-interaction average
    let m = set.d - set.codim;
    if gamma_ >= m as f64 {
        return invalid(format!("γ = {gamma_} makes {m}-dimensional cells polar"));
    }
    let n = set.len();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                let rho = (set.weights[i] / unit_ball_volume(m)).powf(1.0 / m as f64);
                c * m as f64 / (m as f64 - gamma_) * rho.powf(-gamma_)
            } else {
                c * set.distance(i, j).powf(-gamma_)
            };
        }
    });
    if k.iter().any(|v| !v.is_finite()) {
        return invalid("coincident points in the cloud");
    }
    Ok(Kernel { n, k })
}

/// Minimizes νᵀKν over the simplex by projected gradient with Barzilai–Borwein
/// trial steps and Armijo backtracking.
pub fn riesz_capacity(set: &DiscretizedCompact, gamma_: f64, params: &RieszParams) -> Result<EquilibriumResult> {
    if !(gamma_ > 0.0 && gamma_ < set.d as f64) {
        return invalid(format!("γ must lie in (0, {})", set.d));
    }
    let n = set.len();
    if n > params.max_points {
        return Err(Error::Budget(format!("{n} points exceed max_points = {}", params.max_points)));
    }
    let kern = kernel_matrix(set, gamma_)?;
    let mut nu = vec![1.0 / n as f64; n];
    let mut phi = kern.apply(&nu);
    let mut energy = dot(&nu, &phi);
    let kkt = |nu: &[f64], phi: &[f64], e: f64| {
        nu.iter().zip(phi).map(|(w, p)| (n as f64 * w).min((p - e) / e).abs()).fold(0.0, f64::max)
    };
    let mut res = kkt(&nu, &phi, energy);
    let mut step = 1.0 / kern.k.iter().step_by(n + 1).cloned().fold(0.0, f64::max);
    let mut it = 0;
    while res > params.tol {
        if it >= params.max_iter {
            return Err(Error::NonConvergence(format!(
                "projected gradient stopped after {it} iterations with KKT residual {res:e}"
            )));
        }
        it += 1;
        // gradient of the energy is 2φ
        let mut t = step;
        // the energy change is evaluated from the step itself, not as a difference of energies
        let (s, ks, de) = loop {
            let trial: Vec<f64> = nu.iter().zip(&phi).map(|(w, p)| w - 2.0 * t * p).collect();
            let cand = project_simplex(&trial);
            let s: Vec<f64> = cand.iter().zip(&nu).map(|(a, b)| a - b).collect();
            let ks = kern.apply(&s);
            // Σ s = 0, so centring φ at the energy level only removes rounding noise
            let lin = 2.0 * phi.iter().zip(&s).map(|(p, v)| (p - energy) * v).sum::<f64>();
            let de = lin + dot(&s, &ks);
            if de <= 1e-4 * lin || s.iter().all(|v| *v == 0.0) {
                break (s, ks, de);
            }
            t *= 0.5;
            if t < 1e-30 {
                return Err(Error::NonConvergence("Armijo backtracking failed".into()));
            }
        };
        let sy = 2.0 * dot(&s, &ks);
        step = if sy > 0.0 { 2.0 * dot(&s, &s) / sy } else { 2.0 * t };
        for i in 0..n {
            nu[i] += s[i];
        }
        if it % 64 == 0 {
            phi = kern.apply(&nu);
            energy = dot(&nu, &phi);
        } else {
            for i in 0..n {
                phi[i] += ks[i];
            }
            energy += de;
        }
        res = kkt(&nu, &phi, energy);
    }
    let max_w = nu.iter().cloned().fold(0.0, f64::max);
    Ok(EquilibriumResult {
        d: set.d,
        gamma: gamma_,
        descriptor: set.descriptor.clone(),
        h: set.h,
        n_points: n,
        kernel_constant: kernel_constant(set.d, gamma_),
        energy,
        capacity: 1.0 / energy,
        kkt_residual: res,
        support_size: nu.iter().filter(|w| **w > 1e-12 * max_w).count(),
        iterations: it,
        weights: nu,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Refinement {
    pub coarse: f64,
    pub fine: f64,
    /// 2·fine − coarse, assuming first-order mesh error.
    pub richardson: f64,
}

/// Capacities at h and h/2 for a cloud builder, with the first-order extrapolation.
pub fn refine(build: impl Fn(f64) -> Result<DiscretizedCompact>, h: f64, gamma_: f64, params: &RieszParams) -> Result<Refinement> {
    let coarse = riesz_capacity(&build(h)?, gamma_, params)?.capacity;
    let fine = riesz_capacity(&build(0.5 * h)?, gamma_, params)?.capacity;
    Ok(Refinement { coarse, fine, richardson: 2.0 * fine - coarse })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioEntry {
    pub d: usize,
    pub radius: f64,
    pub bscap: f64,
    pub cap: f64,
    pub ratio: f64,
}

/// BScap(B(0,r)) = a0·r^{d−4} against the computed Cap_{d−4} of the same ball.
pub fn bscap_riesz_ratio(d: usize, ball: &EquilibriumResult, a0: f64) -> Result<RatioEntry> {
    if d < 5 || ball.d != d || (ball.gamma - (d as f64 - 4.0)).abs() > 1e-12 {
        return invalid("ratio needs d >= 5 and a ball solved at γ = d − 4");
    }
    let radius = match &ball.descriptor {
        Descriptor::Ball { radius, .. } => *radius,
        _ => return invalid("ratio needs a ball"),
    };
    let bscap = a0 * radius.powi(d as i32 - 4);
    Ok(RatioEntry { d, radius, bscap, cap: ball.capacity, ratio: bscap / ball.capacity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[3.0, 0.0, -1.0]), vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.2, 0.1]);
        assert!((p[0] - 0.55).abs() < 1e-15 && (p[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn kernel_constant_values() {
        assert!((kernel_constant(3, 1.0) - PI).abs() < 1e-14);
        // d = 5, γ = 1: π^{3/2}·√π/Γ(2)
        assert!((kernel_constant(5, 1.0) - PI * PI).abs() < 1e-13);
    }

    #[test]
    fn two_points_split_evenly() {
        let set = DiscretizedCompact::from_points(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], 0.1, "pair").unwrap();
        let r = riesz_capacity(&set, 1.0, &RieszParams::default()).unwrap();
        assert!((r.weights[0] - 0.5).abs() < 1e-9);
    }
}

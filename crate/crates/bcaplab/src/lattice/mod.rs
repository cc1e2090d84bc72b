//! Step laws, the θ-norm and the lattice Green function.

mod green;
mod model;
mod neumann;
mod spectral;

pub use green::{second_order_kernel, GreenMethod, GreenTable, SecondOrder};
pub use model::GreenModel;
pub use neumann::NeumannSums;
pub use spectral::{midpoint_green, LaplaceKernel};

use crate::error::{invalid, Result};
use crate::point::{self, Point, MAX_D};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Simple,
    LazySimple,
    Custom,
}

/// A symmetric, irreducible, finitely supported step distribution θ on Z^d.
#[derive(Debug, Clone)]
pub struct StepLaw {
    d: usize,
    name: String,
    support: Vec<(Point, f64)>,
    cov: DMatrix<f64>,
}

impl StepLaw {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> &[(Point, f64)] {
        &self.support
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn det_cov(&self) -> f64 {
        self.cov.determinant()
    }

    /// Largest sup-norm of a support vector.
    pub fn radius(&self) -> i32 {
        self.support.iter().map(|(z, _)| point::sup_norm(z)).max().unwrap_or(0)
    }

    pub fn prob(&self, z: &Point) -> f64 {
        self.support
            .iter()
            .find(|(s, _)| s == z)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    /// Sum of the coordinate variances; equals 1 for the simple walk.
    pub fn trace_cov(&self) -> f64 {
        self.cov.trace()
    }

    /// `Some(m)` when M_θ = m·I.
    pub fn isotropic_scale(&self) -> Option<f64> {
        let m = self.cov[(0, 0)];
        for i in 0..self.d {
            for j in 0..self.d {
                let want = if i == j { m } else { 0.0 };
                if (self.cov[(i, j)] - want).abs() > 1e-12 {
                    return None;
                }
            }
        }
        Some(m)
    }

    /// Steps live on the coordinate axes, so 1 − φ(k) splits into a sum over axes.
    pub fn is_axis_supported(&self) -> bool {
        self.support
            .iter()
            .all(|(z, _)| z[..self.d].iter().filter(|&&c| c != 0).count() <= 1)
    }

    /// Invariance under permutations and sign flips of the coordinates not in `fixed_mask`.
    pub fn invariant_under(&self, fixed_mask: u32) -> bool {
        crate::symmetry::generators(self.d, fixed_mask).iter().all(|g| {
            self.support
                .iter()
                .all(|(z, p)| (self.prob(&g.apply(z)) - p).abs() < 1e-14)
        })
    }

    /// Characteristic function φ(k) = Σ θ(z) cos(k·z).
    pub fn phi(&self, k: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|(z, p)| {
                let dot: f64 = (0..self.d).map(|i| k[i] * z[i] as f64).sum();
                p * dot.cos()
            })
            .sum()
    }

    /// Content hash of the law (support and probabilities), used as a cache key.
    pub fn content_hash(&self) -> String {
        let mut rows: Vec<String> = self
            .support
            .iter()
            .map(|(z, p)| format!("{:?}:{:.17e}", &z[..self.d], p))
            .collect();
        rows.sort();
        let mut h = Sha256::new();
        h.update(format!("d={};", self.d));
        for r in rows {
            h.update(r.as_bytes());
            h.update(b";");
        }
        hex::encode(h.finalize())
    }

    pub fn theta_norm(&self) -> ThetaNorm {
        ThetaNorm {
            d: self.d,
            inv: self.cov.clone().try_inverse().expect("covariance checked at construction"),
        }
    }

    /// Per-axis step profiles for axis-supported laws: for each axis the list
    /// of (jump length m > 0, total mass θ(m e_i) + θ(−m e_i)).
    pub(crate) fn axis_profiles(&self) -> Option<Vec<Vec<(i32, f64)>>> {
        if !self.is_axis_supported() {
            return None;
        }
        let mut prof = vec![Vec::<(i32, f64)>::new(); self.d];
        for (z, p) in &self.support {
            if let Some(i) = (0..self.d).find(|&i| z[i] != 0) {
                let m = z[i].abs();
                match prof[i].iter_mut().find(|(mm, _)| *mm == m) {
                    Some(e) => e.1 += p,
                    None => prof[i].push((m, *p)),
                }
            }
        }
        for p in &mut prof {
            p.sort_by_key(|e| e.0);
        }
        Some(prof)
    }
}

/// |x|_θ = sqrt(xᵀ M_θ⁻¹ x).
#[derive(Debug, Clone)]
pub struct ThetaNorm {
    d: usize,
    inv: DMatrix<f64>,
}

impl ThetaNorm {
    pub fn norm(&self, x: &Point) -> f64 {
        self.norm_f(&x.map(|c| c as f64))
    }

    pub fn norm_f(&self, x: &[f64; MAX_D]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += x[i] * self.inv[(i, j)] * x[j];
            }
        }
        s.max(0.0).sqrt()
    }
}

pub fn make_step_law(kind: StepKind, d: usize, custom: Option<&[(Vec<i32>, f64)]>) -> Result<StepLaw> {
    if d == 0 || d > MAX_D {
        return invalid(format!("dimension {d} outside 1..={MAX_D}"));
    }
    let (name, raw): (&str, Vec<(Vec<i32>, f64)>) = match kind {
        StepKind::Simple => {
            let p = 1.0 / (2 * d) as f64;
            let mut s = Vec::new();
            for i in 0..d {
                for sgn in [1, -1] {
                    let mut v = vec![0; d];
                    v[i] = sgn;
                    s.push((v, p));
                }
            }
            ("simple", s)
        }
        StepKind::LazySimple => {
            let p = 1.0 / (4 * d) as f64;
            let mut s = vec![(vec![0; d], 0.5)];
            for i in 0..d {
                for sgn in [1, -1] {
                    let mut v = vec![0; d];
                    v[i] = sgn;
                    s.push((v, p));
                }
            }
            ("lazy_simple", s)
        }
        StepKind::Custom => match custom {
            Some(c) => ("custom", c.to_vec()),
            None => return invalid("custom step law needs a support list"),
        },
    };
    build(d, name, raw)
}

fn build(d: usize, name: &str, raw: Vec<(Vec<i32>, f64)>) -> Result<StepLaw> {
    let mut support: Vec<(Point, f64)> = Vec::new();
    for (v, p) in raw {
        if v.len() != d {
            return invalid(format!("support vector {v:?} is not {d}-dimensional"));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return invalid(format!("probability {p} of {v:?} is not a finite nonnegative number"));
        }
        if v.iter().any(|c| c.abs() > 1000) {
            return invalid("support vectors must have coordinates of size at most 1000");
        }
        if p == 0.0 {
            continue;
        }
        let z = point::from_slice(&v);
        match support.iter_mut().find(|(s, _)| *s == z) {
            Some(e) => e.1 += p,
            None => support.push((z, p)),
        }
    }
    if support.is_empty() {
        return invalid("empty support");
    }
    support.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = support.iter().map(|s| s.1).sum();
    if (total - 1.0).abs() > 1e-12 {
        return invalid(format!("probabilities sum to {total}, not 1"));
    }
    for (z, p) in &support {
        let neg = z.map(|c| -c);
        let q = support.iter().find(|(s, _)| *s == neg).map(|s| s.1).unwrap_or(0.0);
        if (q - p).abs() > 1e-12 {
            return invalid(format!("step law is not symmetric at {:?}", &z[..d]));
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (z, p) in &support {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += p * z[i] as f64 * z[j] as f64;
            }
        }
    }
    if cov.clone().cholesky().is_none() || cov.determinant() <= 1e-14 {
        return invalid("degenerate covariance");
    }
    let vecs: Vec<Vec<i64>> = support
        .iter()
        .map(|(z, _)| z[..d].iter().map(|&c| c as i64).collect())
        .collect();
    if !generates_lattice(&vecs, d) {
        return invalid("support does not generate Z^d (walk is not irreducible)");
    }
    Ok(StepLaw { d, name: name.to_string(), support, cov })
}

/// Whether integer vectors generate all of Z^d, via row-style Hermite reduction.
fn generates_lattice(vecs: &[Vec<i64>], d: usize) -> bool {
    let mut rows: Vec<Vec<i64>> = vecs.iter().filter(|v| v.iter().any(|&c| c != 0)).cloned().collect();
    let mut det = 1i64;
    for col in 0..d {
        // Euclid on this column among the remaining rows
        loop {
            let nz: Vec<usize> = (0..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            let piv = *nz.iter().min_by_key(|&&r| rows[r][col].abs()).unwrap();
            let pv = rows[piv][col];
            for &r in &nz {
                if r != piv {
                    let q = rows[r][col] / pv;
                    for c in 0..d {
                        rows[r][c] -= q * rows[piv][c];
                    }
                }
            }
        }
        match (0..rows.len()).find(|&r| rows[r][col] != 0) {
            Some(r) => {
                det *= rows[r][col].abs();
                rows.swap_remove(r);
            }
            None => return false,
        }
        if det != 1 {
            return false;
        }
    }
    det == 1
}

/// c_g = Γ((d−2)/2) / (2π^{d/2} √det M_θ), the constant in g(x) ~ c_g |x|_θ^{2−d}.
pub fn c_g_constant(law: &StepLaw) -> Result<f64> {
    let d = law.dim();
    if d < 3 {
        return invalid("c_g needs d >= 3");
    }
    let df = d as f64;
    Ok(gamma((df - 2.0) / 2.0) / (2.0 * PI.powf(df / 2.0) * law.det_cov().sqrt()))
}

/// The power-law profile c_g |x|_θ^{2−d}.
pub fn green_asymptotic(law: &StepLaw, norm: &ThetaNorm, x: &Point) -> f64 {
    let cg = c_g_constant(law).unwrap_or(f64::NAN);
    cg * norm.norm(x).powf(2.0 - law.dim() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_walk_covariance() {
        let law = make_step_law(StepKind::Simple, 5, None).unwrap();
        assert_eq!(law.support().len(), 10);
        for (_, p) in law.support() {
            assert_eq!(*p, 0.1);
        }
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 0.2 } else { 0.0 };
                assert!((law.covariance()[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn theta_norm_of_unit_vector_d6() {
        let law = make_step_law(StepKind::Simple, 6, None).unwrap();
        let n = law.theta_norm().norm(&point::axis(6, 0, 1));
        assert!((n - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn custom_axis_law_moments() {
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
        // oracle: direct summation of θ(z) z_i z_j
        let m00 = 2.0 * 3.0 / 40.0 + 2.0 * 0.125 * 4.0;
        let m11 = 2.0 * 3.0 / 40.0;
        assert!((law.covariance()[(0, 0)] - m00).abs() < 1e-14);
        assert!((law.covariance()[(1, 1)] - m11).abs() < 1e-14);
        assert!(law.covariance()[(0, 1)].abs() < 1e-15);
        assert!(law.is_axis_supported());
        assert!(law.invariant_under(1));
        assert!(!law.invariant_under(0));
    }

    #[test]
    fn rejects_bad_laws() {
        let asym = vec![(vec![1], 0.7), (vec![-1], 0.3)];
        assert!(make_step_law(StepKind::Custom, 1, Some(&asym)).is_err());
        let short = vec![(vec![1], 0.4), (vec![-1], 0.4)];
        assert!(make_step_law(StepKind::Custom, 1, Some(&short)).is_err());
        // ±2 only generates 2Z
        let even = vec![(vec![2], 0.5), (vec![-2], 0.5)];
        assert!(make_step_law(StepKind::Custom, 1, Some(&even)).is_err());
        // degenerate: all steps along one axis in d=2
        let flat = vec![(vec![1, 0], 0.5), (vec![-1, 0], 0.5)];
        assert!(make_step_law(StepKind::Custom, 2, Some(&flat)).is_err());
        // ±(2,1), ±(1,1) generate Z^2
        let skew = vec![(vec![2, 1], 0.25), (vec![-2, -1], 0.25), (vec![1, 1], 0.25), (vec![-1, -1], 0.25)];
        assert!(make_step_law(StepKind::Custom, 2, Some(&skew)).is_ok());
    }

    #[test]
    fn c_g_values() {
        let law6 = make_step_law(StepKind::Simple, 6, None).unwrap();
        assert!((c_g_constant(&law6).unwrap() - 108.0 / PI.powi(3)).abs() < 1e-12);
        let law5 = make_step_law(StepKind::Simple, 5, None).unwrap();
        let want = gamma(1.5) * 5f64.powf(2.5) / (2.0 * PI.powf(2.5));
        assert!((c_g_constant(&law5).unwrap() - want).abs() < 1e-12);
        // lazy walk has M = I/(2d): c_g scales by 2^{d/2}
        let lazy = make_step_law(StepKind::LazySimple, 5, None).unwrap();
        let ratio = c_g_constant(&lazy).unwrap() / c_g_constant(&law5).unwrap();
        assert!((ratio - 2f64.powf(2.5)).abs() < 1e-10);
    }

    #[test]
    fn hash_is_order_independent() {
        let a = vec![(vec![1, 0], 0.25), (vec![-1, 0], 0.25), (vec![0, 1], 0.25), (vec![0, -1], 0.25)];
        let mut b = a.clone();
        b.reverse();
        let la = make_step_law(StepKind::Custom, 2, Some(&a)).unwrap();
        let lb = make_step_law(StepKind::Custom, 2, Some(&b)).unwrap();
        assert_eq!(la.content_hash(), lb.content_hash());
        let simple = make_step_law(StepKind::Simple, 2, None).unwrap();
        assert_eq!(simple.content_hash(), la.content_hash());
    }
}

//! Spectral evaluation of g(x) = (2π)^{-d} ∫ cos(k·x)/(1−φ(k)) dk.
//!
//! For axis-supported laws 1 − φ(k) = Σ_i (w_i − φ_i(k_i)), and writing
//! 1/(1−φ) = ∫_0^∞ e^{−t(1−φ)} dt splits the d-dimensional integral into a
//! product of one-dimensional ones:
//!
//!   g(x) = ∫_0^∞ Π_i J_i(t, x_i) dt,   G(x) = Σ_y g(x−y) g(y) = ∫_0^∞ t Π_i J_i(t, x_i) dt,
//!
//! with J_i(t, n) = (1/π) ∫_0^π e^{−t(w_i − φ_i(k))} cos(nk) dk. The outer integral
//! runs over u = ln t with Gauss–Legendre panels; beyond t = T the walk is Gaussian
//! to relative order 1/T and the tail is integrated in closed form.

use super::StepLaw;
use crate::error::{invalid, Error, Result};
use crate::point::Point;
use crate::quad;
use rayon::prelude::*;
use std::f64::consts::PI;

const LN_T_MIN: f64 = -30.0;
const LN_T_MAX: f64 = 23.0;
const PANELS: usize = 53;
const ORDER: usize = 12;
// truncate the k-range once e^{-t·gap} < e^{-CUT}
const CUT: f64 = 80.0;

#[derive(Debug, Clone)]
pub struct LaplaceKernel {
    d: usize,
    n_max: usize,
    t: Vec<f64>,
    // quadrature weight in t (includes the dt = t du Jacobian)
    w: Vec<f64>,
    // per distinct axis profile: J[node * (n_max+1) + n]
    j: Vec<Vec<f64>>,
    axis_profile: Vec<usize>,
    axis_var: Vec<f64>,
    t_max: f64,
}

struct Profile {
    jumps: Vec<(i32, f64)>,
    total: f64,
    var: f64,
    // suffix minima of total − φ(k) on a uniform grid over [0, π]
    gap_grid: Vec<f64>,
}

impl Profile {
    fn new(jumps: Vec<(i32, f64)>) -> Profile {
        let total = jumps.iter().map(|j| j.1).sum();
        let var = jumps.iter().map(|&(m, p)| p * (m * m) as f64).sum();
        let ng = 4096;
        let mut gap_grid = vec![0.0; ng + 1];
        let mut run = f64::INFINITY;
        for i in (0..=ng).rev() {
            let k = PI * i as f64 / ng as f64;
            let v = total - jumps.iter().map(|&(m, p)| p * (m as f64 * k).cos()).sum::<f64>();
            run = run.min(v);
            gap_grid[i] = run;
        }
        Profile { jumps, total, var, gap_grid }
    }

    fn exponent(&self, k: f64) -> f64 {
        self.total - self.jumps.iter().map(|&(m, p)| p * (m as f64 * k).cos()).sum::<f64>()
    }

    fn cutoff(&self, t: f64) -> f64 {
        let ng = self.gap_grid.len() - 1;
        let need = CUT / t;
        if self.gap_grid[0] > need {
            return PI;
        }
        // gap_grid is nondecreasing in the index; find the first index above `need`
        let mut lo = 0;
        let mut hi = ng;
        if self.gap_grid[hi] <= need {
            return PI;
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.gap_grid[mid] > need {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        PI * hi as f64 / ng as f64
    }

    fn table(&self, t: f64, n_max: usize) -> Vec<f64> {
        let kc = self.cutoff(t);
        let spread = (t * self.var).sqrt().max(1.0);
        let h_target = (0.3 / spread).min(2.0 * PI / (3.0 * n_max.max(1) as f64));
        let mut half = ((kc / h_target).ceil() as usize).max(64);
        if kc >= PI {
            half = half.max(n_max + 64);
        }
        let h = kc / half as f64;
        let mut out = vec![0.0; n_max + 1];
        for q in 0..half {
            let k = (q as f64 + 0.5) * h;
            let e = (-t * self.exponent(k)).exp();
            if e == 0.0 {
                continue;
            }
            let c1 = k.cos();
            let (mut cm, mut c) = (c1, 1.0);
            for slot in out.iter_mut() {
                *slot += e * c;
                let next = 2.0 * c1 * c - cm;
                cm = c;
                c = next;
            }
        }
        for v in &mut out {
            *v *= h / PI;
        }
        out
    }
}

impl LaplaceKernel {
    /// Precomputes J tables for |x_i| ≤ n_max.
    pub fn new(law: &StepLaw, n_max: usize) -> Result<LaplaceKernel> {
        let d = law.dim();
        if d < 5 {
            return invalid("spectral Green kernel needs d >= 5");
        }
        let profiles_raw = law
            .axis_profiles()
            .ok_or_else(|| Error::Validation("spectral Green kernel needs an axis-supported step law".into()))?;
        let mut distinct: Vec<Vec<(i32, f64)>> = Vec::new();
        let mut axis_profile = Vec::with_capacity(d);
        for p in profiles_raw {
            let idx = match distinct.iter().position(|q| q == &p) {
                Some(i) => i,
                None => {
                    distinct.push(p);
                    distinct.len() - 1
                }
            };
            axis_profile.push(idx);
        }
        let profiles: Vec<Profile> = distinct.into_iter().map(Profile::new).collect();
        let axis_var = axis_profile.iter().map(|&i| profiles[i].var).collect();
        let (u, wu) = quad::composite(LN_T_MIN, LN_T_MAX, PANELS, ORDER);
        let t: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let w: Vec<f64> = wu.iter().zip(&t).map(|(a, b)| a * b).collect();
        let j = profiles
            .iter()
            .map(|p| {
                let rows: Vec<Vec<f64>> = t.par_iter().map(|&tt| p.table(tt, n_max)).collect();
                rows.concat()
            })
            .collect();
        Ok(LaplaceKernel { d, n_max, t, w, j, axis_profile, axis_var, t_max: LN_T_MAX.exp() })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn check(&self, x: &Point) -> Result<()> {
        if x[..self.d].iter().any(|c| c.unsigned_abs() as usize > self.n_max) {
            return invalid(format!("point {:?} outside kernel range {}", &x[..self.d], self.n_max));
        }
        Ok(())
    }

    fn integrate(&self, x: &Point, power: i32) -> f64 {
        let stride = self.n_max + 1;
        let mut s = 0.0;
        for (node, (&t, &w)) in self.t.iter().zip(&self.w).enumerate() {
            let mut prod = w * if power == 1 { t } else { 1.0 };
            for i in 0..self.d {
                prod *= self.j[self.axis_profile[i]][node * stride + x[i].unsigned_abs() as usize];
            }
            s += prod;
        }
        // Gaussian tail beyond t_max: Π_i (2π t v_i)^{-1/2} exp(−x_i²/(2 t v_i))
        let c: f64 = self.axis_var.iter().map(|v| (2.0 * PI * v).powf(-0.5)).product();
        let a: f64 = (0..self.d).map(|i| (x[i] as f64).powi(2) / (2.0 * self.axis_var[i])).sum();
        let half = self.d as f64 / 2.0;
        let p = half - power as f64; // integrand ~ t^{-p}(1 − a/t)
        let tt = self.t_max;
        s += c * (tt.powf(1.0 - p) / (p - 1.0) - a * tt.powf(-p) / p);
        if power == 0 && x[..self.d].iter().all(|&c| c == 0) {
            s += LN_T_MIN.exp();
        }
        s
    }

    /// g(x).
    pub fn g(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        Ok(self.integrate(x, 0))
    }

    /// G(x) = Σ_y g(x−y) g(y). Needs d ≥ 5.
    pub fn big_g(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        Ok(self.integrate(x, 1))
    }
}

/// Midpoint tensor rule with dyadic refinement around k = 0, for any step law.
///
/// Level j covers the shell [−π/2^j, π/2^j]^d minus its central half-cube with an
/// n^d midpoint grid; levels are added until a shell contributes less than tol/2,
/// the unresolved core is extrapolated geometrically (shell contributions shrink
/// by 2^{2−d}), and the results for n and n/2 are Richardson-combined.
pub fn midpoint_green(law: &StepLaw, x: &Point, tol: f64, max_levels: usize) -> Result<f64> {
    let coarse = midpoint_levels(law, x, 8, tol, max_levels)?;
    let fine = midpoint_levels(law, x, 16, tol, max_levels)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn midpoint_levels(law: &StepLaw, x: &Point, n: usize, tol: f64, max_levels: usize) -> Result<f64> {
    let d = law.dim();
    let ratio = 2f64.powi(2 - d as i32);
    let mut total = 0.0;
    let mut last = f64::INFINITY;
    for level in 0..max_levels {
        let a = PI / 2f64.powi(level as i32);
        let h = 2.0 * a / n as f64;
        let cells = n.pow(d as u32);
        let inner_lo = n / 4;
        let inner_hi = 3 * n / 4;
        let shell: f64 = (0..cells)
            .into_par_iter()
            .map(|c| {
                let mut idx = [0usize; crate::point::MAX_D];
                let mut rem = c;
                let mut inside = true;
                for slot in idx.iter_mut().take(d) {
                    *slot = rem % n;
                    rem /= n;
                    inside &= *slot >= inner_lo && *slot < inner_hi;
                }
                if inside {
                    return 0.0;
                }
                let mut k = [0.0; crate::point::MAX_D];
                let mut dot = 0.0;
                for i in 0..d {
                    k[i] = -a + (idx[i] as f64 + 0.5) * h;
                    dot += k[i] * x[i] as f64;
                }
                dot.cos() / (1.0 - law.phi(&k[..d]))
            })
            .sum::<f64>()
            * h.powi(d as i32)
            / (2.0 * PI).powi(d as i32);
        total += shell;
        if shell.abs() < tol / 2.0 && level > 1 {
            return Ok(total + shell * ratio / (1.0 - ratio));
        }
        last = shell;
    }
    Err(Error::NonConvergence(format!(
        "midpoint Green quadrature: last shell contribution {last:e} above tol after {max_levels} levels"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_step_law, StepKind};
    use crate::point::{axis, MAX_D};

    #[test]
    fn simple_walk_return_value() {
        // g(0) = 1/(1 − F) with return probability F ≈ 0.135178 for the simple walk in Z^5
        let law = make_step_law(StepKind::Simple, 5, None).unwrap();
        let k = LaplaceKernel::new(&law, 8).unwrap();
        let g0 = k.g(&[0; MAX_D]).unwrap();
        println!("g0 = {g0:.15}");
        assert!((g0 - 1.0 / (1.0 - 0.135178)).abs() < 2e-6);
        // one-step relation at the origin
        let g1 = k.g(&axis(5, 0, 1)).unwrap();
        assert!((g0 - 1.0 - g1).abs() < 1e-11);
    }
}

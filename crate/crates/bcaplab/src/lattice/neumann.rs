//! Green function by repeated convolution: g_N(x) = Σ_{n≤N} P_0(S_n = x).

use super::StepLaw;
use crate::error::{invalid, Result};
use crate::point::MAX_D;
use crate::symmetry::{SymBox, SymGroup};
use nalgebra::{Matrix3, Vector3};

#[derive(Debug, Clone)]
pub struct NeumannSums {
    pub domain: SymBox,
    /// Σ_{n≤N} P_0(S_n = x): a lower bound for g.
    pub partial: Vec<f64>,
    /// partial + local-CLT tail fitted per point.
    pub estimate: Vec<f64>,
    /// partial + C Σ_{n>N} n^{−d/2}, C calibrated at n = 64.
    pub upper: Vec<f64>,
    pub terms: usize,
    pub calibration: f64,
    pub period: usize,
}

/// Convolution on a box large enough that mass escaping it within `terms`
/// steps is below `tol`·1e-3 (Bernstein bound per coordinate).
pub fn neumann_sums(law: &StepLaw, r: i32, terms: usize, tol: f64) -> Result<NeumannSums> {
    let d = law.dim();
    if d < 3 {
        return invalid("neumann sums need a transient walk (d >= 3)");
    }
    if terms < 64 {
        return invalid("neumann sums need at least 64 terms");
    }
    let s = law.radius() as f64;
    let v = (0..d).map(|i| law.covariance()[(i, i)]).fold(0.0, f64::max);
    let lam = (2.0 * d as f64 / (tol * 1e-3)).ln();
    let nv = terms as f64 * v;
    // L² = 2 lam (N v + s L / 3)
    let b = 2.0 * lam * s / 3.0;
    let big_l = 0.5 * (b + (b * b + 8.0 * lam * nv).sqrt());
    let l = (big_l.ceil() as i32).max(r + 2 * law.radius());
    let origin = [[0; MAX_D]];
    let group = SymGroup::largest_invariant(law, &[&origin]);
    let work = SymBox::new(d, l, [0; MAX_D], group.clone());
    let nb = work.neighbors(law);
    let ext = vec![0.0; nb.exterior.len()];
    let out = SymBox::new(d, r, [0; MAX_D], group);
    let map: Vec<usize> = out.reps().iter().map(|p| work.find_offset(p).unwrap()).collect();

    let m = out.len();
    let mut p = vec![0.0; work.len()];
    p[work.find_offset(&[0; MAX_D]).unwrap()] = 1.0;
    let mut partial: Vec<f64> = map.iter().map(|&i| p[i]).collect();
    let window_start = terms / 2;
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut returns = vec![true];
    let mut calibration = 0.0;
    let mut next = vec![0.0; work.len()];
    use rayon::prelude::*;
    for n in 1..=terms {
        next.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = nb.apply(&p, &ext, i));
        std::mem::swap(&mut p, &mut next);
        for (k, &i) in map.iter().enumerate() {
            partial[k] += p[i];
        }
        returns.push(p[map[0]] > 0.0);
        if n == 64 {
            let mx = map.iter().map(|&i| p[i]).fold(0.0, f64::max);
            calibration = mx * 64f64.powf(d as f64 / 2.0);
        }
        if n >= window_start {
            history.push(map.iter().map(|&i| p[i]).collect());
        }
    }
    let period = (1..=terms).filter(|&n| returns[n]).fold(0, gcd).max(1);
    let half = d as f64 / 2.0;
    let tail_bound = calibration * (terms as f64 + 0.5).powf(1.0 - half) / (half - 1.0);
    let upper = partial.iter().map(|g| g + tail_bound).collect();
    let norm = law.theta_norm();
    let estimate = (0..m)
        .map(|k| {
            let a = norm.norm(&out.reps()[k]).powi(2) / 2.0;
            let pts: Vec<(f64, f64)> = history
                .iter()
                .enumerate()
                .map(|(h, row)| ((window_start + h) as f64, row[k]))
                .filter(|&(_, y)| y > 0.0)
                .collect();
            if pts.len() < 4 {
                return partial[k];
            }
            let residue = pts[0].0 as usize % period;
            let fit = fit_lclt(&pts, half, a);
            partial[k] + lclt_tail(&fit, half, a, terms, period, residue)
        })
        .collect();
    Ok(NeumannSums { domain: out, partial, estimate, upper, terms, calibration, period })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Least-squares fit of P_n = n^{−d/2} e^{−a/n} (c0 + c1/n + c2/n²).
fn fit_lclt(pts: &[(f64, f64)], half: f64, a: f64) -> [f64; 3] {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(n, y) in pts {
        let target = y * n.powf(half) * (a / n).exp();
        let row = Vector3::new(1.0, 1.0 / n, 1.0 / (n * n));
        ata += row * row.transpose();
        atb += row * target;
    }
    let c = ata.lu().solve(&atb).unwrap_or(Vector3::zeros());
    [c[0], c[1], c[2]]
}

fn lclt_tail(c: &[f64; 3], half: f64, a: f64, terms: usize, period: usize, residue: usize) -> f64 {
    let mut n = terms + 1;
    while n % period != residue {
        n += 1;
    }
    let end = terms * 4000;
    let mut s = 0.0;
    while n <= end {
        let x = n as f64;
        s += x.powf(-half) * (-a / x).exp() * (c[0] + c[1] / x + c[2] / (x * x));
        n += period;
    }
    s + c[0] * (end as f64).powf(1.0 - half) / ((half - 1.0) * period as f64)
}


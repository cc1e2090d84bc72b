//! Linear solves for the killed-walk operators on a reduced box.
//!
//! With S = D^{1/2}, both (I − DΘ) and (I − ΘD) reduce to the operator
//! A = I − SΘS, which is self-adjoint for the orbit-weighted inner product and
//! positive definite when the killing or the box boundary removes mass. A is
//! solved by conjugate gradients.

use crate::error::{Error, Result};
use crate::symmetry::Neighbors;
use rayon::prelude::*;

const CHUNK: usize = 8192;

/// Σ w_i a_i b_i, summed chunk by chunk in a fixed order.
pub(crate) fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = w
        .par_chunks(CHUNK)
        .zip(a.par_chunks(CHUNK))
        .zip(b.par_chunks(CHUNK))
        .map(|((w, a), b)| w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum())
        .collect();
    parts.iter().sum()
}

/// (Θu)_i with zero exterior values.
pub(crate) fn theta_box(nb: &Neighbors, u: &[f64]) -> Vec<f64> {
    (0..nb.n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for (&j, &p) in nb.row(i).iter().zip(&nb.probs) {
                if (j as usize) < nb.n {
                    s += p * u[j as usize];
                }
            }
            s
        })
        .collect()
}

/// (Θu)_i restricted to exterior neighbors with values `ext`.
pub(crate) fn theta_ext(nb: &Neighbors, ext: &[f64]) -> Vec<f64> {
    (0..nb.n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for (&j, &p) in nb.row(i).iter().zip(&nb.probs) {
                if (j as usize) >= nb.n {
                    s += p * ext[j as usize - nb.n];
                }
            }
            s
        })
        .collect()
}

pub(crate) struct Killed<'a> {
    nb: &'a Neighbors,
    w: &'a [f64],
    s: Vec<f64>,
    d: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> Killed<'a> {
    /// Survival factors `d` ∈ [0, 1]; rows with d = 0 are absorbing.
    pub fn new(nb: &'a Neighbors, w: &'a [f64], d: &[f64], tol: f64) -> Killed<'a> {
        let d: Vec<f64> = d.iter().map(|&v| if v <= 1e-15 { 0.0 } else { v.min(1.0) }).collect();
        let s = d.iter().map(|v| v.sqrt()).collect();
        Killed { nb, w, s, d, tol, max_iter: 50_000 }
    }

    fn apply_a(&self, v: &[f64], out: &mut [f64]) {
        let sv: Vec<f64> = v.par_iter().zip(&self.s).map(|(a, b)| a * b).collect();
        let nb = self.nb;
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut acc = 0.0;
            for (&j, &p) in nb.row(i).iter().zip(&nb.probs) {
                if (j as usize) < nb.n {
                    acc += p * sv[j as usize];
                }
            }
            *o = v[i] - self.s[i] * acc;
        });
    }

    fn cg(&self, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let bb = wdot(self.w, b, b);
        if bb == 0.0 {
            return Ok((x, 0));
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = bb;
        let target = self.tol * self.tol * bb;
        let mut best = f64::INFINITY;
        for it in 0..self.max_iter {
            if rr <= target {
                return Ok((x, it));
            }
            self.apply_a(&p, &mut ap);
            let alpha = rr / wdot(self.w, &p, &ap);
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
            let rr_new = wdot(self.w, &r, &r);
            best = best.min(rr_new);
            let beta = rr_new / rr;
            rr = rr_new;
            p.par_iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        }
        // accept a stagnated solve that is still accurate to 1e-10 relative
        if best <= 1e-20 * bb {
            return Ok((x, self.max_iter));
        }
        Err(Error::NonConvergence(format!(
            "conjugate gradients stalled at relative residual {:.2e}",
            (rr / bb).sqrt()
        )))
    }

    /// u with u − DΘu = b (zero exterior).
    pub fn solve_column(&self, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        // absorbing rows are explicit: u = b there
        let bz: Vec<f64> = b.iter().zip(&self.d).map(|(b, &d)| if d == 0.0 { *b } else { 0.0 }).collect();
        let tz = theta_box(self.nb, &bz);
        let rhs: Vec<f64> = (0..b.len())
            .map(|i| if self.d[i] == 0.0 { 0.0 } else { (b[i] + self.d[i] * tz[i]) / self.s[i] })
            .collect();
        let (y, it) = self.cg(&rhs)?;
        let u = (0..b.len()).map(|i| if self.d[i] == 0.0 { b[i] } else { self.s[i] * y[i] }).collect();
        Ok((u, it))
    }

    /// q with q − ΘDq = e (zero exterior).
    pub fn solve_adjoint(&self, e: &[f64]) -> Result<(Vec<f64>, usize)> {
        let rhs: Vec<f64> = (0..e.len()).map(|i| self.s[i] * e[i]).collect();
        let (y, it) = self.cg(&rhs)?;
        let dq: Vec<f64> = (0..e.len()).map(|i| self.s[i] * y[i]).collect();
        let t = theta_box(self.nb, &dq);
        let q = (0..e.len()).map(|i| if self.d[i] == 0.0 { e[i] + t[i] } else { y[i] / self.s[i] }).collect();
        Ok((q, it))
    }
}

//! p_c, p_adj, p_− and p_I.

use super::linear::{theta_box, theta_ext, Killed};
use super::{BoundaryPolicy, Far, FieldQuantity, Geometry, LatticeField, Order, SolverOptions};
use crate::error::{Error, Result};
use crate::lattice::StepLaw;
use crate::offspring::OffspringLaw;
use crate::point::{self, Point};
use crate::sets::LatticeSet;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

const LINEAR_TOL: f64 = 1e-13;

/// p ↦ 1 − f(1 − Θp) off K, 1 on K.
fn update(geom: &Geometry, mu: &OffspringLaw, p: &[f64], te: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let tp = theta_box(&geom.nb, p);
    let m: Vec<f64> = tp.iter().zip(te).map(|(a, b)| 1.0 - a - b).collect();
    let f = m
        .par_iter()
        .zip(&geom.in_k)
        .map(|(&m, &k)| if k { 1.0 } else { 1.0 - mu.f(m) })
        .collect();
    (f, m)
}

/// Fixed point of the p_c map for given exterior values: plain sweeps from
/// `init` (or from zero), then Newton steps whose linear systems are solved by CG.
fn newton_pc(geom: &Geometry, mu: &OffspringLaw, ext: &[f64], init: Option<&[f64]>) -> Result<(Vec<f64>, usize, f64)> {
    let opts = &geom.opts;
    let te = theta_ext(&geom.nb, ext);
    let mut p: Vec<f64> = match init {
        Some(v) => v.to_vec(),
        None => {
            let mut p: Vec<f64> = geom.in_k.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
            for _ in 0..opts.sweeps {
                p = update(geom, mu, &p, &te).0;
            }
            p
        }
    };
    for it in 0..=opts.max_newton {
        let (fp, m) = update(geom, mu, &p, &te);
        let r: Vec<f64> = fp.iter().zip(&p).map(|(a, b)| a - b).collect();
        let res = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if res < opts.tol {
            return Ok((p, it, res));
        }
        if it == opts.max_newton {
            break;
        }
        let d: Vec<f64> = m.iter().zip(&geom.in_k).map(|(&m, &k)| if k { 0.0 } else { mu.f_prime(m) }).collect();
        let (delta, _) = Killed::new(&geom.nb, geom.weights(), &d, LINEAR_TOL).solve_column(&r)?;
        for (p, dl) in p.iter_mut().zip(&delta) {
            *p = (*p + dl).clamp(0.0, 1.0);
        }
    }
    Err(Error::NonConvergence(format!("p_c Newton iteration did not reach tol {:e}", opts.tol)))
}

/// 2×2 solve.
fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [(b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - b[0] * a[1][0]) / det]
}

/// p_c on the geometry's box. Under the matched policy the closure
/// coefficients are the fixed point of (closure → field → far-zone fit),
/// located by Broyden's method.
pub fn solve_p_c(geom: &Arc<Geometry>, mu: &OffspringLaw) -> Result<LatticeField> {
    let zero = vec![0.0; geom.nb.exterior.len()];
    let (p0, it0, res0) = newton_pc(geom, mu, &zero, None)?;
    if geom.opts.policy == BoundaryPolicy::DirichletZero {
        return Ok(LatticeField {
            geometry: geom.clone(),
            quantity: FieldQuantity::PC,
            values: p0,
            exterior: zero,
            far: Far::Zero,
            iterations: it0,
            residual: res0,
        });
    }
    let mut iterations = it0;
    let mut eval = |c: [f64; 2], init: &[f64]| -> Result<(Vec<f64>, [f64; 2], f64)> {
        let ext = geom.closure_values(c, Order::G1);
        let (p, it, res) = newton_pc(geom, mu, &ext, Some(init))?;
        iterations += it;
        let f = geom.fit(&p, Order::G1);
        Ok((p, [f[0] - c[0], f[1] - c[1]], res))
    };
    // the zero closure drags the far zone down, so start from the largest zone ratio with no 1/ρ term
    let c0 = geom.zone.iter().zip(&geom.zone_g).map(|(&i, g)| p0[i] / g).fold(0.0, f64::max);
    let mut c = [c0, 0.0];
    let (mut p, mut r, mut res) = eval(c, &p0)?;
    // finite-difference Jacobian to start Broyden
    let h = 1e-3 * c[0].abs().max(1e-6);
    let mut jac = [[0.0; 2]; 2];
    for k in 0..2 {
        let mut ck = c;
        ck[k] += h;
        let (_, rk, _) = eval(ck, &p)?;
        jac[0][k] = (rk[0] - r[0]) / h;
        jac[1][k] = (rk[1] - r[1]) / h;
    }
    let scale = c[0].abs().max(1e-300);
    for _ in 0..40 {
        if r[0].abs().max(r[1].abs()) < 1e-11 * scale {
            let ext = geom.closure_values(c, Order::G1);
            return Ok(LatticeField {
                geometry: geom.clone(),
                quantity: FieldQuantity::PC,
                values: p,
                exterior: ext,
                far: Far::Power { order: Order::G1, c },
                iterations,
                residual: res,
            });
        }
        let step = solve2(jac, [-r[0], -r[1]]);
        let cn = [c[0] + step[0], c[1] + step[1]];
        let (pn, rn, resn) = eval(cn, &p)?;
        // Broyden update J += (Δr − JΔc) Δcᵀ / |Δc|²
        let jd = [jac[0][0] * step[0] + jac[0][1] * step[1], jac[1][0] * step[0] + jac[1][1] * step[1]];
        let nn = step[0] * step[0] + step[1] * step[1];
        if nn > 0.0 {
            for a in 0..2 {
                let u = (rn[a] - r[a] - jd[a]) / nn;
                jac[a][0] += u * step[0];
                jac[a][1] += u * step[1];
            }
        }
        c = cn;
        p = pn;
        r = rn;
        res = resn;
    }
    Err(Error::NonConvergence("matched closure coefficients for p_c did not settle".into()))
}

/// Σ_z θ(z) F(y + z) for an absolute point y.
fn theta_at(law: &StepLaw, y: &Point, f: impl Fn(&Point) -> f64) -> f64 {
    law.support().iter().map(|(z, p)| p * f(&point::add(y, z))).sum()
}

/// p_adj = 1 − f̃(1 − Θp_c) off K, 1 on K.
pub fn solve_p_adj(p_c: &LatticeField, mu: &OffspringLaw) -> LatticeField {
    let geom = &p_c.geometry;
    let adj = mu.adjoint();
    let tp = theta_box(&geom.nb, &p_c.values);
    let te = theta_ext(&geom.nb, &p_c.exterior);
    let values: Vec<f64> = (0..geom.len())
        .map(|i| if geom.in_k[i] { 1.0 } else { 1.0 - adj.f(1.0 - tp[i] - te[i]) })
        .collect();
    let (exterior, far) = match p_c.far {
        Far::Zero => (vec![0.0; geom.nb.exterior.len()], Far::Zero),
        Far::Power { .. } => {
            let ext = geom
                .nb
                .exterior
                .par_iter()
                .map(|y| {
                    let ya = point::add(y, &geom.center);
                    1.0 - adj.f(1.0 - theta_at(&geom.law, &ya, |q| p_c.value_at(q)))
                })
                .collect();
            (ext, Far::Power { order: Order::G1, c: geom.fit(&values, Order::G1) })
        }
    };
    LatticeField {
        geometry: geom.clone(),
        quantity: FieldQuantity::PAdj,
        values,
        exterior,
        far,
        iterations: 0,
        residual: 0.0,
    }
}

/// p_− from 1 − p_−(x) = Σ_y θ(y − x)(1 − p_I(y)) with 1 − p_I = (1 − p_adj)(1 − p_−):
/// a linear system for q = 1 − p_−. Returns (p_−, p_I).
pub fn solve_p_minus(p_adj: &LatticeField) -> Result<(LatticeField, LatticeField)> {
    let geom = &p_adj.geometry;
    let nb = &geom.nb;
    let d: Vec<f64> = p_adj.values.iter().zip(&geom.in_k).map(|(p, &k)| if k { 0.0 } else { 1.0 - p }).collect();
    let kil = Killed::new(nb, geom.weights(), &d, LINEAR_TOL);
    let (q, ext_pm, far, iterations) = match p_adj.far {
        Far::Zero => {
            let ones = vec![1.0; nb.exterior.len()];
            let (q, it) = kil.solve_adjoint(&theta_ext(nb, &ones))?;
            (q, vec![0.0; nb.exterior.len()], Far::Zero, it)
        }
        Far::Power { .. } => {
            let dext: Vec<f64> = p_adj.exterior.iter().map(|p| 1.0 - p).collect();
            let basis = [
                dext.clone(),
                dext.iter().zip(&geom.ext_big_g).map(|(a, b)| a * b).collect::<Vec<_>>(),
                dext.iter().zip(&geom.ext_big_g).zip(&geom.ext_norm).map(|((a, b), r)| a * b / r).collect::<Vec<_>>(),
            ];
            let mut sols = Vec::new();
            let mut its = 0;
            for b in &basis {
                let (s, it) = kil.solve_adjoint(&theta_ext(nb, b))?;
                its += it;
                sols.push(s);
            }
            // p_− = (1 − q0) + c0 q1 + c1 q2 and c = fit(p_−)
            let one_minus: Vec<f64> = sols[0].iter().map(|q| 1.0 - q).collect();
            let f0 = geom.fit(&one_minus, Order::G2);
            let f1 = geom.fit(&sols[1], Order::G2);
            let f2 = geom.fit(&sols[2], Order::G2);
            let c = solve2([[1.0 - f1[0], -f2[0]], [-f1[1], 1.0 - f2[1]]], f0);
            let q: Vec<f64> = (0..geom.len()).map(|i| sols[0][i] - c[0] * sols[1][i] - c[1] * sols[2][i]).collect();
            (q, geom.closure_values(c, Order::G2), Far::Power { order: Order::G2, c }, its)
        }
    };
    let pm: Vec<f64> = q.iter().map(|q| 1.0 - q).collect();
    let pi: Vec<f64> = (0..geom.len())
        .map(|i| if geom.in_k[i] { 1.0 } else { p_adj.values[i] + d[i] * pm[i] })
        .collect();
    let pi_ext: Vec<f64> = match far {
        Far::Zero => vec![0.0; nb.exterior.len()],
        Far::Power { .. } => p_adj.exterior.iter().zip(&ext_pm).map(|(a, m)| a + (1.0 - a) * m).collect(),
    };
    // residual of p_− = Θp_I
    let tp = theta_box(nb, &pi);
    let te = theta_ext(nb, &pi_ext);
    let residual = (0..geom.len()).map(|i| (pm[i] - tp[i] - te[i]).abs()).fold(0.0, f64::max);
    let pi_far = match far {
        Far::Zero => Far::Zero,
        Far::Power { .. } => Far::Power { order: Order::G2, c: geom.fit(&pi, Order::G2) },
    };
    let p_minus = LatticeField {
        geometry: geom.clone(),
        quantity: FieldQuantity::PMinus,
        values: pm,
        exterior: ext_pm,
        far,
        iterations,
        residual,
    };
    let p_i = LatticeField {
        geometry: geom.clone(),
        quantity: FieldQuantity::PI,
        values: pi,
        exterior: pi_ext,
        far: pi_far,
        iterations,
        residual,
    };
    Ok((p_minus, p_i))
}

/// All four fields of one K.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub p_c: LatticeField,
    pub p_adj: LatticeField,
    pub p_minus: LatticeField,
    pub p_i: LatticeField,
}

#[derive(Debug, Clone, Serialize)]
pub struct EscapeValue {
    pub a: Vec<i32>,
    pub e_k: f64,
}

impl FieldSet {
    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.p_c.geometry
    }

    /// e_K(a) = 1 − p_−(a) for a ∈ K.
    pub fn escape(&self) -> Vec<EscapeValue> {
        let g = self.geometry();
        g.k.points()
            .iter()
            .map(|a| EscapeValue { a: point::to_vec(a, g.law.dim()), e_k: 1.0 - self.p_minus.value_at(a) })
            .collect()
    }

    /// Σ_{a∈K} e_K(a).
    pub fn bcap_sum(&self) -> f64 {
        self.escape().iter().map(|e| e.e_k).sum()
    }
}

pub fn solve_all(k: &LatticeSet, step: &StepLaw, mu: &OffspringLaw, opts: &SolverOptions) -> Result<FieldSet> {
    let geom = Geometry::new(k, step, opts)?;
    let p_c = solve_p_c(&geom, mu)?;
    let p_adj = solve_p_adj(&p_c, mu);
    let (p_minus, p_i) = solve_p_minus(&p_adj)?;
    Ok(FieldSet { p_c, p_adj, p_minus, p_i })
}

//! Green function of the walk killed at rate p_adj.

use super::linear::{theta_box, theta_ext, Killed};
use super::{Far, FieldQuantity, Geometry, LatticeField, Order};
use crate::error::{invalid, Result};
use crate::lattice::GreenModel;
use crate::point::{self, Point, MAX_D};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

const LINEAR_TOL: f64 = 1e-13;

fn survival(p_adj: &LatticeField) -> Vec<f64> {
    let g = &p_adj.geometry;
    p_adj.values.iter().zip(&g.in_k).map(|(p, &k)| if k { 0.0 } else { 1.0 - p }).collect()
}

/// u with u = b + (1 − p_adj)·Θu on the box, exterior values of u given by `ext`
/// (zero when `None`).
pub fn apply_green_killed(p_adj: &LatticeField, b: &[f64], ext: Option<&[f64]>) -> Result<Vec<f64>> {
    let g = &p_adj.geometry;
    let d = survival(p_adj);
    let mut rhs = b.to_vec();
    if let Some(e) = ext {
        let te = theta_ext(&g.nb, e);
        for i in 0..rhs.len() {
            rhs[i] += d[i] * te[i];
        }
    }
    Ok(Killed::new(&g.nb, g.weights(), &d, LINEAR_TOL).solve_column(&rhs)?.0)
}

/// G_K(·, y) (column) and G_K(y, ·) (row) for one target y.
#[derive(Debug, Clone)]
pub struct GreenPair {
    pub y: Point,
    pub column: LatticeField,
    pub row: LatticeField,
}

/// Solves G_K(x, y) = δ_{x,y} + (1 − p_adj(x)) Σ_z θ(z − x) G_K(z, y) for each
/// target on the largest symmetry subgroup fixing it, together with the row
/// G_K(y, w) = δ_{y,w} + Σ_v G_K(y, v)(1 − p_adj(v)) θ(w − v).
///
/// Under the matched policy the fields are written as g(· − y) minus a defect
/// that decays like g and is closed by a fitted power law.
pub fn green_killed(p_adj: &LatticeField, targets: &[Point]) -> Result<Vec<GreenPair>> {
    let base = &p_adj.geometry;
    let s = base.law.radius();
    let mut geoms: HashMap<u32, Arc<Geometry>> = HashMap::new();
    let mut out = Vec::new();
    for y in targets {
        let off = point::sub(y, &base.center);
        if point::sup_norm(&off) + s > base.opts.r_box {
            return invalid(format!("target {:?} is not inside the box interior", &y[..base.law.dim()]));
        }
        let mask = (0..base.law.dim()).filter(|&i| off[i] != 0).fold(0u32, |m, i| m | (1 << i));
        let geom = match geoms.get(&mask) {
            Some(g) => g.clone(),
            None => {
                let g = if mask & !base.domain.group().mask() == 0 { base.clone() } else { base.restricted(mask)? };
                geoms.insert(mask, g.clone());
                g
            }
        };
        let pa = if Arc::ptr_eq(&geom, base) { p_adj.clone() } else { p_adj.transfer(&geom) };
        out.push(solve_pair(&geom, &pa, y)?);
    }
    Ok(out)
}

fn solve_pair(geom: &Arc<Geometry>, pa: &LatticeField, y: &Point) -> Result<GreenPair> {
    let n = geom.len();
    let nb = &geom.nb;
    let iy = geom.index(y).unwrap();
    let d = survival(pa);
    let kil = Killed::new(nb, geom.weights(), &d, LINEAR_TOL);
    let delta: Vec<f64> = (0..n).map(|i| if i == iy { 1.0 } else { 0.0 }).collect();
    let field = |quantity, values: Vec<f64>, exterior: Vec<f64>, far, iterations| LatticeField {
        geometry: geom.clone(),
        quantity,
        values,
        exterior,
        far,
        iterations,
        residual: 0.0,
    };
    let (mut column, mut row) = match &geom.model {
        None => {
            let zero = vec![0.0; nb.exterior.len()];
            let (u, iu) = kil.solve_column(&delta)?;
            let (r, ir) = kil.solve_adjoint(&delta)?;
            (
                field(FieldQuantity::GreenColumn, u, zero.clone(), Far::Zero, iu),
                field(FieldQuantity::GreenRow, r, zero, Far::Zero, ir),
            )
        }
        Some(model) => {
            let gy: Vec<f64> = (0..n).into_par_iter().map(|i| model.g(&point::sub(&geom.domain.point(i), y))).collect();
            let gy_ext: Vec<f64> = nb
                .exterior
                .par_iter()
                .map(|e| model.g(&point::sub(&point::add(e, &geom.center), y)))
                .collect();
            let gext = &geom.ext_g;
            let gext_r: Vec<f64> = gext.iter().zip(&geom.ext_norm).map(|(g, r)| g / r).collect();

            // column defect e: (I − DΘ)e = p_adj·(g_y − δ_y) + DΘ_ext e_ext, e_ext = (c0 + c1/ρ)g
            let rhs0: Vec<f64> = (0..n).map(|i| (1.0 - d[i]) * (gy[i] - delta[i])).collect();
            let mut sols = vec![kil.solve_column(&rhs0)?];
            for b in [gext, &gext_r] {
                let te = theta_ext(nb, b);
                let rhs: Vec<f64> = (0..n).map(|i| d[i] * te[i]).collect();
                sols.push(kil.solve_column(&rhs)?);
            }
            let (e, ce, it_c) = superpose(geom, &sols);
            let u: Vec<f64> = (0..n).map(|i| gy[i] - e[i]).collect();
            let u_ext: Vec<f64> = gy_ext.iter().zip(geom.closure_values(ce, Order::G1)).map(|(a, b)| a - b).collect();
            let cu = geom.fit(&u, Order::G1);

            // row defect e': (I − ΘD)e' = Θ(p_adj g_y) + Θ_ext(D_ext e'_ext)
            let pg: Vec<f64> = (0..n).map(|i| (1.0 - d[i]) * gy[i]).collect();
            let pg_ext: Vec<f64> = pa.exterior.iter().zip(&gy_ext).map(|(p, g)| p * g).collect();
            let tb = theta_box(nb, &pg);
            let te = theta_ext(nb, &pg_ext);
            let rhs0: Vec<f64> = (0..n).map(|i| tb[i] + te[i]).collect();
            let dext: Vec<f64> = pa.exterior.iter().map(|p| 1.0 - p).collect();
            let mut sols = vec![kil.solve_adjoint(&rhs0)?];
            for b in [gext, &gext_r] {
                let v: Vec<f64> = b.iter().zip(&dext).map(|(a, b)| a * b).collect();
                sols.push(kil.solve_adjoint(&theta_ext(nb, &v))?);
            }
            let (e2, ce2, it_r) = superpose(geom, &sols);
            let r: Vec<f64> = (0..n).map(|i| gy[i] - e2[i]).collect();
            let r_ext: Vec<f64> = gy_ext.iter().zip(geom.closure_values(ce2, Order::G1)).map(|(a, b)| a - b).collect();
            let cr = geom.fit(&r, Order::G1);
            (
                field(FieldQuantity::GreenColumn, u, u_ext, Far::Power { order: Order::G1, c: cu }, it_c),
                field(FieldQuantity::GreenRow, r, r_ext, Far::Power { order: Order::G1, c: cr }, it_r),
            )
        }
    };
    // residuals of the defining equations
    let tu = theta_box(nb, &column.values);
    let tue = theta_ext(nb, &column.exterior);
    column.residual = (0..n)
        .map(|i| (column.values[i] - delta[i] - d[i] * (tu[i] + tue[i])).abs())
        .fold(0.0, f64::max);
    let dr: Vec<f64> = (0..n).map(|i| d[i] * row.values[i]).collect();
    let dre: Vec<f64> = pa.exterior.iter().zip(&row.exterior).map(|(p, r)| (1.0 - p) * r).collect();
    let tr = theta_box(nb, &dr);
    let tre = theta_ext(nb, &dre);
    row.residual = (0..n).map(|i| (row.values[i] - delta[i] - tr[i] - tre[i]).abs()).fold(0.0, f64::max);
    Ok(GreenPair { y: *y, column, row })
}

/// e = s0 + c0 s1 + c1 s2 with c = fit(e) over the far zone.
fn superpose(geom: &Geometry, sols: &[(Vec<f64>, usize)]) -> (Vec<f64>, [f64; 2], usize) {
    let f0 = geom.fit(&sols[0].0, Order::G1);
    let f1 = geom.fit(&sols[1].0, Order::G1);
    let f2 = geom.fit(&sols[2].0, Order::G1);
    let a = [[1.0 - f1[0], -f2[0]], [-f1[1], 1.0 - f2[1]]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let c = [(f0[0] * a[1][1] - a[0][1] * f0[1]) / det, (a[0][0] * f0[1] - f0[0] * a[1][0]) / det];
    let e = (0..geom.len()).map(|i| sols[0].0[i] + c[0] * sols[1].0[i] + c[1] * sols[2].0[i]).collect();
    (e, c, sols.iter().map(|s| s.1).sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenDefectRow {
    pub s: f64,
    /// max of 1 − G_K/g over box points x and targets y with |x − c|, |y − c| ≥ s·r.
    pub max_defect: f64,
    pub at_x: Vec<i32>,
    pub at_y: Vec<i32>,
    /// Smallest value of 1 − G_K/g seen (nonnegative when G_K ≤ g).
    pub min_defect: f64,
}

/// Largest relative defect 1 − G_K(x, y)/g(x − y) (both orientations) with x, y
/// at distance at least s·r from the box center, for each s. Targets are the axis
/// points at distance ⌈s·r⌉ on every coordinate axis, which are one orbit.
pub fn green_defect_trend(p_adj: &LatticeField, r: f64, s_values: &[f64]) -> Result<Vec<GreenDefectRow>> {
    let geom = &p_adj.geometry;
    let d = geom.law.dim();
    let model = match &geom.model {
        Some(m) => m.clone(),
        None => Arc::new(GreenModel::new(&geom.law, (2 * geom.opts.r_box + 2 * geom.law.radius()) as usize)?),
    };
    let targets: Vec<Point> = s_values
        .iter()
        .map(|s| point::add(&geom.center, &point::axis(d, 0, (s * r).ceil() as i32)))
        .collect();
    let pairs = green_killed(p_adj, &targets)?;
    let mut rows = Vec::new();
    for (s, pair) in s_values.iter().zip(&pairs) {
        let lim = s * r;
        let mut best = (f64::NEG_INFINITY, [0; MAX_D]);
        let mut min_defect = f64::INFINITY;
        for f in [&pair.column, &pair.row] {
            let gm = &f.geometry;
            let scan: Vec<(f64, usize)> = (0..gm.len())
                .into_par_iter()
                .filter_map(|i| {
                    let x = gm.domain.point(i);
                    if point::norm2(&point::sub(&x, &gm.center)) < lim {
                        return None;
                    }
                    let defect = 1.0 - f.values[i] / model.g(&point::sub(&x, &pair.y));
                    Some((defect, i))
                })
                .collect();
            for (defect, i) in scan {
                if defect > best.0 {
                    best = (defect, gm.domain.point(i));
                }
                min_defect = min_defect.min(defect);
            }
        }
        rows.push(GreenDefectRow {
            s: *s,
            max_defect: best.0,
            at_x: point::to_vec(&best.1, d),
            at_y: point::to_vec(&pair.y, d),
            min_defect,
        });
    }
    Ok(rows)
}

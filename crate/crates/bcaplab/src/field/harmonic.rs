//! Harmonic measures of the killed walk relative to a finite set B ⊇ K.

use super::LatticeField;
use crate::error::{invalid, Error, Result};
use crate::point::{self, Point};
use crate::sets::LatticeSet;
use nalgebra::DMatrix;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct HarmonicMeasureTable {
    pub b: LatticeSet,
    /// Points outside B reachable from B in one step.
    pub shell: Vec<Point>,
    /// G^B(x, w): killed-walk Green function stopped on leaving B.
    pub green_b: DMatrix<f64>,
    /// H(x, z), x ∈ B, z ∈ shell: weight of leaving B for the first time at z.
    pub exit: DMatrix<f64>,
    /// H(z, x), z ∈ shell, x ∈ B: weight of paths from z to x that stay in B after the first step.
    pub entrance: DMatrix<f64>,
    /// Survival 1 − p_adj on B and on the shell.
    pub survival_b: Vec<f64>,
    pub survival_shell: Vec<f64>,
    b_index: HashMap<u128, usize>,
    shell_index: HashMap<u128, usize>,
}

impl HarmonicMeasureTable {
    pub fn b_index(&self, x: &Point) -> Option<usize> {
        self.b_index.get(&point::key(x)).copied()
    }

    pub fn shell_index(&self, z: &Point) -> Option<usize> {
        self.shell_index.get(&point::key(z)).copied()
    }

    /// Σ_z H(x, z) for every x ∈ B (≤ 1; the defect is the killing).
    pub fn exit_mass(&self) -> Vec<f64> {
        (0..self.exit.nrows()).map(|i| self.exit.row(i).sum()).collect()
    }
}

/// Builds the table with a dense LU factorization of I − D_B Θ_B.
pub fn harmonic_measure(b: &LatticeSet, p_adj: &LatticeField) -> Result<HarmonicMeasureTable> {
    let geom = &p_adj.geometry;
    let law = &geom.law;
    if !geom.k.is_subset_of(b) {
        return invalid("harmonic measure needs K ⊂ B");
    }
    if b.len() > 6000 {
        return invalid("B too large for the dense harmonic-measure solve (limit 6000 points)");
    }
    let s = law.radius();
    for x in b.points() {
        if point::sup_norm(&point::sub(x, &geom.center)) + 2 * s > geom.opts.r_box {
            return invalid("B and its one-step shell must lie inside the solver box");
        }
    }
    let pts = b.points();
    let nb_ = pts.len();
    let b_index: HashMap<u128, usize> = pts.iter().enumerate().map(|(i, p)| (point::key(p), i)).collect();
    let mut shell = Vec::new();
    let mut shell_index = HashMap::new();
    for x in pts {
        for (z, _) in law.support() {
            let y = point::add(x, z);
            let k = point::key(&y);
            if !b_index.contains_key(&k) && !shell_index.contains_key(&k) {
                shell_index.insert(k, shell.len());
                shell.push(y);
            }
        }
    }
    let surv = |x: &Point| if geom.k.contains(x) { 0.0 } else { 1.0 - p_adj.value_at(x) };
    let survival_b: Vec<f64> = pts.iter().map(surv).collect();
    let survival_shell: Vec<f64> = shell.iter().map(surv).collect();

    let mut m = DMatrix::<f64>::identity(nb_, nb_);
    for (i, x) in pts.iter().enumerate() {
        for (z, p) in law.support() {
            if let Some(&j) = b_index.get(&point::key(&point::add(x, z))) {
                m[(i, j)] -= survival_b[i] * p;
            }
        }
    }
    let green_b = m
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence("killed walk on B has a singular Green matrix".into()))?;

    // exit: H(x, z) = Σ_w G^B(x, w) D(w) θ(z − w)
    let ns = shell.len();
    let mut step_out = DMatrix::<f64>::zeros(nb_, ns);
    // entrance: H(z, x) = D(z) Σ_w θ(w − z) G^B(w, x)
    let mut step_in = DMatrix::<f64>::zeros(ns, nb_);
    for (w, x) in pts.iter().enumerate() {
        for (z, p) in law.support() {
            let y = point::add(x, z);
            if let Some(&k) = shell_index.get(&point::key(&y)) {
                step_out[(w, k)] += survival_b[w] * p;
                step_in[(k, w)] += survival_shell[k] * p;
            }
        }
    }
    let exit = &green_b * step_out;
    let entrance = step_in * &green_b;
    Ok(HarmonicMeasureTable {
        b: b.clone(),
        shell,
        green_b,
        exit,
        entrance,
        survival_b,
        survival_shell,
        b_index,
        shell_index,
    })
}

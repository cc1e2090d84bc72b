//! Residuals of the exact relations between the solved fields.

use super::{apply_green_killed, green_killed, harmonic_measure, FieldSet};
use crate::error::Result;
use crate::lattice::GreenModel;
use crate::offspring::OffspringLaw;
use crate::point::{self, Point};
use crate::sets::LatticeSet;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub name: String,
    /// Residual for identities, largest violation for inequalities.
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityRow {
    fn new(name: &str, value: f64, tolerance: f64) -> IdentityRow {
        IdentityRow { name: name.into(), value, tolerance, pass: value.is_finite() && value <= tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub policy: String,
    pub r_box: i32,
    pub k_size: usize,
    pub b_size: usize,
    pub bcap_sum: f64,
    pub bcap_harmonic: f64,
    pub rows: Vec<IdentityRow>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&IdentityRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub const IDENTITY_TOL: f64 = 1e-8;
/// Slack for inequalities that hold exactly in exact arithmetic.
pub const INEQUALITY_TOL: f64 = 1e-11;

/// Checks the Green-function representations of p_c and p_I, the first-entrance
/// and last-exit decompositions through B at the given targets (outside B), the
/// harmonic-measure formula for Σ e_K, and the exact inequalities G_K ≤ g and
/// Σ_z H(x, z) ≥ (1 − p_adj(x)) e_K(x).
pub fn identity_report(fs: &FieldSet, b: &LatticeSet, targets: &[Point]) -> Result<IdentityReport> {
    let geom = fs.geometry();
    let n = geom.len();
    let mut rows = Vec::new();

    let one_k: Vec<f64> = geom.in_k.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    let h = apply_green_killed(&fs.p_adj, &one_k, Some(&fs.p_c.exterior))?;
    let r1 = (0..n).map(|i| (h[i] - fs.p_c.values[i]).abs()).fold(0.0, f64::max);
    rows.push(IdentityRow::new("green_sum_over_k_equals_p_c", r1, IDENTITY_TOL));

    let w = apply_green_killed(&fs.p_adj, &fs.p_adj.values, Some(&fs.p_i.exterior))?;
    let r2 = (0..n).map(|i| (w[i] - fs.p_i.values[i]).abs()).fold(0.0, f64::max);
    rows.push(IdentityRow::new("green_applied_to_p_adj_equals_p_i", r2, IDENTITY_TOL));

    let hm = harmonic_measure(b, &fs.p_adj)?;
    let pairs = green_killed(&fs.p_adj, targets)?;
    let (mut first, mut last) = (0.0f64, 0.0f64);
    for pair in &pairs {
        for (i, x) in hm.b.points().iter().enumerate() {
            let lhs = pair.column.value_at(x);
            let rhs: f64 = hm.shell.iter().enumerate().map(|(k, z)| hm.exit[(i, k)] * pair.column.value_at(z)).sum();
            first = first.max((lhs - rhs).abs());
            let lhs = pair.row.value_at(x);
            let rhs: f64 = hm.shell.iter().enumerate().map(|(k, z)| pair.row.value_at(z) * hm.entrance[(k, i)]).sum();
            last = last.max((lhs - rhs).abs());
        }
    }
    rows.push(IdentityRow::new("first_entrance_decomposition", first, IDENTITY_TOL));
    rows.push(IdentityRow::new("last_exit_decomposition", last, IDENTITY_TOL));

    let escape = |x: &Point| 1.0 - fs.p_minus.value_at(x);
    let bcap_sum = fs.bcap_sum();
    let bcap_harmonic = harmonic_bcap_from(&hm, &geom.k, escape);
    rows.push(IdentityRow::new("harmonic_measure_formula_for_bcap", (bcap_sum - bcap_harmonic).abs(), IDENTITY_TOL));

    let model = match &geom.model {
        Some(m) => m.clone(),
        None => std::sync::Arc::new(GreenModel::new(&geom.law, (2 * geom.opts.r_box + 2 * geom.law.radius()) as usize)?),
    };
    let mut excess = f64::NEG_INFINITY;
    for pair in &pairs {
        for f in [&pair.column, &pair.row] {
            let gm = &f.geometry;
            for i in 0..gm.len() {
                let x = gm.domain.point(i);
                excess = excess.max(f.values[i] - model.g(&point::sub(&x, &pair.y)));
            }
        }
    }
    rows.push(IdentityRow::new("killed_green_below_g", excess.max(0.0), INEQUALITY_TOL));

    let mass = hm.exit_mass();
    let deficit = hm
        .b
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| hm.survival_b[i] * escape(x) - mass[i])
        .fold(0.0, f64::max);
    rows.push(IdentityRow::new("exit_mass_dominates_escape", deficit, INEQUALITY_TOL));
    let over = mass.iter().map(|m| m - 1.0).fold(0.0, f64::max);
    rows.push(IdentityRow::new("exit_mass_at_most_one", over, INEQUALITY_TOL));

    Ok(IdentityReport {
        policy: geom.opts.policy.as_str().into(),
        r_box: geom.opts.r_box,
        k_size: geom.k.len(),
        b_size: b.len(),
        bcap_sum,
        bcap_harmonic,
        rows,
    })
}

/// Σ_{a∈K} Σ_{b∉B} H(b, a) e_K(b); only the one-step shell of B contributes.
pub fn harmonic_bcap_from(hm: &super::HarmonicMeasureTable, k: &LatticeSet, escape: impl Fn(&Point) -> f64) -> f64 {
    let e_shell: Vec<f64> = hm.shell.iter().map(&escape).collect();
    k.points()
        .iter()
        .map(|a| {
            let j = hm.b_index(a).unwrap();
            (0..hm.shell.len()).map(|k| hm.entrance[(k, j)] * e_shell[k]).sum::<f64>()
        })
        .sum()
}

/// The comparison inequalities between p_c, p_adj, p_I and p_− at every box point off K.
pub fn inequality_report(fs: &FieldSet, mu: &OffspringLaw) -> Vec<IdentityRow> {
    let geom = fs.geometry();
    let h = mu.sigma2() / 2.0;
    let lo = 2.0 * (1.0 - mu.mu(0)) / mu.sigma2();
    let hi = 1.0 / mu.mu(0);
    let mut v = [f64::NEG_INFINITY; 6];
    for i in 0..geom.len() {
        if geom.in_k[i] {
            continue;
        }
        let (pc, pa, pm, pi) = (fs.p_c.values[i], fs.p_adj.values[i], fs.p_minus.values[i], fs.p_i.values[i]);
        let checks = [lo * pa - pc, pc - hi * pa, pc - pi, pa - h * pm, pm - pi, pi - (h + 1.0) * pm];
        for (a, c) in v.iter_mut().zip(checks) {
            *a = a.max(c);
        }
    }
    let names = [
        "p_c_above_scaled_p_adj",
        "p_c_below_p_adj_over_mu0",
        "p_c_below_p_i",
        "p_adj_below_half_variance_p_minus",
        "p_minus_below_p_i",
        "p_i_below_scaled_p_minus",
    ];
    names.iter().zip(v).map(|(n, x)| IdentityRow::new(n, x.max(0.0), INEQUALITY_TOL)).collect()
}

//! Deterministic hitting-probability fields on a finite box.
//!
//! Fields live on the orbits of the largest coordinate-symmetry group that
//! fixes both K and θ. Out-of-box values come from the boundary policy: zero,
//! or a power law c0·M(x) + c1·M(x)/|x|_θ (M = g or G) whose coefficients are
//! re-fitted from the field's own far zone until they reproduce themselves.

mod harmonic;
mod identities;
mod killed;
pub(crate) mod linear;
mod solve;

pub use harmonic::{harmonic_measure, HarmonicMeasureTable};
pub use identities::{harmonic_bcap_from, identity_report, inequality_report, IdentityReport, IdentityRow, IDENTITY_TOL, INEQUALITY_TOL};
pub use killed::{apply_green_killed, green_defect_trend, green_killed, GreenDefectRow, GreenPair};
pub use solve::{solve_all, solve_p_adj, solve_p_c, solve_p_minus, EscapeValue, FieldSet};

use crate::error::{invalid, Result};
use crate::lattice::{GreenModel, StepLaw};
use crate::point::{self, Point, MAX_D};
use crate::sets::LatticeSet;
use crate::symmetry::{Neighbors, SymBox, SymGroup};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    DirichletZero,
    MatchedAsymptotic,
}

impl BoundaryPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryPolicy::DirichletZero => "dirichlet_zero",
            BoundaryPolicy::MatchedAsymptotic => "matched_asymptotic",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub r_box: i32,
    pub policy: BoundaryPolicy,
    /// Sup-norm residual target for the nonlinear solve, and relative target of the linear solves.
    pub tol: f64,
    pub max_newton: usize,
    /// Plain fixed-point sweeps from the zero field before Newton takes over.
    pub sweeps: usize,
    pub symmetry: bool,
    /// Box center (K's center); empty means the origin.
    pub center: Vec<i32>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            r_box: 24,
            policy: BoundaryPolicy::MatchedAsymptotic,
            tol: 1e-12,
            max_newton: 60,
            sweeps: 20,
            symmetry: true,
            center: Vec::new(),
        }
    }
}

/// Box, orbit table, neighbor table and closure data shared by all fields of one K.
#[derive(Debug)]
pub struct Geometry {
    pub law: StepLaw,
    pub k: LatticeSet,
    pub opts: SolverOptions,
    pub center: Point,
    pub domain: SymBox,
    pub nb: Neighbors,
    pub in_k: Vec<bool>,
    pub model: Option<Arc<GreenModel>>,
    // |y|_θ, g(y), G(y) at exterior neighbors (matched policy only)
    pub(crate) ext_norm: Vec<f64>,
    pub(crate) ext_g: Vec<f64>,
    pub(crate) ext_big_g: Vec<f64>,
    // far-zone orbits used to fit closure coefficients
    pub(crate) zone: Vec<usize>,
    pub(crate) zone_norm: Vec<f64>,
    pub(crate) zone_g: Vec<f64>,
    pub(crate) zone_big_g: Vec<f64>,
}

impl Geometry {
    pub fn new(k: &LatticeSet, law: &StepLaw, opts: &SolverOptions) -> Result<Arc<Geometry>> {
        let d = law.dim();
        if k.dim() != d {
            return invalid(format!("set lives in d={} but the step law in d={d}", k.dim()));
        }
        let center = if opts.center.is_empty() {
            [0; MAX_D]
        } else if opts.center.len() == d {
            point::from_slice(&opts.center)
        } else {
            return invalid("box center has the wrong dimension");
        };
        if opts.policy == BoundaryPolicy::MatchedAsymptotic && d < 5 {
            return invalid("matched closure needs d >= 5");
        }
        if !(opts.tol > 0.0 && opts.tol < 1e-3) {
            return invalid("tol must lie in (0, 1e-3)");
        }
        let margin = 2 * law.radius();
        let reach = k.points().iter().map(|a| point::sup_norm(&point::sub(a, &center))).max().unwrap();
        if reach + margin > opts.r_box {
            return invalid(format!(
                "K reaches sup-distance {reach} from the center; the box radius must be at least {}",
                reach + margin
            ));
        }
        let offsets: Vec<Point> = k.points().iter().map(|a| point::sub(a, &center)).collect();
        let group = if opts.symmetry { SymGroup::largest_invariant(law, &[&offsets]) } else { SymGroup::trivial(d) };
        Geometry::build(k, law, opts, center, group, None)
    }

    /// Same box with the subgroup fixing coordinates in `mask` as well.
    pub fn restricted(&self, mask: u32) -> Result<Arc<Geometry>> {
        let group = SymGroup::new(self.domain.dim(), self.domain.group().mask() | mask);
        Geometry::build(&self.k, &self.law, &self.opts, self.center, group, self.model.clone())
    }

    fn build(
        k: &LatticeSet,
        law: &StepLaw,
        opts: &SolverOptions,
        center: Point,
        group: SymGroup,
        model: Option<Arc<GreenModel>>,
    ) -> Result<Arc<Geometry>> {
        let d = law.dim();
        let domain = SymBox::new(d, opts.r_box, center, group);
        let nb = domain.neighbors(law);
        let in_k = domain.reps().iter().map(|r| k.contains(&point::add(r, &center))).collect();
        let mut g = Geometry {
            law: law.clone(),
            k: k.clone(),
            opts: opts.clone(),
            center,
            domain,
            nb,
            in_k,
            model: None,
            ext_norm: Vec::new(),
            ext_g: Vec::new(),
            ext_big_g: Vec::new(),
            zone: Vec::new(),
            zone_norm: Vec::new(),
            zone_g: Vec::new(),
            zone_big_g: Vec::new(),
        };
        if opts.policy == BoundaryPolicy::MatchedAsymptotic {
            let model = match model {
                Some(m) => m,
                None => Arc::new(GreenModel::new(law, (2 * opts.r_box + 3 * law.radius()) as usize)?),
            };
            let norm = law.theta_norm();
            g.ext_norm = g.nb.exterior.iter().map(|y| norm.norm(y)).collect();
            g.ext_g = g.nb.exterior.iter().map(|y| model.g(y)).collect();
            g.ext_big_g = g.nb.exterior.iter().map(|y| model.big_g(y)).collect();
            let lo = (opts.r_box + 1) / 2;
            g.zone = (0..g.domain.len())
                .filter(|&i| {
                    let r = &g.domain.reps()[i];
                    point::sup_norm(r) >= lo && !g.in_k[i]
                })
                .collect();
            g.zone_norm = g.zone.iter().map(|&i| norm.norm(&g.domain.reps()[i])).collect();
            g.zone_g = g.zone.iter().map(|&i| model.g(&g.domain.reps()[i])).collect();
            g.zone_big_g = g.zone.iter().map(|&i| model.big_g(&g.domain.reps()[i])).collect();
            g.model = Some(model);
        }
        Ok(Arc::new(g))
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        self.domain.weights()
    }

    /// Orbit index of the absolute point `x`, if inside the box.
    pub fn index(&self, x: &Point) -> Option<usize> {
        self.domain.find(x)
    }

    /// Weighted least squares of v/M = c0 + c1/|x|_θ over the far zone.
    pub(crate) fn fit(&self, v: &[f64], order: Order) -> [f64; 2] {
        let m = match order {
            Order::G1 => &self.zone_g,
            Order::G2 => &self.zone_big_g,
        };
        let w = self.domain.weights();
        let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, &i) in self.zone.iter().enumerate() {
            let t = 1.0 / self.zone_norm[k];
            let y = v[i] / m[k];
            let wi = w[i];
            s00 += wi;
            s01 += wi * t;
            s11 += wi * t * t;
            b0 += wi * y;
            b1 += wi * y * t;
        }
        let det = s00 * s11 - s01 * s01;
        [(b0 * s11 - b1 * s01) / det, (s00 * b1 - s01 * b0) / det]
    }

    /// c0·M + c1·M/|y| at the exterior neighbors.
    pub(crate) fn closure_values(&self, c: [f64; 2], order: Order) -> Vec<f64> {
        let m = match order {
            Order::G1 => &self.ext_g,
            Order::G2 => &self.ext_big_g,
        };
        m.iter().zip(&self.ext_norm).map(|(m, r)| m * (c[0] + c[1] / r)).collect()
    }
}

/// Which Green function a far field follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// g, as p_c, p_adj and Green columns.
    G1,
    /// G = g * g, as p_I and p_−.
    G2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldQuantity {
    #[serde(rename = "p_c")]
    PC,
    #[serde(rename = "p_adj")]
    PAdj,
    #[serde(rename = "p_minus")]
    PMinus,
    #[serde(rename = "p_I")]
    PI,
    /// G_K(·, y)
    #[serde(rename = "green_column")]
    GreenColumn,
    /// G_K(y, ·)
    #[serde(rename = "green_row")]
    GreenRow,
}

impl FieldQuantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldQuantity::PC => "p_c",
            FieldQuantity::PAdj => "p_adj",
            FieldQuantity::PMinus => "p_minus",
            FieldQuantity::PI => "p_I",
            FieldQuantity::GreenColumn => "green_column",
            FieldQuantity::GreenRow => "green_row",
        }
    }
}

/// Far-field rule beyond the exterior layer.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Far {
    Zero,
    /// (c0 + c1/|x − center|_θ)·M(x − center).
    Power { order: Order, c: [f64; 2] },
}

#[derive(Debug, Clone)]
pub struct LatticeField {
    pub geometry: Arc<Geometry>,
    pub quantity: FieldQuantity,
    /// Orbit values.
    pub values: Vec<f64>,
    /// Values at `geometry.nb.exterior`.
    pub exterior: Vec<f64>,
    pub far: Far,
    /// Newton or CG iterations spent.
    pub iterations: usize,
    /// Sup-norm residual of the defining equation at exit.
    pub residual: f64,
}

impl LatticeField {
    pub fn policy(&self) -> BoundaryPolicy {
        self.geometry.opts.policy
    }

    /// Value at the absolute point x: orbit value inside the box, closure outside.
    pub fn value_at(&self, x: &Point) -> f64 {
        let g = &self.geometry;
        if let Some(i) = g.index(x) {
            return self.values[i];
        }
        match self.far {
            Far::Zero => 0.0,
            Far::Power { order, c } => {
                let model = g.model.as_ref().expect("power closure without a Green model");
                let off = point::sub(x, &g.center);
                let r = model.norm().norm(&off);
                let m = match order {
                    Order::G1 => model.g(&off),
                    Order::G2 => model.big_g(&off),
                };
                m * (c[0] + c[1] / r)
            }
        }
    }

    /// Closure coefficients (c0, c1), if the field has a power-law closure.
    pub fn closure(&self) -> Option<[f64; 2]> {
        match self.far {
            Far::Zero => None,
            Far::Power { c, .. } => Some(c),
        }
    }

    /// Copies the field onto another geometry of the same box (e.g. a subgroup).
    pub fn transfer(&self, target: &Arc<Geometry>) -> LatticeField {
        let values = (0..target.len()).map(|i| self.value_at(&target.domain.point(i))).collect();
        let exterior = target
            .nb
            .exterior
            .iter()
            .map(|y| self.value_at(&point::add(y, &target.center)))
            .collect();
        LatticeField {
            geometry: target.clone(),
            quantity: self.quantity,
            values,
            exterior,
            far: self.far,
            iterations: self.iterations,
            residual: self.residual,
        }
    }

    /// One row per orbit: representative (absolute), orbit size, value.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let g = &self.geometry;
        let d = g.domain.dim();
        let cols: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},orbit_size,{}", cols.join(","), self.quantity.as_str())?;
        for i in 0..g.len() {
            let p = g.domain.point(i);
            let c: Vec<String> = p[..d].iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{:.17e}", c.join(","), g.weights()[i], self.values[i])?;
        }
        Ok(())
    }
}

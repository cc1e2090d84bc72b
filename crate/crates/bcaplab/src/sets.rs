//! Finite subsets of Z^d.

use crate::error::{invalid, Result};
use crate::point::{self, Point, MAX_D};
use std::collections::HashSet;

#[derive(Debug, Clone)]
pub struct LatticeSet {
    d: usize,
    points: Vec<Point>,
    keys: HashSet<u128>,
    radius: f64,
    lo: Point,
    hi: Point,
}

impl LatticeSet {
    pub fn new(d: usize, mut points: Vec<Point>) -> Result<LatticeSet> {
        if d == 0 || d > MAX_D {
            return invalid(format!("dimension {d} outside 1..={MAX_D}"));
        }
        if points.is_empty() {
            return invalid("lattice set must be nonempty");
        }
        for p in &points {
            if p[d..].iter().any(|&c| c != 0) || p.iter().any(|c| c.abs() > 10_000) {
                return invalid(format!("point {:?} does not fit the dimension/coordinate range", &p[..d]));
            }
        }
        points.sort();
        points.dedup();
        let keys = points.iter().map(point::key).collect();
        let radius = points.iter().map(point::norm2).fold(0.0, f64::max);
        let mut lo = points[0];
        let mut hi = points[0];
        for p in &points {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Ok(LatticeSet { d, points, keys, radius, lo, hi })
    }

    pub fn from_coords(d: usize, coords: &[Vec<i32>]) -> Result<LatticeSet> {
        if coords.iter().any(|c| c.len() != d) {
            return invalid(format!("every point must have {d} coordinates"));
        }
        LatticeSet::new(d, coords.iter().map(|c| point::from_slice(c)).collect())
    }

    pub fn single(d: usize, p: Point) -> Result<LatticeSet> {
        LatticeSet::new(d, vec![p])
    }

    /// Closed Euclidean ball {z : |z − center| ≤ rho} ∩ Z^d.
    pub fn ball(d: usize, rho: f64, center: &Point) -> Result<LatticeSet> {
        if !(rho >= 0.0) || rho > 200.0 {
            return invalid("ball radius must lie in [0, 200]");
        }
        let r = rho.floor() as i32;
        let r2 = rho * rho + 1e-9;
        let mut pts = Vec::new();
        let mut cur = [0i32; MAX_D];
        fn rec(d: usize, k: usize, r: i32, r2: f64, acc: f64, cur: &mut Point, out: &mut Vec<Point>) {
            if k == d {
                out.push(*cur);
                return;
            }
            for v in -r..=r {
                let a = acc + (v * v) as f64;
                if a <= r2 {
                    cur[k] = v;
                    rec(d, k + 1, r, r2, a, cur, out);
                }
            }
            cur[k] = 0;
        }
        rec(d, 0, r, r2, 0.0, &mut cur, &mut pts);
        LatticeSet::new(d, pts.iter().map(|p| point::add(p, center)).collect())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// max |a| over members.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn radius_about(&self, c: &Point) -> f64 {
        self.points.iter().map(|p| point::norm2(&point::sub(p, c))).fold(0.0, f64::max)
    }

    #[inline]
    /// Midpoint of the bounding box, rounded down; commutes with translation.
    pub fn center(&self) -> Point {
        let mut c = [0; MAX_D];
        for i in 0..self.d {
            c[i] = (self.lo[i] + self.hi[i]).div_euclid(2);
        }
        c
    }

    pub fn contains(&self, p: &Point) -> bool {
        for i in 0..self.d {
            if p[i] < self.lo[i] || p[i] > self.hi[i] {
                return false;
            }
        }
        self.keys.contains(&point::key(p))
    }

    pub fn translate(&self, v: &Point) -> LatticeSet {
        LatticeSet::new(self.d, self.points.iter().map(|p| point::add(p, v)).collect()).unwrap()
    }

    pub fn union(&self, other: &LatticeSet) -> LatticeSet {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        LatticeSet::new(self.d, pts).unwrap()
    }

    pub fn is_subset_of(&self, other: &LatticeSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    /// Members with |z − center|² exactly rho² (rho² integral).
    pub fn on_sphere(&self, rho: f64, center: &Point) -> usize {
        let r2 = rho * rho;
        if (r2 - r2.round()).abs() > 1e-9 {
            return 0;
        }
        self.points
            .iter()
            .filter(|p| {
                let q = point::sub(p, center);
                q.iter().map(|&c| (c as i64) * (c as i64)).sum::<i64>() == r2.round() as i64
            })
            .count()
    }

    /// Points as plain coordinate vectors.
    pub fn coords(&self) -> Vec<Vec<i32>> {
        self.points.iter().map(|p| point::to_vec(p, self.d)).collect()
    }
}

//! Hyperoctahedral orbit reduction of lattice boxes.
//!
//! A `SymGroup` acts by permutations and sign flips on the coordinates outside
//! `fixed_mask`; fixed coordinates are left alone. Orbit representatives keep
//! fixed coordinates as they are and list the free ones by decreasing absolute
//! value, all nonnegative.

use crate::lattice::StepLaw;
use crate::point::{self, Point, MAX_D};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
pub enum Generator {
    Swap(usize, usize),
    Flip(usize),
}

impl Generator {
    pub fn apply(&self, p: &Point) -> Point {
        let mut q = *p;
        match *self {
            Generator::Swap(i, j) => q.swap(i, j),
            Generator::Flip(i) => q[i] = -q[i],
        }
        q
    }
}

pub fn generators(d: usize, fixed_mask: u32) -> Vec<Generator> {
    let free: Vec<usize> = (0..d).filter(|i| fixed_mask & (1 << i) == 0).collect();
    let mut g: Vec<Generator> = free.windows(2).map(|w| Generator::Swap(w[0], w[1])).collect();
    g.extend(free.iter().map(|&i| Generator::Flip(i)));
    g
}

#[derive(Debug, Clone)]
pub struct SymGroup {
    d: usize,
    mask: u32,
    free: Vec<usize>,
}

impl SymGroup {
    pub fn new(d: usize, fixed_mask: u32) -> SymGroup {
        let mask = fixed_mask & ((1u32 << d) - 1);
        let free = (0..d).filter(|i| mask & (1 << i) == 0).collect();
        SymGroup { d, mask, free }
    }

    pub fn trivial(d: usize) -> SymGroup {
        SymGroup::new(d, (1u32 << d) - 1)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn canonical(&self, p: &Point) -> Point {
        let mut vals = [0i32; MAX_D];
        let nf = self.free.len();
        for (k, &i) in self.free.iter().enumerate() {
            vals[k] = p[i].abs();
        }
        vals[..nf].sort_unstable_by(|a, b| b.cmp(a));
        let mut q = *p;
        for (k, &i) in self.free.iter().enumerate() {
            q[i] = vals[k];
        }
        q
    }

    /// Number of points in the orbit of a canonical representative.
    pub fn orbit_size(&self, c: &Point) -> u64 {
        let vals: Vec<i32> = self.free.iter().map(|&i| c[i]).collect();
        let mut size = factorial(vals.len());
        let mut k = 0;
        while k < vals.len() {
            let mut m = 1;
            while k + m < vals.len() && vals[k + m] == vals[k] {
                m += 1;
            }
            size /= factorial(m);
            k += m;
        }
        size << vals.iter().filter(|&&v| v != 0).count()
    }

    /// All members of the orbit of `c`.
    pub fn orbit(&self, c: &Point) -> Vec<Point> {
        let mut out = vec![*c];
        let mut seen: std::collections::HashSet<u128> = [point::key(c)].into_iter().collect();
        let gens = generators(self.d, self.mask);
        let mut k = 0;
        while k < out.len() {
            let p = out[k];
            for g in &gens {
                let q = g.apply(&p);
                if seen.insert(point::key(&q)) {
                    out.push(q);
                }
            }
            k += 1;
        }
        out
    }

    /// Largest group (fewest fixed coordinates) leaving both the step law and
    /// every point set in `sets` invariant. Ties are broken by the smallest mask.
    pub fn largest_invariant(law: &StepLaw, sets: &[&[Point]]) -> SymGroup {
        let d = law.dim();
        let mut masks: Vec<u32> = (0..(1u32 << d)).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        for m in masks {
            if !law.invariant_under(m) {
                continue;
            }
            let ok = sets.iter().all(|s| {
                let keys: std::collections::HashSet<u128> = s.iter().map(point::key).collect();
                generators(d, m)
                    .iter()
                    .all(|g| s.iter().all(|p| keys.contains(&point::key(&g.apply(p)))))
            });
            if ok {
                return SymGroup::new(d, m);
            }
        }
        SymGroup::trivial(d)
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// The box {center + y : |y|_∞ ≤ R} reduced modulo a symmetry group acting on offsets y.
#[derive(Debug, Clone)]
pub struct SymBox {
    d: usize,
    radius: i32,
    center: Point,
    group: SymGroup,
    reps: Vec<Point>,
    weights: Vec<f64>,
    index: HashMap<u128, u32>,
}

impl SymBox {
    pub fn new(d: usize, radius: i32, center: Point, group: SymGroup) -> SymBox {
        assert!(radius >= 0 && radius < i16::MAX as i32 / 2);
        let mut reps = Vec::new();
        let fixed: Vec<usize> = (0..d).filter(|i| group.mask & (1 << i) != 0).collect();
        let nf = group.free.len();
        let mut cur = [0i32; MAX_D];
        enumerate_fixed(&fixed, 0, radius, &mut cur, &mut |p| {
            let mut free_vals = vec![0i32; nf];
            enumerate_nonincreasing(&mut free_vals, 0, radius, &mut |vals| {
                let mut q = *p;
                for (k, &i) in group.free.iter().enumerate() {
                    q[i] = vals[k];
                }
                reps.push(q);
            });
        });
        let weights = reps.iter().map(|r| group.orbit_size(r) as f64).collect();
        let index = reps.iter().enumerate().map(|(i, r)| (point::key(r), i as u32)).collect();
        SymBox { d, radius, center, group, reps, weights, index }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn group(&self) -> &SymGroup {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Canonical offsets (relative to the center).
    pub fn reps(&self) -> &[Point] {
        &self.reps
    }

    /// Orbit sizes.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> Point {
        point::add(&self.center, &self.reps[i])
    }

    /// Index of the orbit containing the offset `y`, if inside the box.
    pub fn find_offset(&self, y: &Point) -> Option<usize> {
        if point::sup_norm(y) > self.radius {
            return None;
        }
        self.index.get(&point::key(&self.group.canonical(y))).map(|&i| i as usize)
    }

    /// Index of the orbit containing the absolute point `x`.
    pub fn find(&self, x: &Point) -> Option<usize> {
        self.find_offset(&point::sub(x, &self.center))
    }

    pub fn neighbors(&self, law: &StepLaw) -> Neighbors {
        let n = self.len();
        let steps: Vec<(Point, f64)> = law.support().to_vec();
        let ns = steps.len();
        let mut table = vec![0u32; n * ns];
        let mut ext_index: HashMap<u128, u32> = HashMap::new();
        let mut exterior: Vec<Point> = Vec::new();
        for (i, r) in self.reps.iter().enumerate() {
            for (s, (z, _)) in steps.iter().enumerate() {
                let y = self.group.canonical(&point::add(r, z));
                let k = point::key(&y);
                table[i * ns + s] = if point::sup_norm(&y) <= self.radius {
                    self.index[&k]
                } else {
                    let e = *ext_index.entry(k).or_insert_with(|| {
                        exterior.push(y);
                        (exterior.len() - 1) as u32
                    });
                    n as u32 + e
                };
            }
        }
        Neighbors { n, probs: steps.iter().map(|s| s.1).collect(), table, exterior }
    }
}

/// Visits every orbit representative of the box of radius `radius` together with
/// its orbit size, without storing the orbit table. Work is split over the fixed
/// coordinates, and partial sums are combined in a fixed order.
pub fn sum_over_orbits<F>(d: usize, radius: i32, group: &SymGroup, f: F) -> f64
where
    F: Fn(&Point, f64) -> f64 + Sync,
{
    use rayon::prelude::*;
    let fixed: Vec<usize> = (0..d).filter(|i| group.mask & (1 << i) != 0).collect();
    let mut frees: Vec<Vec<i32>> = Vec::new();
    let mut vals = vec![0i32; group.free.len()];
    enumerate_nonincreasing(&mut vals, 0, radius, &mut |v| frees.push(v.to_vec()));
    let side = (2 * radius + 1) as usize;
    let combos = side.pow(fixed.len() as u32);
    let partial: Vec<f64> = (0..combos)
        .into_par_iter()
        .map(|mut c| {
            let mut p = [0i32; MAX_D];
            for &i in &fixed {
                p[i] = (c % side) as i32 - radius;
                c /= side;
            }
            let mut s = 0.0;
            for fv in &frees {
                for (k, &i) in group.free.iter().enumerate() {
                    p[i] = fv[k];
                }
                s += f(&p, group.orbit_size(&p) as f64);
            }
            s
        })
        .collect();
    partial.iter().sum()
}

fn enumerate_fixed(fixed: &[usize], k: usize, r: i32, cur: &mut Point, f: &mut dyn FnMut(&Point)) {
    if k == fixed.len() {
        f(cur);
        return;
    }
    for v in -r..=r {
        cur[fixed[k]] = v;
        enumerate_fixed(fixed, k + 1, r, cur, f);
    }
    cur[fixed[k]] = 0;
}

fn enumerate_nonincreasing(vals: &mut [i32], k: usize, hi: i32, f: &mut dyn FnMut(&[i32])) {
    if k == vals.len() {
        f(vals);
        return;
    }
    for v in 0..=hi {
        vals[k] = v;
        enumerate_nonincreasing(vals, k + 1, v, f);
    }
}

/// Neighbor lists of a reduced box for one step law. Entries `< n` are box
/// orbits; entries `n + e` refer to `exterior[e]`, a canonical offset outside the box.
#[derive(Debug, Clone)]
pub struct Neighbors {
    pub n: usize,
    pub probs: Vec<f64>,
    pub table: Vec<u32>,
    pub exterior: Vec<Point>,
}

impl Neighbors {
    pub fn steps(&self) -> usize {
        self.probs.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let ns = self.probs.len();
        &self.table[i * ns..(i + 1) * ns]
    }

    /// (Θu)(x) = Σ_z θ(z) u(x+z), exterior values from `ext`.
    pub fn apply(&self, u: &[f64], ext: &[f64], i: usize) -> f64 {
        let mut s = 0.0;
        for (&j, &p) in self.row(i).iter().zip(&self.probs) {
            let j = j as usize;
            s += p * if j < self.n { u[j] } else { ext[j - self.n] };
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_step_law, StepKind};

    #[test]
    fn orbit_sizes_cover_the_box() {
        for (d, r, mask) in [(3, 3, 0u32), (4, 2, 0), (4, 3, 1), (3, 2, 0b101), (2, 4, 0b11)] {
            let g = SymGroup::new(d, mask);
            let b = SymBox::new(d, r, [0; MAX_D], g.clone());
            let total: f64 = b.weights().iter().sum();
            assert_eq!(total as i64, (2 * r as i64 + 1).pow(d as u32));
            for rep in b.reps() {
                assert_eq!(g.orbit(rep).len() as u64, g.orbit_size(rep));
            }
        }
    }

    #[test]
    fn five_dim_orbit_count() {
        let b = SymBox::new(5, 24, [0; MAX_D], SymGroup::new(5, 0));
        // nonincreasing 5-tuples from {0..24}: C(29, 5)
        assert_eq!(b.len(), 118_755);
    }

    #[test]
    fn neighbor_weights_are_consistent() {
        // Σ_x w(x) (Θ1_A)(x) must equal Σ_{x∈A} w(x) for the symmetric walk when A is away from the boundary
        let law = make_step_law(StepKind::Simple, 4, None).unwrap();
        let b = SymBox::new(4, 5, [0; MAX_D], SymGroup::new(4, 0));
        let nb = b.neighbors(&law);
        let a: Vec<f64> = b.reps().iter().map(|r| if point::sup_norm(r) <= 2 { 1.0 } else { 0.0 }).collect();
        let ext = vec![0.0; nb.exterior.len()];
        let lhs: f64 = (0..b.len()).map(|i| b.weights()[i] * nb.apply(&a, &ext, i)).sum();
        let rhs: f64 = (0..b.len()).map(|i| b.weights()[i] * a[i]).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn largest_group_detection() {
        let law = make_step_law(StepKind::Simple, 3, None).unwrap();
        let origin = [[0; MAX_D]];
        assert_eq!(SymGroup::largest_invariant(&law, &[&origin]).mask(), 0);
        let pair = [[0; MAX_D], point::axis(3, 1, 1)];
        assert_eq!(SymGroup::largest_invariant(&law, &[&pair]).mask(), 0b010);
    }
}

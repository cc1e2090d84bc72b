//! Critical offspring laws, the adjoint law, and tree samplers.

use crate::error::{invalid, Result};
use crate::rng;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringKind {
    BinaryCritical,
    GeometricHalf,
    PoissonTrunc,
    Custom,
}

#[derive(Debug, Clone)]
enum Draw {
    // 0 or 2 with probability 1/2 each
    Binary,
    // P(k) = 2^{-(k+1)}
    Geometric,
    Table(Vec<f64>),
}

impl Draw {
    fn from_pmf(pmf: &[f64]) -> Draw {
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in pmf {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = f64::INFINITY;
        }
        Draw::Table(cdf)
    }

    #[inline]
    fn sample<R: RngCore>(&self, rng: &mut R) -> u32 {
        match self {
            Draw::Binary => 2 * (rng.next_u32() & 1),
            Draw::Geometric => {
                let mut k = 0;
                loop {
                    let z = rng.next_u64().trailing_zeros();
                    k += z;
                    if z < 64 {
                        return k;
                    }
                }
            }
            Draw::Table(cdf) => {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap() as u32
            }
        }
    }
}

/// A critical offspring law μ (mean 1, finite positive variance).
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    name: String,
    // μ(k) for k ≤ kmax; for geometric(1/2) the pmf is truncated where the tail drops below 1e-18
    pmf: Vec<f64>,
    geometric: bool,
    sigma2: f64,
    third_moment_finite: bool,
    draw: Draw,
}

/// The tail-sum law μ̃(k) = Σ_{j>k} μ(j) used at bush roots.
#[derive(Debug, Clone)]
pub struct AdjointLaw {
    pmf: Vec<f64>,
    geometric: bool,
    mean: f64,
    draw: Draw,
}

fn horner(pmf: &[f64], s: f64) -> f64 {
    pmf.iter().rev().fold(0.0, |acc, p| acc * s + p)
}

impl OffspringLaw {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mu(&self, k: usize) -> f64 {
        if self.geometric {
            0.5f64.powi(k as i32 + 1)
        } else {
            self.pmf.get(k).copied().unwrap_or(0.0)
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn third_moment_finite(&self) -> bool {
        self.third_moment_finite
    }

    /// f(s) = Σ μ(k) s^k.
    pub fn f(&self, s: f64) -> f64 {
        if self.geometric {
            1.0 / (2.0 - s)
        } else {
            horner(&self.pmf, s)
        }
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        if self.geometric {
            1.0 / ((2.0 - s) * (2.0 - s))
        } else {
            let dp: Vec<f64> = self.pmf.iter().enumerate().skip(1).map(|(k, p)| k as f64 * p).collect();
            horner(&dp, s)
        }
    }

    pub fn adjoint(&self) -> AdjointLaw {
        let n = self.pmf.len();
        let mut pmf = vec![0.0; n.saturating_sub(1).max(1)];
        let mut tail = 0.0;
        for k in (0..pmf.len()).rev() {
            tail += self.pmf[k + 1];
            pmf[k] = tail;
        }
        let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let draw = if self.geometric { Draw::Geometric } else { Draw::from_pmf(&pmf) };
        AdjointLaw { pmf, geometric: self.geometric, mean, draw }
    }

    #[inline]
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> u32 {
        self.draw.sample(rng)
    }

    /// Span of the tree-size lattice: #T ≡ 1 mod p with p = gcd{k : μ(k) > 0}.
    pub fn size_period(&self) -> usize {
        if self.geometric {
            return 1;
        }
        self.pmf
            .iter()
            .enumerate()
            .filter(|&(k, &p)| k > 0 && p > 0.0)
            .fold(0, |g, (k, _)| gcd(g, k))
            .max(1)
    }
}

impl AdjointLaw {
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// f̃(s) = Σ μ̃(k) s^k = (1 − f(s))/(1 − s).
    pub fn f(&self, s: f64) -> f64 {
        if self.geometric {
            1.0 / (2.0 - s)
        } else {
            horner(&self.pmf, s)
        }
    }

    #[inline]
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> u32 {
        self.draw.sample(rng)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Builds and validates a critical law. `params` is the pmf for `Custom` and
/// `[k_max]` for `PoissonTrunc` (default 8); ignored otherwise.
pub fn make_offspring(kind: OffspringKind, params: &[f64]) -> Result<OffspringLaw> {
    let (name, pmf, geometric) = match kind {
        OffspringKind::BinaryCritical => ("binary_critical", vec![0.5, 0.0, 0.5], false),
        OffspringKind::GeometricHalf => {
            let pmf: Vec<f64> = (0..62).map(|k| 0.5f64.powi(k + 1)).collect();
            ("geometric_half", pmf, true)
        }
        OffspringKind::PoissonTrunc => {
            let kmax = params.first().copied().unwrap_or(8.0);
            if kmax < 2.0 || kmax > 60.0 || kmax.fract() != 0.0 {
                return invalid("poisson_trunc needs an integer k_max in 2..=60");
            }
            let kmax = kmax as usize;
            let mut pmf = vec![0.0; kmax + 1];
            let mut w = (-1.0f64).exp();
            for (k, slot) in pmf.iter_mut().enumerate().take(kmax) {
                if k > 0 {
                    w /= k as f64;
                }
                *slot = w;
            }
            let mass: f64 = pmf.iter().sum();
            let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            // the top atom restores mean 1; the empty-family atom absorbs the leftover mass
            pmf[kmax] = (1.0 - mean) / kmax as f64;
            pmf[0] += 1.0 - mass - pmf[kmax];
            ("poisson_trunc", pmf, false)
        }
        OffspringKind::Custom => {
            if params.is_empty() {
                return invalid("custom offspring law needs a pmf");
            }
            ("custom", params.to_vec(), false)
        }
    };
    if pmf.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return invalid("offspring pmf has negative or non-finite entries");
    }
    let total: f64 = pmf.iter().sum();
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let second: f64 = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
    // the geometric pmf is truncated at 2^{-62}; its exact moments are known
    let (total, mean, sigma2) = if geometric { (1.0, 1.0, 2.0) } else { (total, mean, second - mean * mean) };
    if (total - 1.0).abs() > 1e-12 {
        return invalid(format!("offspring pmf sums to {total}, not 1"));
    }
    if (mean - 1.0).abs() > 1e-12 {
        return invalid(format!("offspring mean is {mean}, not 1 (law must be critical)"));
    }
    if pmf.get(1).copied().unwrap_or(0.0) >= 1.0 || sigma2 <= 1e-14 {
        return invalid("offspring law is degenerate (μ(1) = 1, zero variance)");
    }
    let draw = match kind {
        OffspringKind::BinaryCritical => Draw::Binary,
        OffspringKind::GeometricHalf => Draw::Geometric,
        _ => Draw::from_pmf(&pmf),
    };
    Ok(OffspringLaw { name: name.to_string(), pmf, geometric, sigma2, third_moment_finite: true, draw })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeOutcome {
    Completed,
    Capped,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeBudget {
    pub v_max: usize,
}

/// A tree as a breadth-first parent array (root first, parent of root = u32::MAX).
/// A capped tree keeps its partial vertex set; `frontier` lists vertices whose
/// offspring were never drawn.
#[derive(Debug, Clone)]
pub struct Tree {
    pub parent: Vec<u32>,
    pub outcome: TreeOutcome,
    pub frontier: Vec<u32>,
}

impl Tree {
    pub fn size(&self) -> usize {
        self.parent.len()
    }
}

fn grow<R: RngCore>(root: &dyn Fn(&mut R) -> u32, law: &OffspringLaw, budget: TreeBudget, rng: &mut R) -> Tree {
    let mut parent = vec![u32::MAX];
    let mut head = 0;
    while head < parent.len() {
        let k = if head == 0 { root(rng) } else { law.sample(rng) } as usize;
        if parent.len() + k > budget.v_max {
            return Tree { frontier: (head as u32..parent.len() as u32).collect(), parent, outcome: TreeOutcome::Capped };
        }
        parent.extend(std::iter::repeat_n(head as u32, k));
        head += 1;
    }
    Tree { parent, outcome: TreeOutcome::Completed, frontier: Vec::new() }
}

/// Breadth-first critical Galton–Watson tree; sample `index` of the stream family `seed`.
pub fn sample_critical_tree(law: &OffspringLaw, budget: TreeBudget, seed: u64, index: u64) -> Tree {
    let mut r = rng::stream(seed, rng::LANE_TREE, index);
    grow(&|r: &mut _| law.sample(r), law, budget, &mut r)
}

/// As `sample_critical_tree`, with the root's offspring drawn from μ̃.
pub fn sample_adjoint_tree(law: &OffspringLaw, budget: TreeBudget, seed: u64, index: u64) -> Tree {
    let adj = law.adjoint();
    let mut r = rng::stream(seed, rng::LANE_BUSH, index);
    grow(&|r: &mut _| adj.sample(r), law, budget, &mut r)
}

/// The bushes T_adj^i hanging off the spine of the infinite tree. Item i depends
/// only on (seed, i).
pub struct SpineStream {
    law: OffspringLaw,
    budget: TreeBudget,
    seed: u64,
    next: u64,
}

/// Starts at index 0 (T_I); use `start = 1` for T_−.
pub fn spine_iterator(law: &OffspringLaw, budget: TreeBudget, seed: u64, start: u64) -> SpineStream {
    SpineStream { law: law.clone(), budget, seed, next: start }
}

impl SpineStream {
    pub fn item(&self, i: u64) -> Tree {
        sample_adjoint_tree(&self.law, self.budget, self.seed, i)
    }
}

impl Iterator for SpineStream {
    type Item = (u64, Tree);

    fn next(&mut self) -> Option<(u64, Tree)> {
        let i = self.next;
        self.next += 1;
        Some((i, self.item(i)))
    }
}

/// Total progeny only, stopping early once it exceeds `cap`.
pub fn tree_size<R: RngCore>(root: u32, law: &OffspringLaw, cap: usize, rng: &mut R) -> Option<usize> {
    let mut pending = root as usize;
    let mut size = 1;
    while pending > 0 {
        pending -= 1;
        size += 1;
        pending += law.sample(rng) as usize;
        if size + pending > cap {
            return None;
        }
    }
    Some(size)
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeRow {
    pub n: usize,
    pub count: u64,
    pub pmf: f64,
    /// P(#T = n) n^{3/2} σ √(2π) / p on the lattice n ≡ 1 (mod p), 0 off it
    pub normalized: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeBin {
    pub n_lo: usize,
    pub n_hi: usize,
    pub count: u64,
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeLawReport {
    pub samples: u64,
    pub above_range: u64,
    pub period: usize,
    pub rows: Vec<SizeRow>,
    pub bins: Vec<SizeBin>,
}

/// Empirical law of the total progeny against n^{−3/2}/(σ√(2π)), per n and over
/// `bins` logarithmic bins of [n_lo, n_hi].
pub fn tree_size_law(law: &OffspringLaw, samples: u64, n_lo: usize, n_hi: usize, bins: usize, seed: u64) -> SizeLawReport {
    const CHUNK: u64 = 1 << 14;
    let chunks = samples.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut hist = vec![0u64; n_hi + 2];
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut r = rng::stream(seed, rng::LANE_TREE, i);
                let root = law.sample(&mut r);
                match tree_size(root, law, n_hi, &mut r) {
                    Some(n) => hist[n] += 1,
                    None => hist[n_hi + 1] += 1,
                }
            }
            hist
        })
        .collect();
    let mut hist = vec![0u64; n_hi + 2];
    for h in &counts {
        for (a, b) in hist.iter_mut().zip(h) {
            *a += b;
        }
    }
    let period = law.size_period();
    let sigma = law.sigma2().sqrt();
    let norm = sigma * (2.0 * std::f64::consts::PI).sqrt();
    let nf = samples as f64;
    let on_lattice = |n: usize| (n - 1) % period == 0;
    let rows = (1..=n_hi)
        .map(|n| {
            let pmf = hist[n] as f64 / nf;
            let normalized = if on_lattice(n) { pmf * (n as f64).powf(1.5) * norm / period as f64 } else { 0.0 };
            SizeRow { n, count: hist[n], pmf, normalized }
        })
        .collect();
    let mut edges: Vec<usize> = (0..=bins)
        .map(|b| ((n_lo as f64) * (n_hi as f64 / n_lo as f64).powf(b as f64 / bins as f64)).round() as usize)
        .collect();
    edges.dedup();
    let bins = edges
        .windows(2)
        .enumerate()
        .map(|(b, w)| {
            let lo = w[0];
            let hi = if b + 2 == edges.len() { w[1] } else { w[1] - 1 };
            let count: u64 = (lo..=hi).map(|n| hist[n]).sum();
            let predicted: f64 = (lo..=hi)
                .filter(|&n| on_lattice(n))
                .map(|n| period as f64 * (n as f64).powf(-1.5) / norm)
                .sum();
            SizeBin { n_lo: lo, n_hi: hi, count, predicted, ratio: count as f64 / nf / predicted }
        })
        .collect();
    SizeLawReport { samples, above_range: hist[n_hi + 1], period, rows, bins }
}

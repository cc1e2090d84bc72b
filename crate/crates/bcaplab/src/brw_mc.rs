//! Monte Carlo for hitting and escape probabilities of tree-indexed walks.
//!
//! Every sample owns its random streams (see `rng`), so estimates do not
//! depend on the number of worker threads. Aggregation is sequential over the
//! sample index.

use crate::error::{invalid, Error, Result};
use crate::lattice::{GreenModel, StepLaw};
use crate::offspring::{AdjointLaw, OffspringLaw};
use crate::point::{self, Point, MAX_D};
use crate::rng;
pub use crate::sets::LatticeSet;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "p_c")]
    PC,
    #[serde(rename = "p_adj")]
    PAdj,
    #[serde(rename = "p_I")]
    PI,
    #[serde(rename = "p_minus")]
    PMinus,
    #[serde(rename = "e_K")]
    EK,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::PC => "p_c",
            Quantity::PAdj => "p_adj",
            Quantity::PI => "p_I",
            Quantity::PMinus => "p_minus",
            Quantity::EK => "e_K",
        }
    }
}

/// A Monte Carlo probability with its 95% half-width and the bracket
/// [low, high] obtained by resolving every capped sample (and, for escape,
/// the unexplored remainder) both ways.
#[derive(Debug, Clone, Serialize)]
pub struct HitEstimate {
    pub quantity: Quantity,
    pub x: Vec<i32>,
    pub p_hat: f64,
    pub ci_half: f64,
    pub samples: u64,
    pub capped: u64,
    pub low: f64,
    pub high: f64,
    pub flags: Vec<String>,
}

impl HitEstimate {
    fn exact(quantity: Quantity, x: &Point, d: usize, p: f64, samples: u64) -> HitEstimate {
        HitEstimate {
            quantity,
            x: point::to_vec(x, d),
            p_hat: p,
            ci_half: 0.0,
            samples,
            capped: 0,
            low: p,
            high: p,
            flags: Vec::new(),
        }
    }

    /// The complementary probability 1 − p.
    pub fn complement(&self, quantity: Quantity) -> HitEstimate {
        HitEstimate {
            quantity,
            x: self.x.clone(),
            p_hat: 1.0 - self.p_hat,
            ci_half: self.ci_half,
            samples: self.samples,
            capped: self.capped,
            low: 1.0 - self.high,
            high: 1.0 - self.low,
            flags: self.flags.clone(),
        }
    }

    /// Widest plausible range: bracket widened by the sampling half-width.
    pub fn envelope(&self) -> (f64, f64) {
        ((self.low - self.ci_half).max(0.0), (self.high + self.ci_half).min(1.0))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McBudget {
    /// Vertex budget per explored tree.
    pub v_max: usize,
    /// Vertices at this generation get no offspring (tests with finite trees).
    pub max_depth: Option<u32>,
}

impl Default for McBudget {
    fn default() -> Self {
        McBudget { v_max: 1_000_000, max_depth: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootKind {
    Critical,
    Adjoint,
}

/// Draws θ-steps.
#[derive(Debug, Clone)]
pub struct StepSampler {
    steps: Vec<Point>,
    uniform: bool,
    index: Option<WeightedIndex<f64>>,
}

impl StepSampler {
    pub fn new(law: &StepLaw) -> StepSampler {
        let steps: Vec<Point> = law.support().iter().map(|s| s.0).collect();
        let p0 = law.support()[0].1;
        let uniform = law.support().iter().all(|s| s.1 == p0);
        let index = if uniform { None } else { Some(WeightedIndex::new(law.support().iter().map(|s| s.1)).unwrap()) };
        StepSampler { steps, uniform, index }
    }

    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> &Point {
        let i = if self.uniform { rng.random_range(0..self.steps.len()) } else { self.index.as_ref().unwrap().sample(rng) };
        &self.steps[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Hit,
    Capped,
    Clear,
}

struct Explorer<'a> {
    k: &'a LatticeSet,
    law: &'a OffspringLaw,
    adj: AdjointLaw,
    steps: StepSampler,
    budget: McBudget,
    center: Point,
    // squared Euclidean prune radius around `center`, with the g-model for pruned vertices
    prune: Option<(f64, &'a GreenModel)>,
}

impl<'a> Explorer<'a> {
    fn new(k: &'a LatticeSet, law: &'a OffspringLaw, step: &StepLaw, budget: McBudget, center: Point) -> Explorer<'a> {
        Explorer { k, law, adj: law.adjoint(), steps: StepSampler::new(step), budget, center, prune: None }
    }

    /// Explores the tree rooted at `root` (the root itself is not tested).
    /// Breadth-first, stopping at the first vertex in K.
    fn explore(
        &self,
        root: Point,
        adjoint_root: bool,
        rng: &mut ChaCha8Rng,
        queue: &mut VecDeque<(Point, u32)>,
        pruned_g: &mut f64,
    ) -> Outcome {
        queue.clear();
        queue.push_back((root, 0));
        let mut count = 1usize;
        let mut first = true;
        while let Some((pos, depth)) = queue.pop_front() {
            if self.budget.max_depth.is_some_and(|m| depth >= m) {
                first = false;
                continue;
            }
            let n = if first && adjoint_root { self.adj.sample(rng) } else { self.law.sample(rng) };
            first = false;
            for _ in 0..n {
                let y = point::add(&pos, self.steps.sample(rng));
                if self.k.contains(&y) {
                    return Outcome::Hit;
                }
                count += 1;
                if count > self.budget.v_max {
                    return Outcome::Capped;
                }
                if let Some((r2, model)) = self.prune {
                    let off = point::sub(&y, &self.center);
                    if point::norm2(&off).powi(2) > r2 {
                        *pruned_g += model.g(&off);
                        continue;
                    }
                }
                queue.push_back((y, depth + 1));
            }
        }
        Outcome::Clear
    }
}

/// Half-width of the 95% Wilson interval.
fn wilson_half(p: f64, n: f64) -> f64 {
    let z2 = 1.959_963_984_540_054f64.powi(2);
    (z2 / n * (p * (1.0 - p) + z2 / (4.0 * n))).sqrt() / (1.0 + z2 / n)
}

fn check_point(k: &LatticeSet, x: &Point) -> Result<()> {
    if x[k.dim()..].iter().any(|&c| c != 0) {
        return invalid("start point has the wrong dimension");
    }
    Ok(())
}

fn check_laws(k: &LatticeSet, step: &StepLaw, samples: u64) -> Result<()> {
    if step.dim() != k.dim() {
        return invalid(format!("set lives in d={} but the step law in d={}", k.dim(), step.dim()));
    }
    if samples == 0 {
        return invalid("samples must be at least 1");
    }
    Ok(())
}

/// P_x(range of the tree-indexed walk hits K); the root has offspring law μ
/// (`Critical`, giving p_c) or μ̃ (`Adjoint`, giving p_adj).
#[allow(clippy::too_many_arguments)]
pub fn hit_probability(
    kind: RootKind,
    k: &LatticeSet,
    x: &Point,
    law: &OffspringLaw,
    step: &StepLaw,
    samples: u64,
    budget: McBudget,
    seed: u64,
) -> Result<HitEstimate> {
    check_laws(k, step, samples)?;
    check_point(k, x)?;
    let quantity = match kind {
        RootKind::Critical => Quantity::PC,
        RootKind::Adjoint => Quantity::PAdj,
    };
    let d = k.dim();
    if k.contains(x) {
        return Ok(HitEstimate::exact(quantity, x, d, 1.0, samples));
    }
    let ex = Explorer::new(k, law, step, budget, [0; MAX_D]);
    let outcomes: Vec<Outcome> = (0..samples)
        .into_par_iter()
        .map_init(VecDeque::new, |q, i| {
            let mut r = rng::stream(seed, rng::LANE_HIT, i);
            let mut unused = 0.0;
            ex.explore(*x, kind == RootKind::Adjoint, &mut r, q, &mut unused)
        })
        .collect();
    let hits = outcomes.iter().filter(|o| **o == Outcome::Hit).count() as f64;
    let capped = outcomes.iter().filter(|o| **o == Outcome::Capped).count() as u64;
    let n = samples as f64;
    let p_hat = (hits + 0.5 * capped as f64) / n;
    let mut flags = Vec::new();
    if capped > 0 {
        flags.push(format!("{capped} trees reached the vertex budget"));
    }
    Ok(HitEstimate {
        quantity,
        x: point::to_vec(x, d),
        p_hat,
        ci_half: wilson_half(p_hat, n),
        samples,
        capped,
        low: hits / n,
        high: (hits + capped as f64) / n,
        flags,
    })
}

/// Stopping rule for the spine of the infinite tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EscapeConfig {
    /// First stopping radius around `center`.
    pub r_stop: f64,
    /// Largest radius the doubling may reach.
    pub r_max: f64,
    /// Bush vertices farther than `prune_factor · r_stop` (the initial radius)
    /// from the center are not explored; their subtrees enter through the
    /// remainder model. Doubling R_stop therefore only lengthens the spine.
    pub prune_factor: f64,
    /// Multiplier on the asymptotic remainder used for the conservative bracket end.
    pub safety: f64,
    /// R_stop is doubled while the remainder bound exceeds this fraction of the CI half-width.
    pub target_fraction: f64,
    /// Reject the run when the bracket is wider than this.
    pub tolerance: Option<f64>,
    /// Branching capacity used in the point estimate of the remainder; estimated
    /// self-consistently for one-point sets when absent.
    pub bcap_hint: Option<f64>,
    pub center: Vec<i32>,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        EscapeConfig {
            r_stop: 8.0,
            r_max: 16.0,
            prune_factor: 1.5,
            safety: 10.0,
            target_fraction: 0.5,
            tolerance: None,
            bcap_hint: None,
            center: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EscapeSample {
    pub hit: bool,
    pub capped: bool,
    /// G(S_τ − c) at the spine's stopping point.
    pub g_stop: f64,
    /// Σ g(y − c) over pruned bush vertices.
    pub pruned_g: f64,
}

/// Raw spine samples; the remainder model is applied in `estimate`.
#[derive(Debug, Clone, Serialize)]
pub struct EscapeSamples {
    pub x: Vec<i32>,
    pub quantity: Quantity,
    pub r_stop: f64,
    pub sigma2: f64,
    pub safety: f64,
    /// Upper bound on Bcap(K) used for the conservative bracket end (|K|, since e_K ≤ 1).
    pub bcap_upper: f64,
    pub samples: Vec<EscapeSample>,
    pub flags: Vec<String>,
}

impl EscapeSamples {
    /// Probability of avoiding K, with the unexplored remainder p_I(S_τ) ≈ (σ²/2)·B·G(S_τ)
    /// and pruned subtrees p_c(y) ≈ B·g(y) at B = `b_hat`.
    pub fn estimate(&self, b_hat: f64) -> HitEstimate {
        let n = self.samples.len() as f64;
        let h = self.sigma2 / 2.0;
        let weight = |s: &EscapeSample, b: f64| ((1.0 - h * b * s.g_stop) * (-b * s.pruned_g).exp()).max(0.0);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut low = 0.0;
        let mut high = 0.0;
        let mut capped = 0;
        for s in &self.samples {
            let w = if s.hit {
                0.0
            } else if s.capped {
                capped += 1;
                high += 1.0;
                0.5 * weight(s, b_hat)
            } else {
                high += 1.0;
                low += (1.0 - self.safety * (h * self.bcap_upper * s.g_stop + self.bcap_upper * s.pruned_g)).max(0.0);
                weight(s, b_hat)
            };
            sum += w;
            sum2 += w * w;
        }
        let mean = sum / n;
        let var = if n > 1.0 { ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.25 };
        let ci = if mean == 0.0 || mean == 1.0 {
            wilson_half(mean, n)
        } else {
            1.959_963_984_540_054 * (var / n).sqrt()
        };
        let mut flags = self.flags.clone();
        if capped > 0 {
            flags.push(format!("{capped} samples reached the vertex budget"));
        }
        HitEstimate {
            quantity: self.quantity,
            x: self.x.clone(),
            p_hat: mean,
            ci_half: ci,
            samples: self.samples.len() as u64,
            capped,
            low: (low / n).min(mean),
            high: (high / n).max(mean),
            flags,
        }
    }

    /// Mean conservative remainder (high − low end contribution of the stopping rule).
    pub fn remainder_bound(&self) -> f64 {
        let h = self.sigma2 / 2.0;
        let n = self.samples.len() as f64;
        self.samples
            .iter()
            .filter(|s| !s.hit && !s.capped)
            .map(|s| (self.safety * (h * self.bcap_upper * s.g_stop + self.bcap_upper * s.pruned_g)).min(1.0))
            .sum::<f64>()
            / n
    }

    /// Solves B = Σ_a ê_a(B) for a family of per-point samples of the same set.
    pub fn self_consistent_bcap(parts: &[EscapeSamples]) -> f64 {
        let mut b = parts.len() as f64 * 0.5;
        for _ in 0..200 {
            let next: f64 = parts.iter().map(|p| p.estimate(b).p_hat).sum();
            if (next - b).abs() < 1e-14 {
                return next;
            }
            b = next;
        }
        b
    }
}

fn center_of(cfg: &EscapeConfig, d: usize) -> Result<Point> {
    if cfg.center.is_empty() {
        return Ok([0; MAX_D]);
    }
    if cfg.center.len() != d {
        return invalid("escape center has the wrong dimension");
    }
    Ok(point::from_slice(&cfg.center))
}

/// One pass of spine samples at a fixed stopping radius. `root_bush` adds the
/// bush at the spine's base (T_I instead of T_−).
#[allow(clippy::too_many_arguments)]
fn spine_pass(
    k: &LatticeSet,
    x: &Point,
    law: &OffspringLaw,
    step: &StepLaw,
    samples: u64,
    budget: McBudget,
    seed: u64,
    r_stop: f64,
    prune: f64,
    cfg: &EscapeConfig,
    model: &GreenModel,
    root_bush: bool,
) -> Result<Vec<EscapeSample>> {
    let c = center_of(cfg, k.dim())?;
    let mut ex = Explorer::new(k, law, step, budget, c);
    let pr = prune;
    ex.prune = Some((pr * pr, model));
    let steps = StepSampler::new(step);
    let r2 = r_stop * r_stop;
    let out = (0..samples)
        .into_par_iter()
        .map_init(VecDeque::new, |q, i| {
            let mut spine = rng::stream(seed, rng::LANE_SPINE, i);
            let bush_seed = rng::derive(seed, rng::LANE_BUSH, i);
            let mut s = EscapeSample { hit: false, capped: false, g_stop: 0.0, pruned_g: 0.0 };
            let mut pos = *x;
            let mut j = if root_bush { 0 } else { 1 };
            if !root_bush {
                pos = point::add(&pos, steps.sample(&mut spine));
            }
            loop {
                if k.contains(&pos) {
                    s.hit = true;
                    return s;
                }
                let off = point::sub(&pos, &c);
                if point::norm2(&off).powi(2) > r2 {
                    s.g_stop = model.big_g(&off);
                    return s;
                }
                let mut br = rng::stream(bush_seed, rng::LANE_BUSH, j);
                match ex.explore(pos, true, &mut br, q, &mut s.pruned_g) {
                    Outcome::Hit => {
                        s.hit = true;
                        return s;
                    }
                    Outcome::Capped => {
                        s.capped = true;
                        return s;
                    }
                    Outcome::Clear => {}
                }
                pos = point::add(&pos, steps.sample(&mut spine));
                j += 1;
            }
        })
        .collect();
    Ok(out)
}

/// Spine samples with the adaptive stopping radius.
#[allow(clippy::too_many_arguments)]
pub fn escape_samples(
    k: &LatticeSet,
    x: &Point,
    law: &OffspringLaw,
    step: &StepLaw,
    samples: u64,
    cfg: &EscapeConfig,
    budget: McBudget,
    seed: u64,
    root_bush: bool,
) -> Result<EscapeSamples> {
    check_laws(k, step, samples)?;
    check_point(k, x)?;
    if k.dim() < 5 {
        return invalid("escape simulation needs d >= 5 (the spine remainder is summable only there)");
    }
    if !(cfg.r_stop > 0.0 && cfg.r_max >= cfg.r_stop && cfg.prune_factor >= 1.0 && cfg.safety >= 1.0) {
        return invalid("escape config needs 0 < r_stop <= r_max, prune_factor >= 1, safety >= 1");
    }
    let c = center_of(cfg, k.dim())?;
    let start = point::norm2(&point::sub(x, &c));
    let mut r_stop = cfg.r_stop.max(2.0 * start);
    let r_max = cfg.r_max.max(r_stop);
    let prune = cfg.prune_factor * cfg.r_stop;
    let model = GreenModel::new(step, (r_max.max(prune)).ceil() as usize + 2 * step.radius() as usize)?;
    let quantity = if root_bush { Quantity::PI } else { Quantity::EK };
    loop {
        let raw = spine_pass(k, x, law, step, samples, budget, seed, r_stop, prune, cfg, &model, root_bush)?;
        let mut es = EscapeSamples {
            x: point::to_vec(x, k.dim()),
            quantity,
            r_stop,
            sigma2: law.sigma2(),
            safety: cfg.safety,
            bcap_upper: k.len() as f64,
            samples: raw,
            flags: Vec::new(),
        };
        let b = cfg.bcap_hint.unwrap_or(es.bcap_upper * 0.5);
        let est = es.estimate(b);
        let bound = es.remainder_bound();
        if bound <= cfg.target_fraction * est.ci_half || 2.0 * r_stop > r_max {
            if bound > cfg.target_fraction * est.ci_half {
                es.flags.push(format!(
                    "remainder bound {bound:.3e} exceeds {} x CI half-width at the largest R_stop = {r_stop}",
                    cfg.target_fraction
                ));
            }
            if let Some(t) = cfg.tolerance {
                let e = es.estimate(b);
                if e.high - e.low > t {
                    return Err(Error::Budget(format!(
                        "escape bracket width {:.3e} above tolerance {t:e}; raise r_max",
                        e.high - e.low
                    )));
                }
            }
            return Ok(es);
        }
        r_stop *= 2.0;
    }
}

/// e_K(x) = 1 − p_−(x).
#[allow(clippy::too_many_arguments)]
pub fn escape_probability(
    k: &LatticeSet,
    x: &Point,
    law: &OffspringLaw,
    step: &StepLaw,
    samples: u64,
    cfg: &EscapeConfig,
    budget: McBudget,
    seed: u64,
) -> Result<HitEstimate> {
    let es = escape_samples(k, x, law, step, samples, cfg, budget, seed, false)?;
    Ok(es.estimate(bcap_for(k, &es, cfg)))
}

fn bcap_for(k: &LatticeSet, es: &EscapeSamples, cfg: &EscapeConfig) -> f64 {
    match cfg.bcap_hint {
        Some(b) => b,
        None if k.len() == 1 && k.contains(&point::from_slice(&es.x)) => EscapeSamples::self_consistent_bcap(std::slice::from_ref(es)),
        None => 0.5 * es.bcap_upper,
    }
}

/// p_I(x): T_I from x, i.e. the adjoint bush at x plus the T_− spine.
#[allow(clippy::too_many_arguments)]
pub fn p_infinite(
    k: &LatticeSet,
    x: &Point,
    law: &OffspringLaw,
    step: &StepLaw,
    samples: u64,
    cfg: &EscapeConfig,
    budget: McBudget,
    seed: u64,
) -> Result<HitEstimate> {
    check_laws(k, step, samples)?;
    check_point(k, x)?;
    if k.contains(x) {
        return Ok(HitEstimate::exact(Quantity::PI, x, k.dim(), 1.0, samples));
    }
    let es = escape_samples(k, x, law, step, samples, cfg, budget, seed, true)?;
    let b = cfg.bcap_hint.unwrap_or(0.5 * es.bcap_upper);
    Ok(es.estimate(b).complement(Quantity::PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_step_law, StepKind};
    use crate::offspring::{make_offspring, OffspringKind};

    #[test]
    fn wilson_half_width_limits() {
        assert!(wilson_half(0.0, 100.0) > 0.0);
        assert!((wilson_half(0.5, 1e6) - 1.96 * 0.5 / 1000.0).abs() < 1e-5);
    }

    #[test]
    fn root_in_set_is_certain() {
        let law = make_offspring(OffspringKind::BinaryCritical, &[]).unwrap();
        let step = make_step_law(StepKind::Simple, 5, None).unwrap();
        let k = LatticeSet::single(5, [0; MAX_D]).unwrap();
        let e = hit_probability(RootKind::Critical, &k, &[0; MAX_D], &law, &step, 10, McBudget::default(), 1).unwrap();
        assert_eq!((e.p_hat, e.ci_half, e.low, e.high), (1.0, 0.0, 1.0, 1.0));
    }
}

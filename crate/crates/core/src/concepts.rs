//! Synthetic p-concepts with exact conditional means.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::alphatron::Dataset;
use crate::error::{input, Error, Result};
use crate::fourier::{SparseFourierPolynomial, point_to_mask};
use crate::kernels::{dot, norm, Sample};
use crate::link::LinkFunction;
use crate::polyapprox::{relu, sigmoid};

/// Rejection sampling gives up below this acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
const PILOT_DRAWS: usize = 100_000;
const MAX_REJECTIONS: usize = 1_000_000;
const MEAN_SLACK: f64 = 1e-9;

/// Uniform point on the unit sphere in ℝⁿ.
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let r = norm(&x);
        if r > 1e-300 {
            x.iter_mut().for_each(|v| *v /= r);
            return x;
        }
    }
}

/// Uniform point of {−1,1}ⁿ.
pub fn sample_hypercube<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

fn unit(mut w: Vec<f64>) -> Result<Vec<f64>> {
    let r = norm(&w);
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Concept("weight vector must be non-zero and finite".into()));
    }
    w.iter_mut().for_each(|v| *v /= r);
    Ok(w)
}

fn point(x: &Sample) -> Result<&[f64]> {
    x.as_point()
        .ok_or_else(|| Error::Input("this concept takes vectors, not bags".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginHalfspace {
    pub w: Vec<f64>,
    pub margin: f64,
}

impl MarginHalfspace {
    pub fn new(w: Vec<f64>, margin: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&margin) {
            return Err(Error::Concept(format!("margin must lie in [0,1), got {margin}")));
        }
        Ok(MarginHalfspace { w: unit(w)?, margin })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, margin: f64, rng: &mut R) -> Result<Self> {
        Self::new(sample_sphere(n, rng), margin)
    }

    pub fn dimension(&self) -> usize {
        self.w.len()
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        dot(&self.w, x).abs() >= self.margin
    }

    /// 1[w·x ≥ 0].
    pub fn eval(&self, x: &[f64]) -> f64 {
        if dot(&self.w, x) >= 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Fraction of uniform sphere draws meeting every margin.
pub fn estimate_acceptance<R: Rng + ?Sized>(
    hs: &[MarginHalfspace],
    draws: usize,
    rng: &mut R,
) -> f64 {
    let n = hs[0].dimension();
    let hits = (0..draws)
        .filter(|_| {
            let x = sample_sphere(n, rng);
            hs.iter().all(|h| h.satisfied(&x))
        })
        .count();
    hits as f64 / draws as f64
}

/// Uniform on the sphere conditioned on ρ ≤ |wᵢ·x| for every halfspace.
pub fn sample_with_margin<R: Rng + ?Sized>(hs: &[MarginHalfspace], rng: &mut R) -> Result<Vec<f64>> {
    let Some(first) = hs.first() else {
        return input("need at least one halfspace");
    };
    let n = first.dimension();
    if hs.iter().any(|h| h.dimension() != n) {
        return input("halfspaces have differing dimensions");
    }
    for _ in 0..MAX_REJECTIONS {
        let x = sample_sphere(n, rng);
        if hs.iter().all(|h| h.satisfied(&x)) {
            return Ok(x);
        }
    }
    Err(Error::Concept(format!(
        "margin rejection sampling failed after {MAX_REJECTIONS} draws"
    )))
}

fn check_feasible<R: Rng + ?Sized>(hs: &[MarginHalfspace], rng: &mut R) -> Result<()> {
    if hs.iter().all(|h| h.margin == 0.0) {
        return Ok(());
    }
    let a = estimate_acceptance(hs, PILOT_DRAWS, rng);
    if a < MIN_ACCEPTANCE {
        return Err(Error::Concept(format!(
            "margin conditioning accepts {a:.2e} of draws, below {MIN_ACCEPTANCE:e}"
        )));
    }
    Ok(())
}

/// A p-concept: an input distribution plus the exact conditional mean.
pub trait Concept {
    fn sample_input(&self, rng: &mut dyn RngCore) -> Result<Sample>;
    fn conditional_mean(&self, x: &Sample) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    #[default]
    Bernoulli,
    ExactMean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PConceptSampler {
    pub mode: LabelMode,
}

impl PConceptSampler {
    pub fn new(mode: LabelMode) -> Self {
        PConceptSampler { mode }
    }

    pub fn draw<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> Result<f64> {
        if !(-MEAN_SLACK..=1.0 + MEAN_SLACK).contains(&c) {
            return Err(Error::Concept(format!("conditional mean {c} outside [0,1]")));
        }
        Ok(match self.mode {
            LabelMode::ExactMean => c,
            LabelMode::Bernoulli => {
                if rng.random::<f64>() < c {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

/// m labelled draws carrying their exact conditional means.
pub fn draw_dataset<C: Concept + ?Sized>(
    concept: &C,
    m: usize,
    sampler: PConceptSampler,
    rng: &mut dyn RngCore,
) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let mut means = Vec::with_capacity(m);
    for _ in 0..m {
        let x = concept.sample_input(rng)?;
        let c = concept.conditional_mean(&x)?;
        labels.push(sampler.draw(c, rng)?);
        means.push(c.clamp(0.0, 1.0));
        samples.push(x);
    }
    Dataset::new(samples, labels)?.with_means(means)
}

/// c(x) = u(v·x) on the uniform sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Glm {
    pub v: Vec<f64>,
    pub link: LinkFunction,
}

impl Glm {
    pub fn new(v: Vec<f64>, link: LinkFunction) -> Result<Self> {
        Ok(Glm { v: unit(v)?, link })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, link: LinkFunction, rng: &mut R) -> Result<Self> {
        Self::new(sample_sphere(n, rng), link)
    }
}

impl Concept for Glm {
    fn sample_input(&self, rng: &mut dyn RngCore) -> Result<Sample> {
        Ok(Sample::Point(sample_sphere(self.v.len(), rng)))
    }

    fn conditional_mean(&self, x: &Sample) -> Result<f64> {
        Ok(self.link.eval(dot(&self.v, point(x)?)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn eval(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(a),
            Activation::Relu => relu(a),
        }
    }
}

/// x ↦ σ′(Σ bᵢ σ(aᵢ·x)) with unit aᵢ and unit b.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerNet {
    pub hidden: Vec<Vec<f64>>,
    pub output_weights: Vec<f64>,
    pub activation: Activation,
    pub output: LinkFunction,
}

impl TwoLayerNet {
    pub fn new(
        hidden: Vec<Vec<f64>>,
        output_weights: Vec<f64>,
        activation: Activation,
        output: LinkFunction,
    ) -> Result<Self> {
        if hidden.is_empty() || hidden.len() != output_weights.len() {
            return Err(Error::Concept("need k >= 1 hidden units and k output weights".into()));
        }
        let n = hidden[0].len();
        if hidden.iter().any(|a| a.len() != n) {
            return Err(Error::Concept("hidden weights have differing dimensions".into()));
        }
        Ok(TwoLayerNet {
            hidden: hidden.into_iter().map(unit).collect::<Result<_>>()?,
            output_weights: unit(output_weights)?,
            activation,
            output,
        })
    }

    /// Uniform unit hidden weights; output weights |N(0,1)| normalized.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        k: usize,
        activation: Activation,
        output: LinkFunction,
        rng: &mut R,
    ) -> Result<Self> {
        let hidden = (0..k).map(|_| sample_sphere(n, rng)).collect();
        let b = (0..k)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                g.abs()
            })
            .collect();
        Self::new(hidden, b, activation, output)
    }

    pub fn dimension(&self) -> usize {
        self.hidden[0].len()
    }

    pub fn eval_net1(&self, x: &[f64]) -> f64 {
        self.hidden
            .iter()
            .zip(&self.output_weights)
            .map(|(a, b)| b * self.activation.eval(dot(a, x)))
            .sum()
    }

    pub fn eval_net2(&self, x: &[f64]) -> f64 {
        self.output.eval(self.eval_net1(x))
    }
}

impl Concept for TwoLayerNet {
    fn sample_input(&self, rng: &mut dyn RngCore) -> Result<Sample> {
        Ok(Sample::Point(sample_sphere(self.dimension(), rng)))
    }

    fn conditional_mean(&self, x: &Sample) -> Result<f64> {
        Ok(self.eval_net2(point(x)?))
    }
}

pub fn eval_intersection(hs: &[MarginHalfspace], x: &[f64]) -> f64 {
    if hs.iter().all(|h| h.eval(x) == 1.0) {
        1.0
    } else {
        0.0
    }
}

/// 1[Σ hᵢ(x) > t/2].
pub fn eval_majority(hs: &[MarginHalfspace], x: &[f64]) -> f64 {
    let votes: f64 = hs.iter().map(|h| h.eval(x)).sum();
    if 2.0 * votes > hs.len() as f64 {
        1.0
    } else {
        0.0
    }
}

/// Ramp with u(1 − 1/t) = 0 and u(1) = 1, Lipschitz t, so that
/// AND(x) = u(fraction of satisfied halfspaces).
pub fn intersection_as_link(t: usize) -> Result<LinkFunction> {
    LinkFunction::threshold_fraction(t, t)
}

/// Ramp with u((k−1)/t) = 0 and u(k/t) = 1 for k = ⌊t/2⌋ + 1.
pub fn majority_as_link(t: usize) -> Result<LinkFunction> {
    LinkFunction::threshold_fraction(t, t / 2 + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    And,
    Majority,
}

/// AND or majority of margin halfspaces, inputs conditioned on all margins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceCombination {
    pub halfspaces: Vec<MarginHalfspace>,
    pub rule: CombineRule,
}

impl HalfspaceCombination {
    /// Checks by a pilot run that margin conditioning is feasible.
    pub fn new<R: Rng + ?Sized>(
        halfspaces: Vec<MarginHalfspace>,
        rule: CombineRule,
        rng: &mut R,
    ) -> Result<Self> {
        if halfspaces.is_empty() {
            return Err(Error::Concept("need at least one halfspace".into()));
        }
        let n = halfspaces[0].dimension();
        if halfspaces.iter().any(|h| h.dimension() != n) {
            return Err(Error::Concept("halfspaces have differing dimensions".into()));
        }
        check_feasible(&halfspaces, rng)?;
        Ok(HalfspaceCombination { halfspaces, rule })
    }

    pub fn random<R: Rng + ?Sized>(
        n: usize,
        t: usize,
        margin: f64,
        rule: CombineRule,
        rng: &mut R,
    ) -> Result<Self> {
        let hs = (0..t)
            .map(|_| MarginHalfspace::random(n, margin, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(hs, rule, rng)
    }

    pub fn link(&self) -> Result<LinkFunction> {
        match self.rule {
            CombineRule::And => intersection_as_link(self.halfspaces.len()),
            CombineRule::Majority => majority_as_link(self.halfspaces.len()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.rule {
            CombineRule::And => eval_intersection(&self.halfspaces, x),
            CombineRule::Majority => eval_majority(&self.halfspaces, x),
        }
    }
}

impl Concept for HalfspaceCombination {
    fn sample_input(&self, rng: &mut dyn RngCore) -> Result<Sample> {
        Ok(Sample::Point(sample_with_margin(&self.halfspaces, rng)?))
    }

    fn conditional_mean(&self, x: &Sample) -> Result<f64> {
        Ok(self.eval(point(x)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    /// Satisfied by x_var = +1 when true, by x_var = −1 otherwise.
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnfFormula {
    pub n: usize,
    pub terms: Vec<Vec<Literal>>,
}

impl DnfFormula {
    pub fn new(n: usize, terms: Vec<Vec<Literal>>) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::Concept("DNF dimension must lie in 1..=63".into()));
        }
        for t in &terms {
            if t.is_empty() {
                return Err(Error::Concept("empty DNF term".into()));
            }
            if t.iter().any(|l| l.var >= n) {
                return Err(Error::Concept("literal variable out of range".into()));
            }
        }
        Ok(DnfFormula { n, terms })
    }

    /// s terms of `width` distinct variables each, random polarities.
    pub fn random<R: Rng + ?Sized>(n: usize, s: usize, width: usize, rng: &mut R) -> Result<Self> {
        if width == 0 || width > n {
            return Err(Error::Concept(format!("term width must lie in 1..={n}")));
        }
        let terms = (0..s)
            .map(|_| {
                let mut vars: Vec<usize> = (0..n).collect();
                for i in 0..width {
                    let j = rng.random_range(i..n);
                    vars.swap(i, j);
                }
                vars[..width]
                    .iter()
                    .map(|&var| Literal {
                        var,
                        positive: rng.random(),
                    })
                    .collect()
            })
            .collect();
        Self::new(n, terms)
    }

    pub fn s(&self) -> usize {
        self.terms.len()
    }

    fn term_holds(term: &[Literal], x: u64) -> bool {
        term.iter().all(|l| ((x >> l.var) & 1 == 0) == l.positive)
    }

    pub fn satisfied_terms(&self, x: u64) -> usize {
        self.terms.iter().filter(|t| Self::term_holds(t, x)).count()
    }

    /// Bitmask form: bit i set means xᵢ = −1.
    pub fn eval_mask(&self, x: u64) -> f64 {
        if self.terms.iter().any(|t| Self::term_holds(t, x)) {
            1.0
        } else {
            0.0
        }
    }

    pub fn fraction_mask(&self, x: u64) -> f64 {
        if self.terms.is_empty() {
            0.0
        } else {
            self.satisfied_terms(x) as f64 / self.s() as f64
        }
    }

    pub fn eval_dnf(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.eval_mask(point_to_mask(x)?))
    }

    pub fn dnf_fraction(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.fraction_mask(point_to_mask(x)?))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return input(format!("point has dimension {}, expected {}", x.len(), self.n));
        }
        Ok(())
    }

    /// Fourier expansion of Σ_terms AND_term, whose clamp to [0,1] is f.
    pub fn term_sum(&self) -> Result<SparseFourierPolynomial> {
        let mut all = Vec::new();
        for t in &self.terms {
            let w = t.len();
            let scale = 0.5f64.powi(w as i32);
            for sub in 0u64..(1 << w) {
                let mut mask = 0u64;
                let mut sign = 1.0;
                for (i, l) in t.iter().enumerate() {
                    if sub >> i & 1 == 1 {
                        mask |= 1 << l.var;
                        if !l.positive {
                            sign = -sign;
                        }
                    }
                }
                all.push((mask, sign * scale));
            }
        }
        SparseFourierPolynomial::from_terms(self.n, all)
    }
}

impl Concept for DnfFormula {
    fn sample_input(&self, rng: &mut dyn RngCore) -> Result<Sample> {
        Ok(Sample::Point(sample_hypercube(self.n, rng)))
    }

    fn conditional_mean(&self, x: &Sample) -> Result<f64> {
        self.eval_dnf(point(x)?)
    }
}

/// c(x) = P(x) on the uniform hypercube for a planted Fourier polynomial
/// with values in [0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierConcept {
    pub poly: SparseFourierPolynomial,
}

impl FourierConcept {
    /// Requires P̂(∅) ± Σ_{S≠∅}|P̂(S)| ⊆ [0,1].
    pub fn new(poly: SparseFourierPolynomial) -> Result<Self> {
        let c0 = poly.get(0);
        let rest = poly.l1() - c0.abs();
        if c0 - rest < -MEAN_SLACK || c0 + rest > 1.0 + MEAN_SLACK {
            return Err(Error::Concept("planted polynomial can leave [0,1]".into()));
        }
        Ok(FourierConcept { poly })
    }

    /// 1/2 plus `terms` random characters of degree 1..=d with total
    /// weight `l1` ≤ 1/2.
    pub fn random_low_degree<R: Rng + ?Sized>(
        n: usize,
        d: usize,
        terms: usize,
        l1: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if d == 0 || d > n || !(0.0..=0.5).contains(&l1) {
            return Err(Error::Concept("need 1 <= d <= n and 0 <= l1 <= 1/2".into()));
        }
        let mut raw = Vec::with_capacity(terms);
        for _ in 0..terms {
            let size = rng.random_range(1..=d);
            let mut vars: Vec<usize> = (0..n).collect();
            let mut mask = 0;
            for i in 0..size {
                let j = rng.random_range(i..n);
                vars.swap(i, j);
                mask |= 1u64 << vars[i];
            }
            let mag: f64 = rng.random_range(0.5..1.0);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            raw.push((mask, sign * mag));
        }
        let total: f64 = raw.iter().map(|t| t.1.abs()).sum();
        let scale = if total > 0.0 { l1 / total } else { 0.0 };
        let poly = SparseFourierPolynomial::from_terms(
            n,
            std::iter::once((0, 0.5)).chain(raw.into_iter().map(|(s, c)| (s, c * scale))),
        )?;
        Self::new(poly)
    }
}

impl Concept for FourierConcept {
    fn sample_input(&self, rng: &mut dyn RngCore) -> Result<Sample> {
        Ok(Sample::Point(sample_hypercube(self.poly.n(), rng)))
    }

    fn conditional_mean(&self, x: &Sample) -> Result<f64> {
        Ok(self.poly.eval(point(x)?)?.clamp(0.0, 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BagDependence {
    Independent,
    /// Jittered, renormalized copies of one seed instance.
    Clustered { jitter: f64 },
}

/// Bags of margin-conditioned instances labelled by u(mean c(x)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BagDistributionSpec {
    pub instance: MarginHalfspace,
    pub min_size: usize,
    pub max_size: usize,
    pub link: LinkFunction,
    pub dependence: BagDependence,
}

impl BagDistributionSpec {
    pub fn new(
        instance: MarginHalfspace,
        min_size: usize,
        max_size: usize,
        link: LinkFunction,
        dependence: BagDependence,
    ) -> Result<Self> {
        if min_size == 0 || max_size < min_size {
            return Err(Error::Concept("bag sizes need 1 <= min <= max".into()));
        }
        if let BagDependence::Clustered { jitter } = dependence {
            if !(jitter >= 0.0 && jitter.is_finite()) {
                return Err(Error::Concept("jitter must be non-negative".into()));
            }
        }
        Ok(BagDistributionSpec {
            instance,
            min_size,
            max_size,
            link,
            dependence,
        })
    }

    fn jittered<R: Rng + ?Sized>(&self, seed: &[f64], jitter: f64, rng: &mut R) -> Result<Vec<f64>> {
        let hs = std::slice::from_ref(&self.instance);
        for _ in 0..MAX_REJECTIONS {
            let mut x: Vec<f64> = seed
                .iter()
                .map(|v| {
                    let g: f64 = StandardNormal.sample(rng);
                    v + jitter * g
                })
                .collect();
            let r = norm(&x);
            if r <= 1e-300 {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= r);
            if self.instance.satisfied(&x) {
                return Ok(x);
            }
        }
        // Jitter that never keeps the margin falls back to fresh draws.
        sample_with_margin(hs, rng)
    }

    pub fn sample_bag<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let size = rng.random_range(self.min_size..=self.max_size);
        let hs = std::slice::from_ref(&self.instance);
        match self.dependence {
            BagDependence::Independent => (0..size).map(|_| sample_with_margin(hs, rng)).collect(),
            BagDependence::Clustered { jitter } => {
                let seed = sample_with_margin(hs, rng)?;
                let mut bag = Vec::with_capacity(size);
                bag.push(seed.clone());
                for _ in 1..size {
                    bag.push(self.jittered(&seed, jitter, rng)?);
                }
                Ok(bag)
            }
        }
    }

    /// u((1/|β|) Σ c(x)).
    pub fn bag_mean(&self, bag: &[Vec<f64>]) -> Result<f64> {
        if bag.is_empty() {
            return input("empty bag");
        }
        let avg = bag.iter().map(|x| self.instance.eval(x)).sum::<f64>() / bag.len() as f64;
        Ok(self.link.eval(avg))
    }
}

impl Concept for BagDistributionSpec {
    fn sample_input(&self, rng: &mut dyn RngCore) -> Result<Sample> {
        Ok(Sample::Bag(self.sample_bag(rng)?))
    }

    fn conditional_mean(&self, x: &Sample) -> Result<f64> {
        let bag = x
            .as_bag()
            .ok_or_else(|| Error::Input("bag concept takes bags".into()))?;
        self.bag_mean(bag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn sphere_points_are_unit_and_reproducible() {
        let a = sample_sphere(7, &mut rng(3));
        assert!((norm(&a) - 1.0).abs() < 1e-12);
        assert_eq!(a, sample_sphere(7, &mut rng(3)));
    }

    #[test]
    fn margin_samples_respect_margins() {
        let mut r = rng(1);
        let c = HalfspaceCombination::random(10, 2, 0.3, CombineRule::And, &mut r).unwrap();
        for _ in 0..500 {
            let x = c.sample_input(&mut r).unwrap();
            assert!(c.halfspaces.iter().all(|h| h.satisfied(x.as_point().unwrap())));
        }
    }

    #[test]
    fn infeasible_margin_is_reported() {
        let mut r = rng(2);
        let hs = vec![MarginHalfspace::new(vec![1.0; 40], 0.95).unwrap()];
        assert!(matches!(
            HalfspaceCombination::new(hs, CombineRule::And, &mut r),
            Err(Error::Concept(_))
        ));
    }

    #[test]
    fn net_examples() {
        let net = TwoLayerNet::new(
            vec![vec![1.0, 0.0]],
            vec![1.0],
            Activation::Sigmoid,
            LinkFunction::identity_ramp(),
        )
        .unwrap();
        assert_eq!(net.eval_net1(&[0.0, 1.0]), 0.5);
        let relu_net = TwoLayerNet::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            Activation::Relu,
            LinkFunction::identity_ramp(),
        )
        .unwrap();
        assert_eq!(relu_net.eval_net1(&[-0.5, -0.5]), 0.0);
    }

    #[test]
    fn random_net_output_weights_are_non_negative_unit() {
        let net = TwoLayerNet::random(6, 4, Activation::Relu, LinkFunction::identity_ramp(), &mut rng(5))
            .unwrap();
        assert!(net.output_weights.iter().all(|&b| b >= 0.0));
        assert!((norm(&net.output_weights) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn combination_examples() {
        let h = |w: Vec<f64>| MarginHalfspace::new(w, 0.0).unwrap();
        let one = [h(vec![1.0, 0.0])];
        assert_eq!(eval_intersection(&one, &[0.5, 0.1]), one[0].eval(&[0.5, 0.1]));
        let two = [h(vec![1.0, 0.0]), h(vec![0.0, 1.0])];
        assert_eq!(eval_intersection(&two, &[0.5, 0.5]), 1.0);
        let three = [h(vec![1.0, 0.0]), h(vec![0.0, 1.0]), h(vec![-1.0, -1.0])];
        assert_eq!(eval_majority(&three, &[0.5, 0.5]), 1.0);
        let u = intersection_as_link(2).unwrap();
        assert_eq!(u.eval(1.0), 1.0);
        assert_eq!(u.eval(0.5), 0.0);
    }

    #[test]
    fn dnf_examples() {
        let empty = DnfFormula::new(4, vec![]).unwrap();
        assert_eq!(empty.eval_dnf(&[1.0; 4]).unwrap(), 0.0);
        let lit = |var, positive| Literal { var, positive };
        let f = DnfFormula::new(4, vec![vec![lit(0, true), lit(2, false)]]).unwrap();
        assert_eq!(f.eval_dnf(&[1.0, -1.0, -1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(f.eval_dnf(&[1.0, -1.0, 1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn dnf_term_sum_matches_term_count() {
        let f = DnfFormula::random(8, 3, 3, &mut rng(9)).unwrap();
        let p = f.term_sum().unwrap();
        for x in 0..256u64 {
            assert!((p.eval_mask(x) - f.satisfied_terms(x) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn pconcept_modes() {
        let mut r = rng(4);
        let b = PConceptSampler::new(LabelMode::Bernoulli);
        assert!((0..100).all(|_| b.draw(1.0, &mut r).unwrap() == 1.0));
        let e = PConceptSampler::new(LabelMode::ExactMean);
        assert_eq!(e.draw(0.123456789, &mut r).unwrap(), 0.123456789);
        assert!(b.draw(1.1, &mut r).is_err());
    }

    #[test]
    fn identical_positive_bag_has_mean_one() {
        let hs = MarginHalfspace::new(vec![1.0, 0.0, 0.0], 0.2).unwrap();
        let spec = BagDistributionSpec::new(hs, 1, 3, LinkFunction::identity_ramp(), BagDependence::Independent)
            .unwrap();
        let x = vec![0.9, 0.3, 0.0];
        assert_eq!(spec.bag_mean(&[x.clone(), x.clone(), x]).unwrap(), 1.0);
    }

    #[test]
    fn clustered_bags_keep_margins() {
        let mut r = rng(8);
        let hs = MarginHalfspace::random(10, 0.3, &mut r).unwrap();
        let spec = BagDistributionSpec::new(
            hs.clone(),
            1,
            5,
            LinkFunction::identity_ramp(),
            BagDependence::Clustered { jitter: 0.1 },
        )
        .unwrap();
        for _ in 0..200 {
            let bag = spec.sample_bag(&mut r).unwrap();
            assert!((1..=5).contains(&bag.len()));
            assert!(bag.iter().all(|x| hs.satisfied(x) && (norm(x) - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn planted_fourier_stays_in_unit_interval() {
        let c = FourierConcept::random_low_degree(10, 2, 6, 0.5, &mut rng(1)).unwrap();
        assert!(c.poly.degree() <= 2);
        for x in 0..1024u64 {
            let v = c.poly.eval_mask(x);
            assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }
}

//! Sparse Boolean Fourier polynomials, the KM membership-query algorithm,
//! and L1-ball projection.
//!
//! Points of {−1,1}^n are bitmasks: bit i set means xᵢ = −1, so
//! χ_S(x) = (−1)^{popcount(S ∧ x)}.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

pub const PRUNE_TOLERANCE: f64 = 1e-15;
pub const MAX_BRUTE_DIMENSION: usize = 14;
pub const DEFAULT_QUERY_BUDGET: u64 = 10_000_000;
const MAX_DIMENSION: usize = 63;

#[inline]
pub fn chi(s: u64, x: u64) -> f64 {
    if (s & x).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn mask_to_point(x: u64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if x >> i & 1 == 1 { -1.0 } else { 1.0 })
        .collect()
}

pub fn point_to_mask(x: &[f64]) -> Result<u64> {
    if x.len() > MAX_DIMENSION {
        return input(format!("Boolean dimension {} exceeds {MAX_DIMENSION}", x.len()));
    }
    let mut m = 0u64;
    for (i, &v) in x.iter().enumerate() {
        if v == -1.0 {
            m |= 1 << i;
        } else if v != 1.0 {
            return input(format!("coordinate {i} = {v} is not ±1"));
        }
    }
    Ok(m)
}

/// Σ_S P̂(S) χ_S over subsets of [n], keyed by bitmask.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRecord", into = "PolyRecord")]
pub struct SparseFourierPolynomial {
    n: usize,
    coeffs: BTreeMap<u64, f64>,
}

#[derive(Serialize, Deserialize)]
struct PolyRecord {
    n: usize,
    terms: Vec<(u64, f64)>,
}

impl From<SparseFourierPolynomial> for PolyRecord {
    fn from(p: SparseFourierPolynomial) -> Self {
        PolyRecord {
            n: p.n,
            terms: p.coeffs.into_iter().collect(),
        }
    }
}

impl TryFrom<PolyRecord> for SparseFourierPolynomial {
    type Error = Error;

    fn try_from(r: PolyRecord) -> Result<Self> {
        Self::from_terms(r.n, r.terms)
    }
}

impl SparseFourierPolynomial {
    pub fn zero(n: usize) -> Result<Self> {
        if n > MAX_DIMENSION {
            return input(format!("Boolean dimension {n} exceeds {MAX_DIMENSION}"));
        }
        Ok(SparseFourierPolynomial {
            n,
            coeffs: BTreeMap::new(),
        })
    }

    /// Repeated subsets are summed.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut p = Self::zero(n)?;
        for (s, c) in terms {
            if s & !full_mask(n) != 0 {
                return input(format!("subset {s:#b} is not within [{n}]"));
            }
            if !c.is_finite() {
                return input("non-finite Fourier coefficient");
            }
            *p.coeffs.entry(s).or_insert(0.0) += c;
        }
        p.prune();
        Ok(p)
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.abs() >= PRUNE_TOLERANCE);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: u64) -> f64 {
        self.coeffs.get(&s).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.coeffs.iter().map(|(&s, &c)| (s, c))
    }

    pub fn support_size(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .keys()
            .map(|s| s.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn l1(&self) -> f64 {
        self.coeffs.values().map(|c| c.abs()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Σ_{|S|>d} P̂(S)².
    pub fn tail_mass(&self, d: usize) -> f64 {
        self.coeffs
            .iter()
            .filter(|(s, _)| s.count_ones() as usize > d)
            .map(|(_, c)| c * c)
            .sum()
    }

    #[inline]
    pub fn eval_mask(&self, x: u64) -> f64 {
        self.coeffs.iter().map(|(&s, &c)| c * chi(s, x)).sum()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return input(format!("point has dimension {}, expected {}", x.len(), self.n));
        }
        Ok(self.eval_mask(point_to_mask(x)?))
    }

    /// self + a·other.
    pub fn add_scaled(&self, other: &SparseFourierPolynomial, a: f64) -> Result<Self> {
        if other.n != self.n {
            return input("polynomials have different dimensions");
        }
        let mut out = self.clone();
        for (&s, &c) in &other.coeffs {
            *out.coeffs.entry(s).or_insert(0.0) += a * c;
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|c| *c *= a);
        out.prune();
        out
    }

    /// max_S |P̂(S) − Q̂(S)|.
    pub fn linf_distance(&self, other: &SparseFourierPolynomial) -> f64 {
        let mut d: f64 = 0.0;
        for (&s, &c) in &self.coeffs {
            d = d.max((c - other.get(s)).abs());
        }
        for (&s, &c) in &other.coeffs {
            if !self.coeffs.contains_key(&s) {
                d = d.max(c.abs());
            }
        }
        d
    }

    /// Σ_S (P̂(S) − Q̂(S))².
    pub fn l2_distance_sq(&self, other: &SparseFourierPolynomial) -> f64 {
        let mut d = 0.0;
        for (&s, &c) in &self.coeffs {
            let e = c - other.get(s);
            d += e * e;
        }
        for (&s, &c) in &other.coeffs {
            if !self.coeffs.contains_key(&s) {
                d += c * c;
            }
        }
        d
    }
}

/// Query access to a real function on {−1,1}^n.
pub trait QueryOracle {
    fn dimension(&self) -> usize;
    fn query(&mut self, x: u64) -> f64;
    fn query_count(&self) -> u64;
}

impl<O: QueryOracle + ?Sized> QueryOracle for &mut O {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn query(&mut self, x: u64) -> f64 {
        (**self).query(x)
    }
    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
}

/// Deterministic function queries.
pub struct MembershipOracle<F> {
    n: usize,
    f: F,
    count: u64,
}

impl<F: FnMut(u64) -> f64> MembershipOracle<F> {
    pub fn new(n: usize, f: F) -> Result<Self> {
        if n == 0 || n > MAX_DIMENSION {
            return input(format!("oracle dimension must lie in 1..={MAX_DIMENSION}"));
        }
        Ok(MembershipOracle { n, f, count: 0 })
    }
}

impl<F: FnMut(u64) -> f64> QueryOracle for MembershipOracle<F> {
    fn dimension(&self) -> usize {
        self.n
    }
    fn query(&mut self, x: u64) -> f64 {
        self.count += 1;
        (self.f)(x)
    }
    fn query_count(&self) -> u64 {
        self.count
    }
}

/// Bernoulli label draws with E[y|x] given by a hidden mean in [0,1].
pub struct DistributionOracle<F> {
    n: usize,
    mean: F,
    rng: ChaCha8Rng,
    count: u64,
}

impl<F: FnMut(u64) -> f64> DistributionOracle<F> {
    pub fn new(n: usize, mean: F, seed: u64) -> Result<Self> {
        if n == 0 || n > MAX_DIMENSION {
            return input(format!("oracle dimension must lie in 1..={MAX_DIMENSION}"));
        }
        Ok(DistributionOracle {
            n,
            mean,
            rng: ChaCha8Rng::seed_from_u64(seed),
            count: 0,
        })
    }
}

impl<F: FnMut(u64) -> f64> QueryOracle for DistributionOracle<F> {
    fn dimension(&self) -> usize {
        self.n
    }
    fn query(&mut self, x: u64) -> f64 {
        self.count += 1;
        let p = (self.mean)(x).clamp(0.0, 1.0);
        if self.rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }
    fn query_count(&self) -> u64 {
        self.count
    }
}

/// Exact coefficients by a full Walsh–Hadamard transform (2^n queries).
pub fn brute_fourier<O: QueryOracle + ?Sized>(oracle: &mut O) -> Result<SparseFourierPolynomial> {
    let n = oracle.dimension();
    if n > MAX_BRUTE_DIMENSION {
        return Err(Error::Capacity(format!(
            "brute-force Fourier transform needs n <= {MAX_BRUTE_DIMENSION}, got {n}"
        )));
    }
    let size = 1usize << n;
    let mut v: Vec<f64> = (0..size as u64).map(|x| oracle.query(x)).collect();
    let mut h = 1;
    while h < size {
        for i in (0..size).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / size as f64;
    SparseFourierPolynomial::from_terms(
        n,
        v.into_iter()
            .enumerate()
            .map(|(s, c)| (s as u64, c * scale)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmParams {
    /// Target L∞ accuracy θ ∈ (0,1].
    pub theta: f64,
    pub delta: f64,
    /// Caller's bound on L₂ of the queried function.
    pub l2_bound: f64,
    /// Maximum number of oracle queries this call may spend.
    pub max_queries: u64,
    pub seed: u64,
}

impl KmParams {
    pub fn new(theta: f64, delta: f64, l2_bound: f64, seed: u64) -> Self {
        KmParams {
            theta,
            delta,
            l2_bound,
            max_queries: DEFAULT_QUERY_BUDGET,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return input(format!("theta must lie in (0,1], got {}", self.theta));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return input(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.l2_bound > 0.0 && self.l2_bound.is_finite()) {
            return input("l2_bound must be positive and finite");
        }
        Ok(())
    }
}

/// Inner and outer sample counts for the bucket-weight estimator at one level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelPlan {
    pub inner: usize,
    pub outer: usize,
}

/// Sample plan for estimating every bucket weight to within θ²/2 with
/// failure probability `delta` each.
pub fn weight_plan(theta: f64, l2_bound: f64, delta: f64) -> LevelPlan {
    let s2 = l2_bound * l2_bound;
    let z2 = 2.0 * (2.0 / delta).ln();
    let t = theta * theta / 2.0;
    let mut best = LevelPlan { inner: 2, outer: 0 };
    let mut best_cost = f64::INFINITY;
    for b in 2..=1000usize {
        let bf = b as f64;
        let v = theta * theta * s2 * (1.0 + 4.0 / bf) + 2.0 * s2 * s2 / (bf * bf);
        let outer = (z2 * v / (t * t)).ceil().max(1.0);
        let cost = bf * outer;
        if cost < best_cost {
            best_cost = cost;
            best = LevelPlan {
                inner: b,
                outer: outer as usize,
            };
        }
    }
    best
}

/// Uniform samples needed to estimate each coefficient to within θ/4.
pub fn coefficient_samples(theta: f64, l2_bound: f64, delta: f64) -> usize {
    let z2 = 2.0 * (2.0 / delta).ln();
    let t = theta / 4.0;
    (z2 * l2_bound * l2_bound / (t * t)).ceil().max(1.0) as usize
}

struct Budget {
    start: u64,
    limit: u64,
}

impl Budget {
    fn reserve<O: QueryOracle + ?Sized>(&self, oracle: &O, requested: u64) -> Result<()> {
        let used = oracle.query_count() - self.start;
        if used.saturating_add(requested) > self.limit {
            return Err(Error::Budget {
                used,
                requested,
                limit: self.limit,
            });
        }
        Ok(())
    }
}

/// Kushilevitz–Mansour: find all coefficients of magnitude ≥ θ and
/// estimate them to within θ/4, so L∞(f̂ − Q) ≤ θ with probability ≥ 1−δ.
pub fn km<O: QueryOracle + ?Sized>(oracle: &mut O, params: &KmParams) -> Result<SparseFourierPolynomial> {
    params.validate()?;
    let n = oracle.dimension();
    if n == 0 || n > MAX_DIMENSION {
        return input(format!("oracle dimension must lie in 1..={MAX_DIMENSION}"));
    }
    let budget = Budget {
        start: oracle.query_count(),
        limit: params.max_queries,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let theta = params.theta;
    let prune = theta * theta / 2.0;

    // Prefixes over variables 0..j; the root (j = 0) always survives.
    let mut survivors: Vec<u64> = vec![0];
    for j in 1..n {
        let bit = 1u64 << (j - 1);
        let candidates: Vec<u64> = survivors.iter().flat_map(|&a| [a, a | bit]).collect();
        let per_node = params.delta / (4.0 * n as f64 * candidates.len() as f64);
        let plan = weight_plan(theta, params.l2_bound, per_node);
        budget.reserve(oracle, (plan.inner * plan.outer) as u64)?;

        let prefix_mask = full_mask(j);
        let suffix_mask = full_mask(n) & !prefix_mask;
        let c = candidates.len();
        let mut sums = vec![0.0; c];
        let mut sq = vec![0.0; c];
        let mut weights = vec![0.0; c];
        let mut values = Vec::with_capacity(plan.inner);
        let inner = plan.inner as f64;
        for _ in 0..plan.outer {
            let z = rng.random::<u64>() & suffix_mask;
            values.clear();
            for _ in 0..plan.inner {
                let x = rng.random::<u64>() & prefix_mask;
                values.push((x, oracle.query(x | z)));
            }
            sums.iter_mut().for_each(|s| *s = 0.0);
            sq.iter_mut().for_each(|s| *s = 0.0);
            for &(x, fx) in &values {
                for (k, &a) in candidates.iter().enumerate() {
                    let v = fx * chi(a, x);
                    sums[k] += v;
                    sq[k] += v * v;
                }
            }
            for k in 0..c {
                weights[k] += (sums[k] * sums[k] - sq[k]) / (inner * (inner - 1.0));
            }
        }
        let outer = plan.outer as f64;
        survivors = candidates
            .into_iter()
            .zip(&weights)
            .filter(|(_, &w)| w / outer >= prune)
            .map(|(a, _)| a)
            .collect();
        if survivors.is_empty() {
            return SparseFourierPolynomial::zero(n);
        }
    }

    let bit = 1u64 << (n - 1);
    let candidates: Vec<u64> = survivors.iter().flat_map(|&a| [a, a | bit]).collect();
    let per_node = params.delta / (4.0 * n as f64 * candidates.len() as f64);
    let samples = coefficient_samples(theta, params.l2_bound, per_node);
    budget.reserve(oracle, samples as u64)?;
    let mut est = vec![0.0; candidates.len()];
    let domain = full_mask(n);
    for _ in 0..samples {
        let x = rng.random::<u64>() & domain;
        let fx = oracle.query(x);
        for (e, &s) in est.iter_mut().zip(&candidates) {
            *e += fx * chi(s, x);
        }
    }
    let inv = 1.0 / samples as f64;
    SparseFourierPolynomial::from_terms(
        n,
        candidates
            .into_iter()
            .zip(est)
            .map(|(s, e)| (s, e * inv))
            .filter(|&(_, c)| c.abs() >= theta / 2.0),
    )
}

/// KM run against a polynomial whose coefficients are known exactly: with
/// exact bucket weights the search keeps precisely the terms with
/// P̂(S)² ≥ θ²/2, and no oracle queries are needed.
pub fn km_exact(p: &SparseFourierPolynomial, theta: f64) -> SparseFourierPolynomial {
    let cut = theta / std::f64::consts::SQRT_2;
    SparseFourierPolynomial {
        n: p.n,
        coeffs: p
            .coeffs
            .iter()
            .filter(|(_, c)| c.abs() >= cut)
            .map(|(&s, &c)| (s, c))
            .collect(),
    }
}

/// Euclidean projection of the coefficient vector onto {L1 ≤ k}.
pub fn proj_l1(p: &SparseFourierPolynomial, k: f64) -> Result<SparseFourierPolynomial> {
    if !(k >= 0.0 && k.is_finite()) {
        return input(format!("L1 radius must be non-negative, got {k}"));
    }
    if p.l1() <= k {
        return Ok(p.clone());
    }
    let tau = soft_threshold_level(p.coeffs.values().map(|c| c.abs()).collect(), k);
    let mut out = SparseFourierPolynomial {
        n: p.n,
        coeffs: p
            .coeffs
            .iter()
            .map(|(&s, &c)| (s, c.signum() * (c.abs() - tau).max(0.0)))
            .collect(),
    };
    out.prune();
    // Guard against the last ulp of rounding in the threshold.
    let l1 = out.l1();
    if l1 > k {
        let f = k / l1;
        out.coeffs.values_mut().for_each(|c| *c *= f);
    }
    Ok(out)
}

/// τ with Σ max(|cᵢ| − τ, 0) = k, for Σ|cᵢ| > k.
fn soft_threshold_level(mut mags: Vec<f64>, k: f64) -> f64 {
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - k) / (i + 1) as f64;
        if m > t {
            tau = t;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: usize, t: &[(u64, f64)]) -> SparseFourierPolynomial {
        SparseFourierPolynomial::from_terms(n, t.iter().copied()).unwrap()
    }

    #[test]
    fn norms() {
        let p = poly(3, &[(0, 3.0), (1, -4.0)]);
        assert_eq!(p.l1(), 7.0);
        assert_eq!(p.l2(), 5.0);
        assert_eq!(p.linf(), 4.0);
        let q = poly(3, &[(0b101, 1.0)]);
        assert_eq!((q.l1(), q.l2(), q.linf()), (1.0, 1.0, 1.0));
        assert_eq!(q.tail_mass(2), 0.0);
        assert_eq!(q.tail_mass(1), 1.0);
    }

    #[test]
    fn eval_basics() {
        let c = poly(2, &[(0, 0.7)]);
        assert_eq!(c.eval(&[1.0, -1.0]).unwrap(), 0.7);
        let x1 = poly(2, &[(1, 1.0)]);
        assert_eq!(x1.eval(&[-1.0, 1.0]).unwrap(), -1.0);
        assert!(x1.eval(&[0.5, 1.0]).is_err());
    }

    #[test]
    fn prunes_tiny_coefficients() {
        let p = poly(2, &[(1, 1e-16), (2, 0.5)]);
        assert_eq!(p.support_size(), 1);
    }

    #[test]
    fn brute_fourier_of_parity_and_constant() {
        let mut o = MembershipOracle::new(5, |x| chi(0b10110, x)).unwrap();
        let p = brute_fourier(&mut o).unwrap();
        assert_eq!(p, poly(5, &[(0b10110, 1.0)]));
        assert_eq!(o.query_count(), 32);
        let mut one = MembershipOracle::new(4, |_| 1.0).unwrap();
        assert_eq!(brute_fourier(&mut one).unwrap(), poly(4, &[(0, 1.0)]));
        let mut big = MembershipOracle::new(15, |_| 1.0).unwrap();
        assert!(matches!(brute_fourier(&mut big), Err(Error::Capacity(_))));
    }

    #[test]
    fn km_on_zero_function() {
        let mut o = MembershipOracle::new(6, |_| 0.0).unwrap();
        let q = km(&mut o, &KmParams::new(0.2, 0.1, 1.0, 1)).unwrap();
        assert!(q.is_zero());
    }

    #[test]
    fn km_finds_parity() {
        let mut o = MembershipOracle::new(8, |x| chi(0b1001_0010, x)).unwrap();
        let q = km(&mut o, &KmParams::new(0.2, 0.05, 1.0, 3)).unwrap();
        assert_eq!(q.support_size(), 1);
        assert!((q.get(0b1001_0010) - 1.0).abs() <= 0.2);
    }

    #[test]
    fn km_is_deterministic() {
        let target = poly(6, &[(0b11, 0.6), (0b100, -0.5)]);
        let run = || {
            let mut o = MembershipOracle::new(6, |x| target.eval_mask(x)).unwrap();
            km(&mut o, &KmParams::new(0.3, 0.1, 1.0, 99)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn km_respects_budget() {
        let mut o = MembershipOracle::new(8, |x| chi(1, x)).unwrap();
        let mut params = KmParams::new(0.1, 0.05, 1.0, 0);
        params.max_queries = 1000;
        assert!(matches!(km(&mut o, &params), Err(Error::Budget { .. })));
        assert!(o.query_count() <= 1000);
    }

    #[test]
    fn km_exact_keeps_heavy_terms() {
        let p = poly(4, &[(1, 0.5), (2, 0.05), (3, -0.2)]);
        let q = km_exact(&p, 0.2);
        assert_eq!(q, poly(4, &[(1, 0.5), (3, -0.2)]));
    }

    #[test]
    fn projection_examples() {
        let p = poly(2, &[(0, 2.0)]);
        assert_eq!(proj_l1(&p, 1.0).unwrap(), poly(2, &[(0, 1.0)]));
        let q = poly(2, &[(0, 0.8), (1, 0.6)]);
        let r = proj_l1(&q, 1.0).unwrap();
        assert!((r.get(0) - 0.6).abs() < 1e-12);
        assert!((r.get(1) - 0.4).abs() < 1e-12);
        let inside = poly(2, &[(0, 0.3), (3, -0.2)]);
        assert_eq!(proj_l1(&inside, 1.0).unwrap(), inside);
    }

    #[test]
    fn serde_as_term_list() {
        let p = poly(3, &[(0b101, -0.25), (0, 0.5)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":3,"terms":[[0,0.5],[5,-0.25]]}"#);
        let back: SparseFourierPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn mask_point_round_trip() {
        let x = mask_to_point(0b0110, 4);
        assert_eq!(x, vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(point_to_mask(&x).unwrap(), 0b0110);
    }
}

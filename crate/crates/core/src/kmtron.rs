//! KMtron: projected functional gradient descent driven by KM estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::fourier::{
    full_mask, km, km_exact, proj_l1, KmParams, QueryOracle, SparseFourierPolynomial,
    DEFAULT_QUERY_BUDGET,
};
use crate::link::{LinkFunction, Monotonicity};

pub const MAX_ORACLE_DIMENSION: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMtronConfig {
    /// L1 radius of the projection set.
    pub k: f64,
    pub lipschitz: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub theta: f64,
    pub eval_sample: usize,
    pub delta: f64,
    /// C′ in θ ≤ C′ε⁴/(L⁴k³).
    pub theta_constant: f64,
    /// L2 bound handed to each KM call; `None` derives it from the
    /// estimated loss of the previous iterate.
    pub l2_bound: Option<f64>,
    /// Total oracle queries allowed across the whole run.
    pub max_queries: u64,
    pub seed: u64,
}

impl KMtronConfig {
    /// λ = ε/2L, T = ⌈2k²L²/ε²⌉, θ = C′ε⁴/(L⁴k³) with C′ = 1e-2.
    pub fn theory(k: f64, lipschitz: f64, epsilon: f64, delta: f64, seed: u64) -> Result<Self> {
        let theta_constant = 1e-2;
        let learning_rate = epsilon / (2.0 * lipschitz);
        let iterations = (2.0 * k * k * lipschitz * lipschitz / (epsilon * epsilon)).ceil();
        let theta = if k > 0.0 {
            (theta_constant * epsilon.powi(4) / (lipschitz.powi(4) * k.powi(3))).min(1.0)
        } else {
            1.0
        };
        let cfg = KMtronConfig {
            k,
            lipschitz,
            epsilon,
            learning_rate,
            iterations: (iterations as usize).max(1),
            theta,
            eval_sample: 4000,
            delta,
            theta_constant,
            l2_bound: Some(1.0),
            max_queries: DEFAULT_QUERY_BUDGET,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// C′ε⁴/(L⁴k³).
    pub fn theta_bound(&self) -> f64 {
        self.theta_constant * self.epsilon.powi(4) / (self.lipschitz.powi(4) * self.k.powi(3))
    }

    pub fn meets_theta_bound(&self) -> bool {
        self.theta <= self.theta_bound()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return input("k must be non-negative");
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return input("Lipschitz constant must be positive");
        }
        if !(self.epsilon > 0.0) {
            return input("epsilon must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return input(format!("learning rate must lie in (0,1], got {}", self.learning_rate));
        }
        if self.iterations == 0 {
            return input("KMtron needs at least one iteration");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return input(format!("theta must lie in (0,1], got {}", self.theta));
        }
        if self.eval_sample == 0 {
            return input("eval_sample must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return input("delta must lie in (0,1)");
        }
        if let Some(b) = self.l2_bound {
            if !(b > 0.0 && b.is_finite()) {
                return input("l2_bound must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub estimated_loss: f64,
    pub l1: f64,
    pub support_size: usize,
    pub cumulative_queries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMtronResult {
    pub hypothesis: SparseFourierPolynomial,
    /// 1-based index of the selected iterate.
    pub selected_iteration: usize,
    pub records: Vec<IterationRecord>,
    /// P_1, …, P_T.
    pub iterates: Vec<SparseFourierPolynomial>,
    pub queries: u64,
}

/// oracle(x) − u(P_prev(x)).
pub fn inner_query<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    u: &LinkFunction,
    prev: &SparseFourierPolynomial,
    x: u64,
) -> f64 {
    oracle.query(x) - u.eval(prev.eval_mask(x))
}

struct Residual<'a, O: ?Sized> {
    oracle: &'a mut O,
    link: &'a LinkFunction,
    prev: &'a SparseFourierPolynomial,
}

impl<O: QueryOracle + ?Sized> QueryOracle for Residual<'_, O> {
    fn dimension(&self) -> usize {
        self.oracle.dimension()
    }
    fn query(&mut self, x: u64) -> f64 {
        inner_query(self.oracle, self.link, self.prev, x)
    }
    fn query_count(&self) -> u64 {
        self.oracle.query_count()
    }
}

fn estimated_loss(link: &LinkFunction, p: &SparseFourierPolynomial, eval: &[(u64, f64)]) -> f64 {
    eval.iter()
        .map(|&(x, y)| {
            let r = y - link.eval(p.eval_mask(x));
            r * r
        })
        .sum::<f64>()
        / eval.len() as f64
}

/// Run KMtron against query access to u∘P for a hidden P with L1(P) ≤ k.
pub fn kmtron<O: QueryOracle + ?Sized>(
    link: &LinkFunction,
    oracle: &mut O,
    cfg: &KMtronConfig,
) -> Result<KMtronResult> {
    cfg.validate()?;
    if link.direction() != Monotonicity::NonDecreasing {
        return input("KMtron requires a non-decreasing link");
    }
    let n = oracle.dimension();
    if n == 0 || n > MAX_ORACLE_DIMENSION {
        return input(format!("KMtron oracle dimension must lie in 1..={MAX_ORACLE_DIMENSION}"));
    }
    let start = oracle.query_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let eval_cost = cfg.eval_sample as u64;
    if eval_cost > cfg.max_queries {
        return Err(Error::Budget {
            used: 0,
            requested: eval_cost,
            limit: cfg.max_queries,
        });
    }
    let domain = full_mask(n);
    let eval: Vec<(u64, f64)> = (0..cfg.eval_sample)
        .map(|_| {
            let x = rng.random::<u64>() & domain;
            (x, oracle.query(x))
        })
        .collect();

    let per_call_delta = cfg.delta / cfg.iterations as f64;
    let mut prev = SparseFourierPolynomial::zero(n)?;
    let mut prev_loss = estimated_loss(link, &prev, &eval);
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut iterates = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let used = oracle.query_count() - start;
        let l2_bound = cfg
            .l2_bound
            .unwrap_or_else(|| adaptive_l2_bound(prev_loss, cfg.eval_sample));
        let params = KmParams {
            theta: cfg.theta,
            delta: per_call_delta,
            l2_bound,
            max_queries: cfg.max_queries - used,
            seed: rng.random(),
        };
        let step = {
            let mut residual = Residual {
                oracle: &mut *oracle,
                link,
                prev: &prev,
            };
            km(&mut residual, &params).map_err(|e| match e {
                Error::Budget { requested, .. } => Error::Budget {
                    used,
                    requested,
                    limit: cfg.max_queries,
                },
                other => other,
            })?
        };
        let moved = prev.add_scaled(&step, cfg.learning_rate)?;
        let next = km_exact(&proj_l1(&moved, cfg.k)?, cfg.theta);
        if next.terms().any(|(_, c)| !c.is_finite()) {
            return Err(Error::Divergence {
                iteration: t,
                detail: "non-finite Fourier coefficient".into(),
            });
        }
        let loss = estimated_loss(link, &next, &eval);
        records.push(IterationRecord {
            iteration: t,
            estimated_loss: loss,
            l1: next.l1(),
            support_size: next.support_size(),
            cumulative_queries: oracle.query_count() - start,
        });
        iterates.push(next.clone());
        prev = next;
        prev_loss = loss;
    }

    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if r.estimated_loss < records[best].estimated_loss {
            best = i;
        }
    }
    Ok(KMtronResult {
        hypothesis: iterates[best].clone(),
        selected_iteration: best + 1,
        records,
        iterates,
        queries: oracle.query_count() - start,
    })
}

/// Upper confidence bound on the residual's L2 norm from its estimated
/// mean square, capped at 1.
fn adaptive_l2_bound(loss: f64, samples: usize) -> f64 {
    let slack = 3.0 / (samples as f64).sqrt();
    (loss + slack).sqrt().min(1.0)
}

/// Boolean hypothesis 1[u(P(x)) ≥ 1/2].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnfHypothesis {
    pub poly: SparseFourierPolynomial,
    pub link: LinkFunction,
}

impl DnfHypothesis {
    pub fn predict_mask(&self, x: u64) -> bool {
        self.link.eval(self.poly.eval_mask(x)) >= 0.5
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.link.eval(self.poly.eval(x)?) >= 0.5)
    }
}

/// Learn an s-term DNF from membership queries returning f(x) ∈ {0,1}.
/// `cfg.k` is replaced by s and the link is the identity ramp.
pub fn learn_dnf<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    s: usize,
    cfg: &KMtronConfig,
) -> Result<(DnfHypothesis, KMtronResult)> {
    let link = LinkFunction::identity_ramp();
    let cfg = KMtronConfig {
        k: s as f64,
        lipschitz: 1.0,
        ..cfg.clone()
    };
    let result = kmtron(&link, oracle, &cfg)?;
    Ok((
        DnfHypothesis {
            poly: result.hypothesis.clone(),
            link,
        },
        result,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{chi, MembershipOracle};

    fn practical(k: f64, seed: u64) -> KMtronConfig {
        KMtronConfig {
            k,
            lipschitz: 1.0,
            epsilon: 0.05,
            learning_rate: 0.5,
            iterations: 6,
            theta: 0.2,
            eval_sample: 2000,
            delta: 0.05,
            theta_constant: 1e-2,
            l2_bound: Some(1.0),
            max_queries: DEFAULT_QUERY_BUDGET,
            seed,
        }
    }

    #[test]
    fn theory_defaults() {
        let c = KMtronConfig::theory(2.0, 1.0, 0.1, 0.05, 0).unwrap();
        assert_eq!(c.learning_rate, 0.05);
        assert_eq!(c.iterations, 800);
        assert!((c.theta - 1e-2 * 1e-4 / 8.0).abs() < 1e-18);
        assert!(c.meets_theta_bound());
    }

    #[test]
    fn inner_query_cases() {
        let u = LinkFunction::identity_ramp();
        let zero = SparseFourierPolynomial::zero(4).unwrap();
        let mut o = MembershipOracle::new(4, |x| if x & 1 == 0 { 0.7 } else { 0.2 }).unwrap();
        assert_eq!(inner_query(&mut o, &u, &zero, 0), 0.7);
        let p = SparseFourierPolynomial::from_terms(4, [(0, 0.45), (1, 0.25)]).unwrap();
        let mut same = MembershipOracle::new(4, |x| u.eval(p.eval_mask(x))).unwrap();
        for x in 0..16 {
            assert_eq!(inner_query(&mut same, &u, &p, x), 0.0);
        }
    }

    #[test]
    fn constant_zero_target_stays_zero() {
        let u = LinkFunction::identity_ramp();
        let mut o = MembershipOracle::new(6, |_| 0.0).unwrap();
        let r = kmtron(&u, &mut o, &practical(1.0, 2)).unwrap();
        assert!(r.hypothesis.is_zero());
    }

    #[test]
    fn single_character_target() {
        let u = LinkFunction::identity_ramp();
        let mut o = MembershipOracle::new(8, |x| u.eval(chi(0b100, x))).unwrap();
        let mut cfg = practical(1.0, 5);
        cfg.iterations = 4;
        cfg.learning_rate = 1.0;
        let r = kmtron(&u, &mut o, &cfg).unwrap();
        let exact: f64 = (0..256u64)
            .map(|x| {
                let d = u.eval(chi(0b100, x)) - u.eval(r.hypothesis.eval_mask(x));
                d * d
            })
            .sum::<f64>()
            / 256.0;
        assert!(exact <= 0.05, "loss {exact}");
        for rec in &r.records {
            assert!(rec.l1 <= cfg.k * (1.0 + 1e-9));
        }
    }

    #[test]
    fn empty_dnf_gives_false() {
        let mut o = MembershipOracle::new(8, |_| 0.0).unwrap();
        let (h, _) = learn_dnf(&mut o, 0, &practical(0.0, 1)).unwrap();
        assert!((0..256).all(|x| !h.predict_mask(x)));
    }

    #[test]
    fn budget_is_enforced() {
        let u = LinkFunction::identity_ramp();
        let mut o = MembershipOracle::new(8, |x| u.eval(chi(1, x))).unwrap();
        let mut cfg = practical(1.0, 0);
        cfg.max_queries = 50_000;
        assert!(matches!(kmtron(&u, &mut o, &cfg), Err(Error::Budget { .. })));
        assert!(o.query_count() <= 50_000);
    }
}

use alphatron_core::kernels::{explicit_feature_map, multinomial_kernel};
use alphatron_core::polyapprox::{
    chebyshev, coeff_l2_bound, embed_composition, eval_poly, linear_combination_certificate,
    power_coeff_bound, relu, relu_approx, sigmoid, sigmoid_approx, sign_approx,
    zero_one_sign_approx, ChebyshevSeries, UnivariatePolynomial,
};
use alphatron_core::Error;
use proptest::prelude::*;

fn dense_grid(points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| -1.0 + 2.0 * (i as f64 + 0.5) / points as f64)
}

#[test]
fn chebyshev_small_cases() {
    assert_eq!(chebyshev(0).unwrap().coeffs(), &[1.0]);
    assert_eq!(chebyshev(1).unwrap().coeffs(), &[0.0, 1.0]);
    assert_eq!(chebyshev(2).unwrap().coeffs(), &[-1.0, 0.0, 2.0]);
    assert!(matches!(chebyshev(65), Err(Error::Capacity(_))));
}

#[test]
fn chebyshev_cosine_identity() {
    let t5 = chebyshev(5).unwrap();
    for k in 0..50 {
        let theta = k as f64 * 0.0637;
        assert!((t5.eval(theta.cos()) - (5.0 * theta).cos()).abs() < 1e-12);
    }
}

fn binomial(n: usize, k: usize) -> i128 {
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

/// Closed form: coefficient of t^{r-2k} in T_r is
/// (-1)^k 2^{r-2k-1} (C(r-k,k) + C(r-k-1,k-1)), exact in i128.
fn chebyshev_closed_form(r: usize) -> Vec<i128> {
    let mut c = vec![0i128; r + 1];
    if r == 0 {
        c[0] = 1;
        return c;
    }
    for k in 0..=r / 2 {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let sum = binomial(r - k, k) + if k == 0 { 0 } else { binomial(r - k - 1, k - 1) };
        c[r - 2 * k] = sign * sum * (1i128 << (r - 2 * k)) / 2;
    }
    c
}

#[test]
fn chebyshev_matches_closed_form() {
    for r in 0..=30 {
        let t = chebyshev(r).unwrap();
        let exact = chebyshev_closed_form(r);
        for (a, b) in t.coeffs().iter().zip(&exact) {
            assert_eq!(*a, *b as f64, "r={r}");
        }
        for x in dense_grid(37) {
            assert!(t.eval(x).abs() <= 1.0 + 1e-6, "r={r} x={x}");
        }
    }
}

#[test]
fn chebyshev_coefficient_growth() {
    // The 2^r bound holds through r = 8 and first fails at T_9 (576 > 512).
    // The true growth rate is (1+√2)^r: Σ|coeff| = |T_r(i)| = ((1+√2)^r + (1-√2)^r)/2.
    for r in 0..=30 {
        let max = chebyshev_closed_form(r).iter().map(|c| c.abs()).max().unwrap();
        let l1: i128 = chebyshev_closed_form(r).iter().map(|c| c.abs()).sum();
        assert!((max as f64) <= (1.0 + 2f64.sqrt()).powi(r as i32), "r={r}");
        let s2 = 2f64.sqrt();
        let expected = ((1.0 + s2).powi(r as i32) + (1.0 - s2).powi(r as i32)) / 2.0;
        assert!((l1 as f64 - expected).abs() <= 1e-6 * expected, "r={r}");
        if r <= 8 {
            assert!(max <= 1 << r, "r={r}");
        }
        assert_eq!(chebyshev(r).unwrap().max_abs_coeff(), max as f64);
    }
    assert_eq!(chebyshev_closed_form(9)[7], -576);
}

#[test]
fn sign_approx_is_odd_and_certified() {
    for (rho, tau) in [(0.1, 0.1), (0.25, 0.05), (0.5, 0.2)] {
        let a = sign_approx(rho, tau).unwrap();
        for (i, c) in a.poly.coeffs().iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(*c, 0.0, "even coefficient {i} at ρ={rho}");
            }
        }
        // Fresh grid at a different resolution than the construction audit.
        for t in dense_grid(2 * a.certificate.audit_points + 7) {
            let v = a.eval(t);
            assert!(v.abs() < 1.0 + tau, "ρ={rho} t={t} v={v}");
            if t.abs() >= rho {
                assert!((v - t.signum()).abs() < tau, "ρ={rho} t={t} v={v}");
            }
        }
        for t in [rho, -rho, 1.0, -1.0] {
            assert!((a.eval(t) - t.signum()).abs() < tau);
        }
        assert_eq!(a.certificate.degree % 2, 1);
        assert!(a.certificate.sup_bound < 1.0 + tau);
    }
}

#[test]
fn sign_degree_grows_as_margin_shrinks() {
    let wide = sign_approx(0.4, 0.1).unwrap().certificate.degree;
    let narrow = sign_approx(0.1, 0.1).unwrap().certificate.degree;
    assert!(narrow > wide);
}

#[test]
fn zero_one_at_margin() {
    let rho = 0.2;
    let tau = 0.1;
    let a = zero_one_sign_approx(rho, tau).unwrap();
    assert!((a.eval(rho) - 1.0).abs() < tau / 2.0);
    assert!(a.eval(-rho).abs() < tau / 2.0);
    for t in dense_grid(3001) {
        let v = a.eval(t);
        if t.abs() >= rho {
            let step = if t > 0.0 { 1.0 } else { 0.0 };
            assert!((v - step).abs() < tau / 2.0);
        }
    }
}

#[test]
fn smooth_activations() {
    let s = sigmoid_approx(1e-3).unwrap();
    let r = relu_approx(0.05).unwrap();
    for t in dense_grid(4001) {
        assert!((s.eval(t) - sigmoid(t)).abs() <= 1e-3);
        assert!((r.eval(t) - relu(t)).abs() <= 0.05);
    }
    assert!(matches!(relu_approx(0.01), Err(Error::Capacity(_))));
    assert!(matches!(sigmoid_approx(0.0), Err(Error::Input(_))));
}

#[test]
fn invalid_margin_or_tolerance() {
    assert!(matches!(sign_approx(0.0, 0.1), Err(Error::Input(_))));
    assert!(matches!(sign_approx(0.1, 1.0), Err(Error::Input(_))));
}

#[test]
fn coefficient_bound_examples() {
    assert!((coeff_l2_bound(1.0, 0).unwrap() - 1.0).abs() < 1e-15);
    let e = std::f64::consts::E;
    assert!((coeff_l2_bound(1.0, 1).unwrap() - 4.0 * e * 2f64.sqrt()).abs() < 1e-12);
    assert!(matches!(coeff_l2_bound(1.0, 41), Err(Error::Capacity(_))));
    assert_eq!(power_coeff_bound(1.0, 1, 3).unwrap(), 1.0);
}

#[test]
fn coefficient_bound_holds_for_chebyshev() {
    // T_d is bounded by 1 on [-1,1] with large coefficients: a stress case.
    for d in 0..=20 {
        let t = chebyshev(d).unwrap();
        assert!(t.coeff_l2() <= coeff_l2_bound(1.0, d).unwrap());
    }
}

#[test]
fn embed_examples() {
    let identity = UnivariatePolynomial::new(vec![0.0, 1.0]).unwrap();
    let e = embed_composition(&identity, &[1.0, 0.0]).unwrap();
    assert_eq!(e, vec![0.0, 1.0, 0.0]);
    let constant = UnivariatePolynomial::new(vec![0.5]).unwrap();
    assert_eq!(embed_composition(&constant, &[0.3, 0.4]).unwrap(), vec![0.5]);
    assert!(matches!(
        embed_composition(&identity, &[1.0, 1.0]),
        Err(Error::Input(_))
    ));
}

#[test]
fn linear_combination_of_copies() {
    let a = sign_approx(0.3, 0.1).unwrap().certificate;
    let k = 4;
    let parts: Vec<_> = (0..k).map(|_| (1.0, a.clone())).collect();
    let c = linear_combination_certificate(&parts).unwrap();
    assert!((c.tol - k as f64 * a.tol).abs() < 1e-12);
    assert!((c.coeff_l2 - k as f64 * a.coeff_l2).abs() < 1e-9 * a.coeff_l2);
    assert_eq!(c.degree, a.degree);
    assert!(linear_combination_certificate(&[]).is_err());
}

fn poly() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 1..12)
}

proptest! {
    #[test]
    fn horner_matches_naive_sum(c in poly(), t in -1.0f64..1.0) {
        let p = UnivariatePolynomial::new(c.clone()).unwrap();
        let naive: f64 = c.iter().enumerate().map(|(i, b)| b * t.powi(i as i32)).sum();
        prop_assert!((eval_poly(&p, t) - naive).abs() < 1e-12);
        prop_assert!((p.eval(t) - naive).abs() < 1e-12);
    }

    #[test]
    fn product_and_power(a in poly(), b in poly(), t in -1.0f64..1.0, r in 0u32..4) {
        let p = UnivariatePolynomial::new(a).unwrap();
        let q = UnivariatePolynomial::new(b).unwrap();
        let pq = p.mul(&q).eval(t);
        prop_assert!((pq - p.eval(t) * q.eval(t)).abs() < 1e-9 * (1.0 + pq.abs()));
        let pr = p.pow(r).eval(t);
        let direct = p.eval(t).powi(r as i32);
        prop_assert!((pr - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn chebyshev_series_to_monomial(c in prop::collection::vec(-1.0f64..1.0, 1..16), t in -1.0f64..1.0) {
        let s = ChebyshevSeries::new(c);
        let m = s.to_monomial();
        prop_assert!((s.eval(t) - m.eval(t)).abs() < 1e-9);
    }

    #[test]
    fn power_bound_dominates(
        tail in prop::collection::vec(-1.0f64..1.0, 1..5),
        r in 1u32..4,
    ) {
        let mut c = vec![0.0];
        c.extend(tail);
        let p = UnivariatePolynomial::new(c).unwrap();
        prop_assume!(p.degree() >= 1);
        let m = p.max_abs_coeff();
        let bound = power_coeff_bound(m, p.degree(), r).unwrap();
        prop_assert!(p.pow(r).coeff_l2() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn embedding_reproduces_composition(
        c in prop::collection::vec(-1.0f64..1.0, 1..5),
        w in prop::collection::vec(-1.0f64..1.0, 1..4),
        x in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let n = w.len();
        let scale = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let w: Vec<f64> = w.iter().map(|v| v / scale).collect();
        let x = &x[..n];
        let p = UnivariatePolynomial::new(c.clone()).unwrap();
        let d = p.degree();
        let pw = embed_composition(&p, &w).unwrap();
        let psi = explicit_feature_map(x, d).unwrap();
        let ip: f64 = pw.iter().zip(&psi).map(|(a, b)| a * b).sum();
        let wx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        prop_assert!((ip - p.eval(wx)).abs() < 1e-10);
        let wn2: f64 = w.iter().map(|v| v * v).sum();
        let expected: f64 = p.coeffs().iter().enumerate().map(|(j, b)| b * b * wn2.powi(j as i32)).sum();
        let got: f64 = pw.iter().map(|v| v * v).sum();
        prop_assert!((got - expected).abs() < 1e-10);
        prop_assert!(got.sqrt() <= p.coeff_l2() + 1e-9);
        // Consistency with the kernel itself: ⟨ψ(x), ψ(x)⟩ = K(x, x).
        let k = multinomial_kernel(x, x, d, false).unwrap();
        let kk: f64 = psi.iter().map(|v| v * v).sum();
        prop_assert!((k - kk).abs() < 1e-10 * (1.0 + k));
    }

    #[test]
    fn degree_bound_dominates(c in prop::collection::vec(-1.0f64..1.0, 1..10)) {
        let p = UnivariatePolynomial::new(c).unwrap();
        let sup = dense_grid(2001).chain([-1.0, 1.0]).map(|t| p.eval(t).abs()).fold(0.0, f64::max);
        prop_assert!(p.coeff_l2() <= coeff_l2_bound(sup, p.degree()).unwrap() * (1.0 + 1e-9));
    }
}

use alphatron_core::kernels::{
    cross_gram, explicit_feature_map, gram, kernel_row, mean_map_kernel, monomial_basis_map,
    multinomial_kernel, subsets_up_to, KernelSpec, KernelSystem, Sample,
};
use alphatron_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / s).collect()
}

#[test]
fn multinomial_examples() {
    let e = [0.6, 0.8];
    assert!(close(multinomial_kernel(&e, &e, 3, false).unwrap(), 4.0, 1e-15));
    assert_eq!(multinomial_kernel(&[1.0, 0.0], &[0.0, 1.0], 5, false).unwrap(), 1.0);
    let h = [0.5, 0.0];
    assert!(close(multinomial_kernel(&h, &h, 2, false).unwrap(), 1.3125, 1e-15));
    assert!(matches!(
        multinomial_kernel(&[1.0], &[1.0, 2.0], 2, false),
        Err(Error::Input(_))
    ));
}

#[test]
fn feature_map_examples() {
    assert_eq!(explicit_feature_map(&[2.0], 2).unwrap(), vec![1.0, 2.0, 4.0]);
    assert_eq!(explicit_feature_map(&[1.0, 0.0], 1).unwrap(), vec![1.0, 1.0, 0.0]);
    assert!(matches!(
        explicit_feature_map(&[0.1; 100], 4),
        Err(Error::Capacity(_))
    ));
}

#[test]
fn monomial_map_examples() {
    assert_eq!(monomial_basis_map(&[1.0, 1.0], 1).unwrap(), vec![1.0, 1.0, 1.0]);
    let m = monomial_basis_map(&[-1.0, 1.0], 2).unwrap();
    let subsets = subsets_up_to(2, 2);
    let expected: Vec<f64> = subsets
        .iter()
        .map(|&s| match s {
            0 => 1.0,
            1 => -1.0,
            2 => 1.0,
            3 => -1.0,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(m, expected);
    assert!(matches!(monomial_basis_map(&[0.5, 1.0], 1), Err(Error::Input(_))));
}

#[test]
fn mean_map_examples() {
    let base = KernelSpec::multinomial(3, true);
    let x = vec![0.6, 0.8];
    let single = mean_map_kernel(std::slice::from_ref(&x), std::slice::from_ref(&x), &base).unwrap();
    let k = base.eval(&Sample::Point(x.clone()), &Sample::Point(x.clone())).unwrap();
    assert!(close(single, k, 1e-15));
    let dup = mean_map_kernel(&[x.clone(), x.clone()], std::slice::from_ref(&x), &base).unwrap();
    assert!(close(dup, k, 1e-15));
    assert!(matches!(mean_map_kernel(&[], &[x], &base), Err(Error::Input(_))));
}

#[test]
fn gram_examples() {
    let spec = KernelSpec::multinomial(3, true);
    let x = Sample::Point(vec![1.0, 0.0]);
    let g = gram(std::slice::from_ref(&x), &spec).unwrap();
    assert_eq!((g.rows(), g.cols()), (1, 1));
    assert!(close(g.get(0, 0), spec.eval(&x, &x).unwrap(), 1e-15));
    let g = gram(&[x, Sample::Point(vec![0.0, 1.0])], &spec).unwrap();
    assert!(close(g.get(0, 1), 0.25, 1e-15));
    assert!(close(g.get(0, 0), 1.0, 1e-15));
}

#[test]
fn mean_map_of_mean_map_is_rejected() {
    let inner = KernelSpec::mean_map(KernelSpec::multinomial(2, true)).unwrap();
    assert!(KernelSpec::mean_map(inner).is_err());
}

#[test]
fn spec_serializes() {
    for spec in [
        KernelSpec::multinomial(4, true),
        KernelSpec::monomial(2, 7, true),
        KernelSpec::mean_map(KernelSpec::multinomial(3, false)).unwrap(),
    ] {
        let text = serde_json::to_string(&spec).unwrap();
        let back: KernelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}

fn vec_in(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
    (1usize..=6, 0usize..=4).prop_flat_map(|(n, d)| (vec_in(n), vec_in(n), Just(d)))
}

fn boolean_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1.0 } else { -1.0 }), n)
}

proptest! {
    #[test]
    fn feature_identity((x, y, d) in pair()) {
        let k = multinomial_kernel(&x, &y, d, false).unwrap();
        let px = explicit_feature_map(&x, d).unwrap();
        let py = explicit_feature_map(&y, d).unwrap();
        // Brute-force tuple enumeration of Σ_j (x·y)^j.
        let ip: f64 = px.iter().zip(&py).map(|(a, b)| a * b).sum();
        prop_assert!((k - ip).abs() <= 1e-9 * (1.0 + k.abs()));
    }

    #[test]
    fn normalized_diagonal_at_most_one((x, _y, d) in pair(), r in 0.01f64..1.0) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let u: Vec<f64> = unit(&x).iter().map(|v| v * r).collect();
        let k = multinomial_kernel(&u, &u, d, true).unwrap();
        prop_assert!(k <= 1.0 + 1e-12);
        let full = multinomial_kernel(&unit(&x), &unit(&x), d, true).unwrap();
        prop_assert!((full - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn monomial_map_matches_subset_sum(
        (x, y, d) in (1usize..=8, 0usize..=3)
            .prop_flat_map(|(n, d)| (boolean_point(n), boolean_point(n), Just(d)))
    ) {
        let n = x.len();
        let mx = monomial_basis_map(&x, d).unwrap();
        let my = monomial_basis_map(&y, d).unwrap();
        let ip: f64 = mx.iter().zip(&my).map(|(a, b)| a * b).sum();
        let mut direct = 0.0;
        for s in 0u64..(1 << n) {
            if s.count_ones() as usize > d {
                continue;
            }
            let chi = |p: &[f64]| (0..n).filter(|i| s >> i & 1 == 1).map(|i| p[i]).product::<f64>();
            direct += chi(&x) * chi(&y);
        }
        prop_assert!((ip - direct).abs() < 1e-12);
        let spec = KernelSpec::monomial(d, n, false);
        let k = spec.eval(&Sample::Point(x.clone()), &Sample::Point(y.clone())).unwrap();
        prop_assert!((k - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn mean_map_bounded_by_base(
        bags in prop::collection::vec(prop::collection::vec(vec_in(3), 1..5), 2..6),
        d in 0usize..5,
    ) {
        let bags: Vec<Vec<Vec<f64>>> = bags
            .into_iter()
            .map(|b| b.into_iter().filter(|x| x.iter().any(|v| *v != 0.0)).map(|x| unit(&x)).collect::<Vec<_>>())
            .filter(|b: &Vec<Vec<f64>>| !b.is_empty())
            .collect();
        let base = KernelSpec::multinomial(d, true);
        for s in &bags {
            for t in &bags {
                let k = mean_map_kernel(s, t, &base).unwrap();
                let mut brute = 0.0;
                for a in s {
                    for b in t {
                        brute += multinomial_kernel(a, b, d, true).unwrap();
                    }
                }
                brute /= (s.len() * t.len()) as f64;
                prop_assert!((k - brute).abs() < 1e-12);
                prop_assert!(k.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn gram_symmetric_and_psd(
        pts in prop::collection::vec(vec_in(4), 1..20),
        d in 0usize..5,
        normalized in prop::bool::ANY,
    ) {
        let samples: Vec<Sample> = pts.into_iter().map(Sample::Point).collect();
        let spec = KernelSpec::multinomial(d, normalized);
        let g = gram(&samples, &spec).unwrap();
        let m = samples.len();
        for i in 0..m {
            for j in 0..m {
                prop_assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        let dense = DMatrix::from_fn(m, m, |i, j| g.get(i, j));
        let min_eig = dense.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig >= -1e-8 * (1.0 + g.get(0, 0).abs()), "min eigenvalue {}", min_eig);
    }

    #[test]
    fn feature_vectors_reproduce_kernel(
        a in prop::collection::vec(vec_in(3), 1..4),
        b in prop::collection::vec(vec_in(3), 1..4),
        d in 0usize..4,
        normalized in prop::bool::ANY,
    ) {
        let base = KernelSpec::multinomial(d, normalized);
        let bag = KernelSpec::mean_map(base.clone()).unwrap();
        let check = |spec: &KernelSpec, s: &Sample, t: &Sample| -> bool {
            let fs = spec.feature_vector(s).unwrap();
            let ft = spec.feature_vector(t).unwrap();
            let ip: f64 = fs.iter().zip(&ft).map(|(x, y)| x * y).sum();
            let k = spec.eval(s, t).unwrap();
            (ip - k).abs() <= 1e-9 * (1.0 + k.abs())
        };
        prop_assert!(check(&base, &Sample::Point(a[0].clone()), &Sample::Point(b[0].clone())));
        prop_assert!(check(&bag, &Sample::Bag(a.clone()), &Sample::Bag(b.clone())));
    }

    #[test]
    fn kernel_system_matches_dense_products(
        train in prop::collection::vec(vec_in(2), 1..40),
        holdout in prop::collection::vec(vec_in(2), 1..10),
        alphas in prop::collection::vec(-1.0f64..1.0, 40),
        d in 1usize..3,
    ) {
        let train: Vec<Sample> = train.into_iter().map(Sample::Point).collect();
        let holdout: Vec<Sample> = holdout.into_iter().map(Sample::Point).collect();
        let spec = KernelSpec::multinomial(d, true);
        let alphas = &alphas[..train.len()];
        let mut sys = KernelSystem::build(&train, &holdout, &spec).unwrap();
        let mut t_out = vec![0.0; train.len()];
        let mut h_out = vec![0.0; holdout.len()];
        sys.apply(alphas, &mut t_out, &mut h_out);
        let g = gram(&train, &spec).unwrap().mul_vec(alphas);
        let h = cross_gram(&holdout, &train, &spec).unwrap().mul_vec(alphas);
        for (a, b) in t_out.iter().zip(&g).chain(h_out.iter().zip(&h)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let row = kernel_row(&holdout[0], &train, &spec).unwrap();
        let direct: f64 = row.iter().zip(alphas).map(|(k, a)| k * a).sum();
        prop_assert!((direct - h[0]).abs() < 1e-12);
    }
}

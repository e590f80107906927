//! Kernel functions on vectors and bags of vectors.
//!
//! The learners only ever touch kernels through [`KernelSpec`], which carries
//! its own normalization constant so a serialized hypothesis is
//! self-contained. Explicit feature maps are provided for verification at
//! small dimension (and for the hypercube low-degree path, which works
//! directly in the subset-indexed monomial basis).

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Largest explicit feature vector we are willing to materialize.
pub const FEATURE_CAPACITY: usize = 10_000_000;

/// A learner input: either a single vector or a bag of vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    Point(Vec<f64>),
    Bag(Vec<Vec<f64>>),
}

impl Sample {
    pub fn as_point(&self) -> Option<&[f64]> {
        match self {
            Sample::Point(x) => Some(x),
            Sample::Bag(_) => None,
        }
    }

    pub fn as_bag(&self) -> Option<&[Vec<f64>]> {
        match self {
            Sample::Bag(b) => Some(b),
            Sample::Point(_) => None,
        }
    }

    pub fn dimension(&self) -> Option<usize> {
        match self {
            Sample::Point(x) => Some(x.len()),
            Sample::Bag(b) => b.first().map(Vec::len),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Sample::Point(x) => check_vector(x),
            Sample::Bag(b) => {
                if b.is_empty() {
                    return input("empty bag");
                }
                let n = b[0].len();
                for x in b {
                    if x.len() != n {
                        return input("bag instances have differing dimensions");
                    }
                    check_vector(x)?;
                }
                Ok(())
            }
        }
    }
}

impl From<Vec<f64>> for Sample {
    fn from(x: Vec<f64>) -> Self {
        Sample::Point(x)
    }
}

fn check_vector(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return input("vector must have dimension >= 1");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return input("vector has non-finite component");
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Σ_{j=0}^{d} s^j with 0^0 = 1.
fn geometric_sum(s: f64, degree: usize) -> f64 {
    if degree <= 16 {
        let mut acc = 1.0;
        for _ in 0..degree {
            acc = acc * s + 1.0;
        }
        acc
    } else {
        // Neumaier-compensated sum of the explicit powers.
        let mut sum = 1.0;
        let mut comp = 0.0;
        let mut power = 1.0;
        for _ in 0..degree {
            power *= s;
            let t = sum + power;
            if sum.abs() >= power.abs() {
                comp += (sum - t) + power;
            } else {
                comp += (power - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

/// Σ_{j=0}^{d} e_j(z) where e_j is the j-th elementary symmetric polynomial,
/// i.e. Σ_{|S|≤d} Π_{i∈S} z_i.
fn elementary_symmetric_sum(z: impl Iterator<Item = f64>, degree: usize) -> f64 {
    let mut e = vec![0.0; degree + 1];
    e[0] = 1.0;
    for zi in z {
        for j in (1..=degree).rev() {
            e[j] += zi * e[j - 1];
        }
    }
    e.iter().sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Multinomial kernel MK_d(x, x2) = Σ_{j=0}^{d} (x·x2)^j, divided by d+1
/// when `normalized` (the unit-ball normalization).
pub fn multinomial_kernel(x: &[f64], x2: &[f64], degree: usize, normalized: bool) -> Result<f64> {
    if x.len() != x2.len() {
        return input(format!("dimension mismatch: {} vs {}", x.len(), x2.len()));
    }
    check_vector(x)?;
    check_vector(x2)?;
    let raw = geometric_sum(dot(x, x2), degree);
    Ok(if normalized {
        raw / (degree as f64 + 1.0)
    } else {
        raw
    })
}

/// Number of entries of ψ_d for input dimension n: 1 + n + … + n^d.
pub fn feature_dimension(n: usize, degree: usize) -> Option<usize> {
    let mut total: usize = 1;
    let mut level: usize = 1;
    for _ in 0..degree {
        level = level.checked_mul(n)?;
        total = total.checked_add(level)?;
    }
    Some(total)
}

/// Tuple-indexed multinomial feature map ψ_d(x).
///
/// Entries are grouped by tuple length j = 0..=d; within a group tuples
/// (k_1, …, k_j) are in lexicographic order with k_1 most significant.
pub fn explicit_feature_map(x: &[f64], degree: usize) -> Result<Vec<f64>> {
    check_vector(x)?;
    let n = x.len();
    match feature_dimension(n, degree) {
        Some(len) if len <= FEATURE_CAPACITY => {
            let mut out = Vec::with_capacity(len);
            out.push(1.0);
            let mut level = vec![1.0];
            for _ in 0..degree {
                let mut next = Vec::with_capacity(level.len() * n);
                for &prev in &level {
                    next.extend(x.iter().map(|&xk| prev * xk));
                }
                out.extend_from_slice(&next);
                level = next;
            }
            Ok(out)
        }
        _ => Err(Error::Capacity(format!(
            "feature map for n={n}, d={degree} exceeds {FEATURE_CAPACITY} entries"
        ))),
    }
}

/// All subsets of {0..n} of size ≤ d, ordered by size and then
/// lexicographically, as bitmasks.
pub fn subsets_up_to(n: usize, degree: usize) -> Vec<u64> {
    fn extend(start: usize, n: usize, remaining: usize, mask: u64, out: &mut Vec<u64>) {
        if remaining == 0 {
            out.push(mask);
            return;
        }
        for i in start..n {
            extend(i + 1, n, remaining - 1, mask | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    for size in 0..=degree.min(n) {
        extend(0, n, size, 0, &mut out);
    }
    out
}

fn is_boolean(x: &[f64]) -> bool {
    x.iter().all(|&v| v == 1.0 || v == -1.0)
}

/// Subset-indexed monomial features χ_S(x) = Π_{i∈S} x_i for all |S| ≤ d,
/// in the order of [`subsets_up_to`].
pub fn monomial_basis_map(x: &[f64], degree: usize) -> Result<Vec<f64>> {
    check_vector(x)?;
    if !is_boolean(x) {
        return input("monomial basis map needs a point of {-1,1}^n");
    }
    if x.len() > 63 {
        return Err(Error::Capacity("monomial basis limited to n <= 63".into()));
    }
    let count: f64 = (0..=degree.min(x.len())).map(|j| binomial(x.len(), j)).sum();
    if count > FEATURE_CAPACITY as f64 {
        return Err(Error::Capacity(format!(
            "monomial basis of size {count} exceeds capacity"
        )));
    }
    let neg_mask: u64 = x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < 0.0)
        .fold(0, |m, (i, _)| m | (1 << i));
    Ok(subsets_up_to(x.len(), degree)
        .into_iter()
        .map(|s| if (s & neg_mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 })
        .collect())
}

/// Which kernel a [`KernelSpec`] describes.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    /// MK_d on vectors with ‖x‖ ≤ declared_norm_bound.
    Multinomial {
        degree: usize,
        normalized: bool,
        declared_norm_bound: f64,
    },
    /// Σ_{|S|≤d} χ_S(x)χ_S(x′) on the n-dimensional hypercube.
    ExplicitMonomial {
        degree: usize,
        normalized: bool,
        dimension: usize,
    },
    /// Mean over all instance pairs of a base kernel.
    MeanMap { base: Box<KernelSpec> },
}

/// A kernel together with its normalization constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRecord", into = "KernelRecord")]
pub struct KernelSpec {
    kind: KernelKind,
    normalization_constant: f64,
}

impl KernelSpec {
    /// Multinomial kernel on the unit ball (constant d+1 when normalized).
    pub fn multinomial(degree: usize, normalized: bool) -> Self {
        Self::multinomial_with_bound(degree, normalized, 1.0).expect("unit bound is valid")
    }

    /// Multinomial kernel for inputs with ‖x‖ ≤ `bound`. The normalized
    /// kernel divides by Σ_j bound^{2j}, the largest attainable diagonal.
    pub fn multinomial_with_bound(degree: usize, normalized: bool, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return input("declared norm bound must be positive and finite");
        }
        let constant = if normalized {
            geometric_sum(bound * bound, degree)
        } else {
            1.0
        };
        Ok(KernelSpec {
            kind: KernelKind::Multinomial {
                degree,
                normalized,
                declared_norm_bound: bound,
            },
            normalization_constant: constant,
        })
    }

    /// Monomial (low-degree Fourier) kernel on {-1,1}^dimension.
    pub fn monomial(degree: usize, dimension: usize, normalized: bool) -> Self {
        let constant = if normalized {
            (0..=degree.min(dimension))
                .map(|j| binomial(dimension, j))
                .sum()
        } else {
            1.0
        };
        KernelSpec {
            kind: KernelKind::ExplicitMonomial {
                degree,
                normalized,
                dimension,
            },
            normalization_constant: constant,
        }
    }

    pub fn mean_map(base: KernelSpec) -> Result<Self> {
        if matches!(base.kind, KernelKind::MeanMap { .. }) {
            return input("mean map base kernel cannot itself be a mean map");
        }
        Ok(KernelSpec {
            kind: KernelKind::MeanMap {
                base: Box::new(base),
            },
            normalization_constant: 1.0,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn normalization_constant(&self) -> f64 {
        self.normalization_constant
    }

    pub fn is_bag_kernel(&self) -> bool {
        matches!(self.kind, KernelKind::MeanMap { .. })
    }

    /// Kernel value between two vectors, without validation.
    fn eval_points(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::Multinomial { degree, .. } => {
                geometric_sum(dot(a, b), *degree) / self.normalization_constant
            }
            KernelKind::ExplicitMonomial { degree, .. } => {
                elementary_symmetric_sum(a.iter().zip(b).map(|(x, y)| x * y), *degree)
                    / self.normalization_constant
            }
            KernelKind::MeanMap { base } => base.eval_points(a, b),
        }
    }

    fn eval_unchecked(&self, a: &Sample, b: &Sample) -> f64 {
        match (&self.kind, a, b) {
            (KernelKind::MeanMap { base }, Sample::Bag(s), Sample::Bag(t)) => {
                mean_map_unchecked(s, t, base)
            }
            (_, Sample::Point(x), Sample::Point(y)) => self.eval_points(x, y),
            _ => unreachable!("sample kinds validated by caller"),
        }
    }

    /// Check that a sample can be fed to this kernel.
    pub fn check_sample(&self, s: &Sample) -> Result<()> {
        s.validate()?;
        match (&self.kind, s) {
            (KernelKind::MeanMap { .. }, Sample::Bag(_)) => Ok(()),
            (KernelKind::MeanMap { .. }, Sample::Point(_)) => {
                input("mean map kernel needs bag samples")
            }
            (_, Sample::Bag(_)) => input("vector kernel given a bag sample"),
            (KernelKind::ExplicitMonomial { dimension, .. }, Sample::Point(x)) => {
                if x.len() != *dimension {
                    return input(format!(
                        "monomial kernel declared for n={dimension}, got n={}",
                        x.len()
                    ));
                }
                if !is_boolean(x) {
                    return input("monomial kernel needs points of {-1,1}^n");
                }
                Ok(())
            }
            (KernelKind::Multinomial { .. }, Sample::Point(_)) => Ok(()),
        }
    }

    /// Kernel value between two samples.
    pub fn eval(&self, a: &Sample, b: &Sample) -> Result<f64> {
        self.check_sample(a)?;
        self.check_sample(b)?;
        if a.dimension() != b.dimension() {
            return input("dimension mismatch between samples");
        }
        Ok(self.eval_unchecked(a, b))
    }
}

impl KernelSpec {
    /// Length of φ for inputs of dimension n, when it fits in memory.
    pub fn explicit_dimension(&self, n: usize) -> Option<usize> {
        match &self.kind {
            KernelKind::Multinomial { degree, .. } => {
                feature_dimension(n, *degree).filter(|&d| d <= FEATURE_CAPACITY)
            }
            KernelKind::ExplicitMonomial { degree, .. } => {
                let count: f64 = (0..=(*degree).min(n)).map(|j| binomial(n, j)).sum();
                (count <= FEATURE_CAPACITY as f64).then_some(count as usize)
            }
            KernelKind::MeanMap { base } => base.explicit_dimension(n),
        }
    }

    /// φ(s) with ⟨φ(s), φ(t)⟩ = k(s, t).
    pub fn feature_vector(&self, s: &Sample) -> Result<Vec<f64>> {
        self.check_sample(s)?;
        let scale = 1.0 / self.normalization_constant.sqrt();
        match (&self.kind, s) {
            (KernelKind::MeanMap { base }, Sample::Bag(b)) => {
                let mut acc = base.feature_vector(&Sample::Point(b[0].clone()))?;
                for x in &b[1..] {
                    let f = base.feature_vector(&Sample::Point(x.clone()))?;
                    acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
                }
                let inv = 1.0 / b.len() as f64;
                acc.iter_mut().for_each(|a| *a *= inv);
                Ok(acc)
            }
            (KernelKind::Multinomial { degree, .. }, Sample::Point(x)) => {
                let mut f = explicit_feature_map(x, *degree)?;
                f.iter_mut().for_each(|v| *v *= scale);
                Ok(f)
            }
            (KernelKind::ExplicitMonomial { degree, .. }, Sample::Point(x)) => {
                let mut f = monomial_basis_map(x, *degree)?;
                f.iter_mut().for_each(|v| *v *= scale);
                Ok(f)
            }
            _ => unreachable!("checked by check_sample"),
        }
    }
}

fn mean_map_unchecked(s: &[Vec<f64>], t: &[Vec<f64>], base: &KernelSpec) -> f64 {
    let mut total = 0.0;
    for a in s {
        for b in t {
            total += base.eval_points(a, b);
        }
    }
    total / (s.len() * t.len()) as f64
}

/// Mean map kernel: the average of `base` over all pairs in S × T.
pub fn mean_map_kernel(s: &[Vec<f64>], t: &[Vec<f64>], base: &KernelSpec) -> Result<f64> {
    if s.is_empty() || t.is_empty() {
        return input("mean map kernel of an empty bag");
    }
    let bag_s = Sample::Bag(s.to_vec());
    let bag_t = Sample::Bag(t.to_vec());
    KernelSpec::mean_map(base.clone())?.eval(&bag_s, &bag_t)
}

/// Dense row-major kernel matrix between two sample lists.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// out = K·v
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

fn validate_samples(samples: &[Sample], spec: &KernelSpec) -> Result<()> {
    let dim = samples.first().and_then(Sample::dimension);
    for s in samples {
        spec.check_sample(s)?;
        if s.dimension() != dim {
            return input("samples have differing dimensions");
        }
    }
    Ok(())
}

/// Symmetric Gram matrix K[i][j] = k(s_i, s_j).
pub fn gram(samples: &[Sample], spec: &KernelSpec) -> Result<GramMatrix> {
    validate_samples(samples, spec)?;
    let m = samples.len();
    let mut entries = vec![0.0; m * m];
    match spec.kind() {
        KernelKind::ExplicitMonomial { degree, .. } => {
            let features = samples
                .iter()
                .map(|s| monomial_basis_map(s.as_point().expect("validated"), *degree))
                .collect::<Result<Vec<_>>>()?;
            let c = spec.normalization_constant();
            for i in 0..m {
                for j in 0..=i {
                    let v = dot(&features[i], &features[j]) / c;
                    entries[i * m + j] = v;
                    entries[j * m + i] = v;
                }
            }
        }
        _ => {
            for i in 0..m {
                for j in 0..=i {
                    let v = spec.eval_unchecked(&samples[i], &samples[j]);
                    entries[i * m + j] = v;
                    entries[j * m + i] = v;
                }
            }
        }
    }
    Ok(GramMatrix {
        rows: m,
        cols: m,
        entries,
    })
}

/// Rectangular kernel matrix K[i][j] = k(rows_i, cols_j).
pub fn cross_gram(rows: &[Sample], cols: &[Sample], spec: &KernelSpec) -> Result<GramMatrix> {
    validate_samples(rows, spec)?;
    validate_samples(cols, spec)?;
    if let (Some(a), Some(b)) = (rows.first(), cols.first()) {
        if a.dimension() != b.dimension() {
            return input("row and column samples have differing dimensions");
        }
    }
    let mut entries = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        entries.extend(cols.iter().map(|c| spec.eval_unchecked(r, c)));
    }
    Ok(GramMatrix {
        rows: rows.len(),
        cols: cols.len(),
        entries,
    })
}

/// Kernel values between one query sample and every support sample.
pub fn kernel_row(x: &Sample, support: &[Sample], spec: &KernelSpec) -> Result<Vec<f64>> {
    spec.check_sample(x)?;
    let dim = x.dimension();
    support
        .iter()
        .map(|s| {
            if s.dimension() != dim {
                return input("query dimension differs from support");
            }
            Ok(spec.eval_unchecked(x, s))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KernelTag {
    Multinomial,
    Monomial,
    MeanMap,
}

#[derive(Serialize, Deserialize)]
struct KernelRecord {
    kind: KernelTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalized: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    declared_norm_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<Box<KernelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization_constant: Option<f64>,
}

impl From<KernelSpec> for KernelRecord {
    fn from(spec: KernelSpec) -> Self {
        let constant = Some(spec.normalization_constant);
        match spec.kind {
            KernelKind::Multinomial {
                degree,
                normalized,
                declared_norm_bound,
            } => KernelRecord {
                kind: KernelTag::Multinomial,
                degree: Some(degree),
                normalized: Some(normalized),
                declared_norm_bound: Some(declared_norm_bound),
                dimension: None,
                base: None,
                normalization_constant: constant,
            },
            KernelKind::ExplicitMonomial {
                degree,
                normalized,
                dimension,
            } => KernelRecord {
                kind: KernelTag::Monomial,
                degree: Some(degree),
                normalized: Some(normalized),
                declared_norm_bound: None,
                dimension: Some(dimension),
                base: None,
                normalization_constant: constant,
            },
            KernelKind::MeanMap { base } => KernelRecord {
                kind: KernelTag::MeanMap,
                degree: None,
                normalized: None,
                declared_norm_bound: None,
                dimension: None,
                base: Some(base),
                normalization_constant: None,
            },
        }
    }
}

impl TryFrom<KernelRecord> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelRecord) -> Result<Self> {
        let need = |v: Option<usize>, field: &str| {
            v.ok_or_else(|| Error::Config(format!("kernel field `{field}` is required")))
        };
        let spec = match r.kind {
            KernelTag::Multinomial => KernelSpec::multinomial_with_bound(
                need(r.degree, "degree")?,
                r.normalized.unwrap_or(true),
                r.declared_norm_bound.unwrap_or(1.0),
            )?,
            KernelTag::Monomial => KernelSpec::monomial(
                need(r.degree, "degree")?,
                need(r.dimension, "dimension")?,
                r.normalized.unwrap_or(true),
            ),
            KernelTag::MeanMap => KernelSpec::mean_map(
                *r.base
                    .ok_or_else(|| Error::Config("mean_map kernel needs `base`".into()))?,
            )?,
        };
        if let Some(c) = r.normalization_constant {
            let expected = spec.normalization_constant;
            if (c - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "normalization constant {c} disagrees with declared kernel ({expected})"
                )));
            }
        }
        Ok(spec)
    }
}

/// Largest feature table (rows × features) the explicit path will allocate.
const FEATURE_TABLE_CAPACITY: usize = 50_000_000;

/// The maps α ↦ Kα on training points and α ↦ K_hold α on holdout points.
///
/// Stored as dense kernel matrices, or, when the explicit feature map is
/// short compared with the training set, as feature rows Φ so that
/// Kα = Φ(Φᵀα).
pub struct KernelSystem {
    train_len: usize,
    holdout_len: usize,
    store: Store,
}

enum Store {
    Dense {
        train: GramMatrix,
        holdout: Option<GramMatrix>,
    },
    Features {
        dim: usize,
        train: Vec<f64>,
        holdout: Vec<f64>,
        weights: Vec<f64>,
    },
}

fn input_dimension(s: &Sample) -> usize {
    s.dimension().unwrap_or(0)
}

impl KernelSystem {
    pub fn build(train: &[Sample], holdout: &[Sample], spec: &KernelSpec) -> Result<Self> {
        validate_samples(train, spec)?;
        validate_samples(holdout, spec)?;
        let m = train.len();
        let n_hold = holdout.len();
        let dim = train
            .first()
            .and_then(|s| spec.explicit_dimension(input_dimension(s)))
            .filter(|&d| 2 * d <= m && d.saturating_mul(m + n_hold) <= FEATURE_TABLE_CAPACITY);
        if let Some(d) = dim {
            if let (Some(a), Some(b)) = (train.first(), holdout.first()) {
                if a.dimension() != b.dimension() {
                    return input("train and holdout samples have differing dimensions");
                }
            }
            let rows = |set: &[Sample]| -> Result<Vec<f64>> {
                let mut out = Vec::with_capacity(set.len() * d);
                for s in set {
                    out.extend(spec.feature_vector(s)?);
                }
                Ok(out)
            };
            return Ok(KernelSystem {
                train_len: m,
                holdout_len: n_hold,
                store: Store::Features {
                    dim: d,
                    train: rows(train)?,
                    holdout: rows(holdout)?,
                    weights: vec![0.0; d],
                },
            });
        }
        let holdout_gram = if holdout.is_empty() {
            None
        } else {
            Some(cross_gram(holdout, train, spec)?)
        };
        Ok(KernelSystem {
            train_len: m,
            holdout_len: n_hold,
            store: Store::Dense {
                train: gram(train, spec)?,
                holdout: holdout_gram,
            },
        })
    }

    pub fn uses_features(&self) -> bool {
        matches!(self.store, Store::Features { .. })
    }

    pub fn train_len(&self) -> usize {
        self.train_len
    }

    pub fn holdout_len(&self) -> usize {
        self.holdout_len
    }

    /// Write Kα into `train_out` and, if non-empty, K_hold α into `holdout_out`.
    pub fn apply(&mut self, alphas: &[f64], train_out: &mut [f64], holdout_out: &mut [f64]) {
        match &mut self.store {
            Store::Dense { train, holdout } => {
                train.mul_vec_into(alphas, train_out);
                if let Some(h) = holdout {
                    if !holdout_out.is_empty() {
                        h.mul_vec_into(alphas, holdout_out);
                    }
                }
            }
            Store::Features {
                dim,
                train,
                holdout,
                weights,
            } => {
                let d = *dim;
                weights.iter_mut().for_each(|w| *w = 0.0);
                for (row, &a) in train.chunks_exact(d).zip(alphas) {
                    if a != 0.0 {
                        weights.iter_mut().zip(row).for_each(|(w, &v)| *w += a * v);
                    }
                }
                for (out, row) in train_out.iter_mut().zip(train.chunks_exact(d)) {
                    *out = dot(row, weights);
                }
                for (out, row) in holdout_out.iter_mut().zip(holdout.chunks_exact(d)) {
                    *out = dot(row, weights);
                }
            }
        }
    }
}

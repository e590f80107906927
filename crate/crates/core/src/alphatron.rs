//! Alphatron: kernelized isotonic regression with a known link.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::kernels::{cross_gram, kernel_row, KernelSpec, KernelSystem, Sample};
use crate::link::{LinkFunction, Monotonicity};

pub const MODEL_VERSION: u32 = 1;

/// Samples with labels in [0,1] and, for synthetic data, the exact
/// conditional means E[y|x].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub labels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, labels: Vec<f64>) -> Result<Self> {
        let d = Dataset {
            samples,
            labels,
            means: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_means(mut self, means: Vec<f64>) -> Result<Self> {
        if means.len() != self.samples.len() {
            return input("conditional means must match the sample count");
        }
        self.means = Some(means);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Split into the first `k` records and the rest.
    pub fn split_at(&self, k: usize) -> (Dataset, Dataset) {
        let k = k.min(self.len());
        let part = |r: std::ops::Range<usize>| Dataset {
            samples: self.samples[r.clone()].to_vec(),
            labels: self.labels[r.clone()].to_vec(),
            means: self.means.as_ref().map(|m| m[r].to_vec()),
        };
        (part(0..k), part(k..self.len()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.labels.len() {
            return input(format!(
                "{} samples but {} labels",
                self.samples.len(),
                self.labels.len()
            ));
        }
        for (i, &y) in self.labels.iter().enumerate() {
            if !y.is_finite() {
                return input(format!("label {i} is not finite"));
            }
            if !(0.0..=1.0).contains(&y) {
                return input(format!("label {i} = {y} lies outside [0,1]"));
            }
        }
        Ok(())
    }
}

/// u(Σ αᵢ K(x, xᵢ)) over a stored support set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct KernelModel {
    alphas: Vec<f64>,
    support: Vec<Sample>,
    kernel: KernelSpec,
    link: LinkFunction,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    version: u32,
    kernel: KernelSpec,
    link: LinkFunction,
    alphas: Vec<f64>,
    support: Vec<Sample>,
}

impl From<KernelModel> for ModelRecord {
    fn from(m: KernelModel) -> Self {
        ModelRecord {
            version: MODEL_VERSION,
            kernel: m.kernel,
            link: m.link,
            alphas: m.alphas,
            support: m.support,
        }
    }
}

impl TryFrom<ModelRecord> for KernelModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        if r.version != MODEL_VERSION {
            return input(format!("unsupported model version {}", r.version));
        }
        r.link.verify()?;
        KernelModel::new(r.alphas, r.support, r.kernel, r.link)
    }
}

impl KernelModel {
    pub fn new(
        alphas: Vec<f64>,
        support: Vec<Sample>,
        kernel: KernelSpec,
        link: LinkFunction,
    ) -> Result<Self> {
        if alphas.len() != support.len() {
            return input("alphas and support samples differ in length");
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return input("non-finite dual coefficient");
        }
        for s in &support {
            kernel.check_sample(s)?;
        }
        Ok(KernelModel {
            alphas,
            support,
            kernel,
            link,
        })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn support(&self) -> &[Sample] {
        &self.support
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    /// Σ αᵢ K(x, xᵢ) before the link.
    pub fn latent(&self, x: &Sample) -> Result<f64> {
        if self.support.is_empty() {
            self.kernel.check_sample(x)?;
            return Ok(0.0);
        }
        let row = kernel_row(x, &self.support, &self.kernel)?;
        Ok(row.iter().zip(&self.alphas).map(|(k, a)| k * a).sum())
    }

    pub fn predict(&self, x: &Sample) -> Result<f64> {
        Ok(self.link.eval(self.latent(x)?))
    }

    pub fn predict_batch(&self, xs: &[Sample]) -> Result<Vec<f64>> {
        if self.support.is_empty() {
            return xs.iter().map(|x| self.predict(x)).collect();
        }
        let n = self.support[0].dimension().unwrap_or(0);
        if let Some(d) = self.kernel.explicit_dimension(n).filter(|&d| d <= self.support.len()) {
            // w = Σ αᵢ φ(xᵢ), then ⟨w, φ(x)⟩ per query.
            let mut w = vec![0.0; d];
            for (a, s) in self.alphas.iter().zip(&self.support) {
                let f = self.kernel.feature_vector(s)?;
                w.iter_mut().zip(f).for_each(|(wi, v)| *wi += a * v);
            }
            return xs
                .iter()
                .map(|x| {
                    if x.dimension() != Some(n) {
                        return input("query dimension differs from the support");
                    }
                    let f = self.kernel.feature_vector(x)?;
                    Ok(self.link.eval(f.iter().zip(&w).map(|(a, b)| a * b).sum()))
                })
                .collect();
        }
        let k = cross_gram(xs, &self.support, &self.kernel)?;
        Ok(k.mul_vec(&self.alphas)
            .into_iter()
            .map(|f| self.link.eval(f))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared holdout loss of h^t, t = 1..=T.
    pub per_iteration_holdout_loss: Vec<f64>,
    /// 1-based index of the returned iterate.
    pub selected_iteration: usize,
    pub iterations_run: usize,
    pub learning_rate: f64,
}

/// α ← α ± (λ/m)(y − u(f)), with the sign negated for non-increasing links.
pub fn alphatron_update(
    alphas: &mut [f64],
    predictions: &[f64],
    labels: &[f64],
    learning_rate: f64,
    direction: Monotonicity,
) {
    let m = alphas.len() as f64;
    let step = match direction {
        Monotonicity::NonDecreasing => learning_rate / m,
        Monotonicity::NonIncreasing => -learning_rate / m,
    };
    for ((a, &h), &y) in alphas.iter_mut().zip(predictions).zip(labels) {
        *a += step * (y - h);
    }
}

/// Stepwise Alphatron state over precomputed kernel values.
pub struct Alphatron<'a> {
    train: &'a Dataset,
    system: KernelSystem,
    link: LinkFunction,
    learning_rate: f64,
    alphas: Vec<f64>,
    latent: Vec<f64>,
    predictions: Vec<f64>,
    holdout_latent: Vec<f64>,
    iteration: usize,
}

impl<'a> Alphatron<'a> {
    pub fn new(
        train: &'a Dataset,
        link: LinkFunction,
        kernel: &KernelSpec,
        learning_rate: f64,
    ) -> Result<Self> {
        Self::with_holdout(train, &[], link, kernel, learning_rate)
    }

    /// Also tracks Σⱼ αⱼ K(a, xⱼ) on the given holdout inputs.
    pub fn with_holdout(
        train: &'a Dataset,
        holdout: &[Sample],
        link: LinkFunction,
        kernel: &KernelSpec,
        learning_rate: f64,
    ) -> Result<Self> {
        train.validate()?;
        if train.is_empty() {
            return input("training set is empty");
        }
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return input(format!("learning rate must be positive, got {learning_rate}"));
        }
        let system = KernelSystem::build(&train.samples, holdout, kernel)?;
        let m = train.len();
        let mut s = Alphatron {
            train,
            system,
            link,
            learning_rate,
            alphas: vec![0.0; m],
            latent: vec![0.0; m],
            predictions: vec![0.0; m],
            holdout_latent: vec![0.0; holdout.len()],
            iteration: 1,
        };
        s.refresh();
        Ok(s)
    }

    fn refresh(&mut self) {
        self.system
            .apply(&self.alphas, &mut self.latent, &mut self.holdout_latent);
        for (p, &f) in self.predictions.iter_mut().zip(&self.latent) {
            *p = self.link.eval(f);
        }
    }

    /// Current iteration index t (α^t is the current state; starts at 1).
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Σⱼ αⱼ K(xᵢ, xⱼ) on the training points.
    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    /// Σⱼ αⱼ K(aᵢ, xⱼ) on the holdout inputs.
    pub fn holdout_latent(&self) -> &[f64] {
        &self.holdout_latent
    }

    /// h^t(xᵢ) on the training points.
    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    /// One simultaneous sweep: α^{t+1} from α^t.
    pub fn step(&mut self) -> Result<()> {
        alphatron_update(
            &mut self.alphas,
            &self.predictions,
            &self.train.labels,
            self.learning_rate,
            self.link.direction(),
        );
        self.iteration += 1;
        self.refresh();
        if self.latent.iter().any(|f| !f.is_finite()) {
            return Err(Error::Divergence {
                iteration: self.iteration,
                detail: "non-finite latent prediction".into(),
            });
        }
        Ok(())
    }
}

pub(crate) fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / a.len() as f64
}

pub(crate) fn check_holdout(holdout: &Dataset) -> Result<()> {
    holdout.validate()?;
    if holdout.is_empty() {
        return input("holdout set is empty");
    }
    Ok(())
}

/// Run T sweeps and return the iterate with the smallest holdout loss.
pub fn alphatron_train(
    train: &Dataset,
    link: &LinkFunction,
    kernel: &KernelSpec,
    learning_rate: f64,
    iterations: usize,
    holdout: &Dataset,
) -> Result<(KernelModel, TrainReport)> {
    check_holdout(holdout)?;
    if iterations == 0 {
        return input("iteration count must be at least 1");
    }
    let mut run =
        Alphatron::with_holdout(train, &holdout.samples, link.clone(), kernel, learning_rate)?;
    let mut holdout_pred = vec![0.0; holdout.len()];
    let mut losses = Vec::with_capacity(iterations);
    let mut best = (f64::INFINITY, 0usize, Vec::new());
    for t in 1..=iterations {
        if t > 1 {
            run.step()?;
        }
        let holdout_latent = run.holdout_latent();
        for (p, &f) in holdout_pred.iter_mut().zip(holdout_latent) {
            *p = link.eval(f);
        }
        let loss = mean_sq(&holdout_pred, &holdout.labels);
        if !loss.is_finite() || holdout_latent.iter().any(|f| !f.is_finite()) {
            return Err(Error::Divergence {
                iteration: t,
                detail: "non-finite holdout loss".into(),
            });
        }
        losses.push(loss);
        if loss < best.0 {
            best = (loss, t, run.alphas().to_vec());
        }
    }
    let model = KernelModel {
        alphas: best.2,
        support: train.samples.clone(),
        kernel: kernel.clone(),
        link: link.clone(),
    };
    let report = TrainReport {
        per_iteration_holdout_loss: losses,
        selected_iteration: best.1,
        iterations_run: iterations,
        learning_rate,
    };
    Ok((model, report))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryConstants {
    /// Multiplier on the iteration count.
    pub c: f64,
    /// Multiplier on the holdout size; `None` uses all available holdout.
    pub c_prime: Option<f64>,
}

impl Default for TheoryConstants {
    fn default() -> Self {
        TheoryConstants {
            c: 2.0,
            c_prime: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub holdout_size: usize,
}

/// λ = 1/L, T = ⌈C·B·L·√(m / ln(1/δ))⌉, N = min(⌈C′·m·ln(T/δ)⌉, available).
pub fn default_hyperparams(
    b: f64,
    l: f64,
    m: usize,
    delta: f64,
    constants: TheoryConstants,
    holdout_available: usize,
) -> Result<Hyperparams> {
    if !(b > 0.0 && l > 0.0 && b.is_finite() && l.is_finite()) {
        return input("B and L must be positive and finite");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return input("delta must lie in (0,1)");
    }
    if m < 2 {
        return input("m must be at least 2");
    }
    let t = (constants.c * b * l * (m as f64 / (1.0 / delta).ln()).sqrt()).ceil();
    let iterations = (t as usize).max(1);
    let holdout_size = match constants.c_prime {
        Some(cp) => {
            let n = (cp * m as f64 * (iterations as f64 / delta).ln()).ceil();
            (n as usize).min(holdout_available)
        }
        None => holdout_available,
    };
    Ok(Hyperparams {
        learning_rate: 1.0 / l,
        iterations,
        holdout_size,
    })
}

/// Empirical mean of (h(x) − y)².
pub fn squared_err<F>(h: F, data: &Dataset) -> Result<f64>
where
    F: Fn(&Sample) -> Result<f64>,
{
    if data.is_empty() {
        return input("squared error of an empty dataset");
    }
    let mut sum = 0.0;
    for (x, y) in data.samples.iter().zip(&data.labels) {
        let r = h(x)? - y;
        sum += r * r;
    }
    Ok(sum / data.len() as f64)
}

/// Empirical mean of (h(x) − E[y|x])², using the dataset's exact means.
pub fn eps_vs_truth<F>(h: F, data: &Dataset) -> Result<f64>
where
    F: Fn(&Sample) -> Result<f64>,
{
    let means = data
        .means
        .as_ref()
        .ok_or_else(|| Error::Unsupported("conditional means are not available".into()))?;
    if data.is_empty() {
        return input("excess risk of an empty dataset");
    }
    let mut sum = 0.0;
    for (x, c) in data.samples.iter().zip(means) {
        let r = h(x)? - c;
        sum += r * r;
    }
    Ok(sum / data.len() as f64)
}

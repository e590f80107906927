//! Experiment configuration files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::concepts::{BagDependence, LabelMode};
use crate::error::{Error, Result};
use crate::fourier::DEFAULT_QUERY_BUDGET;
use crate::kernels::KernelSpec;
use crate::link::LinkFunction;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    #[serde(default)]
    pub samples: SampleSizes,
    #[serde(default)]
    pub label_mode: LabelMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSizes {
    pub train: usize,
    pub holdout: usize,
    pub eval: usize,
}

impl Default for SampleSizes {
    fn default() -> Self {
        SampleSizes {
            train: 2000,
            holdout: 500,
            eval: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Glm(GlmParams),
    TwoLayerSigmoid(NetParams),
    TwoLayerRelu(NetParams),
    LowDegreeHypercube(LowDegreeParams),
    IntersectionHalfspaces(HalfspaceParams),
    MajorityHalfspaces(HalfspaceParams),
    DnfKmtron(DnfParams),
    MilBags(MilParams),
    UnknownLink(UnknownLinkParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Glm(_) => "glm",
            Experiment::TwoLayerSigmoid(_) => "two-layer-sigmoid",
            Experiment::TwoLayerRelu(_) => "two-layer-relu",
            Experiment::LowDegreeHypercube(_) => "low-degree-hypercube",
            Experiment::IntersectionHalfspaces(_) => "intersection-halfspaces",
            Experiment::MajorityHalfspaces(_) => "majority-halfspaces",
            Experiment::DnfKmtron(_) => "dnf-kmtron",
            Experiment::MilBags(_) => "mil-bags",
            Experiment::UnknownLink(_) => "unknown-link",
        }
    }
}

/// λ, T and the constants used to fill them in when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerParams {
    pub learning_rate: Option<f64>,
    pub iterations: Option<usize>,
    /// Norm bound B of the target in the kernel's feature space.
    pub norm_bound: f64,
    pub delta: f64,
    /// C in T = ⌈C·B·L·√(m / ln(1/δ))⌉.
    pub iteration_constant: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            learning_rate: None,
            iterations: None,
            norm_bound: 1.0,
            delta: 0.05,
            iteration_constant: 2.0,
        }
    }
}

fn identity_ramp() -> LinkFunction {
    LinkFunction::identity_ramp()
}

fn centered_ramp() -> LinkFunction {
    LinkFunction::Ramp {
        low: -0.5,
        high: 0.5,
    }
}

fn linear_kernel() -> KernelSpec {
    KernelSpec::multinomial(1, false)
}

fn six() -> usize {
    6
}

fn two() -> usize {
    2
}

fn one_f() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmParams {
    pub n: usize,
    #[serde(default = "identity_ramp")]
    pub link: LinkFunction,
    #[serde(default = "linear_kernel")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub learner: LearnerParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub n: usize,
    pub k: usize,
    #[serde(default = "identity_ramp")]
    pub output_link: LinkFunction,
    /// Degree of the normalized multinomial kernel.
    #[serde(default = "six")]
    pub degree: usize,
    #[serde(default)]
    pub learner: LearnerParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowDegreeParams {
    pub n: usize,
    #[serde(default = "two")]
    pub degree: usize,
    #[serde(default = "default_terms")]
    pub terms: usize,
    #[serde(default = "default_l1")]
    pub l1: f64,
    #[serde(default)]
    pub learner: LearnerParams,
}

fn default_terms() -> usize {
    8
}

fn default_l1() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceParams {
    pub n: usize,
    pub t: usize,
    pub margin: f64,
    #[serde(default = "six")]
    pub degree: usize,
    #[serde(default)]
    pub learner: LearnerParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnfParams {
    pub n: usize,
    pub s: usize,
    #[serde(default = "two")]
    pub width: usize,
    #[serde(default = "default_dnf_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_dnf_iterations")]
    pub iterations: usize,
    #[serde(default = "default_dnf_theta")]
    pub theta: f64,
    #[serde(default = "default_eval_sample")]
    pub eval_sample: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Target accuracy; only reported against the θ bound.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Fixed L2 bound for each KM call; adaptive when absent.
    #[serde(default)]
    pub l2_bound: Option<f64>,
    #[serde(default = "default_max_queries")]
    pub max_queries: u64,
}

fn default_dnf_rate() -> f64 {
    0.5
}

fn default_dnf_iterations() -> usize {
    8
}

fn default_dnf_theta() -> f64 {
    0.1
}

fn default_eval_sample() -> usize {
    4000
}

fn default_delta() -> f64 {
    0.05
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_max_queries() -> u64 {
    DEFAULT_QUERY_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilParams {
    pub n: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "one")]
    pub min_bag: usize,
    #[serde(default = "five")]
    pub max_bag: usize,
    #[serde(default = "clustered")]
    pub dependence: BagDependence,
    #[serde(default = "identity_ramp")]
    pub link: LinkFunction,
    #[serde(default = "six")]
    pub degree: usize,
    #[serde(default)]
    pub learner: LearnerParams,
}

fn default_margin() -> f64 {
    0.3
}

fn one() -> usize {
    1
}

fn five() -> usize {
    5
}

fn clustered() -> BagDependence {
    BagDependence::Clustered { jitter: 0.1 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownLinkParams {
    pub n: usize,
    /// Planted link; the learner never sees it.
    #[serde(default = "centered_ramp")]
    pub link: LinkFunction,
    /// Lipschitz bound handed to the isotonic fit.
    #[serde(default = "one_f")]
    pub lipschitz: f64,
    #[serde(default = "linear_kernel")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub learner: LearnerParams,
}

fn check_learner(l: &LearnerParams) -> Result<()> {
    if let Some(r) = l.learning_rate {
        if !(r > 0.0 && r.is_finite()) {
            return config_err("learner.learning_rate must be positive");
        }
    }
    if l.iterations == Some(0) {
        return config_err("learner.iterations must be at least 1");
    }
    if !(l.norm_bound > 0.0 && l.norm_bound.is_finite()) {
        return config_err("learner.norm_bound must be positive");
    }
    if !(l.delta > 0.0 && l.delta < 1.0) {
        return config_err("learner.delta must lie in (0,1)");
    }
    if !(l.iteration_constant > 0.0 && l.iteration_constant.is_finite()) {
        return config_err("learner.iteration_constant must be positive");
    }
    Ok(())
}

fn check_link(link: &LinkFunction) -> Result<()> {
    link.verify().map_err(|e| Error::Config(format!("link: {e}")))
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return config_err(format!("{name} must be at least 1"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return config_err("id must be non-empty");
        }
        let s = &self.samples;
        positive("samples.eval", s.eval)?;
        if !matches!(self.experiment, Experiment::DnfKmtron(_)) {
            positive("samples.train", s.train)?;
            positive("samples.holdout", s.holdout)?;
        }
        match &self.experiment {
            Experiment::Glm(p) => {
                positive("n", p.n)?;
                check_link(&p.link)?;
                check_learner(&p.learner)
            }
            Experiment::TwoLayerSigmoid(p) | Experiment::TwoLayerRelu(p) => {
                positive("n", p.n)?;
                positive("k", p.k)?;
                check_link(&p.output_link)?;
                check_learner(&p.learner)
            }
            Experiment::LowDegreeHypercube(p) => {
                positive("n", p.n)?;
                positive("degree", p.degree)?;
                if p.degree > p.n || p.n > 63 {
                    return config_err("low-degree experiment needs degree <= n <= 63");
                }
                if !(0.0..=0.5).contains(&p.l1) {
                    return config_err("l1 must lie in [0, 1/2]");
                }
                check_learner(&p.learner)
            }
            Experiment::IntersectionHalfspaces(p) | Experiment::MajorityHalfspaces(p) => {
                positive("n", p.n)?;
                positive("t", p.t)?;
                if !(0.0..1.0).contains(&p.margin) {
                    return config_err("margin must lie in [0,1)");
                }
                check_learner(&p.learner)
            }
            Experiment::DnfKmtron(p) => {
                positive("n", p.n)?;
                if p.n > 20 {
                    return config_err("dnf-kmtron supports n <= 20");
                }
                if p.s > 0 && (p.width == 0 || p.width > p.n) {
                    return config_err("width must lie in 1..=n");
                }
                positive("iterations", p.iterations)?;
                positive("eval_sample", p.eval_sample)?;
                if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
                    return config_err("learning_rate must lie in (0,1]");
                }
                if !(p.theta > 0.0 && p.theta <= 1.0) {
                    return config_err("theta must lie in (0,1]");
                }
                if !(p.delta > 0.0 && p.delta < 1.0) {
                    return config_err("delta must lie in (0,1)");
                }
                if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
                    return config_err("epsilon must be positive");
                }
                if p.max_queries == 0 {
                    return config_err("max_queries must be positive");
                }
                Ok(())
            }
            Experiment::MilBags(p) => {
                positive("n", p.n)?;
                positive("min_bag", p.min_bag)?;
                if p.max_bag < p.min_bag {
                    return config_err("max_bag must be at least min_bag");
                }
                if !(0.0..1.0).contains(&p.margin) {
                    return config_err("margin must lie in [0,1)");
                }
                check_link(&p.link)?;
                check_learner(&p.learner)
            }
            Experiment::UnknownLink(p) => {
                positive("n", p.n)?;
                check_link(&p.link)?;
                if !(p.lipschitz > 0.0 && p.lipschitz.is_finite()) {
                    return config_err("lipschitz must be positive");
                }
                check_learner(&p.learner)
            }
        }
    }
}

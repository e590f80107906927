//! generate → train → evaluate pipelines for each experiment kind.

use std::path::Path;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{Experiment, ExperimentConfig, LearnerParams, SampleSizes};
use super::seeds::SeedStreams;
use crate::alphatron::{
    alphatron_train, default_hyperparams, Dataset, KernelModel, TheoryConstants, TrainReport,
};
use crate::alphatron_u::{alphatron_u_train, default_learning_rate};
use crate::concepts::{
    draw_dataset, Activation, BagDistributionSpec, CombineRule, Concept, DnfFormula,
    FourierConcept, Glm, HalfspaceCombination, MarginHalfspace, PConceptSampler, TwoLayerNet,
};
use crate::error::{Error, Result};
use crate::fourier::{MembershipOracle, QueryOracle, MAX_BRUTE_DIMENSION};
use crate::kernels::KernelSpec;
use crate::kmtron::{learn_dnf, IterationRecord, KMtronConfig};
use crate::link::LinkFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub id: String,
    pub kind: String,
    pub seed: u64,
    /// The configuration that produced this record; rerunning it
    /// reproduces every field except `timing`.
    pub config: ExperimentConfig,
    /// The planted concept.
    pub concept: Value,
    pub metrics: Metrics,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean of (h(x) − E[y|x])² on fresh points.
    pub eps_hat: f64,
    /// Mean of (h(x) − y)² on fresh labelled points.
    pub err_hat: f64,
    /// Disagreement of 1[h ≥ 1/2] with the Boolean target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_one: Option<f64>,
    pub selected_iteration: usize,
    pub iterations_run: usize,
    pub learning_rate: f64,
    /// Per-iteration holdout loss (Alphatron kinds) or estimated loss (KMtron).
    pub loss_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmtron: Option<Vec<IterationRecord>>,
    /// Number of evaluation points actually used.
    pub eval_points: usize,
    /// True when the evaluation enumerated the whole cube.
    pub exhaustive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

impl MetricsRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    /// The record without its timing block, for reproducibility checks.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("metrics serialize");
        if let Value::Object(map) = &mut v {
            map.remove("timing");
        }
        serde_json::to_string_pretty(&v).expect("metrics serialize")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Read, parse and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_queries: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(q) = self.max_queries {
            match &mut cfg.experiment {
                Experiment::DnfKmtron(p) => p.max_queries = q,
                _ => {
                    return Err(Error::Config(
                        "--max-queries only applies to dnf-kmtron experiments".into(),
                    ))
                }
            }
        }
        cfg.validate()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("concept serializes")
}

fn hyperparams(
    learner: &LearnerParams,
    lipschitz: f64,
    m: usize,
    holdout: usize,
    default_rate: Option<f64>,
) -> Result<(f64, usize)> {
    let hp = default_hyperparams(
        learner.norm_bound,
        lipschitz,
        m.max(2),
        learner.delta,
        TheoryConstants {
            c: learner.iteration_constant,
            c_prime: None,
        },
        holdout,
    )?;
    Ok((
        learner
            .learning_rate
            .unwrap_or(default_rate.unwrap_or(hp.learning_rate)),
        learner.iterations.unwrap_or(hp.iterations),
    ))
}

struct Fitted {
    model: KernelModel,
    report: TrainReport,
}

/// Draw train/holdout, fit with a known link, and score on fresh data.
fn kernel_pipeline(
    cfg: &ExperimentConfig,
    streams: &SeedStreams,
    concept: &dyn Concept,
    link: &LinkFunction,
    kernel: &KernelSpec,
    learner: &LearnerParams,
    boolean: bool,
) -> Result<Metrics> {
    let (train, holdout) = draw_splits(cfg, streams, concept)?;
    let (rate, iterations) =
        hyperparams(learner, link.lipschitz(), train.len(), holdout.len(), None)?;
    let (model, report) = alphatron_train(&train, link, kernel, rate, iterations, &holdout)?;
    evaluate(cfg, streams, concept, Fitted { model, report }, boolean)
}

fn draw_splits(
    cfg: &ExperimentConfig,
    streams: &SeedStreams,
    concept: &dyn Concept,
) -> Result<(Dataset, Dataset)> {
    let sampler = PConceptSampler::new(cfg.label_mode);
    let SampleSizes { train, holdout, .. } = cfg.samples;
    let train = draw_dataset(concept, train, sampler, &mut streams.stream("train"))?;
    let holdout = draw_dataset(concept, holdout, sampler, &mut streams.stream("holdout"))?;
    Ok((train, holdout))
}

fn evaluate(
    cfg: &ExperimentConfig,
    streams: &SeedStreams,
    concept: &dyn Concept,
    fitted: Fitted,
    boolean: bool,
) -> Result<Metrics> {
    let sampler = PConceptSampler::new(cfg.label_mode);
    let eval = draw_dataset(concept, cfg.samples.eval, sampler, &mut streams.stream("eval"))?;
    let preds = fitted.model.predict_batch(&eval.samples)?;
    let means = eval.means.as_ref().expect("generated data carries means");
    let n = eval.len() as f64;
    let eps_hat = preds.iter().zip(means).map(|(h, c)| (h - c).powi(2)).sum::<f64>() / n;
    let err_hat = preds
        .iter()
        .zip(&eval.labels)
        .map(|(h, y)| (h - y).powi(2))
        .sum::<f64>()
        / n;
    let zero_one = boolean.then(|| {
        preds
            .iter()
            .zip(means)
            .filter(|(h, c)| (**h >= 0.5) != (**c >= 0.5))
            .count() as f64
            / n
    });
    let report = fitted.report;
    Ok(Metrics {
        eps_hat,
        err_hat,
        zero_one,
        selected_iteration: report.selected_iteration,
        iterations_run: report.iterations_run,
        learning_rate: report.learning_rate,
        loss_trace: report.per_iteration_holdout_loss,
        queries: None,
        kmtron: None,
        eval_points: eval.len(),
        exhaustive: false,
    })
}

fn dnf_pipeline(
    cfg: &ExperimentConfig,
    streams: &SeedStreams,
    formula: &DnfFormula,
    p: &super::config::DnfParams,
) -> Result<Metrics> {
    let n = p.n;
    let mut oracle = MembershipOracle::new(n, |x| formula.eval_mask(x))?;
    let kcfg = KMtronConfig {
        k: p.s as f64,
        lipschitz: 1.0,
        epsilon: p.epsilon,
        learning_rate: p.learning_rate,
        iterations: p.iterations,
        theta: p.theta,
        eval_sample: p.eval_sample,
        delta: p.delta,
        theta_constant: 1e-2,
        l2_bound: p.l2_bound,
        max_queries: p.max_queries,
        seed: streams.seed_for("learner"),
    };
    let (h, result) = learn_dnf(&mut oracle, p.s, &kcfg)?;
    let queries = oracle.query_count();

    let exhaustive = n <= MAX_BRUTE_DIMENSION;
    let points: Vec<u64> = if exhaustive {
        (0..1u64 << n).collect()
    } else {
        let mut rng = streams.stream("eval");
        let mask = (1u64 << n) - 1;
        (0..cfg.samples.eval).map(|_| rng.next_u64() & mask).collect()
    };
    let mut sq = 0.0;
    let mut wrong = 0usize;
    for &x in &points {
        let y = formula.eval_mask(x);
        let v = h.link.eval(h.poly.eval_mask(x));
        sq += (v - y).powi(2);
        if h.predict_mask(x) != (y == 1.0) {
            wrong += 1;
        }
    }
    let total = points.len() as f64;
    Ok(Metrics {
        eps_hat: sq / total,
        // Membership labels are noiseless, so both risks coincide.
        err_hat: sq / total,
        zero_one: Some(wrong as f64 / total),
        selected_iteration: result.selected_iteration,
        iterations_run: result.records.len(),
        learning_rate: p.learning_rate,
        loss_trace: result.records.iter().map(|r| r.estimated_loss).collect(),
        queries: Some(queries),
        kmtron: Some(result.records),
        eval_points: points.len(),
        exhaustive,
    })
}

/// Run one experiment end to end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let streams = SeedStreams::new(cfg.seed);
    let mut crng = streams.stream("concept");
    let rng: &mut dyn RngCore = &mut crng;

    let (concept, metrics) = match &cfg.experiment {
        Experiment::Glm(p) => {
            let c = Glm::random(p.n, p.link.clone(), rng)?;
            let m = kernel_pipeline(cfg, &streams, &c, &p.link, &p.kernel, &p.learner, false)?;
            (to_value(&c), m)
        }
        Experiment::TwoLayerSigmoid(p) | Experiment::TwoLayerRelu(p) => {
            let act = if matches!(cfg.experiment, Experiment::TwoLayerSigmoid(_)) {
                Activation::Sigmoid
            } else {
                Activation::Relu
            };
            let c = TwoLayerNet::random(p.n, p.k, act, p.output_link.clone(), rng)?;
            let kernel = KernelSpec::multinomial(p.degree, true);
            let m = kernel_pipeline(cfg, &streams, &c, &p.output_link, &kernel, &p.learner, false)?;
            (to_value(&c), m)
        }
        Experiment::LowDegreeHypercube(p) => {
            let c = FourierConcept::random_low_degree(p.n, p.degree, p.terms, p.l1, rng)?;
            let kernel = KernelSpec::monomial(p.degree, p.n, true);
            let link = LinkFunction::identity_ramp();
            let m = kernel_pipeline(cfg, &streams, &c, &link, &kernel, &p.learner, false)?;
            (to_value(&c), m)
        }
        Experiment::IntersectionHalfspaces(p) | Experiment::MajorityHalfspaces(p) => {
            let rule = if matches!(cfg.experiment, Experiment::IntersectionHalfspaces(_)) {
                CombineRule::And
            } else {
                CombineRule::Majority
            };
            let c = HalfspaceCombination::random(p.n, p.t, p.margin, rule, rng)?;
            let link = c.link()?;
            let kernel = KernelSpec::multinomial(p.degree, true);
            let m = kernel_pipeline(cfg, &streams, &c, &link, &kernel, &p.learner, true)?;
            (to_value(&c), m)
        }
        Experiment::DnfKmtron(p) => {
            let f = DnfFormula::random(p.n, p.s, p.width, rng)?;
            let m = dnf_pipeline(cfg, &streams, &f, p)?;
            (to_value(&f), m)
        }
        Experiment::MilBags(p) => {
            let hs = MarginHalfspace::random(p.n, p.margin, rng)?;
            let c =
                BagDistributionSpec::new(hs, p.min_bag, p.max_bag, p.link.clone(), p.dependence)?;
            let kernel = KernelSpec::mean_map(KernelSpec::multinomial(p.degree, true))?;
            let m = kernel_pipeline(cfg, &streams, &c, &p.link, &kernel, &p.learner, false)?;
            (to_value(&c), m)
        }
        Experiment::UnknownLink(p) => {
            let c = Glm::random(p.n, p.link.clone(), rng)?;
            let (train, holdout) = draw_splits(cfg, &streams, &c)?;
            let (rate, iterations) = hyperparams(
                &p.learner,
                p.lipschitz,
                train.len(),
                holdout.len(),
                Some(default_learning_rate(p.lipschitz)),
            )?;
            let (model, report) =
                alphatron_u_train(&train, &p.kernel, p.lipschitz, rate, iterations, &holdout)?;
            let m = evaluate(cfg, &streams, &c, Fitted { model, report }, false)?;
            (to_value(&c), m)
        }
    };
    Ok(MetricsRecord {
        id: cfg.id.clone(),
        kind: cfg.experiment.kind().to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        concept,
        metrics,
        timing: Timing {
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

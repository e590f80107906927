//! Lipschitz isotonic regression and Alphatron with a learned link.

use serde::{Deserialize, Serialize};

use crate::alphatron::{alphatron_update, check_holdout, mean_sq, Dataset, KernelModel, TrainReport};
use crate::error::{input, Error, Result};
use crate::kernels::{KernelSpec, KernelSystem};
use crate::link::{interpolate_knots, LinkFunction, Monotonicity};

/// A non-decreasing, L-Lipschitz piecewise-linear fit with values in [0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzMonotoneFit {
    knots: Vec<(f64, f64)>,
    lipschitz: f64,
}

impl LipschitzMonotoneFit {
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Σ (yᵢ − fit(zᵢ))².
    pub fn objective(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(z, y)| {
                let r = y - self.eval(z);
                r * r
            })
            .sum()
    }

    pub fn eval(&self, z: f64) -> f64 {
        lir_eval(self, z)
    }

    pub fn to_link(&self) -> Result<LinkFunction> {
        LinkFunction::table(self.knots.clone())
    }
}

/// Linear interpolation between knots, constant beyond the extremes.
pub fn lir_eval(fit: &LipschitzMonotoneFit, z: f64) -> f64 {
    interpolate_knots(&fit.knots, z).clamp(0.0, 1.0)
}

/// Piecewise-linear increasing function given by knot values plus the
/// slopes beyond the first and last knot.
struct Derivative {
    knots: Vec<(f64, f64)>,
    left_slope: f64,
    right_slope: f64,
}

impl Derivative {
    fn root(&self) -> f64 {
        let (t0, v0) = self.knots[0];
        if v0 >= 0.0 {
            return t0 - v0 / self.left_slope;
        }
        let (tn, vn) = self.knots[self.knots.len() - 1];
        if vn <= 0.0 {
            return tn - vn / self.right_slope;
        }
        let j = self.knots.partition_point(|k| k.1 < 0.0);
        let (ta, va) = self.knots[j - 1];
        let (tb, vb) = self.knots[j];
        if vb == va {
            return ta;
        }
        ta + (tb - ta) * (-va) / (vb - va)
    }

    /// Derivative of min_{s ∈ [t−c, t]} F(s) given F' = self with root r.
    fn shift_right(&mut self, r: f64, c: f64) {
        let split = self.knots.partition_point(|k| k.0 < r);
        let mut knots = Vec::with_capacity(self.knots.len() + 2);
        knots.extend_from_slice(&self.knots[..split]);
        knots.push((r, 0.0));
        if c > 0.0 {
            knots.push((r + c, 0.0));
        }
        knots.extend(
            self.knots[split..]
                .iter()
                .filter(|k| k.0 > r)
                .map(|&(t, v)| (t + c, v)),
        );
        self.knots = knots;
    }

    fn add_quadratic(&mut self, w: f64, y: f64) {
        for k in &mut self.knots {
            k.1 += 2.0 * w * (k.0 - y);
        }
        self.left_slope += 2.0 * w;
        self.right_slope += 2.0 * w;
    }
}

/// Least-squares fit of (z, y) pairs by a non-decreasing L-Lipschitz
/// function, solved exactly by dynamic programming on the derivative of
/// the chain-constrained objective. Equal z are merged with multiplicity
/// weights.
pub fn lir(points: &[(f64, f64)], lipschitz: f64) -> Result<LipschitzMonotoneFit> {
    if points.is_empty() {
        return input("LIR needs at least one point");
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return input(format!("LIR Lipschitz constant must be positive, got {lipschitz}"));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return input("LIR points must be finite");
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // (z, weight, mean y)
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for (z, y) in sorted {
        match groups.last_mut() {
            Some(g) if g.0 == z => {
                g.1 += 1.0;
                g.2 += (y - g.2) / g.1;
            }
            _ => groups.push((z, 1.0, y)),
        }
    }

    let (_, w0, y0) = groups[0];
    let mut d = Derivative {
        knots: vec![(y0, 0.0)],
        left_slope: 2.0 * w0,
        right_slope: 2.0 * w0,
    };
    let mut roots = Vec::with_capacity(groups.len());
    let mut gaps = Vec::with_capacity(groups.len());
    for j in 1..groups.len() {
        let r = d.root();
        roots.push(r);
        let c = lipschitz * (groups[j].0 - groups[j - 1].0);
        gaps.push(c);
        d.shift_right(r, c);
        d.add_quadratic(groups[j].1, groups[j].2);
    }
    roots.push(d.root());

    let mut values = vec![0.0; groups.len()];
    let last = groups.len() - 1;
    values[last] = roots[last];
    for j in (0..last).rev() {
        let hi = values[j + 1];
        let lo = hi - gaps[j];
        values[j] = roots[j].clamp(lo, hi);
    }
    let knots = groups
        .iter()
        .zip(values)
        .map(|(g, v)| (g.0, v.clamp(0.0, 1.0)))
        .collect();
    Ok(LipschitzMonotoneFit { knots, lipschitz })
}

pub type UTrainReport = TrainReport;

/// λ = 2/L.
pub fn default_learning_rate(lipschitz: f64) -> f64 {
    2.0 / lipschitz
}

/// Alphatron with the link refitted by LIR at every iteration.
pub fn alphatron_u_train(
    train: &Dataset,
    kernel: &KernelSpec,
    lipschitz: f64,
    learning_rate: f64,
    iterations: usize,
    holdout: &Dataset,
) -> Result<(KernelModel, UTrainReport)> {
    train.validate()?;
    check_holdout(holdout)?;
    if train.is_empty() {
        return input("training set is empty");
    }
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return input(format!("learning rate must be positive, got {learning_rate}"));
    }
    if iterations == 0 {
        return input("iteration count must be at least 1");
    }
    let m = train.len();
    let mut system = KernelSystem::build(&train.samples, &holdout.samples, kernel)?;
    let mut alphas = vec![0.0; m];
    let mut latent = vec![0.0; m];
    let mut pred = vec![0.0; m];
    let mut holdout_latent = vec![0.0; holdout.len()];
    let mut holdout_pred = vec![0.0; holdout.len()];
    let mut pairs = Vec::with_capacity(m);
    let mut losses = Vec::with_capacity(iterations);
    let mut best: Option<(f64, usize, Vec<f64>, LipschitzMonotoneFit)> = None;

    for t in 1..=iterations {
        system.apply(&alphas, &mut latent, &mut holdout_latent);
        if latent.iter().any(|f| !f.is_finite()) {
            return Err(Error::Divergence {
                iteration: t,
                detail: "non-finite latent prediction".into(),
            });
        }
        pairs.clear();
        pairs.extend(latent.iter().copied().zip(train.labels.iter().copied()));
        let fit = lir(&pairs, lipschitz)?;
        for (p, &f) in pred.iter_mut().zip(&latent) {
            *p = fit.eval(f);
        }
        for (p, &f) in holdout_pred.iter_mut().zip(&holdout_latent) {
            *p = fit.eval(f);
        }
        let loss = mean_sq(&holdout_pred, &holdout.labels);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                iteration: t,
                detail: "non-finite holdout loss".into(),
            });
        }
        losses.push(loss);
        if best.as_ref().is_none_or(|b| loss < b.0) {
            best = Some((loss, t, alphas.clone(), fit));
        }
        alphatron_update(
            &mut alphas,
            &pred,
            &train.labels,
            learning_rate,
            Monotonicity::NonDecreasing,
        );
    }
    let (_, selected, alphas, fit) = best.expect("at least one iteration");
    let model = KernelModel::new(alphas, train.samples.clone(), kernel.clone(), fit.to_link()?)?;
    Ok((
        model,
        TrainReport {
            per_iteration_holdout_loss: losses,
            selected_iteration: selected,
            iterations_run: iterations,
            learning_rate,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Sample;

    fn values(fit: &LipschitzMonotoneFit) -> Vec<f64> {
        fit.knots().iter().map(|k| k.1).collect()
    }

    #[test]
    fn feasible_input_is_fixed() {
        let pts = [(0.0, 0.1), (0.5, 0.3), (1.0, 0.6)];
        let fit = lir(&pts, 1.0).unwrap();
        for (v, p) in values(&fit).iter().zip(&pts) {
            assert!((v - p.1).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_reversal_averages() {
        let fit = lir(&[(0.0, 1.0), (1.0, 0.0)], 1.0).unwrap();
        let v = values(&fit);
        assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slope_cap_binds() {
        // y jumps by 1 over Δz = 0.2 with L = 1: the gap splits evenly.
        let fit = lir(&[(0.0, 0.0), (0.2, 1.0)], 1.0).unwrap();
        let v = values(&fit);
        assert!((v[0] - 0.4).abs() < 1e-12 && (v[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn constant_labels() {
        let fit = lir(&[(0.3, 0.4), (-1.0, 0.4), (2.0, 0.4), (0.3, 0.4)], 3.0).unwrap();
        assert!(values(&fit).iter().all(|&v| (v - 0.4).abs() < 1e-12));
        assert_eq!(fit.knots().len(), 3);
    }

    #[test]
    fn eval_interpolates() {
        let fit = lir(&[(0.0, 0.2), (1.0, 0.6)], 1.0).unwrap();
        assert_eq!(fit.eval(-3.0), 0.2);
        assert!((fit.eval(0.5) - 0.4).abs() < 1e-12);
        assert_eq!(fit.eval(1.0), fit.knots()[1].1);
        assert_eq!(fit.eval(9.0), fit.knots()[1].1);
    }

    #[test]
    fn constant_labels_freeze_alphas() {
        let samples: Vec<Sample> = (0..6)
            .map(|i| Sample::Point(vec![(i as f64) / 10.0, 0.2]))
            .collect();
        let train = Dataset::new(samples.clone(), vec![0.3; 6]).unwrap();
        let (model, report) =
            alphatron_u_train(&train, &KernelSpec::multinomial(1, false), 1.0, 2.0, 4, &train)
                .unwrap();
        assert!(model.alphas().iter().all(|&a| a.abs() < 1e-15));
        assert_eq!(report.per_iteration_holdout_loss.len(), 4);
        assert!((model.predict(&samples[0]).unwrap() - 0.3).abs() < 1e-12);
    }
}

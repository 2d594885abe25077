use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_cascade, FdfTrace, ModelBank};
use crate::data::Dataset;
use crate::equilibrium::{EquilibriumMetric, MetricKind};
use crate::kernel_geometry::{EquilibriumLevel, LEVEL_COUNT};
use crate::nn::{Network, Real};
use crate::{Error, Result};

/// The four evaluation criteria at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub kind: MetricKind,
    pub threshold: f64,
    /// Percent of final cascade labels equal to the ground truth.
    pub c1: f64,
    /// Percent of final cascade labels equal to the normal-filter baseline's label.
    pub c2: f64,
    /// Percent of traces whose first and last labels agree.
    pub c3: f64,
    /// Mean number of cascade steps per instance.
    pub c4: f64,
    pub instances: usize,
}

/// Aggregates finished traces into a report.
pub fn criteria_from_traces(
    metric: &EquilibriumMetric,
    traces: &[FdfTrace],
    truth: &[usize],
    baseline: &[usize],
) -> Result<CriteriaReport> {
    let n = traces.len();
    if n == 0 {
        return Err(Error::Empty("evaluation split"));
    }
    if truth.len() != n || baseline.len() != n {
        return Err(Error::Dimension(format!(
            "{n} traces, {} ground-truth labels, {} baseline labels",
            truth.len(),
            baseline.len()
        )));
    }
    let (mut correct, mut agree, mut stable, mut steps) = (0usize, 0usize, 0usize, 0usize);
    for ((trace, &y), &b) in traces.iter().zip(truth).zip(baseline) {
        let last = trace.final_label();
        correct += usize::from(last == y);
        agree += usize::from(last == b);
        stable += usize::from(trace.first_label() == last);
        steps += trace.len();
    }
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    Ok(CriteriaReport {
        kind: metric.kind,
        threshold: metric.threshold,
        c1: pct(correct),
        c2: pct(agree),
        c3: pct(stable),
        c4: steps as f64 / n as f64,
        instances: n,
    })
}

pub fn baseline_labels<T: Real>(data: &Dataset, baseline: &Network<T>) -> Result<Vec<usize>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| Ok(baseline.predict(&to_input::<T>(data.image(i)))?.0))
        .collect()
}

fn to_input<T: Real>(pixels: &[f32]) -> Vec<T> {
    pixels.iter().map(|&x| T::of(x as f64)).collect()
}

/// Every level's output for every instance, so a threshold sweep can replay
/// the cascade without repeating forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutputs {
    probs: Vec<Vec<Vec<f64>>>,
}

impl LevelOutputs {
    pub fn compute<T: Real>(data: &Dataset, bank: &ModelBank<T>) -> Result<Self> {
        bank.require_complete()?;
        let probs = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let input = to_input::<T>(data.image(i));
                EquilibriumLevel::all()
                    .map(|l| bank.network_or_err(l)?.forward(&input))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LevelOutputs { probs })
    }

    /// Builds the cache from explicit `[instance][level]` outputs.
    pub fn from_probs(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if probs.iter().any(|levels| levels.len() != LEVEL_COUNT) {
            return Err(Error::Dimension(format!(
                "every instance needs {LEVEL_COUNT} level outputs"
            )));
        }
        Ok(LevelOutputs { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn trace(&self, instance: usize, metric: &EquilibriumMetric) -> FdfTrace {
        run_cascade(metric, |level| Ok(self.probs[instance][level.index()].clone()))
            .expect("cached outputs cannot fail")
    }

    pub fn traces(&self, metric: &EquilibriumMetric) -> Vec<FdfTrace> {
        (0..self.len()).map(|i| self.trace(i, metric)).collect()
    }
}

/// Runs the cascade over `data` and scores it against the ground truth and
/// the normal-filter `baseline`.
pub fn evaluate_criteria<T: Real>(
    data: &Dataset,
    bank: &ModelBank<T>,
    metric: &EquilibriumMetric,
    baseline: &Network<T>,
) -> Result<CriteriaReport> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    bank.require_complete()?;
    let traces = (0..data.len())
        .into_par_iter()
        .map(|i| Ok(super::fdf_predict(&to_input::<T>(data.image(i)), bank, metric)?.1))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<usize> = (0..data.len()).map(|i| data.label(i)).collect();
    criteria_from_traces(metric, &traces, &truth, &baseline_labels(data, baseline)?)
}

/// One report per metric, sharing a single pass of forward evaluations.
pub fn evaluate_sweep<T: Real>(
    data: &Dataset,
    bank: &ModelBank<T>,
    metrics: &[EquilibriumMetric],
    baseline: &Network<T>,
) -> Result<Vec<CriteriaReport>> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    if metrics.is_empty() {
        return Err(Error::Empty("threshold list"));
    }
    let outputs = LevelOutputs::compute(data, bank)?;
    let truth: Vec<usize> = (0..data.len()).map(|i| data.label(i)).collect();
    let base = baseline_labels(data, baseline)?;
    metrics
        .iter()
        .map(|m| criteria_from_traces(m, &outputs.traces(m), &truth, &base))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::FdfStep;

    fn trace(labels: &[usize]) -> FdfTrace {
        let steps = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| FdfStep {
                level: EquilibriumLevel::new(i).unwrap(),
                label,
                metric: 0.0,
            })
            .collect();
        FdfTrace {
            steps,
            stopped_early: labels.len() < LEVEL_COUNT,
        }
    }

    #[test]
    fn hand_built_traces() {
        // Final labels (correct, wrong, correct); baseline agrees on instances
        // 1 and 2; lengths 1, 2, 9. A one-step trace always has first == last,
        // so instances 1 and 3 count towards C3.
        let traces = vec![trace(&[3]), trace(&[1, 2]), trace(&[5, 0, 0, 0, 0, 0, 0, 0, 5])];
        let truth = [3, 7, 5];
        let baseline = [3, 2, 0];
        let m = EquilibriumMetric::variance(0.05).unwrap();
        let r = criteria_from_traces(&m, &traces, &truth, &baseline).unwrap();
        assert_eq!(r.instances, 3);
        assert!((r.c1 - 200.0 / 3.0).abs() < 1e-9);
        assert!((r.c2 - 200.0 / 3.0).abs() < 1e-9);
        assert!((r.c3 - 200.0 / 3.0).abs() < 1e-9);
        assert!((r.c4 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_step_traces() {
        let traces: Vec<FdfTrace> = (0..5).map(|i| trace(&[i])).collect();
        let labels: Vec<usize> = (0..5).collect();
        let m = EquilibriumMetric::variance(0.0).unwrap();
        let r = criteria_from_traces(&m, &traces, &labels, &labels).unwrap();
        assert_eq!((r.c1, r.c2, r.c3, r.c4), (100.0, 100.0, 100.0, 1.0));
    }

    #[test]
    fn empty_split_is_an_error() {
        let m = EquilibriumMetric::variance(0.0).unwrap();
        assert!(matches!(criteria_from_traces(&m, &[], &[], &[]), Err(Error::Empty(_))));
    }
}

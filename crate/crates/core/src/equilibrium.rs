//! Computable stand-ins for the equilibrium value and the cascade's stopping rule.
//!
//! Both metrics read the softmax output. A peaked output (high variance, low
//! entropy) counts as a confident answer and ends the cascade.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Variance,
    Entropy,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricKind::Variance => "variance",
            MetricKind::Entropy => "entropy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyUnit {
    #[default]
    Nats,
    Bits,
}

/// A metric kind with its stopping threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumMetric {
    pub kind: MetricKind,
    pub threshold: f64,
    #[serde(default)]
    pub unit: EntropyUnit,
}

impl EquilibriumMetric {
    pub fn new(kind: MetricKind, threshold: f64) -> Result<Self> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::param("threshold", format!("{threshold} must be non-negative")));
        }
        Ok(EquilibriumMetric {
            kind,
            threshold,
            unit: EntropyUnit::Nats,
        })
    }

    pub fn variance(threshold: f64) -> Result<Self> {
        Self::new(MetricKind::Variance, threshold)
    }

    pub fn entropy(threshold: f64) -> Result<Self> {
        Self::new(MetricKind::Entropy, threshold)
    }

    pub fn with_unit(mut self, unit: EntropyUnit) -> Self {
        self.unit = unit;
        self
    }

    /// The raw metric value this metric compares against its threshold.
    pub fn measure(&self, probs: &[f64]) -> f64 {
        match self.kind {
            MetricKind::Variance => output_variance(probs),
            MetricKind::Entropy => match self.unit {
                EntropyUnit::Nats => output_entropy(probs),
                EntropyUnit::Bits => output_entropy(probs) / std::f64::consts::LN_2,
            },
        }
    }
}

/// Population variance of the output around the uniform mean `1/K`.
pub fn output_variance(probs: &[f64]) -> f64 {
    let k = probs.len() as f64;
    let mean = 1.0 / k;
    probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / k
}

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn output_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Variance stops on `≥ threshold`, entropy on `≤ threshold`.
pub fn should_stop(metric: &EquilibriumMetric, probs: &[f64]) -> bool {
    let value = metric.measure(probs);
    match metric.kind {
        MetricKind::Variance => value >= metric.threshold,
        MetricKind::Entropy => value <= metric.threshold,
    }
}

/// Equilibrium value where larger means more confident in both kinds:
/// the variance itself, or `ln K - entropy`.
pub fn equilibrium_value(kind: MetricKind, probs: &[f64]) -> f64 {
    match kind {
        MetricKind::Variance => output_variance(probs),
        MetricKind::Entropy => (probs.len() as f64).ln() - output_entropy(probs),
    }
}

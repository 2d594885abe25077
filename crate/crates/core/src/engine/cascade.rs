use super::ModelBank;
use crate::equilibrium::{should_stop, EquilibriumMetric};
use crate::kernel_geometry::EquilibriumLevel;
use crate::nn::{argmax, Real};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdfStep {
    pub level: EquilibriumLevel,
    pub label: usize,
    pub metric: f64,
}

/// Per-instance record of the cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct FdfTrace {
    pub steps: Vec<FdfStep>,
    /// The stopping rule fired before the normal filter was reached.
    pub stopped_early: bool,
}

impl FdfTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first_label(&self) -> usize {
        self.steps.first().expect("trace has at least one step").label
    }

    pub fn final_label(&self) -> usize {
        self.steps.last().expect("trace has at least one step").label
    }
}

/// Walks levels 0, 1, … calling `evaluate` once per level until the metric
/// says stop or the normal filter has been evaluated.
pub fn run_cascade<F>(metric: &EquilibriumMetric, mut evaluate: F) -> Result<FdfTrace>
where
    F: FnMut(EquilibriumLevel) -> Result<Vec<f64>>,
{
    let mut steps = Vec::new();
    for level in EquilibriumLevel::all() {
        let probs = evaluate(level)?;
        steps.push(FdfStep {
            level,
            label: argmax(&probs),
            metric: metric.measure(&probs),
        });
        if should_stop(metric, &probs) {
            return Ok(FdfTrace {
                steps,
                stopped_early: !level.is_normal(),
            });
        }
    }
    Ok(FdfTrace {
        steps,
        stopped_early: false,
    })
}

/// Runs the cascade for one image and returns the last step's label.
pub fn fdf_predict<T: Real>(input: &[T], bank: &ModelBank<T>, metric: &EquilibriumMetric) -> Result<(usize, FdfTrace)> {
    bank.require_complete()?;
    let trace = run_cascade(metric, |level| bank.network_or_err(level)?.forward(input))?;
    Ok((trace.final_label(), trace))
}

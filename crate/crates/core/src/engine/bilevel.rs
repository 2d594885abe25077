use super::FilterSource;
use crate::data::Dataset;
use crate::equilibrium::{equilibrium_value, MetricKind};
use crate::kernel_geometry::{EquilibriumLevel, LEVEL_COUNT};
use crate::nn::{train, Architecture, LossKind, Network, NetworkShape, Real, TrainConfig};
use crate::{Error, Result};

/// Leader/follower filter-order design.
///
/// The leader maximizes filter order (scatteredness, level 0 being the
/// highest); the follower fits the weights with the sum-of-squares loss.
/// A candidate order is accepted when the mean equilibrium value over the
/// validation split exceeds `c`.
#[derive(Debug, Clone)]
pub struct BilevelConfig {
    pub c: f64,
    /// Candidate levels, most scattered first.
    pub order_schedule: Vec<EquilibriumLevel>,
    /// Follower settings. The loss field is ignored: the follower always
    /// minimizes the sum of squared errors.
    pub follower: TrainConfig,
    pub architecture: Architecture,
    pub shape: NetworkShape,
    pub filters: FilterSource,
    /// Convolution stride per level.
    pub strides: [usize; LEVEL_COUNT],
}

impl BilevelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order_schedule.is_empty() {
            return Err(Error::Empty("order schedule"));
        }
        if self.order_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "order_schedule",
                "levels must run from most scattered to most concentrated",
            ));
        }
        if self.c.is_nan() {
            return Err(Error::param("c", "is NaN"));
        }
        self.follower.validate()
    }

    fn follower_config(&self) -> TrainConfig {
        TrainConfig {
            loss: LossKind::SumSquaredError,
            ..self.follower.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateRecord {
    pub level: EquilibriumLevel,
    pub validation_mean: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct BilevelOutcome<T> {
    pub level: EquilibriumLevel,
    pub network: Network<T>,
    /// Whether the returned candidate meets the constraint. When no candidate
    /// does, the last one in the schedule is returned with `false`.
    pub satisfied: bool,
    pub validation_mean: f64,
    pub loss_history: Vec<f64>,
    /// Every candidate examined, in order.
    pub candidates: Vec<CandidateRecord>,
}

/// Mean equilibrium value of `net` over `data`.
pub fn mean_equilibrium<T: Real>(net: &Network<T>, data: &Dataset, kind: MetricKind) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let mut total = 0.0;
    for i in 0..data.len() {
        let input: Vec<T> = data.image(i).iter().map(|&x| T::of(x as f64)).collect();
        total += equilibrium_value(kind, &net.forward(&input)?);
    }
    Ok(total / data.len() as f64)
}

pub fn bilevel_design<T: Real>(
    train_split: &Dataset,
    validation: &Dataset,
    config: &BilevelConfig,
    kind: MetricKind,
) -> Result<BilevelOutcome<T>> {
    config.validate()?;
    if validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let follower = config.follower_config();
    let mut candidates = Vec::with_capacity(config.order_schedule.len());
    let mut last = None;

    for &level in &config.order_schedule {
        let spec = config.filters.filter_for(level)?;
        let mut network = Network::new(
            config.architecture,
            config.shape,
            spec,
            config.strides[level.index()],
            follower.seed,
        )?;
        let loss_history = train(&mut network, train_split, &follower)?;
        let validation_mean = mean_equilibrium(&network, validation, kind)?;
        let satisfied = validation_mean > config.c;
        log::info!(
            "bilevel: level {level} mean equilibrium {validation_mean:.6} (c = {})",
            config.c
        );
        candidates.push(CandidateRecord {
            level,
            validation_mean,
            satisfied,
        });
        if satisfied {
            return Ok(BilevelOutcome {
                level,
                network,
                satisfied,
                validation_mean,
                loss_history,
                candidates,
            });
        }
        last = Some((level, network, validation_mean, loss_history));
    }

    let (level, network, validation_mean, loss_history) = last.expect("schedule is non-empty");
    Ok(BilevelOutcome {
        level,
        network,
        satisfied: false,
        validation_mean,
        loss_history,
        candidates,
    })
}

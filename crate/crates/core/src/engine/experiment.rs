//! Experiment descriptors and the criteria tables they produce.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate_sweep, train_bank, BankConfig, CriteriaReport, FilterSource, ModelBank};
use crate::data::{
    load_cifar10_binary, split, synthetic_dataset_with, verify_checksum, Splits, SyntheticConfig, DEFAULT_FRACTIONS,
};
use crate::equilibrium::{EntropyUnit, EquilibriumMetric, MetricKind};
use crate::kernel_geometry::{EquilibriumLevel, SpiralParams, LEVEL_COUNT};
use crate::nn::{accuracy, train, Architecture, LossKind, Network, NetworkShape, TrainConfig};
use crate::{Error, Result};

/// Stable sub-seed for a named purpose, derived from the root seed.
pub fn derive_seed(root: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    #[default]
    Generated,
    Handcrafted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub source: FilterKind,
    /// Filter-spec file, required for handcrafted filters.
    pub path: Option<PathBuf>,
    pub spiral: SpiralParams,
}

/// Training hyperparameters; the seed comes from the experiment's root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            loss: d.loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePolicy {
    /// The bank's level-8 entry serves as the normal-filter network.
    #[default]
    BankEntry,
    /// A separately trained normal-filter network with the same seed.
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSourceKind {
    #[default]
    Synthetic,
    Cifar10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub n: usize,
    pub classes: usize,
    pub noise: f64,
    pub contrast: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        SyntheticSettings {
            n: d.n,
            classes: d.classes,
            noise: d.noise,
            contrast: d.contrast,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CifarSettings {
    /// Directory holding the binary batches.
    pub dir: PathBuf,
    /// Batch files, relative to `dir`.
    pub files: Vec<PathBuf>,
    /// Optional hex SHA-256 per file name, checked before loading.
    pub sha256: BTreeMap<String, String>,
    /// Where the archive can be fetched from; informational only.
    pub url: String,
}

impl Default for CifarSettings {
    fn default() -> Self {
        CifarSettings {
            dir: PathBuf::from("data/cifar-10-batches-bin"),
            files: (1..=5)
                .map(|i| PathBuf::from(format!("data_batch_{i}.bin")))
                .chain([PathBuf::from("test_batch.bin")])
                .collect(),
            sha256: BTreeMap::new(),
            url: "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSourceKind,
    pub fractions: [f64; 3],
    pub synthetic: SyntheticSettings,
    pub cifar10: CifarSettings,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSourceKind::default(),
            fractions: DEFAULT_FRACTIONS,
            synthetic: SyntheticSettings::default(),
            cifar10: CifarSettings::default(),
        }
    }
}

impl DataConfig {
    /// Paths of the data files this configuration reads.
    pub fn input_files(&self) -> Vec<PathBuf> {
        match self.source {
            DataSourceKind::Synthetic => Vec::new(),
            DataSourceKind::Cifar10 => self.cifar10.files.iter().map(|f| self.cifar10.dir.join(f)).collect(),
        }
    }

    pub fn load(&self, root_seed: u64) -> Result<Splits> {
        let full = match self.source {
            DataSourceKind::Synthetic => {
                let s = &self.synthetic;
                synthetic_dataset_with(&SyntheticConfig {
                    n: s.n,
                    classes: s.classes,
                    seed: derive_seed(root_seed, "synthetic"),
                    noise: s.noise,
                    contrast: s.contrast,
                })?
            }
            DataSourceKind::Cifar10 => {
                let cifar = &self.cifar10;
                let files = self.input_files();
                if let Some(missing) = files.iter().find(|p| !p.exists()) {
                    return Err(Error::DataFormat(format!(
                        "{} not found; download and unpack {} so that {} holds the binary batches",
                        missing.display(),
                        cifar.url,
                        cifar.dir.display()
                    )));
                }
                for (name, expected) in &cifar.sha256 {
                    verify_checksum(cifar.dir.join(name), expected)?;
                }
                load_cifar10_binary(&files)?
            }
        };
        split(&full, self.fractions, derive_seed(root_seed, "split"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilevelSettings {
    /// Equilibrium constraint threshold.
    pub c: f64,
    /// Level indices to try, most scattered first. Empty means all nine.
    pub schedule: Vec<usize>,
    /// Follower learning rate, if it should differ from `train.learning_rate`.
    /// The sum-of-squares loss has much smaller gradients than cross-entropy.
    pub learning_rate: Option<f64>,
    /// Follower epochs, if they should differ from `train.epochs`.
    pub epochs: Option<usize>,
}

impl Default for BilevelSettings {
    fn default() -> Self {
        BilevelSettings {
            c: 0.02,
            schedule: Vec::new(),
            learning_rate: None,
            epochs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for reports and manifests. Defaults to `runs/<name>`.
    pub dir: Option<PathBuf>,
    /// Directory for bank checkpoints. Defaults to `<dir>/bank`.
    pub bank_dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

fn default_workers() -> usize {
    1
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDescriptor {
    pub name: String,
    /// Root seed; every other seed is derived from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub architecture: Architecture,
    #[serde(default)]
    pub network: NetworkShape,
    pub metric: MetricKind,
    #[serde(default)]
    pub entropy_unit: EntropyUnit,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub warm_start: bool,
    /// Per-level convolution stride; all ones by default.
    #[serde(default)]
    pub strides: Option<[usize; LEVEL_COUNT]>,
    #[serde(default)]
    pub baseline: BaselinePolicy,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub bilevel: BilevelSettings,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentDescriptor {
    /// A descriptor with every optional field at its default.
    pub fn new(name: impl Into<String>, architecture: Architecture, metric: MetricKind) -> Self {
        ExperimentDescriptor {
            name: name.into(),
            seed: default_seed(),
            architecture,
            network: NetworkShape::default(),
            metric,
            entropy_unit: EntropyUnit::default(),
            thresholds: Vec::new(),
            filters: FilterConfig::default(),
            train: TrainSettings::default(),
            warm_start: false,
            strides: None,
            baseline: BaselinePolicy::default(),
            data: DataConfig::default(),
            bilevel: BilevelSettings::default(),
            output: OutputConfig::default(),
            workers: default_workers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::param("name", "must not be empty"));
        }
        if self.workers == 0 {
            return Err(Error::param("workers", "must be at least 1"));
        }
        if let Some(strides) = &self.strides {
            if strides.contains(&0) {
                return Err(Error::param("strides", "every stride must be positive"));
            }
        }
        if self.filters.source == FilterKind::Handcrafted && self.filters.path.is_none() {
            return Err(Error::param(
                "filters.path",
                "handcrafted filters need a filter-spec file",
            ));
        }
        self.filters.spiral.validate()?;
        self.train_config().validate()?;
        self.follower_config().validate()?;
        self.bilevel_schedule()?;
        self.data.fractions.iter().try_for_each(|f| {
            if (0.0..=1.0).contains(f) {
                Ok(())
            } else {
                Err(Error::param("data.fractions", format!("{f} outside [0, 1]")))
            }
        })?;
        for t in &self.thresholds {
            EquilibriumMetric::new(self.metric, *t)
                .map_err(|_| Error::param("thresholds", format!("{t} is negative")))?;
        }
        Ok(())
    }

    /// Resolves relative paths against `base` (usually the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.filters.path.as_mut() {
            fix(p);
        }
        fix(&mut self.data.cifar10.dir);
        if let Some(p) = self.output.dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.output.bank_dir.as_mut() {
            fix(p);
        }
        if self.output.dir.is_none() {
            self.output.dir = Some(base.join("runs").join(&self.name));
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }

    pub fn bank_dir(&self) -> PathBuf {
        self.output
            .bank_dir
            .clone()
            .unwrap_or_else(|| self.output_dir().join("bank"))
    }

    pub fn train_seed(&self) -> u64 {
        derive_seed(self.seed, "train")
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: self.train_seed(),
            loss: t.loss,
        }
    }

    /// Training settings for the bi-level follower.
    pub fn follower_config(&self) -> TrainConfig {
        let mut config = self.train_config();
        config.loss = LossKind::SumSquaredError;
        if let Some(lr) = self.bilevel.learning_rate {
            config.learning_rate = lr;
        }
        if let Some(epochs) = self.bilevel.epochs {
            config.epochs = epochs;
        }
        config
    }

    pub fn filter_source(&self) -> Result<FilterSource> {
        match self.filters.source {
            FilterKind::Generated => Ok(FilterSource::Generated(self.filters.spiral.clone())),
            FilterKind::Handcrafted => {
                let path = self
                    .filters
                    .path
                    .as_ref()
                    .ok_or(Error::param("filters.path", "missing"))?;
                FilterSource::from_file(path)
            }
        }
    }

    pub fn bank_config(&self) -> BankConfig {
        let mut config = BankConfig::new(self.architecture, self.network, self.train_config());
        config.warm_start = self.warm_start;
        if let Some(strides) = self.strides {
            config.strides = strides;
        }
        config
    }

    pub fn metrics(&self) -> Result<Vec<EquilibriumMetric>> {
        if self.thresholds.is_empty() {
            return Err(Error::Empty("threshold list"));
        }
        self.thresholds
            .iter()
            .map(|&t| Ok(EquilibriumMetric::new(self.metric, t)?.with_unit(self.entropy_unit)))
            .collect()
    }

    pub fn bilevel_schedule(&self) -> Result<Vec<EquilibriumLevel>> {
        if self.bilevel.schedule.is_empty() {
            return Ok(EquilibriumLevel::all().collect());
        }
        self.bilevel
            .schedule
            .iter()
            .map(|&i| EquilibriumLevel::new(i))
            .collect()
    }

    /// Trains the normal-filter network used as the separate baseline.
    pub fn train_baseline(&self, splits: &Splits) -> Result<(Network<f32>, Vec<f64>)> {
        let source = self.filter_source()?;
        let spec = source.filter_for(EquilibriumLevel::NORMAL)?;
        let stride = self.bank_config().strides[EquilibriumLevel::NORMAL.index()];
        let config = self.train_config();
        let mut net = Network::new(self.architecture, self.network, spec, stride, config.seed)?;
        let history = train(&mut net, &splits.train, &config)?;
        Ok((net, history))
    }
}

/// Criteria for every threshold of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub name: String,
    pub architecture: Architecture,
    pub kind: MetricKind,
    /// Test accuracy of the normal-filter baseline, in percent.
    pub baseline_accuracy: Option<f64>,
    pub reports: Vec<CriteriaReport>,
}

impl ExperimentTable {
    /// `threshold,c1,c2,c3,c4` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,c1,c2,c3,c4\n");
        for r in &self.reports {
            writeln!(out, "{},{:.4},{:.4},{:.4},{:.4}", r.threshold, r.c1, r.c2, r.c3, r.c4).unwrap();
        }
        out
    }

    /// Text table with thresholds as columns and one row per criterion.
    pub fn render_text(&self) -> String {
        let header = match self.kind {
            MetricKind::Variance => "Variance Threshold",
            MetricKind::Entropy => "Entropy Threshold",
        };
        let mut rows: Vec<(String, Vec<String>)> = vec![(
            header.to_string(),
            self.reports.iter().map(|r| format!("{}", r.threshold)).collect(),
        )];
        type Column = (&'static str, fn(&CriteriaReport) -> f64, usize);
        let criteria: [Column; 4] = [
            ("Criterion 1", |r| r.c1, 2),
            ("Criterion 2", |r| r.c2, 2),
            ("Criterion 3", |r| r.c3, 2),
            ("Criterion 4", |r| r.c4, 3),
        ];
        for (label, get, digits) in criteria {
            rows.push((
                label.to_string(),
                self.reports.iter().map(|r| format!("{:.*}", digits, get(r))).collect(),
            ));
        }
        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let col_w: Vec<usize> = (0..self.reports.len())
            .map(|c| rows.iter().map(|(_, cells)| cells[c].len()).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        write!(
            out,
            "Results of {} ({}, {} metric",
            self.name, self.architecture, self.kind
        )
        .unwrap();
        if let Some(acc) = self.baseline_accuracy {
            write!(out, "; normal-filter precision {acc:.2}%").unwrap();
        }
        out.push_str(")\n");
        let rule = format!(
            "{}-+-{}\n",
            "-".repeat(label_w),
            col_w.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-")
        );
        for (i, (label, cells)) in rows.iter().enumerate() {
            let joined: Vec<String> = cells.iter().zip(&col_w).map(|(c, w)| format!("{c:>w$}")).collect();
            writeln!(out, "{label:<label_w$} | {}", joined.join(" | ")).unwrap();
            if i == 0 {
                out.push_str(&rule);
            }
        }
        out
    }
}

/// Reads a criteria CSV written by [`ExperimentTable::to_csv`].
pub fn parse_criteria_csv(text: &str, kind: MetricKind) -> Result<Vec<CriteriaReport>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == "threshold,c1,c2,c3,c4" => {}
        _ => {
            return Err(Error::DataFormat(
                "criteria CSV must start with `threshold,c1,c2,c3,c4`".into(),
            ))
        }
    }
    lines
        .map(|(i, line)| {
            let values: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::DataFormat(format!("line {}: {e}", i + 1)))?;
            let [threshold, c1, c2, c3, c4] = values[..] else {
                return Err(Error::DataFormat(format!("line {}: expected 5 columns", i + 1)));
            };
            Ok(CriteriaReport {
                kind,
                threshold,
                c1,
                c2,
                c3,
                c4,
                instances: 0,
            })
        })
        .collect()
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub table: ExperimentTable,
    pub bank: ModelBank<f32>,
    pub baseline: Network<f32>,
    /// Whether the bank was loaded from `bank_dir` rather than trained.
    pub bank_loaded: bool,
}

/// Loads the data, trains (or loads) the bank and baseline, and evaluates
/// the criteria at every configured threshold.
pub fn run_experiment(desc: &ExperimentDescriptor) -> Result<ExperimentRun> {
    desc.validate()?;
    let metrics = desc.metrics()?;
    let splits = desc.data.load(desc.seed)?;
    let bank_dir = desc.bank_dir();
    let (bank, bank_loaded) = match ModelBank::<f32>::load(&bank_dir) {
        Ok(bank) if bank.is_complete() && bank.architecture() == desc.architecture => (bank, true),
        _ => {
            let levels: Vec<EquilibriumLevel> = EquilibriumLevel::all().collect();
            (
                train_bank(&splits.train, &levels, &desc.filter_source()?, &desc.bank_config())?,
                false,
            )
        }
    };
    let baseline = match desc.baseline {
        BaselinePolicy::BankEntry => bank.network_or_err(EquilibriumLevel::NORMAL)?.clone(),
        BaselinePolicy::Separate => desc.train_baseline(&splits)?.0,
    };
    let table = evaluate_table(desc, &splits, &bank, &baseline, &metrics)?;
    Ok(ExperimentRun {
        table,
        bank,
        baseline,
        bank_loaded,
    })
}

/// Scores an existing bank on the test split.
pub(crate) fn evaluate_table(
    desc: &ExperimentDescriptor,
    splits: &Splits,
    bank: &ModelBank<f32>,
    baseline: &Network<f32>,
    metrics: &[EquilibriumMetric],
) -> Result<ExperimentTable> {
    let reports = evaluate_sweep(&splits.test, bank, metrics, baseline)?;
    Ok(ExperimentTable {
        name: desc.name.clone(),
        architecture: desc.architecture,
        kind: desc.metric,
        baseline_accuracy: Some(accuracy(baseline, &splits.test)?),
        reports,
    })
}

impl ExperimentDescriptor {
    /// Scores a given bank and baseline on this experiment's test split.
    pub fn evaluate(&self, splits: &Splits, bank: &ModelBank<f32>, baseline: &Network<f32>) -> Result<ExperimentTable> {
        evaluate_table(self, splits, bank, baseline, &self.metrics()?)
    }
}

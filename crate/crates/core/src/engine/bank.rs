use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::kernel_geometry::{
    generate_filter, load_filter_spec, EquilibriumLevel, FilterSpec, SpiralParams, LEVEL_COUNT,
};
use crate::nn::{load_checkpoint, save_checkpoint, train, Architecture, Network, NetworkShape, Real, TrainConfig};
use crate::{Error, Result};

/// Where a bank's filters came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    GeneratedSpiral,
    HandcraftedFile,
    Bilevel,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::GeneratedSpiral => "generated_spiral",
            Provenance::HandcraftedFile => "handcrafted_file",
            Provenance::Bilevel => "bilevel",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Provenance::GeneratedSpiral,
            Provenance::HandcraftedFile,
            Provenance::Bilevel,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }
}

#[derive(Debug, Clone)]
pub enum FilterSource {
    Generated(SpiralParams),
    Handcrafted(BTreeMap<EquilibriumLevel, FilterSpec>),
}

impl FilterSource {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(FilterSource::Handcrafted(load_filter_spec(path)?))
    }

    pub fn filter_for(&self, level: EquilibriumLevel) -> Result<FilterSpec> {
        match self {
            FilterSource::Generated(params) => generate_filter(level, params),
            FilterSource::Handcrafted(specs) => specs.get(&level).cloned().ok_or_else(|| Error::Generation {
                level: level.index(),
                reason: "handcrafted filter file does not declare this level".into(),
            }),
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            FilterSource::Generated(_) => Provenance::GeneratedSpiral,
            FilterSource::Handcrafted(_) => Provenance::HandcraftedFile,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankConfig {
    pub architecture: Architecture,
    pub shape: NetworkShape,
    pub train: TrainConfig,
    /// Start each level's dense layers from the previous level's.
    pub warm_start: bool,
    /// Convolution stride per level.
    pub strides: [usize; LEVEL_COUNT],
}

impl BankConfig {
    pub fn new(architecture: Architecture, shape: NetworkShape, train: TrainConfig) -> Self {
        BankConfig {
            architecture,
            shape,
            train,
            warm_start: false,
            strides: [1; LEVEL_COUNT],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry<T> {
    pub network: Network<T>,
    pub loss_history: Vec<f64>,
    pub seed: u64,
    pub warm_started: bool,
}

/// Per-level trained networks sharing one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank<T> {
    architecture: Architecture,
    provenance: Provenance,
    entries: BTreeMap<EquilibriumLevel, BankEntry<T>>,
}

const BANK_META: &str = "bank.meta";

fn checkpoint_name(level: EquilibriumLevel) -> String {
    format!("level_{level}.ckpt")
}

impl<T: Real> ModelBank<T> {
    pub fn new(architecture: Architecture, provenance: Provenance) -> Self {
        ModelBank {
            architecture,
            provenance,
            entries: BTreeMap::new(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn insert(&mut self, entry: BankEntry<T>) -> Result<()> {
        let net = &entry.network;
        if net.architecture() != self.architecture {
            return Err(Error::Bank(format!(
                "entry for level {} is {}, bank holds {}",
                net.level(),
                net.architecture(),
                self.architecture
            )));
        }
        if net.level().is_normal() {
            let mut offsets = net.filter_spec().offsets().to_vec();
            offsets.sort();
            let mut normal = FilterSpec::normal().offsets().to_vec();
            normal.sort();
            if offsets != normal {
                return Err(Error::Bank("level 8 entry must use the contiguous 3x3 filter".into()));
            }
        }
        self.entries.insert(net.level(), entry);
        Ok(())
    }

    pub fn insert_network(&mut self, network: Network<T>) -> Result<()> {
        self.insert(BankEntry {
            network,
            loss_history: Vec::new(),
            seed: 0,
            warm_started: false,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.entries.len() == LEVEL_COUNT
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            return Ok(());
        }
        let missing: Vec<String> = EquilibriumLevel::all()
            .filter(|l| !self.entries.contains_key(l))
            .map(|l| l.to_string())
            .collect();
        Err(Error::Bank(format!("missing levels {}", missing.join(", "))))
    }

    pub fn entry(&self, level: EquilibriumLevel) -> Option<&BankEntry<T>> {
        self.entries.get(&level)
    }

    pub fn network(&self, level: EquilibriumLevel) -> Option<&Network<T>> {
        self.entries.get(&level).map(|e| &e.network)
    }

    pub fn entries(&self) -> impl Iterator<Item = &BankEntry<T>> {
        self.entries.values()
    }

    pub(crate) fn network_or_err(&self, level: EquilibriumLevel) -> Result<&Network<T>> {
        self.network(level)
            .ok_or_else(|| Error::Bank(format!("no network for level {level}")))
    }
}

impl ModelBank<f32> {
    /// Writes one checkpoint per level plus a small metadata file.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut meta = String::new();
        writeln!(meta, "architecture {}", self.architecture.id()).unwrap();
        writeln!(meta, "provenance {}", self.provenance.as_str()).unwrap();
        let mut written = Vec::new();
        for (level, entry) in &self.entries {
            let path = dir.join(checkpoint_name(*level));
            save_checkpoint(&entry.network, &path)?;
            written.push(path);
        }
        let meta_path = dir.join(BANK_META);
        fs::write(&meta_path, meta)?;
        written.push(meta_path);
        Ok(written)
    }

    /// Loads every `level_<i>.ckpt` found in `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta = fs::read_to_string(dir.join(BANK_META))
            .map_err(|e| Error::Bank(format!("{}: no bank metadata ({e})", dir.display())))?;
        let mut architecture = None;
        let mut provenance = Provenance::GeneratedSpiral;
        for line in meta.lines() {
            match line.split_once(' ') {
                Some(("architecture", v)) => {
                    architecture = v.trim().parse().ok().and_then(Architecture::from_id);
                }
                Some(("provenance", v)) => {
                    provenance = Provenance::parse(v.trim())
                        .ok_or_else(|| Error::Bank(format!("unknown provenance `{}`", v.trim())))?;
                }
                _ => {}
            }
        }
        let architecture = architecture.ok_or_else(|| Error::Bank("metadata lacks an architecture id".into()))?;
        let mut bank = ModelBank::new(architecture, provenance);
        for level in EquilibriumLevel::all() {
            let path = dir.join(checkpoint_name(level));
            if path.exists() {
                let network = load_checkpoint(&path)?;
                if network.level() != level {
                    return Err(Error::Bank(format!(
                        "{} holds level {}",
                        path.display(),
                        network.level()
                    )));
                }
                bank.insert_network(network)?;
            }
        }
        if bank.is_empty() {
            return Err(Error::Bank(format!("{} holds no checkpoints", dir.display())));
        }
        Ok(bank)
    }
}

fn train_level<T: Real>(
    data: &Dataset,
    level: EquilibriumLevel,
    source: &FilterSource,
    config: &BankConfig,
    previous: Option<&Network<T>>,
) -> Result<BankEntry<T>> {
    let spec = source.filter_for(level)?;
    let seed = config.train.seed;
    let mut network = Network::new(
        config.architecture,
        config.shape,
        spec,
        config.strides[level.index()],
        seed,
    )?;
    let warm_started = previous.is_some_and(|prev| network.adopt_dense_layers(prev));
    let loss_history = train(&mut network, data, &config.train)?;
    log::info!(
        "level {level} trained: final loss {:.5}",
        loss_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(BankEntry {
        network,
        loss_history,
        seed,
        warm_started,
    })
}

/// Trains one network per requested level.
///
/// Every level starts from the same seed, so the level-8 entry equals a
/// plain normal-filter run with the same configuration. With warm start the
/// levels are trained in order, each adopting its predecessor's dense layers;
/// otherwise they are independent and trained in parallel.
pub fn train_bank<T: Real>(
    data: &Dataset,
    levels: &[EquilibriumLevel],
    source: &FilterSource,
    config: &BankConfig,
) -> Result<ModelBank<T>> {
    if levels.is_empty() {
        return Err(Error::Empty("level list"));
    }
    config.train.validate()?;
    let mut sorted = levels.to_vec();
    sorted.sort();
    sorted.dedup();

    let entries: Vec<BankEntry<T>> = if config.warm_start {
        let mut out: Vec<BankEntry<T>> = Vec::with_capacity(sorted.len());
        for &level in &sorted {
            let entry = train_level(data, level, source, config, out.last().map(|e| &e.network))?;
            out.push(entry);
        }
        out
    } else {
        sorted
            .par_iter()
            .map(|&level| train_level(data, level, source, config, None))
            .collect::<Result<_>>()?
    };

    let mut bank = ModelBank::new(config.architecture, source.provenance());
    for entry in entries {
        bank.insert(entry)?;
    }
    Ok(bank)
}

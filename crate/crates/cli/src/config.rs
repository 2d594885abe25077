//! Experiment configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use fdf::engine::ExperimentDescriptor;
use toml::{Table, Value};

/// Overrides shared by every config-driven command.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Override a config key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Parses `raw` as a TOML value, falling back to a plain string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets the dotted `key` in `table`, creating intermediate tables.
pub fn set_key(table: &mut Table, key: &str, value: Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .with_context(|| format!("empty key in `{key}`"))?;
    let mut current = table;
    for part in parts {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        current = match entry {
            Value::Table(t) => t,
            _ => bail!("`{part}` in `{key}` is not a table"),
        };
    }
    current.insert(last.to_string(), value);
    Ok(())
}

impl Overrides {
    pub fn apply(&self, table: &mut Table) -> anyhow::Result<()> {
        for item in &self.sets {
            let (key, raw) = item
                .split_once('=')
                .with_context(|| format!("`--set {item}` is not KEY=VALUE"))?;
            set_key(table, key.trim(), parse_value(raw.trim()))?;
        }
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).context("--seed must fit in a signed 64-bit integer")?;
            set_key(table, "seed", Value::Integer(seed))?;
        }
        if let Some(workers) = self.workers {
            set_key(table, "workers", Value::Integer(workers as i64))?;
        }
        if let Some(dir) = &self.out_dir {
            set_key(table, "output.dir", Value::String(dir.display().to_string()))?;
        }
        Ok(())
    }
}

/// A loaded configuration and the table it came from, after overrides.
pub struct LoadedConfig {
    pub descriptor: ExperimentDescriptor,
    pub snapshot: Table,
    pub path: PathBuf,
}

pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut table: Table = text
        .parse()
        .with_context(|| format!("{} is not valid TOML", path.display()))?;
    overrides.apply(&mut table)?;
    let mut descriptor: ExperimentDescriptor = table
        .clone()
        .try_into()
        .with_context(|| format!("invalid configuration in {}", path.display()))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    descriptor.resolve_paths(base);
    descriptor.validate().context("invalid configuration")?;
    Ok(LoadedConfig {
        descriptor,
        snapshot: table,
        path: path.to_path_buf(),
    })
}

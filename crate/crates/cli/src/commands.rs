use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fdf::data::Splits;
use fdf::engine::{
    bilevel_design, derive_seed, train_bank, BaselinePolicy, BilevelConfig, ExperimentDescriptor, ModelBank,
};
use fdf::kernel_geometry::{
    format_filter_specs, generate_filter, spiral_points, spiral_points_csv, EquilibriumLevel, SpiralParams,
};
use fdf::nn::{accuracy, load_checkpoint_expecting, save_checkpoint, Network};

use crate::config::{self, LoadedConfig, Overrides};
use crate::manifest::RunManifest;

pub const EXIT_UNSATISFIED: u8 = 3;

const BASELINE_CHECKPOINT: &str = "baseline.ckpt";

fn write_file(path: &Path, contents: &str, outputs: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    outputs.push(path.to_path_buf());
    Ok(())
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn init_workers(workers: usize) {
    // A second initialization only happens in-process (tests); keep the first pool.
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        log::debug!("worker pool already initialized: {e}");
    }
}

fn start(config_path: &Path, overrides: &Overrides, command: &str) -> anyhow::Result<(LoadedConfig, RunManifest)> {
    let loaded = config::load(config_path, overrides)?;
    init_workers(loaded.descriptor.workers);
    let mut manifest = RunManifest::new(command, loaded.snapshot.clone());
    let desc = &loaded.descriptor;
    manifest.seeds.insert("root".into(), desc.seed);
    for purpose in ["train", "split", "synthetic"] {
        manifest.seeds.insert(purpose.into(), derive_seed(desc.seed, purpose));
    }
    manifest.input(&loaded.path)?;
    if let Some(path) = &desc.filters.path {
        manifest.input(path)?;
    }
    Ok((loaded, manifest))
}

fn load_data(desc: &ExperimentDescriptor, manifest: &mut RunManifest) -> anyhow::Result<Splits> {
    let splits = manifest.timed("load_data", || desc.data.load(desc.seed))?;
    for path in desc.data.input_files() {
        manifest.input(&path)?;
    }
    log::info!(
        "data: {} train, {} validation, {} test",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    Ok(splits)
}

fn loss_csv(rows: impl IntoIterator<Item = (Option<usize>, Vec<f64>)>) -> String {
    let mut out = String::new();
    for (i, (level, history)) in rows.into_iter().enumerate() {
        if i == 0 {
            out.push_str(if level.is_some() {
                "level,epoch,loss\n"
            } else {
                "epoch,loss\n"
            });
        }
        for (epoch, loss) in history.iter().enumerate() {
            match level {
                Some(l) => writeln!(out, "{l},{},{loss:.9}", epoch + 1).unwrap(),
                None => writeln!(out, "{},{loss:.9}", epoch + 1).unwrap(),
            }
        }
    }
    out
}

#[derive(Debug, clap::Args)]
pub struct GenKernelArgs {
    /// Level to generate (0 = most scattered, 8 = normal). Repeatable; all levels by default.
    #[arg(long = "level", value_parser = clap::value_parser!(u8).range(0..9))]
    pub levels: Vec<u8>,
    /// Take spiral parameters from this experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub turns: Option<u32>,
    #[arg(long)]
    pub theta_samples: Option<usize>,
    /// Fixed spiral normalizer for the point CSVs (default: each level's automatic value).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn gen_kernel(args: &GenKernelArgs) -> anyhow::Result<u8> {
    let (mut params, mut manifest) = match &args.config {
        Some(path) => {
            let (loaded, manifest) = start(path, &Overrides::default(), "gen-kernel")?;
            (loaded.descriptor.filters.spiral.clone(), manifest)
        }
        None => (
            SpiralParams::default(),
            RunManifest::new("gen-kernel", toml::Table::new()),
        ),
    };
    if let Some(alpha) = args.alpha {
        params.alpha = alpha;
    }
    if let Some(turns) = args.turns {
        params.turns = turns;
    }
    if let Some(samples) = args.theta_samples {
        params.theta_samples = samples;
    }
    params.validate()?;
    let levels: Vec<EquilibriumLevel> = if args.levels.is_empty() {
        EquilibriumLevel::all().collect()
    } else {
        args.levels
            .iter()
            .map(|&l| EquilibriumLevel::new(l as usize))
            .collect::<fdf::Result<_>>()?
    };

    create_dir(&args.out)?;
    let mut outputs = Vec::new();
    let specs = levels
        .iter()
        .map(|&l| generate_filter(l, &params))
        .collect::<fdf::Result<Vec<_>>>()?;
    write_file(
        &args.out.join("filters.txt"),
        &format_filter_specs(&specs),
        &mut outputs,
    )?;
    for spec in &specs {
        let level = spec.level();
        let beta = args.beta.unwrap_or_else(|| params.auto_beta(level));
        let points = spiral_points(level.scaled(), params.alpha, beta, &params)?;
        write_file(
            &args.out.join(format!("spiral_level_{level}.csv")),
            &spiral_points_csv(&points),
            &mut outputs,
        )?;
        println!(
            "level {level}: {} cells, extent {}, mean norm {:.4}",
            spec.cell_count(),
            spec.extent(),
            spec.mean_norm()
        );
    }
    manifest.outputs(&outputs)?;
    manifest.write(&args.out.join("manifest_gen_kernel.toml"))?;
    Ok(0)
}

#[derive(Debug, clap::Args)]
pub struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn train(args: &ConfigArgs) -> anyhow::Result<u8> {
    let (loaded, mut manifest) = start(&args.config, &args.overrides, "train")?;
    let desc = &loaded.descriptor;
    let splits = load_data(desc, &mut manifest)?;
    let (net, history) = manifest.timed("train", || desc.train_baseline(&splits))?;
    let out = desc.output_dir();
    create_dir(&out)?;
    let mut outputs = Vec::new();
    let ckpt = out.join(BASELINE_CHECKPOINT);
    save_checkpoint(&net, &ckpt)?;
    outputs.push(ckpt);
    write_file(
        &out.join("loss_baseline.csv"),
        &loss_csv([(None, history)]),
        &mut outputs,
    )?;
    let test_acc = accuracy(&net, &splits.test)?;
    let val_acc = accuracy(&net, &splits.validation)?;
    manifest.result("test_accuracy", test_acc);
    manifest.result("validation_accuracy", val_acc);
    manifest.outputs(&outputs)?;
    manifest.write(&out.join("manifest_train.toml"))?;
    println!(
        "{} normal-filter network: test accuracy {test_acc:.2}%",
        desc.architecture
    );
    Ok(0)
}

pub fn train_bank_cmd(args: &ConfigArgs) -> anyhow::Result<u8> {
    let (loaded, mut manifest) = start(&args.config, &args.overrides, "train-bank")?;
    let desc = &loaded.descriptor;
    let splits = load_data(desc, &mut manifest)?;
    let source = desc.filter_source()?;
    let levels: Vec<EquilibriumLevel> = EquilibriumLevel::all().collect();
    let bank: ModelBank<f32> = manifest.timed("train_bank", || {
        train_bank(&splits.train, &levels, &source, &desc.bank_config())
    })?;

    let out = desc.output_dir();
    create_dir(&out)?;
    let mut outputs = bank.save(desc.bank_dir())?;
    let histories = bank
        .entries()
        .map(|e| (Some(e.network.level().index()), e.loss_history.clone()));
    write_file(&out.join("loss_history.csv"), &loss_csv(histories), &mut outputs)?;
    for entry in bank.entries() {
        let acc = accuracy(&entry.network, &splits.test)?;
        let level = entry.network.level();
        manifest.result(&format!("level_{level}_test_accuracy"), acc);
        println!("level {level}: test accuracy {acc:.2}%");
    }
    manifest.outputs(&outputs)?;
    manifest.write(&out.join("manifest_train_bank.toml"))?;
    println!("bank written to {}", desc.bank_dir().display());
    Ok(0)
}

pub fn fdf_eval(args: &ConfigArgs) -> anyhow::Result<u8> {
    let (loaded, mut manifest) = start(&args.config, &args.overrides, "fdf-eval")?;
    let desc = &loaded.descriptor;
    if desc.thresholds.is_empty() {
        anyhow::bail!(
            "no thresholds configured; set `thresholds = [...]` in the config or pass --set thresholds=[...]"
        );
    }
    let bank_dir = desc.bank_dir();
    let bank = ModelBank::<f32>::load(&bank_dir)
        .and_then(|b| b.require_complete().map(|_| b))
        .map_err(|e| {
            anyhow::Error::new(e).context(format!(
                "no complete model bank in {}; run `fdf train-bank --config {}` first",
                bank_dir.display(),
                args.config.display()
            ))
        })?;
    if bank.architecture() != desc.architecture {
        return Err(anyhow::Error::new(fdf::Error::Bank(format!(
            "bank in {} is {}, config asks for {}",
            bank_dir.display(),
            bank.architecture(),
            desc.architecture
        ))));
    }
    let splits = load_data(desc, &mut manifest)?;
    let baseline: Network<f32> = match desc.baseline {
        BaselinePolicy::BankEntry => bank
            .network(EquilibriumLevel::NORMAL)
            .expect("bank is complete")
            .clone(),
        BaselinePolicy::Separate => {
            let path = desc.output_dir().join(BASELINE_CHECKPOINT);
            manifest.input(&path).with_context(|| {
                format!(
                    "separate baseline requested; run `fdf train --config {}` first",
                    args.config.display()
                )
            })?;
            load_checkpoint_expecting(&path, desc.architecture)?
        }
    };
    let table = manifest.timed("evaluate", || desc.evaluate(&splits, &bank, &baseline))?;

    let out = desc.output_dir();
    create_dir(&out)?;
    let mut outputs = Vec::new();
    let stem = format!("criteria_{}", desc.metric);
    write_file(&out.join(format!("{stem}.csv")), &table.to_csv(), &mut outputs)?;
    let text = table.render_text();
    write_file(&out.join(format!("{stem}.txt")), &text, &mut outputs)?;
    if let Some(acc) = table.baseline_accuracy {
        manifest.result("baseline_test_accuracy", acc);
    }
    manifest.outputs(&outputs)?;
    manifest.write(&out.join("manifest_fdf_eval.toml"))?;
    print!("{text}");
    Ok(0)
}

pub fn bilevel(args: &ConfigArgs) -> anyhow::Result<u8> {
    let (loaded, mut manifest) = start(&args.config, &args.overrides, "bilevel")?;
    let desc = &loaded.descriptor;
    let splits = load_data(desc, &mut manifest)?;
    let config = BilevelConfig {
        c: desc.bilevel.c,
        order_schedule: desc.bilevel_schedule()?,
        follower: desc.follower_config(),
        architecture: desc.architecture,
        shape: desc.network,
        filters: desc.filter_source()?,
        strides: desc.bank_config().strides,
    };
    let outcome = manifest.timed("bilevel", || {
        bilevel_design::<f32>(&splits.train, &splits.validation, &config, desc.metric)
    })?;

    let out = desc.output_dir();
    create_dir(&out)?;
    let mut outputs = Vec::new();
    let ckpt = out.join("bilevel.ckpt");
    save_checkpoint(&outcome.network, &ckpt)?;
    outputs.push(ckpt);
    let mut csv = String::from("level,validation_mean,satisfied\n");
    for c in &outcome.candidates {
        writeln!(csv, "{},{:.9},{}", c.level, c.validation_mean, c.satisfied).unwrap();
    }
    write_file(&out.join("bilevel_candidates.csv"), &csv, &mut outputs)?;
    write_file(
        &out.join("loss_bilevel.csv"),
        &loss_csv([(None, outcome.loss_history.clone())]),
        &mut outputs,
    )?;
    manifest.result("chosen_level", outcome.level.index() as i64);
    manifest.result("satisfied", outcome.satisfied);
    manifest.result("validation_mean", outcome.validation_mean);
    manifest.outputs(&outputs)?;
    manifest.write(&out.join("manifest_bilevel.toml"))?;

    println!(
        "chosen level {} (equilibrium {:.3}), constraint {} (mean {} {:.6}, c = {})",
        outcome.level,
        outcome.level.value(),
        if outcome.satisfied {
            "satisfied"
        } else {
            "NOT satisfied"
        },
        desc.metric,
        outcome.validation_mean,
        desc.bilevel.c
    );
    Ok(if outcome.satisfied { 0 } else { EXIT_UNSATISFIED })
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// Criteria CSV files written by `fdf-eval`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Metric the thresholds belong to.
    #[arg(long, value_enum, default_value = "variance")]
    pub metric: MetricArg,
    /// Write the rendered tables here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum MetricArg {
    Variance,
    Entropy,
}

pub fn report(args: &ReportArgs) -> anyhow::Result<u8> {
    let kind = match args.metric {
        MetricArg::Variance => fdf::equilibrium::MetricKind::Variance,
        MetricArg::Entropy => fdf::equilibrium::MetricKind::Entropy,
    };
    let mut text = String::new();
    for path in &args.inputs {
        let csv = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let reports = fdf::engine::parse_criteria_csv(&csv, kind)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let table = fdf::engine::ExperimentTable {
            name,
            architecture: guess_architecture(path),
            kind,
            baseline_accuracy: None,
            reports,
        };
        text.push_str(&table.render_text());
        text.push('\n');
    }
    if let Some(out) = &args.out {
        fs::write(out, &text).with_context(|| format!("cannot write {}", out.display()))?;
    }
    print!("{text}");
    Ok(0)
}

/// Architecture named in the run directory's manifest, defaulting to arch1.
fn guess_architecture(csv: &Path) -> fdf::nn::Architecture {
    let manifest = csv.with_file_name("manifest_fdf_eval.toml");
    fs::read_to_string(manifest)
        .ok()
        .and_then(|t| t.parse::<toml::Table>().ok())
        .and_then(|t| t.get("config")?.get("architecture")?.as_str().map(str::to_owned))
        .and_then(|a| match a.as_str() {
            "arch2" => Some(fdf::nn::Architecture::Arch2),
            "arch3" => Some(fdf::nn::Architecture::Arch3),
            "arch1" => Some(fdf::nn::Architecture::Arch1),
            _ => None,
        })
        .unwrap_or(fdf::nn::Architecture::Arch1)
}

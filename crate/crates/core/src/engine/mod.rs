//! The FDF inference cascade and everything built around it.

mod bank;
mod bilevel;
mod cascade;
mod criteria;
mod experiment;

pub use bank::{train_bank, BankConfig, BankEntry, FilterSource, ModelBank, Provenance};
pub use bilevel::{bilevel_design, mean_equilibrium, BilevelConfig, BilevelOutcome, CandidateRecord};
pub use cascade::{fdf_predict, run_cascade, FdfStep, FdfTrace};
pub use criteria::{
    baseline_labels, criteria_from_traces, evaluate_criteria, evaluate_sweep, CriteriaReport, LevelOutputs,
};
pub use experiment::{
    derive_seed, parse_criteria_csv, run_experiment, BaselinePolicy, BilevelSettings, DataConfig, DataSourceKind,
    ExperimentDescriptor, ExperimentRun, ExperimentTable, FilterConfig, FilterKind, OutputConfig, TrainSettings,
};

//! Data generation, experiment runners, the empirical DP auditor and configuration files.

pub mod audit;
pub mod config;
pub mod data;
pub mod experiment;

pub use audit::{audit_dp, build_case, clopper_pearson, AuditCase, DpAuditReport, Side};
pub use config::Config;
pub use data::{gen_distribution, random_concept, sample_labeled, DistributionSpec, Sampler};
pub use experiment::{
    parse_class, results_csv, run_pac_experiment, run_pac_experiment_with, run_reduce_experiment,
    run_san_experiment, summarize, summary_json, wilson_interval, LearnerKind, PacConfig,
    ReduceConfig, SanConfig, SanitizerKind, Summary, TrialResult,
};

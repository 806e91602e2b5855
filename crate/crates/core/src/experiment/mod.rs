//! Configuration-driven experiments: synthetic regret simulations, dataset
//! baselines and ablations, exported as metric curves.

mod ablation;
mod config;
mod metrics;
mod presets;
mod report;
mod runner;

pub use ablation::{ablation_sweep, apply_axis, AblationAxis};
pub use config::{
    Aggregation, DataSection, ExperimentConfig, IolSection, Metric, NetworkSection, SplitSection, SyntheticSection,
    Task,
};
pub use metrics::{five_numbers, mean_std, metric_accuracy, metric_per_class_accuracy, metric_rmse};
pub use presets::{preset, preset_names, preset_source};
pub use report::{
    export_report, ExperimentReport, ExportFormat, RunInfo, SeriesPoint, Summary, CSV_HEADER, REPORT_FORMAT_VERSION,
};
pub use runner::run_experiment;

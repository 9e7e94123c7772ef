//! Synthetic data, image tensorization, experiment runners and CSV reports.

mod dist;
mod experiments;
mod features;
mod image;
mod report;
mod synth;

pub use dist::{
    exact_sampling_distribution, kl_divergence, total_variation, EXACT_DISTRIBUTION_LIMIT,
};
pub use experiments::{
    distribution_reports, run_distribution_experiment, run_recovery_experiment, Decomposition,
    DistributionConfig, FrozenDesign, RecoveryConfig,
};
pub use features::{
    fit_model, knn_cv_accuracy, project, read_labels, run_feature_extraction, stratified_folds,
    FeatureConfig, FeatureMethod, FittedModel,
};
pub use image::{synthetic_image, tensorize_image, untensorize_image};
pub use report::{read_reports, write_reports, ExperimentReport, REPORT_COLUMNS};
pub use synth::{synth_cp, synth_tr, DEFAULT_SYNTH_LIMIT, LARGE_SYNTH_LIMIT};

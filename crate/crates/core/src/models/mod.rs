//! Fusion networks, the spectra-only random forest, metrics and
//! cross-validation.

pub mod container;
pub mod cv;
pub mod features;
pub mod forest;
pub mod fusion;
pub mod metrics;
pub mod nn;
pub mod tables;
pub mod train;

pub use cv::{cross_validate, cv_forest, cv_fusion, holdout_forest, holdout_fusion, CvResult, CvScheme, CvSummary, TrainedFusion};
pub use features::{ColumnScaler, FeaturePipeline};
pub use forest::{train_forest, ForestConfig, ForestModel, MaxFeatures};
pub use fusion::{build_early_fusion, Architecture, EpochRecord, FusionModel, Variant};
pub use metrics::{evaluate, roc_auc, Confusion, EvalReport, MeanStd};
pub use container::{load_model, save_model};
pub use tables::{forest_table, model_table, ForestRow};
pub use train::{bce_loss, train, AdamParams, ModalData, TrainConfig};

//! End-to-end generation and its configuration.

mod config;
mod run;

pub use config::{
    load_config, parse_config, BackendsConfig, ConfigError, ContinuationConfig, ContinuationMode,
    DetectionConfig, IoConfig, PipelineConfig, TrainerDefaults, TrainingDefaults, TransitionConfig,
    ENV_PREFIX,
};
pub use run::{
    manifest_path, run_pipeline, Discard, DiscardReason, GenerationReport, Pipeline, PipelineError,
};

//! Metrics, the shared feature pipeline, and the two experiments.

mod experiments;
mod metrics;
mod pipeline;

pub use experiments::{
    balanced_subsample, evaluate_cell, prior_work_best, run_ablation, run_stream, version, write_ablation,
    write_stream, AblationResult, AblationRow, PriorWork, StreamMonth, StreamResult, UpstreamSummary, PRIOR_WORK,
};
pub use metrics::{evaluate, EvalReport};
pub use pipeline::{ClusterBasis, FeaturePipeline, PipelineConfig, PositionConfig};

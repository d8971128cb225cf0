//! Experiment orchestration: synthetic data, overlays, method comparison
//! and the end-to-end runner.

mod compare;
mod experiment;
mod model;
mod overlay;
mod synth;

pub use compare::{compare_methods, compare_methods_at, MethodComparison, Verdict};
pub use experiment::{
    run_experiment, split_scope, Artifacts, ExperimentConfig, ExperimentReport, ExperimentSummary, OverlayRef,
    RoiOptions, Scope, SummaryRow, POOLED_ROW,
};
pub use model::{ModelKind, Segmenter};
pub use overlay::{render_overlay, FALSE_NEGATIVE_COLOR, FALSE_POSITIVE_COLOR};
pub use synth::{
    generate_synthetic, generate_synthetic_dataset, load_params, EyeParams, SynthOptions, MANIFEST_FILE,
    PARAMS_FILE,
};

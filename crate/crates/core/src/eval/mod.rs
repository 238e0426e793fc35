//! Synthetic scenes, overlap metrics and batch benchmark runs.

pub mod bench;
pub mod metrics;
pub mod scene;

pub use bench::{
    run_benchmark, run_benchmark_config, BenchConfig, EvalReport, EvalRow, MethodConfig,
};
pub use metrics::{dice, iou};
pub use scene::{generate_scene, Scene, SceneSpec};

//! Experiment presets, flat config files and the runners behind the command-line tool.

mod bench;
mod config;
mod presets;
mod run;

pub use bench::{bench_integration, block_covariance, gaussian_normalizer, mc_normalizer, tt_normalizer, write_bench_csv, BenchRow, EVAL_COORD, REFERENCE_SAMPLES};
pub use config::{ExperimentConfig, BENCH_KEYS, KEYS};
pub use presets::{build_potential, preset, preset_table, preset_table_hash, problem_description, DATA_SEED, PRESET_IDS};
pub use run::{
    compare_methods, config_echo, metrics_header, metrics_line, recursion_traces, run_experiment, sample, write_comparison, write_traces, MethodRun, RunArtifacts, SampledRun, TracePoint,
    BENCH_FILE, COMPARE_FILE, COMPARE_SUMMARY_FILE, ECHO_FILE, ENSEMBLE_FILE, METRICS_COLUMNS, METRICS_FILE, TIMING_FILE, TRACES_FILE,
};

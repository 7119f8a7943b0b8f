//! Experiment driver: configuration, simulation studies, and trace handling.

mod config;
mod experiment;
mod trace;

pub use config::{
    ConfigMap, ExperimentConfig, ExponentSpec, GridSize, KlField, PlacementSpec, Sweep, DEFAULT_ANCHORS, KEYS,
};
pub use experiment::{
    analyze_kl, anchors_for, draw_target, prepare, run_experiment, run_exponent, run_spatial_map, run_trials,
    training_grid, write_exponent_csv, write_kl_csv, write_spatial_csv, write_stats_row, ExperimentResult, Prepared,
    ResultRow, SpatialCell, BASE_ROW, RESULTS_HEADER,
};
pub use trace::{
    evaluate_on_trace, ingest_trace, synthetic_traces, Trace, TraceEstimate, TraceEvaluation, TraceLocation,
    TraceRecord, TRACE_HEADER,
};

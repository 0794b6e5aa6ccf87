//! Experiment orchestration: seeded replication loops, rate-exponent fits and
//! CSV/JSON emission. The `vblab` binary is a thin layer over this module.

mod config;
mod run;
mod table;

pub use config::{
    ExperimentConfig, GsmMetric, GsmPosteriorKind, GsmPriorSpec, GsmSignalSpec, ModelSpec, PiecewiseMethod,
    TruncSignalSpec,
};
pub use run::{
    gsm_prior, gsm_signal, lower_bound_index, piecewise_replication, piecewise_signal, run_curve, run_divcheck,
    run_experiment, run_pc_compare, DivcheckSummary, SeriesRow,
};
pub use table::{
    emit, emit_to, fit_rate_exponent, read_fit, read_table, write_csv, Emit, Format, RateFit, RateRow, RateTable,
    FIT_HEADER, TABLE_HEADER,
};

//! Frequency estimation over data streams under a fixed memory budget.
//!
//! The centerpiece is [`DoubleHashSketch`]: a first pass over a stream
//! prefix isolates likely heavy hitters into exact unique buckets, and the
//! main pass routes everything else into a shared count-min or count-sketch
//! table. Splitting the budget this way removes the heaviest keys from the
//! collision pool, which lowers estimation error for everyone else.
//!
//! Supporting pieces: plain [`CountMinSketch`] and [`CountSketch`]
//! baselines, heavy-hitter detection, Zipfian stream generation, log-file
//! ingestion, budget tuning with rolling train/validate/test schedules, an
//! oracle that picks the best split from exact frequencies, and an
//! experiment runner that sweeps algorithms against byte budgets.

mod error;

pub mod double_hash;
pub mod evaluate;
pub mod hashing;
pub mod heavy_hitters;
pub mod sketch;
pub mod stream;

pub use error::{Error, Result};

pub use double_hash::{
    default_grid, first_pass, ideal_learned_sketch, rolling_schedule, tune, DoubleHashConfig,
    DoubleHashSketch, SketchCore, WindowSketch,
};
pub use evaluate::{
    avg_error, memory_bytes, plain_sketch_width, render_csv, run_experiment, write_report,
    Algorithm, ErrorReport, ExperimentSource, ExperimentSpec, MemoryModel, Metric, ReportRow,
};
pub use hashing::{HashFunction, SignFunction};
pub use heavy_hitters::{detect_heavy_hitters, HeavyHitterParams, HeavyHitterTable};
pub use sketch::{sketch_memory_cells, CountMinSketch, CountSketch, SketchConfig};
pub use stream::{
    compensated_sum, exact_counts, generate_stream, key_rank, rank_key, read_log, zipf_pmf,
    LogFormat, LogSource, StreamItem, ZipfDistribution, ZipfSpec,
};

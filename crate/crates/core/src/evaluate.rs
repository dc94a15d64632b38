//! Error metrics, the byte-budget accounting model, and the experiment
//! runner that sweeps algorithms x budgets x seeds into an error table.
//!
//! All floating-point reductions iterate keys in sorted order so repeated
//! runs produce byte-identical reports.

use std::collections::HashMap;
use std::path::Path;

use crate::double_hash::{
    first_pass, ideal_learned_sketch, rolling_schedule, tune, DoubleHashConfig, DoubleHashSketch,
    SketchCore,
};
use crate::sketch::{CountMinSketch, CountSketch, SketchConfig};
use crate::stream::{exact_counts, generate_stream, read_log, LogSource, StreamItem, ZipfSpec};
use crate::{Error, Result};

/// Byte accounting used to compare algorithms at equal memory: shared
/// sketch buckets cost 4 bytes, unique heavy-hitter buckets 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryModel {
    pub bytes_per_shared_bucket: u64,
    pub bytes_per_unique_bucket: u64,
}

impl Default for MemoryModel {
    fn default() -> Self {
        Self { bytes_per_shared_bucket: 4, bytes_per_unique_bucket: 8 }
    }
}

/// Bytes a structure with `inner_cells` shared cells and `unique_buckets`
/// exact counters is charged under the model.
pub fn memory_bytes(inner_cells: u64, unique_buckets: u64, model: &MemoryModel) -> u64 {
    model.bytes_per_shared_bucket * inner_cells + model.bytes_per_unique_bucket * unique_buckets
}

/// Widest plain sketch a byte budget buys at a given depth.
pub fn plain_sketch_width(budget_bytes: u64, depth: usize, model: &MemoryModel) -> usize {
    (budget_bytes / (model.bytes_per_shared_bucket * depth as u64)) as usize
}

/// How per-key absolute errors are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Unweighted mean over distinct keys.
    PerItem,
    /// Mean weighted by each key's true frequency.
    Weighted,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PerItem => "per-item",
            Self::Weighted => "weighted",
        }
    }
}

/// Average absolute estimation error over the truth keys.
///
/// Per-item: `(1/n) Σ |estimate - truth|`. Weighted:
/// `Σ truth·|estimate - truth| / Σ truth` (0 when the truth mass is 0).
/// Every truth key must have an estimate.
pub fn avg_error(
    estimates: &HashMap<Vec<u8>, u64>,
    truth: &HashMap<Vec<u8>, u64>,
    metric: Metric,
) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    let mut keys: Vec<&Vec<u8>> = truth.keys().collect();
    keys.sort_unstable();
    let mut numerator = 0.0f64;
    let mut denominator = 0.0f64;
    for key in keys {
        let true_count = truth[key];
        let estimate = *estimates.get(key).ok_or(Error::MissingEstimate)?;
        let diff = estimate.abs_diff(true_count) as f64;
        match metric {
            Metric::PerItem => {
                numerator += diff;
                denominator += 1.0;
            }
            Metric::Weighted => {
                numerator += true_count as f64 * diff;
                denominator += true_count as f64;
            }
        }
    }
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / denominator)
}

/// One measured experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub algorithm: &'static str,
    pub budget_bytes: u64,
    pub depth: usize,
    pub unique_buckets: usize,
    pub seed: u64,
    pub metric: Metric,
    pub error: f64,
}

/// Experiment output: measured rows plus diagnostics for skipped cells.
#[derive(Debug, Default)]
pub struct ErrorReport {
    pub rows: Vec<ReportRow>,
    pub diagnostics: Vec<String>,
}

/// CSV text for a report: fixed header, rows sorted by (algorithm, budget,
/// seed) with full tiebreak, errors printed to 6 significant digits.
pub fn render_csv(report: &ErrorReport) -> String {
    let mut rows: Vec<&ReportRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.algorithm
            .cmp(b.algorithm)
            .then(a.budget_bytes.cmp(&b.budget_bytes))
            .then(a.seed.cmp(&b.seed))
            .then(a.depth.cmp(&b.depth))
            .then(a.unique_buckets.cmp(&b.unique_buckets))
            .then(a.metric.as_str().cmp(b.metric.as_str()))
    });
    let mut out = String::from("algorithm,budget_bytes,depth,unique_buckets,seed,metric,error\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.5e}\n",
            row.algorithm,
            row.budget_bytes,
            row.depth,
            row.unique_buckets,
            row.seed,
            row.metric.as_str(),
            row.error
        ));
    }
    out
}

pub fn write_report(report: &ErrorReport, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(report))
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

/// Algorithms the runner can benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Plain count-min over the test stream.
    Cm,
    /// Plain count-sketch (signed counters, median estimate).
    Cs,
    /// Double hashing: first-pass heavy hitters, tuned split, static list.
    Dh,
    /// Double hashing re-tuned per test window over a rolling schedule.
    DhRolling,
    /// Oracle split chosen from exact test frequencies.
    Ideal,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Cm => "cm",
            Self::Cs => "cs",
            Self::Dh => "dh",
            Self::DhRolling => "dh-rolling",
            Self::Ideal => "ideal",
        }
    }
}

/// Where the experiment stream comes from.
pub enum ExperimentSource {
    /// Synthetic Zipfian stream; the whole stream is the test set and the
    /// first pass observes its leading fraction.
    Zipf(ZipfSpec),
    /// Pre-windowed in-memory streams evaluated on a rolling schedule.
    Windows { windows: Vec<Vec<StreamItem>>, train_windows: usize },
    /// Log file, windowed by its tag column, then treated like `Windows`.
    Log { source: LogSource, train_windows: usize },
}

pub struct ExperimentSpec {
    pub source: ExperimentSource,
    pub budgets: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub metric: Metric,
    pub first_pass_budget_bytes: u64,
    pub first_pass_depth: usize,
    pub first_pass_fraction: f64,
}

/// Unique-bucket candidates for a budget: 0 through 6 eighths of the budget
/// spent on unique buckets, paired with a fixed shared-table depth.
fn unique_bucket_grid(budget_bytes: u64, depth: usize) -> Vec<(usize, usize)> {
    let mut grid = Vec::new();
    for eighths in 0..=6u64 {
        let unique = (budget_bytes * eighths / 64) as usize;
        let unique_bytes = 8 * unique as u64;
        if budget_bytes > unique_bytes && (budget_bytes - unique_bytes) / (4 * depth as u64) >= 1 {
            grid.push((unique, depth));
        }
    }
    grid.dedup();
    grid
}

/// Estimates for every truth key, pulled from any estimator.
fn guesses_for(
    truth: &HashMap<Vec<u8>, u64>,
    estimate: impl Fn(&[u8]) -> u64,
) -> HashMap<Vec<u8>, u64> {
    truth.keys().map(|key| (key.clone(), estimate(key))).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

struct Cell {
    algorithm: Algorithm,
    budget: u64,
    depth: usize,
    seed: u64,
}

/// Runs every (algorithm, budget, depth, seed) cell of the experiment and
/// collects a report row per cell; infeasible cells are skipped with a
/// diagnostic. Deterministic given the inputs, including the seeds.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ErrorReport> {
    if spec.budgets.is_empty() || spec.algorithms.is_empty() || spec.depths.is_empty()
        || spec.seeds.is_empty()
    {
        return Err(Error::InvalidParameter(
            "budgets, algorithms, depths, and seeds must all be nonempty".into(),
        ));
    }
    let mut report = ErrorReport::default();

    enum Prepared {
        Single(Vec<StreamItem>),
        Windowed(Vec<Vec<StreamItem>>, usize),
    }

    let prepared = match &spec.source {
        ExperimentSource::Zipf(zipf) => Prepared::Single(generate_stream(zipf)?.collect()),
        ExperimentSource::Windows { windows, train_windows } => {
            windowed_or_single(windows.clone(), *train_windows)
        }
        ExperimentSource::Log { source, train_windows } => {
            let mut windows: Vec<(String, Vec<StreamItem>)> = Vec::new();
            for record in read_log(source)? {
                let (tag, item) = record?;
                match windows.iter_mut().find(|(t, _)| *t == tag) {
                    Some((_, window)) => window.push(item),
                    None => windows.push((tag, vec![item])),
                }
            }
            windowed_or_single(windows.into_iter().map(|(_, w)| w).collect(), *train_windows)
        }
    };

    fn windowed_or_single(mut windows: Vec<Vec<StreamItem>>, train_windows: usize) -> Prepared {
        // A source with a single window has no history to train on; treat
        // it like a synthetic single stream (prefix-trained, whole-stream
        // tested).
        if windows.len() == 1 {
            Prepared::Single(windows.pop().expect("one window"))
        } else {
            Prepared::Windowed(windows, train_windows)
        }
    }

    for &algorithm in &spec.algorithms {
        for &budget in &spec.budgets {
            for &depth in &spec.depths {
                for &seed in &spec.seeds {
                    let cell = Cell { algorithm, budget, depth, seed };
                    let outcome = match &prepared {
                        Prepared::Single(stream) => run_single_cell(spec, &cell, stream),
                        Prepared::Windowed(windows, train_windows) => {
                            run_windowed_cell(spec, &cell, windows, *train_windows)
                        }
                    }?;
                    match outcome {
                        CellOutcome::Row(row) => report.rows.push(row),
                        CellOutcome::Skipped(reason) => report.diagnostics.push(format!(
                            "skipped {} budget={} depth={} seed={}: {reason}",
                            algorithm.name(),
                            budget,
                            depth,
                            seed
                        )),
                    }
                }
            }
        }
    }
    Ok(report)
}

enum CellOutcome {
    Row(ReportRow),
    Skipped(String),
}

fn dh_template(spec: &ExperimentSpec, cell: &Cell) -> Result<DoubleHashConfig> {
    DoubleHashConfig {
        total_budget_bytes: cell.budget,
        first_pass_budget_bytes: spec.first_pass_budget_bytes,
        first_pass_depth: spec.first_pass_depth,
        unique_buckets: 0,
        inner_depth: cell.depth,
        first_pass_fraction: spec.first_pass_fraction,
        heaviness_k: u64::MAX,
        master_seed: cell.seed,
        core: SketchCore::CountMin,
        track_candidates: false,
    }
    .validated()
}

fn row(cell: &Cell, unique_buckets: usize, metric: Metric, error: f64) -> CellOutcome {
    CellOutcome::Row(ReportRow {
        algorithm: cell.algorithm.name(),
        budget_bytes: cell.budget,
        depth: cell.depth,
        unique_buckets,
        seed: cell.seed,
        metric,
        error,
    })
}

/// Plain count-min or count-sketch error on one stream.
fn plain_sketch_error(
    cell: &Cell,
    stream: &[StreamItem],
    truth: &HashMap<Vec<u8>, u64>,
    metric: Metric,
) -> Result<std::result::Result<f64, String>> {
    let width = plain_sketch_width(cell.budget, cell.depth, &MemoryModel::default());
    if width == 0 {
        return Ok(Err(format!(
            "budget {} cannot host a depth-{} sketch",
            cell.budget, cell.depth
        )));
    }
    let config = SketchConfig { width, depth: cell.depth, master_seed: cell.seed };
    let error = match cell.algorithm {
        Algorithm::Cm => {
            let mut sketch = CountMinSketch::new(config)?;
            for item in stream {
                sketch.update(&item.key, item.weight)?;
            }
            avg_error(&guesses_for(truth, |key| sketch.estimate(key)), truth, metric)?
        }
        Algorithm::Cs => {
            let mut sketch = CountSketch::new(config)?;
            for item in stream {
                sketch.update(&item.key, item.weight)?;
            }
            avg_error(
                &guesses_for(truth, |key| sketch.estimate(key).max(0) as u64),
                truth,
                metric,
            )?
        }
        _ => unreachable!("plain_sketch_error only handles cm and cs"),
    };
    Ok(Ok(error))
}

fn run_single_cell(
    spec: &ExperimentSpec,
    cell: &Cell,
    stream: &[StreamItem],
) -> Result<CellOutcome> {
    let truth = exact_counts(stream);
    let metric = spec.metric;
    match cell.algorithm {
        Algorithm::Cm | Algorithm::Cs => match plain_sketch_error(cell, stream, &truth, metric)? {
            Ok(error) => Ok(row(cell, 0, metric, error)),
            Err(reason) => Ok(CellOutcome::Skipped(reason)),
        },
        Algorithm::Dh => {
            let template = match dh_template(spec, cell) {
                Ok(t) => t,
                Err(e) => return Ok(CellOutcome::Skipped(e.to_string())),
            };
            let prefix_len = ((stream.len() as f64 * spec.first_pass_fraction).round() as usize)
                .clamp(1, stream.len());
            let prefix = &stream[..prefix_len];
            let grid = unique_bucket_grid(cell.budget, cell.depth);
            // Candidates are scored on the held-out back half of the prefix;
            // scoring them on the half that chose their heavy hitters rewards
            // isolating noise. The final list is drawn from the whole prefix.
            let half = prefix.len() / 2;
            let config = if half == 0 {
                tune(prefix, prefix, &template, &grid, metric)?
            } else {
                tune(&prefix[..half], &prefix[half..], &template, &grid, metric)?
            };
            let heavy = first_pass(prefix, &config)?;
            let mut sketch = DoubleHashSketch::new(config, &heavy)?;
            sketch.ingest(stream)?;
            let error = avg_error(&guesses_for(&truth, |key| sketch.estimate(key)), &truth, metric)?;
            Ok(row(cell, config.unique_buckets, metric, error))
        }
        Algorithm::Ideal => {
            let template = match dh_template(spec, cell) {
                Ok(t) => t,
                Err(e) => return Ok(CellOutcome::Skipped(e.to_string())),
            };
            let grid = unique_bucket_grid(cell.budget, cell.depth);
            let (config, error) = ideal_learned_sketch(&truth, &template, &grid, metric)?;
            Ok(row(cell, config.unique_buckets, metric, error))
        }
        Algorithm::DhRolling => Ok(CellOutcome::Skipped(
            "rolling schedule requires a windowed source".into(),
        )),
    }
}

fn run_windowed_cell(
    spec: &ExperimentSpec,
    cell: &Cell,
    windows: &[Vec<StreamItem>],
    train_windows: usize,
) -> Result<CellOutcome> {
    let metric = spec.metric;
    let first_test = train_windows + 1;
    if windows.len() < first_test + 1 {
        return Err(Error::InsufficientHistory {
            needed: first_test,
            available: windows.len().saturating_sub(1),
        });
    }
    let test_truths: Vec<HashMap<Vec<u8>, u64>> =
        windows[first_test..].iter().map(Vec::as_slice).map(exact_counts).collect();

    match cell.algorithm {
        Algorithm::Cm | Algorithm::Cs => {
            let mut errors = Vec::new();
            for (window, truth) in windows[first_test..].iter().zip(&test_truths) {
                match plain_sketch_error(cell, window, truth, metric)? {
                    Ok(error) => errors.push(error),
                    Err(reason) => return Ok(CellOutcome::Skipped(reason)),
                }
            }
            Ok(row(cell, 0, metric, mean(&errors)))
        }
        Algorithm::Dh => {
            // Static variant: tune and select heavy hitters once from the
            // initial history, then count every test window with that list.
            let template = match dh_template(spec, cell) {
                Ok(t) => t,
                Err(e) => return Ok(CellOutcome::Skipped(e.to_string())),
            };
            let grid = unique_bucket_grid(cell.budget, cell.depth);
            let training: Vec<StreamItem> =
                windows[..train_windows].iter().flat_map(|w| w.iter().cloned()).collect();
            let validation = &windows[train_windows];
            let config = tune(&training, validation, &template, &grid, metric)?;
            let heavy = first_pass(&training, &config)?;
            let mut errors = Vec::new();
            for (window, truth) in windows[first_test..].iter().zip(&test_truths) {
                let mut sketch = DoubleHashSketch::new(config, &heavy)?;
                sketch.ingest(window)?;
                errors.push(avg_error(
                    &guesses_for(truth, |key| sketch.estimate(key)),
                    truth,
                    metric,
                )?);
            }
            Ok(row(cell, config.unique_buckets, metric, mean(&errors)))
        }
        Algorithm::DhRolling => {
            let template = match dh_template(spec, cell) {
                Ok(t) => t,
                Err(e) => return Ok(CellOutcome::Skipped(e.to_string())),
            };
            let grid = unique_bucket_grid(cell.budget, cell.depth);
            let results = rolling_schedule(windows, train_windows, &template, &grid, metric)?;
            let mut errors = Vec::new();
            let mut last_unique = 0;
            for result in &results {
                let truth = &test_truths[result.window - first_test];
                errors.push(avg_error(
                    &guesses_for(truth, |key| result.sketch.estimate(key)),
                    truth,
                    metric,
                )?);
                last_unique = result.config.unique_buckets;
            }
            // Window splits vary; the row records the most recent one.
            Ok(row(cell, last_unique, metric, mean(&errors)))
        }
        Algorithm::Ideal => {
            let template = match dh_template(spec, cell) {
                Ok(t) => t,
                Err(e) => return Ok(CellOutcome::Skipped(e.to_string())),
            };
            let grid = unique_bucket_grid(cell.budget, cell.depth);
            let mut errors = Vec::new();
            let mut last_unique = 0;
            for truth in &test_truths {
                let (config, error) = ideal_learned_sketch(truth, &template, &grid, metric)?;
                errors.push(error);
                last_unique = config.unique_buckets;
            }
            Ok(row(cell, last_unique, metric, mean(&errors)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, u64)]) -> HashMap<Vec<u8>, u64> {
        pairs.iter().map(|(key, count)| (key.as_bytes().to_vec(), *count)).collect()
    }

    #[test]
    fn memory_model_matches_the_cost_constants() {
        let model = MemoryModel::default();
        assert_eq!(memory_bytes(0, 0, &model), 0);
        assert_eq!(memory_bytes(4000, 50, &model), 16_400);
        assert_eq!(plain_sketch_width(200_000, 4, &model), 12_500);
    }

    #[test]
    fn perfect_estimates_have_zero_error() {
        let truth = map(&[("a", 10), ("b", 2)]);
        assert_eq!(avg_error(&truth.clone(), &truth, Metric::PerItem).unwrap(), 0.0);
        assert_eq!(avg_error(&truth.clone(), &truth, Metric::Weighted).unwrap(), 0.0);
    }

    #[test]
    fn per_item_error_averages_absolute_differences() {
        let truth = map(&[("a", 10), ("b", 2)]);
        let estimates = map(&[("a", 12), ("b", 2)]);
        assert_eq!(avg_error(&estimates, &truth, Metric::PerItem).unwrap(), 1.0);
    }

    #[test]
    fn weighted_error_scales_by_true_frequency() {
        let truth = map(&[("a", 10), ("b", 2)]);
        let estimates = map(&[("a", 12), ("b", 2)]);
        let weighted = avg_error(&estimates, &truth, Metric::Weighted).unwrap();
        assert!((weighted - 20.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn error_scales_linearly_with_deviations() {
        let truth = map(&[("a", 10), ("b", 2), ("c", 7)]);
        let off_by_one = map(&[("a", 11), ("b", 3), ("c", 8)]);
        let off_by_three = map(&[("a", 13), ("b", 5), ("c", 10)]);
        for metric in [Metric::PerItem, Metric::Weighted] {
            let small = avg_error(&off_by_one, &truth, metric).unwrap();
            let large = avg_error(&off_by_three, &truth, metric).unwrap();
            assert!((large - 3.0 * small).abs() < 1e-12);
        }
    }

    #[test]
    fn avg_error_validates_inputs() {
        let truth = map(&[("a", 1)]);
        assert!(matches!(
            avg_error(&map(&[]), &map(&[]), Metric::PerItem),
            Err(Error::EmptyTruth)
        ));
        assert!(matches!(
            avg_error(&map(&[("b", 1)]), &truth, Metric::PerItem),
            Err(Error::MissingEstimate)
        ));
    }

    #[test]
    fn weighted_error_with_zero_mass_is_zero() {
        let truth = map(&[("a", 0)]);
        let estimates = map(&[("a", 3)]);
        assert_eq!(avg_error(&estimates, &truth, Metric::Weighted).unwrap(), 0.0);
    }

    #[test]
    fn csv_renders_header_even_when_empty() {
        let report = ErrorReport::default();
        assert_eq!(
            render_csv(&report),
            "algorithm,budget_bytes,depth,unique_buckets,seed,metric,error\n"
        );
    }

    #[test]
    fn csv_rows_are_sorted_and_six_digit_formatted() {
        let mk = |algorithm, budget_bytes, seed, error| ReportRow {
            algorithm,
            budget_bytes,
            depth: 2,
            unique_buckets: 3,
            seed,
            metric: Metric::PerItem,
            error,
        };
        let report = ErrorReport {
            rows: vec![
                mk("dh", 400, 1, 5.0 / 3.0),
                mk("cm", 400, 2, 0.5),
                mk("cm", 200, 1, 12345.678),
                mk("cm", 400, 1, 0.0),
            ],
            diagnostics: vec![],
        };
        let csv = render_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "cm,200,2,3,1,per-item,1.23457e4");
        assert_eq!(lines[2], "cm,400,2,3,1,per-item,0.00000e0");
        assert_eq!(lines[3], "cm,400,2,3,2,per-item,5.00000e-1");
        assert_eq!(lines[4], "dh,400,2,3,1,per-item,1.66667e0");
        // Every row parses back into 7 fields.
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 7);
        }
    }

    fn zipf_spec_small(seed: u64) -> ZipfSpec {
        ZipfSpec::new(2_000, 1.0, 30_000, seed).unwrap()
    }

    fn base_spec(source: ExperimentSource) -> ExperimentSpec {
        ExperimentSpec {
            source,
            budgets: vec![2_000],
            algorithms: vec![Algorithm::Cm],
            depths: vec![2],
            seeds: vec![1],
            metric: Metric::PerItem,
            first_pass_budget_bytes: 1_000,
            first_pass_depth: 2,
            first_pass_fraction: 0.2,
        }
    }

    #[test]
    fn single_cm_cell_yields_one_row() {
        let spec = base_spec(ExperimentSource::Zipf(zipf_spec_small(7)));
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.diagnostics.is_empty());
        let row = &report.rows[0];
        assert_eq!(row.algorithm, "cm");
        assert_eq!(row.unique_buckets, 0);
        assert!(row.error >= 0.0);
    }

    #[test]
    fn experiment_is_deterministic() {
        let mut spec = base_spec(ExperimentSource::Zipf(zipf_spec_small(7)));
        spec.algorithms = vec![Algorithm::Cm, Algorithm::Cs, Algorithm::Dh, Algorithm::Ideal];
        spec.seeds = vec![1, 2];
        let a = render_csv(&run_experiment(&spec).unwrap());
        let b = render_csv(&run_experiment(&spec).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 1 + 4 * 2);
    }

    #[test]
    fn dh_rolling_on_a_single_stream_is_skipped_with_diagnostic() {
        let mut spec = base_spec(ExperimentSource::Zipf(zipf_spec_small(7)));
        spec.algorithms = vec![Algorithm::DhRolling];
        let report = run_experiment(&spec).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.diagnostics.len(), 1);
        assert!(report.diagnostics[0].contains("windowed source"));
    }

    #[test]
    fn infeasible_budget_is_skipped_with_diagnostic() {
        let mut spec = base_spec(ExperimentSource::Zipf(zipf_spec_small(7)));
        spec.budgets = vec![4];
        spec.depths = vec![2];
        let report = run_experiment(&spec).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.diagnostics.len(), 1);
    }

    #[test]
    fn windowed_source_with_thin_history_errors() {
        let windows: Vec<Vec<StreamItem>> = (0..3)
            .map(|_| (0..50).map(|id| StreamItem::unit(format!("k{id}").into_bytes())).collect())
            .collect();
        let spec = base_spec(ExperimentSource::Windows { windows, train_windows: 5 });
        assert!(matches!(
            run_experiment(&spec),
            Err(Error::InsufficientHistory { needed: 6, available: 2 })
        ));
    }

    #[test]
    fn single_window_source_degrades_to_single_stream() {
        let window: Vec<StreamItem> =
            (0..200).map(|id| StreamItem::unit(format!("k{}", id % 40).into_bytes())).collect();
        let spec = base_spec(ExperimentSource::Windows {
            windows: vec![window],
            train_windows: 5,
        });
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.rows.len(), 1);
    }

    #[test]
    fn cm_mean_error_does_not_grow_as_budget_doubles() {
        let mut means = Vec::new();
        for budget in [2_000u64, 4_000, 8_000] {
            let mut spec = base_spec(ExperimentSource::Zipf(zipf_spec_small(3)));
            spec.budgets = vec![budget];
            spec.seeds = (0..10).collect();
            let report = run_experiment(&spec).unwrap();
            assert_eq!(report.rows.len(), 10);
            means.push(mean(&report.rows.iter().map(|r| r.error).collect::<Vec<f64>>()));
        }
        assert!(means[1] <= means[0], "doubling budget must not raise mean error");
        assert!(means[2] <= means[1], "doubling budget must not raise mean error");
    }
}

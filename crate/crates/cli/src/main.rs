//! `dhsketch`: generate benchmark streams, run error-vs-memory experiments,
//! and serve estimates from saved checkpoints.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Diagnostics go to
//! stderr; data goes to files or stdout.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use dhsketch::{
    default_grid, first_pass, generate_stream, key_rank, read_log, run_experiment, tune,
    write_report, Algorithm, DoubleHashConfig, DoubleHashSketch, ExperimentSource, ExperimentSpec,
    LogFormat, LogSource, Metric, SketchCore, StreamItem, ZipfSpec,
};

#[derive(Parser)]
#[command(
    name = "dhsketch",
    version,
    about = "Frequency estimation benchmarks: streams, sketches, and error reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic Zipfian stream as one key per line.
    Generate(GenerateArgs),
    /// Sweep algorithms over byte budgets and write an error CSV.
    Run(Box<RunArgs>),
    /// Print estimates from a saved checkpoint for a file of keys.
    Query(QueryArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of distinct elements.
    #[arg(long)]
    n: u64,
    /// Zipf exponent.
    #[arg(long)]
    s: f64,
    /// Stream length in items.
    #[arg(long)]
    len: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output stream file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Plain,
    Tsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    PerItem,
    Weighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Cm,
    Cs,
    Dh,
    DhRolling,
    Ideal,
}

impl AlgorithmArg {
    fn to_algorithm(self) -> Algorithm {
        match self {
            Self::Cm => Algorithm::Cm,
            Self::Cs => Algorithm::Cs,
            Self::Dh => Algorithm::Dh,
            Self::DhRolling => Algorithm::DhRolling,
            Self::Ideal => Algorithm::Ideal,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// `zipf` for a synthetic stream, or a path to a log file.
    #[arg(long)]
    source: Option<String>,
    /// Zipf: number of distinct elements.
    #[arg(long, default_value_t = 140_000)]
    n: u64,
    /// Zipf: exponent.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Zipf: stream length in items.
    #[arg(long, default_value_t = 1_000_000)]
    len: u64,
    /// Zipf: generator seed (sketch seeds come from --seeds).
    #[arg(long, default_value_t = 1)]
    stream_seed: u64,
    /// Log: line format.
    #[arg(long, value_enum, default_value_t = FormatArg::Plain)]
    format: FormatArg,
    /// Log: zero-based TSV column holding the key.
    #[arg(long, default_value_t = 1)]
    key_column: usize,
    /// Log: zero-based TSV column holding the window tag (e.g. a date).
    #[arg(long)]
    window_column: Option<usize>,
    /// Windows trained on before each validation window.
    #[arg(long, default_value_t = 5)]
    train_windows: usize,
    /// Windows validated on per schedule step (only 1 is supported).
    #[arg(long, default_value_t = 1)]
    validate_windows: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cm,dh,ideal")]
    algorithms: Vec<AlgorithmArg>,
    /// Total byte budgets to sweep.
    #[arg(long, value_delimiter = ',', default_value = "200000,400000,600000,800000,1000000")]
    budgets: Vec<u64>,
    /// Shared-table depths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    depths: Vec<usize>,
    /// Sketch hash seeds; the report has one row per seed.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = MetricArg::PerItem)]
    metric: MetricArg,
    /// Transient first-pass sketch budget in bytes.
    #[arg(long, default_value_t = 200_000)]
    first_pass_budget: u64,
    #[arg(long, default_value_t = 4)]
    first_pass_depth: usize,
    /// Fraction of the stream the first pass observes.
    #[arg(long, default_value_t = 0.2)]
    first_pass_fraction: f64,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional JSON sidecar echoing the resolved config.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Optional path for a double-hash checkpoint built from this source.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// key=value file supplying defaults for any flag above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    /// Checkpoint file written by `run --checkpoint`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// File with one key per line.
    #[arg(long)]
    keys: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
    fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }
}

impl From<dhsketch::Error> for Failure {
    fn from(error: dhsketch::Error) -> Self {
        match error {
            dhsketch::Error::InvalidParameter(_) => Self::Usage(error.to_string()),
            _ => Self::Runtime(error.to_string()),
        }
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let matches = match Cli::command().try_get_matches() {
        Ok(matches) => matches,
        Err(error) => {
            let benign = matches!(
                error.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = error.print();
            return if benign { 0 } else { 1 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(error) => {
            let _ = error.print();
            return 1;
        }
    };
    let result = match cli.command {
        Cmd::Generate(args) => cmd_generate(args),
        Cmd::Run(args) => {
            let run_matches = matches.subcommand_matches("run").expect("run was parsed");
            cmd_run(*args, run_matches)
        }
        Cmd::Query(args) => cmd_query(args),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let spec = ZipfSpec::new(args.n, args.s, args.len, args.seed)?;
    let file = std::fs::File::create(&args.out)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", args.out.display())))?;
    let mut out = BufWriter::new(file);
    for item in generate_stream(&spec)? {
        let rank = key_rank(&item.key).expect("generated keys encode a rank");
        writeln!(out, "{rank}")
            .map_err(|e| Failure::runtime(format!("write {}: {e}", args.out.display())))?;
    }
    out.flush()
        .map_err(|e| Failure::runtime(format!("write {}: {e}", args.out.display())))?;
    Ok(())
}

/// Flat key=value defaults: keys are long flag names, values parse exactly
/// like flag values. Flags given on the command line win.
fn apply_config_file(
    args: &mut RunArgs,
    matches: &ArgMatches,
    path: &Path,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::runtime(format!("cannot read {}: {e}", path.display())))?;
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::usage(format!("{}:{}: expected key=value", path.display(), line_no + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let id = key.replace('-', "_");
        if !matches.try_contains_id(&id).is_ok() {
            return Err(Failure::usage(format!(
                "{}:{}: unknown config key `{key}`",
                path.display(),
                line_no + 1
            )));
        }
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        set_run_field(args, key, &id, value, path, line_no + 1)?;
    }
    Ok(())
}

fn set_run_field(
    args: &mut RunArgs,
    key: &str,
    id: &str,
    value: &str,
    path: &Path,
    line_no: usize,
) -> Result<(), Failure> {
    let bad = |what: &str| {
        Failure::usage(format!("{}:{line_no}: invalid {key}: {what}", path.display()))
    };
    fn scalar<T: std::str::FromStr>(value: &str) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e: T::Err| e.to_string())
    }
    fn list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        value.split(',').map(|part| scalar(part.trim())).collect()
    }
    match id {
        "source" => args.source = Some(value.to_string()),
        "n" => args.n = scalar(value).map_err(|e| bad(&e))?,
        "s" => args.s = scalar(value).map_err(|e| bad(&e))?,
        "len" => args.len = scalar(value).map_err(|e| bad(&e))?,
        "stream_seed" => args.stream_seed = scalar(value).map_err(|e| bad(&e))?,
        "format" => {
            args.format = FormatArg::from_str(value, true).map_err(|e| bad(&e))?;
        }
        "key_column" => args.key_column = scalar(value).map_err(|e| bad(&e))?,
        "window_column" => args.window_column = Some(scalar(value).map_err(|e| bad(&e))?),
        "train_windows" => args.train_windows = scalar(value).map_err(|e| bad(&e))?,
        "validate_windows" => args.validate_windows = scalar(value).map_err(|e| bad(&e))?,
        "algorithms" => {
            args.algorithms = value
                .split(',')
                .map(|part| AlgorithmArg::from_str(part.trim(), true))
                .collect::<Result<_, _>>()
                .map_err(|e| bad(&e))?;
        }
        "budgets" => args.budgets = list(value).map_err(|e| bad(&e))?,
        "depths" => args.depths = list(value).map_err(|e| bad(&e))?,
        "seeds" => args.seeds = list(value).map_err(|e| bad(&e))?,
        "metric" => args.metric = MetricArg::from_str(value, true).map_err(|e| bad(&e))?,
        "first_pass_budget" => args.first_pass_budget = scalar(value).map_err(|e| bad(&e))?,
        "first_pass_depth" => args.first_pass_depth = scalar(value).map_err(|e| bad(&e))?,
        "first_pass_fraction" => {
            args.first_pass_fraction = scalar(value).map_err(|e| bad(&e))?;
        }
        "out" => args.out = Some(PathBuf::from(value)),
        "json" => args.json = Some(PathBuf::from(value)),
        "checkpoint" => args.checkpoint = Some(PathBuf::from(value)),
        _ => {
            return Err(Failure::usage(format!(
                "{}:{line_no}: unknown config key `{key}`",
                path.display()
            )));
        }
    }
    Ok(())
}

fn algorithm_names(algorithms: &[AlgorithmArg]) -> String {
    algorithms
        .iter()
        .map(|a| a.to_algorithm().name())
        .collect::<Vec<_>>()
        .join(",")
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn resolved_config(args: &RunArgs) -> Vec<(&'static str, String)> {
    vec![
        ("source", args.source.clone().unwrap_or_else(|| "none".into())),
        ("n", args.n.to_string()),
        ("s", args.s.to_string()),
        ("len", args.len.to_string()),
        ("stream-seed", args.stream_seed.to_string()),
        (
            "format",
            match args.format {
                FormatArg::Plain => "plain".into(),
                FormatArg::Tsv => "tsv".into(),
            },
        ),
        ("key-column", args.key_column.to_string()),
        (
            "window-column",
            args.window_column.map_or_else(|| "none".into(), |c| c.to_string()),
        ),
        ("train-windows", args.train_windows.to_string()),
        ("validate-windows", args.validate_windows.to_string()),
        ("algorithms", algorithm_names(&args.algorithms)),
        ("budgets", join(&args.budgets)),
        ("depths", join(&args.depths)),
        ("seeds", join(&args.seeds)),
        (
            "metric",
            match args.metric {
                MetricArg::PerItem => "per-item".into(),
                MetricArg::Weighted => "weighted".into(),
            },
        ),
        ("first-pass-budget", args.first_pass_budget.to_string()),
        ("first-pass-depth", args.first_pass_depth.to_string()),
        ("first-pass-fraction", args.first_pass_fraction.to_string()),
        (
            "out",
            args.out.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string()),
        ),
        (
            "json",
            args.json.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string()),
        ),
        (
            "checkpoint",
            args.checkpoint.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string()),
        ),
    ]
}

fn log_source(args: &RunArgs, path: &Path) -> LogSource {
    LogSource {
        path: path.to_path_buf(),
        format: match args.format {
            FormatArg::Plain => LogFormat::Plain,
            FormatArg::Tsv => LogFormat::Tsv { key_column: args.key_column },
        },
        window_field: args.window_column,
    }
}

fn read_windows(source: &LogSource) -> Result<Vec<Vec<StreamItem>>, Failure> {
    let mut windows: Vec<(String, Vec<StreamItem>)> = Vec::new();
    for record in read_log(source)? {
        let (tag, item) = record?;
        match windows.iter_mut().find(|(t, _)| *t == tag) {
            Some((_, window)) => window.push(item),
            None => windows.push((tag, vec![item])),
        }
    }
    Ok(windows.into_iter().map(|(_, window)| window).collect())
}

fn cmd_run(mut args: RunArgs, matches: &ArgMatches) -> Result<(), Failure> {
    if let Some(config_path) = args.config.clone() {
        apply_config_file(&mut args, matches, &config_path)?;
    }
    for (key, value) in resolved_config(&args) {
        eprintln!("config {key}={value}");
    }
    if args.validate_windows != 1 {
        return Err(Failure::usage("only --validate-windows 1 is supported"));
    }
    let out = args
        .out
        .clone()
        .ok_or_else(|| Failure::usage("--out is required (flag or config file)"))?;
    let source_name = args
        .source
        .clone()
        .ok_or_else(|| Failure::usage("--source is required (flag or config file)"))?;

    let source = if source_name == "zipf" {
        ExperimentSource::Zipf(ZipfSpec::new(args.n, args.s, args.len, args.stream_seed)?)
    } else {
        let path = Path::new(&source_name);
        if !path.is_file() {
            return Err(Failure::runtime(format!("source file {} not found", path.display())));
        }
        ExperimentSource::Log {
            source: log_source(&args, path),
            train_windows: args.train_windows,
        }
    };

    let spec = ExperimentSpec {
        source,
        budgets: args.budgets.clone(),
        algorithms: args.algorithms.iter().map(|a| a.to_algorithm()).collect(),
        depths: args.depths.clone(),
        seeds: args.seeds.clone(),
        metric: match args.metric {
            MetricArg::PerItem => Metric::PerItem,
            MetricArg::Weighted => Metric::Weighted,
        },
        first_pass_budget_bytes: args.first_pass_budget,
        first_pass_depth: args.first_pass_depth,
        first_pass_fraction: args.first_pass_fraction,
    };

    let report = run_experiment(&spec)?;
    for diagnostic in &report.diagnostics {
        eprintln!("warning: {diagnostic}");
    }
    write_report(&report, &out)?;

    if let Some(json_path) = &args.json {
        let mut echo: BTreeMap<String, serde_json::Value> = resolved_config(&args)
            .into_iter()
            .map(|(key, value)| (key.to_string(), serde_json::Value::String(value)))
            .collect();
        echo.insert("command".into(), "run".into());
        echo.insert("rows".into(), report.rows.len().into());
        echo.insert(
            "diagnostics".into(),
            serde_json::Value::Array(
                report.diagnostics.iter().map(|d| d.as_str().into()).collect(),
            ),
        );
        let text = serde_json::to_string_pretty(&echo).expect("string map serializes");
        std::fs::write(json_path, text + "\n")
            .map_err(|e| Failure::runtime(format!("write {}: {e}", json_path.display())))?;
    }

    if let Some(checkpoint_path) = &args.checkpoint {
        let blob = build_checkpoint(&spec)?;
        std::fs::write(checkpoint_path, blob)
            .map_err(|e| Failure::runtime(format!("write {}: {e}", checkpoint_path.display())))?;
    }
    Ok(())
}

/// A concrete tuned sketch for `--checkpoint`: first budget/depth/seed cell,
/// trained the same way the experiment's double-hash rows are. Windowed
/// sources ingest the most recent window; single streams ingest everything.
fn build_checkpoint(spec: &ExperimentSpec) -> Result<Vec<u8>, Failure> {
    let budget = spec.budgets[0];
    let depth = spec.depths[0];
    let template = DoubleHashConfig {
        total_budget_bytes: budget,
        first_pass_budget_bytes: spec.first_pass_budget_bytes,
        first_pass_depth: spec.first_pass_depth,
        unique_buckets: 0,
        inner_depth: depth,
        first_pass_fraction: spec.first_pass_fraction,
        heaviness_k: u64::MAX,
        master_seed: spec.seeds[0],
        core: SketchCore::CountMin,
        track_candidates: true,
    }
    .validated()?;
    let grid: Vec<(usize, usize)> = default_grid(budget)
        .into_iter()
        .filter(|(_, candidate_depth)| *candidate_depth == depth)
        .collect();

    // Each source yields (training, validation, list_source, test): tuning
    // scores candidates on validation, the final heavy-hitter list is drawn
    // from list_source.
    type Splits = (Vec<StreamItem>, Vec<StreamItem>, Vec<StreamItem>, Vec<StreamItem>);

    fn split_windows(
        windows: Vec<Vec<StreamItem>>,
        train_windows: usize,
    ) -> Result<Splits, Failure> {
        if windows.len() < train_windows + 2 {
            return Err(dhsketch::Error::InsufficientHistory {
                needed: train_windows + 1,
                available: windows.len().saturating_sub(1),
            }
            .into());
        }
        let training: Vec<StreamItem> =
            windows[..train_windows].iter().flatten().cloned().collect();
        let validation = windows[train_windows].clone();
        let test = windows.last().expect("checked length").clone();
        Ok((training.clone(), validation, training, test))
    }

    fn split_single(stream: Vec<StreamItem>, fraction: f64) -> Splits {
        let prefix_len =
            ((stream.len() as f64 * fraction).round() as usize).clamp(1, stream.len());
        let prefix = stream[..prefix_len].to_vec();
        // Tuning holds out the back half of the prefix; a one-item prefix
        // degenerates to self-validation.
        let half = prefix.len() / 2;
        if half == 0 {
            (prefix.clone(), prefix.clone(), prefix, stream)
        } else {
            (prefix[..half].to_vec(), prefix[half..].to_vec(), prefix, stream)
        }
    }

    let (training, validation, list_source, test) = match &spec.source {
        ExperimentSource::Zipf(zipf) => {
            split_single(generate_stream(zipf)?.collect(), spec.first_pass_fraction)
        }
        ExperimentSource::Log { source, train_windows } => {
            let mut windows = read_windows(source)?;
            if windows.len() == 1 {
                split_single(windows.pop().expect("one window"), spec.first_pass_fraction)
            } else {
                split_windows(windows, *train_windows)?
            }
        }
        ExperimentSource::Windows { windows, train_windows } => {
            split_windows(windows.clone(), *train_windows)?
        }
    };
    let config = tune(&training, &validation, &template, &grid, spec.metric)?;
    let heavy = first_pass(&list_source, &config)?;
    let mut sketch = DoubleHashSketch::new(config, &heavy)?;
    sketch.ingest(&test)?;
    Ok(sketch.to_bytes())
}

fn cmd_query(args: QueryArgs) -> Result<(), Failure> {
    let blob = std::fs::read(&args.checkpoint)
        .map_err(|e| Failure::runtime(format!("cannot read {}: {e}", args.checkpoint.display())))?;
    let sketch = DoubleHashSketch::from_bytes(&blob)
        .map_err(|e| Failure::runtime(format!("{}: {e}", args.checkpoint.display())))?;
    let keys = std::fs::read(&args.keys)
        .map_err(|e| Failure::runtime(format!("cannot read {}: {e}", args.keys.display())))?;
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for line in keys.split(|byte| *byte == b'\n') {
        let key = line.strip_suffix(b"\r").unwrap_or(line);
        if key.is_empty() {
            continue;
        }
        out.write_all(key)
            .and_then(|()| writeln!(out, "\t{}", sketch.estimate(key)))
            .map_err(|e| Failure::runtime(format!("write stdout: {e}")))?;
    }
    out.flush().map_err(|e| Failure::runtime(format!("write stdout: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(argv: &[&str]) -> (RunArgs, ArgMatches) {
        let mut full = vec!["dhsketch", "run"];
        full.extend_from_slice(argv);
        let matches = Cli::command().try_get_matches_from(&full).unwrap();
        let cli = Cli::from_arg_matches(&matches).unwrap();
        let run_matches = matches.subcommand_matches("run").unwrap().clone();
        match cli.command {
            Cmd::Run(args) => (*args, run_matches),
            _ => unreachable!("run subcommand requested"),
        }
    }

    #[test]
    fn config_file_fills_defaults_but_flags_win() {
        let dir = std::env::temp_dir().join("dhsketch-config-merge-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(
            &path,
            "# comment\nbudgets=4000\nseeds=9\nmetric=weighted\nout=from-file.csv\n",
        )
        .unwrap();
        let (mut args, matches) = run_args(&["--source", "zipf", "--seeds", "1,2"]);
        apply_config_file(&mut args, &matches, &path).unwrap();
        assert_eq!(args.budgets, vec![4000]);
        assert_eq!(args.seeds, vec![1, 2], "command line overrides the file");
        assert_eq!(args.metric, MetricArg::Weighted);
        assert_eq!(args.out, Some(PathBuf::from("from-file.csv")));
    }

    #[test]
    fn config_file_rejects_unknown_keys_and_bad_lines() {
        let dir = std::env::temp_dir().join("dhsketch-config-reject-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.conf");
        let (mut args, matches) = run_args(&["--source", "zipf"]);

        std::fs::write(&path, "nonsense-key=1\n").unwrap();
        assert!(matches!(
            apply_config_file(&mut args, &matches, &path),
            Err(Failure::Usage(_))
        ));

        std::fs::write(&path, "just some words\n").unwrap();
        assert!(matches!(
            apply_config_file(&mut args, &matches, &path),
            Err(Failure::Usage(_))
        ));

        std::fs::write(&path, "budgets=ten\n").unwrap();
        assert!(matches!(
            apply_config_file(&mut args, &matches, &path),
            Err(Failure::Usage(_))
        ));
    }
}

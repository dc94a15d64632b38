//! Stream production: synthetic Zipfian generators and query-log ingestion.
//!
//! Synthetic streams draw ranks from a Zipf(s, N) distribution via inverse
//! CDF over a precomputed cumulative table, so generation is deterministic
//! given a seed. Log files stream lazily in constant memory. Both paths emit
//! [`StreamItem`]s keyed by byte strings; synthetic ranks serialize to
//! 8-byte big-endian keys so the two paths share one key type.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::PathBuf;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::{Error, Result};

/// One stream record: a byte-string key carrying a non-negative weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamItem {
    pub key: Vec<u8>,
    pub weight: u64,
}

impl StreamItem {
    pub fn new(key: impl Into<Vec<u8>>, weight: u64) -> Self {
        Self { key: key.into(), weight }
    }

    /// Unit-weight item, the common case for raw streams.
    pub fn unit(key: impl Into<Vec<u8>>) -> Self {
        Self { key: key.into(), weight: 1 }
    }
}

/// Canonical byte-string key for a synthetic element of rank `r`.
pub fn rank_key(rank: u64) -> [u8; 8] {
    rank.to_be_bytes()
}

/// Inverse of [`rank_key`]; `None` when the key is not a rank encoding.
pub fn key_rank(key: &[u8]) -> Option<u64> {
    Some(u64::from_be_bytes(key.try_into().ok()?))
}

/// Sum with Neumaier compensation; keeps absolute error near machine
/// precision even over millions of terms, where naive accumulation drifts
/// past 1e-12.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for value in values {
        let t = sum + value;
        if sum.abs() >= value.abs() {
            compensation += (sum - t) + value;
        } else {
            compensation += (value - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Parameters of a synthetic Zipfian stream: `num_elements` distinct ranks
/// (N), skew `exponent` (s), `stream_length` unit-weight draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfSpec {
    pub num_elements: u64,
    pub exponent: f64,
    pub stream_length: u64,
    pub seed: u64,
}

impl ZipfSpec {
    pub fn new(num_elements: u64, exponent: f64, stream_length: u64, seed: u64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::InvalidParameter("zipf num_elements must be at least 1".into()));
        }
        if stream_length == 0 {
            return Err(Error::InvalidParameter("zipf stream_length must be at least 1".into()));
        }
        if !exponent.is_finite() || exponent < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "zipf exponent must be a finite non-negative number, got {exponent}"
            )));
        }
        Ok(Self { num_elements, exponent, stream_length, seed })
    }
}

/// Zipf(s, N) with a precomputed cumulative weight table, shared by the PMF
/// and the sampler so both see identical arithmetic.
#[derive(Debug, Clone)]
pub struct ZipfDistribution {
    spec: ZipfSpec,
    cumulative: Vec<f64>,
    total: f64,
}

impl ZipfDistribution {
    pub fn new(spec: ZipfSpec) -> Result<Self> {
        let n = usize::try_from(spec.num_elements)
            .map_err(|_| Error::InvalidParameter("zipf num_elements exceeds address space".into()))?;
        let mut cumulative = Vec::with_capacity(n);
        let mut sum = 0.0f64;
        let mut compensation = 0.0f64;
        for rank in 1..=spec.num_elements {
            let weight = (rank as f64).powf(-spec.exponent);
            let t = sum + weight;
            if sum.abs() >= weight.abs() {
                compensation += (sum - t) + weight;
            } else {
                compensation += (weight - t) + sum;
            }
            sum = t;
            cumulative.push(sum + compensation);
        }
        let total = sum + compensation;
        Ok(Self { spec, cumulative, total })
    }

    pub fn spec(&self) -> &ZipfSpec {
        &self.spec
    }

    /// Probability of rank `rank`: `(1/rank^s) / Σ_{n=1..N} (1/n^s)`.
    pub fn pmf(&self, rank: u64) -> Result<f64> {
        if rank == 0 || rank > self.spec.num_elements {
            return Err(Error::InvalidParameter(format!(
                "rank {rank} outside [1, {}]",
                self.spec.num_elements
            )));
        }
        Ok((rank as f64).powf(-self.spec.exponent) / self.total)
    }

    /// Draws a rank in `[1, N]` by inverting the cumulative table.
    pub fn sample_rank(&self, rng: &mut ChaCha8Rng) -> u64 {
        let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let target = unit * self.total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        (idx.min(self.cumulative.len() - 1) + 1) as u64
    }
}

/// Convenience single-value PMF; builds the normalizer per call, so prefer
/// [`ZipfDistribution::pmf`] when evaluating many ranks.
pub fn zipf_pmf(rank: u64, spec: &ZipfSpec) -> Result<f64> {
    ZipfDistribution::new(*spec)?.pmf(rank)
}

/// Deterministic iterator of `stream_length` unit-weight items drawn from
/// the Zipf distribution; rank `r` appears with probability `pmf(r)`.
pub fn generate_stream(spec: &ZipfSpec) -> Result<ZipfStream> {
    let distribution = ZipfDistribution::new(*spec)?;
    let rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let remaining = spec.stream_length;
    Ok(ZipfStream { distribution, rng, remaining })
}

pub struct ZipfStream {
    distribution: ZipfDistribution,
    rng: ChaCha8Rng,
    remaining: u64,
}

impl Iterator for ZipfStream {
    type Item = StreamItem;

    fn next(&mut self) -> Option<StreamItem> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let rank = self.distribution.sample_rank(&mut self.rng);
        Some(StreamItem::new(rank_key(rank).to_vec(), 1))
    }
}

/// Log file layout: one key per line, or tab-separated with the key at a
/// given column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogFormat {
    Plain,
    Tsv { key_column: usize },
}

/// A query-log input: where it lives, how rows are shaped, and which column
/// (if any) tags the time window a row belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogSource {
    pub path: PathBuf,
    pub format: LogFormat,
    pub window_field: Option<usize>,
}

/// Lazily streams `(window_tag, item)` records from a log file.
///
/// Malformed rows (missing key column, empty key, missing window column) are
/// skipped and counted; if more than 1% of rows are malformed the iterator
/// ends with a hard error. Keys are the raw bytes of the field after
/// trimming the line delimiter.
pub fn read_log(source: &LogSource) -> Result<LogReader> {
    let file = File::open(&source.path).map_err(|e| Error::Io {
        path: source.path.clone(),
        source: e,
    })?;
    Ok(LogReader {
        source: source.clone(),
        reader: BufReader::new(file),
        rows: 0,
        malformed: 0,
        finished: false,
    })
}

pub struct LogReader {
    source: LogSource,
    reader: BufReader<File>,
    rows: u64,
    malformed: u64,
    finished: bool,
}

impl LogReader {
    /// Rows consumed so far, malformed included.
    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// Rows skipped as malformed so far.
    pub fn malformed(&self) -> u64 {
        self.malformed
    }

    fn parse_row<'a>(&self, line: &'a [u8]) -> Option<(String, &'a [u8])> {
        match self.source.format {
            LogFormat::Plain => {
                if line.is_empty() {
                    return None;
                }
                let tag = match self.source.window_field {
                    // A plain file has exactly one column; only column 0 can
                    // serve as the window tag.
                    Some(0) => String::from_utf8_lossy(line).into_owned(),
                    Some(_) => return None,
                    None => String::new(),
                };
                Some((tag, line))
            }
            LogFormat::Tsv { key_column } => {
                let fields: Vec<&[u8]> = line.split(|&b| b == b'\t').collect();
                let key = *fields.get(key_column)?;
                if key.is_empty() {
                    return None;
                }
                let tag = match self.source.window_field {
                    Some(column) => String::from_utf8_lossy(fields.get(column)?).into_owned(),
                    None => String::new(),
                };
                Some((tag, key))
            }
        }
    }
}

impl Iterator for LogReader {
    type Item = Result<(String, StreamItem)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        loop {
            let mut line = Vec::new();
            match self.reader.read_until(b'\n', &mut line) {
                Err(e) => {
                    self.finished = true;
                    return Some(Err(Error::Io { path: self.source.path.clone(), source: e }));
                }
                Ok(0) => {
                    self.finished = true;
                    if self.malformed * 100 > self.rows {
                        return Some(Err(Error::TooManyMalformed {
                            malformed: self.malformed,
                            rows: self.rows,
                        }));
                    }
                    return None;
                }
                Ok(_) => {
                    if line.last() == Some(&b'\n') {
                        line.pop();
                    }
                    if line.last() == Some(&b'\r') {
                        line.pop();
                    }
                    self.rows += 1;
                    match self.parse_row(&line) {
                        Some((tag, key)) => {
                            return Some(Ok((tag, StreamItem::unit(key))));
                        }
                        None => {
                            self.malformed += 1;
                            continue;
                        }
                    }
                }
            }
        }
    }
}

/// Brute-force per-key weight sums; the oracle every estimate is judged
/// against. Desk-scale only: the whole map lives in memory.
pub fn exact_counts<'a>(items: impl IntoIterator<Item = &'a StreamItem>) -> HashMap<Vec<u8>, u64> {
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    for item in items {
        *counts.entry(item.key.clone()).or_default() += item.weight;
    }
    counts
}

/// Reads a whole file, capped so a runaway input cannot exhaust memory.
pub fn read_file_capped(path: &PathBuf, cap: u64) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let mut buf = Vec::new();
    file.take(cap)
        .read_to_end(&mut buf)
        .map_err(|e| Error::Io { path: path.clone(), source: e })?;
    Ok(buf)
}

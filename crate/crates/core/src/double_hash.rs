//! Two-pass frequency sketching with heavy-hitter isolation.
//!
//! A transient count-min first pass over a stream prefix ranks the keys it
//! saw; keys whose estimated share of the prefix exceeds `1/k` get their own
//! exact unique bucket, and the main pass routes everything else into a
//! smaller shared sketch. Removing the heaviest keys from the shared table
//! removes most collision mass, so the same byte budget yields lower error
//! than spending it all on one sketch.
//!
//! The module also carries the machinery around that core: grid tuning on a
//! training/validation split, window-boundary re-optimization that promotes
//! and demotes heavy hitters as the stream drifts, a rolling train/validate/
//! test schedule for windowed logs, and the oracle baseline that picks heavy
//! hitters from exact test counts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::evaluate::{avg_error, Metric};
use crate::hashing::derive_seed;
use crate::heavy_hitters::{detect_heavy_hitters, HeavyHitterParams, HeavyHitterTable};
use crate::sketch::{CountMinSketch, CountSketch, SketchConfig};
use crate::stream::{exact_counts, StreamItem};
use crate::{Error, Result};

/// Seed lanes for the two sketches derived from one master seed.
const FIRST_PASS_SEED_LANE: u64 = 1;
const INNER_SEED_LANE: u64 = 2;

/// Byte accounting: shared sketch cells cost 4 bytes, unique buckets 8.
const SHARED_BUCKET_BYTES: u64 = 4;
const UNIQUE_BUCKET_BYTES: u64 = 8;

/// Candidate list capacity as a multiple of the unique-bucket count.
const CANDIDATE_FACTOR: usize = 4;

pub const DEFAULT_FIRST_PASS_BUDGET_BYTES: u64 = 200_000;
pub const DEFAULT_FIRST_PASS_DEPTH: usize = 4;
pub const DEFAULT_FIRST_PASS_FRACTION: f64 = 0.2;

/// Which estimator backs the shared (non-heavy-hitter) table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchCore {
    CountMin,
    CountSketch,
}

/// Full parameterization of a double-hash sketch.
///
/// The shared-table width is derived, not stored: the byte budget pays for
/// `unique_buckets` exact counters first and the remainder buys
/// `inner_width x inner_depth` shared cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleHashConfig {
    /// Main-structure budget (M): unique buckets plus shared cells. The
    /// first pass is a separate transient allocation.
    pub total_budget_bytes: u64,
    pub first_pass_budget_bytes: u64,
    pub first_pass_depth: usize,
    /// Number of unique buckets (B_u); 0 degenerates to a plain sketch.
    pub unique_buckets: usize,
    /// Hash functions in the shared table (d_hh).
    pub inner_depth: usize,
    /// Fraction of the stream the first pass observes (S_t).
    pub first_pass_fraction: f64,
    /// Heaviness threshold denominator: a key is heavy when its estimated
    /// share of the observed mass strictly exceeds 1/k.
    pub heaviness_k: u64,
    pub master_seed: u64,
    pub core: SketchCore,
    /// Track top non-heavy keys during ingest so re-optimization has
    /// promotion candidates. Off by default; static runs don't pay for it.
    pub track_candidates: bool,
}

impl DoubleHashConfig {
    /// Config with the default first pass (0.2 MB, 4 hash functions, first
    /// 20% of the stream) and a non-binding heaviness threshold, so the
    /// bucket count is the cut: the unique buckets hold the top keys by
    /// estimated frequency. Override with [`Self::with_heaviness_k`] to
    /// require a minimum share of stream mass instead.
    pub fn new(
        total_budget_bytes: u64,
        unique_buckets: usize,
        inner_depth: usize,
        master_seed: u64,
    ) -> Result<Self> {
        Self {
            total_budget_bytes,
            first_pass_budget_bytes: DEFAULT_FIRST_PASS_BUDGET_BYTES,
            first_pass_depth: DEFAULT_FIRST_PASS_DEPTH,
            unique_buckets,
            inner_depth,
            first_pass_fraction: DEFAULT_FIRST_PASS_FRACTION,
            heaviness_k: u64::MAX,
            master_seed,
            core: SketchCore::CountMin,
            track_candidates: false,
        }
        .validated()
    }

    pub fn with_first_pass(mut self, budget_bytes: u64, depth: usize) -> Result<Self> {
        self.first_pass_budget_bytes = budget_bytes;
        self.first_pass_depth = depth;
        self.validated()
    }

    pub fn with_first_pass_fraction(mut self, fraction: f64) -> Result<Self> {
        self.first_pass_fraction = fraction;
        self.validated()
    }

    pub fn with_heaviness_k(mut self, k: u64) -> Result<Self> {
        self.heaviness_k = k;
        self.validated()
    }

    pub fn with_core(mut self, core: SketchCore) -> Self {
        self.core = core;
        self
    }

    pub fn with_candidate_tracking(mut self, on: bool) -> Self {
        self.track_candidates = on;
        self
    }

    /// Checks every field and the byte model; all construction paths funnel
    /// through here.
    pub fn validated(self) -> Result<Self> {
        if self.total_budget_bytes == 0 {
            return Err(Error::InvalidParameter("total budget must be positive".into()));
        }
        if self.first_pass_budget_bytes == 0 {
            return Err(Error::InvalidParameter("first-pass budget must be positive".into()));
        }
        if self.first_pass_depth == 0 || self.inner_depth == 0 {
            return Err(Error::InvalidParameter("sketch depths must be at least 1".into()));
        }
        if !(self.first_pass_fraction > 0.0 && self.first_pass_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "first-pass fraction must be in (0, 1], got {}",
                self.first_pass_fraction
            )));
        }
        if self.heaviness_k < 2 {
            return Err(Error::InvalidParameter("heaviness k must be at least 2".into()));
        }
        if self.first_pass_budget_bytes / (SHARED_BUCKET_BYTES * self.first_pass_depth as u64) == 0 {
            return Err(Error::Infeasible(format!(
                "first-pass budget {} cannot host depth {} at 4 bytes per bucket",
                self.first_pass_budget_bytes, self.first_pass_depth
            )));
        }
        let unique_bytes = UNIQUE_BUCKET_BYTES * self.unique_buckets as u64;
        let shared_bytes = self.total_budget_bytes.checked_sub(unique_bytes);
        let inner_width = shared_bytes
            .map(|b| b / (SHARED_BUCKET_BYTES * self.inner_depth as u64))
            .unwrap_or(0);
        if inner_width == 0 {
            return Err(Error::Infeasible(format!(
                "budget {} cannot host {} unique buckets plus a depth-{} shared table",
                self.total_budget_bytes, self.unique_buckets, self.inner_depth
            )));
        }
        Ok(self)
    }

    /// Shared-table width bought by the budget left after unique buckets.
    pub fn inner_width(&self) -> usize {
        let shared = self.total_budget_bytes - UNIQUE_BUCKET_BYTES * self.unique_buckets as u64;
        (shared / (SHARED_BUCKET_BYTES * self.inner_depth as u64)) as usize
    }

    pub fn first_pass_width(&self) -> usize {
        (self.first_pass_budget_bytes / (SHARED_BUCKET_BYTES * self.first_pass_depth as u64)) as usize
    }

    pub fn inner_cells(&self) -> u64 {
        self.inner_width() as u64 * self.inner_depth as u64
    }

    pub fn inner_sketch_config(&self) -> SketchConfig {
        SketchConfig {
            width: self.inner_width(),
            depth: self.inner_depth,
            master_seed: derive_seed(self.master_seed, INNER_SEED_LANE),
        }
    }

    pub fn first_pass_sketch_config(&self) -> SketchConfig {
        SketchConfig {
            width: self.first_pass_width(),
            depth: self.first_pass_depth,
            master_seed: derive_seed(self.master_seed, FIRST_PASS_SEED_LANE),
        }
    }

    fn heavy_hitter_params(&self) -> Result<HeavyHitterParams> {
        HeavyHitterParams::new(self.heaviness_k, self.unique_buckets)
    }
}

#[derive(Debug, Clone)]
enum InnerSketch {
    Cm(CountMinSketch),
    Cs(CountSketch),
}

impl InnerSketch {
    fn build(config: &DoubleHashConfig) -> Result<Self> {
        let sketch_config = config.inner_sketch_config();
        Ok(match config.core {
            SketchCore::CountMin => Self::Cm(CountMinSketch::new(sketch_config)?),
            SketchCore::CountSketch => Self::Cs(CountSketch::new(sketch_config)?),
        })
    }

    fn update(&mut self, key: &[u8], weight: u64) -> Result<()> {
        match self {
            Self::Cm(sk) => sk.update(key, weight),
            Self::Cs(sk) => sk.update(key, weight),
        }
    }

    /// Non-negative estimate; a signed-core estimate clamps at zero since
    /// frequencies cannot be negative.
    fn estimate(&self, key: &[u8]) -> u64 {
        match self {
            Self::Cm(sk) => sk.estimate(key),
            Self::Cs(sk) => sk.estimate(key).max(0) as u64,
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            Self::Cm(sk) => sk.to_bytes(),
            Self::Cs(sk) => sk.to_bytes(),
        }
    }
}

/// Bounded list of the highest-estimate non-heavy keys seen during ingest;
/// the promotion pool for [`DoubleHashSketch::reoptimize`]. The shared
/// sketch cannot enumerate keys, so without this list past keys would be
/// unavailable for promotion.
#[derive(Debug, Clone)]
struct CandidateTracker {
    capacity: usize,
    estimates: HashMap<Vec<u8>, u64>,
    ordered: BTreeSet<(u64, Vec<u8>)>,
}

impl CandidateTracker {
    fn new(capacity: usize) -> Self {
        Self { capacity, estimates: HashMap::new(), ordered: BTreeSet::new() }
    }

    fn observe(&mut self, key: &[u8], estimate: u64) {
        if let Some(&old) = self.estimates.get(key) {
            if estimate <= old {
                return;
            }
            self.ordered.remove(&(old, key.to_vec()));
        } else if self.estimates.len() >= self.capacity {
            // Displace the weakest entry only when the newcomer beats it.
            let Some((floor_est, floor_key)) = self.ordered.first().cloned() else {
                return;
            };
            if estimate <= floor_est {
                return;
            }
            self.ordered.remove(&(floor_est, floor_key.clone()));
            self.estimates.remove(&floor_key);
        }
        self.estimates.insert(key.to_vec(), estimate);
        self.ordered.insert((estimate, key.to_vec()));
    }

    fn forget(&mut self, key: &[u8]) {
        if let Some(est) = self.estimates.remove(key) {
            self.ordered.remove(&(est, key.to_vec()));
        }
    }

    fn entries(&self) -> impl Iterator<Item = (&Vec<u8>, u64)> {
        self.estimates.iter().map(|(key, &est)| (key, est))
    }
}

/// The main-pass structure: exact unique buckets for heavy hitters, a
/// shared sketch for everything else. Every update touches exactly one of
/// the two.
#[derive(Debug, Clone)]
pub struct DoubleHashSketch {
    config: DoubleHashConfig,
    hh: HeavyHitterTable,
    inner: InnerSketch,
    ingested_total: u64,
    tracker: Option<CandidateTracker>,
}

impl DoubleHashSketch {
    /// Builds the structure with `heavy_keys` pre-admitted at count 0
    /// (their counting starts now; first-pass mass is not carried over).
    pub fn new(config: DoubleHashConfig, heavy_keys: &[Vec<u8>]) -> Result<Self> {
        let config = config.validated()?;
        let mut hh = HeavyHitterTable::new(config.unique_buckets);
        for key in heavy_keys {
            hh.admit(key, 0)?;
        }
        let inner = InnerSketch::build(&config)?;
        let tracker = (config.track_candidates && config.unique_buckets > 0)
            .then(|| CandidateTracker::new(CANDIDATE_FACTOR * config.unique_buckets));
        Ok(Self { config, hh, inner, ingested_total: 0, tracker })
    }

    pub fn config(&self) -> &DoubleHashConfig {
        &self.config
    }

    pub fn heavy_table(&self) -> &HeavyHitterTable {
        &self.hh
    }

    /// Total weight routed through the sketch since construction.
    pub fn ingested_total(&self) -> u64 {
        self.ingested_total
    }

    /// Routes one record: heavy hitters hit their exact counter, everything
    /// else lands in the shared sketch.
    pub fn update(&mut self, key: &[u8], weight: u64) -> Result<()> {
        if self.hh.contains(key) {
            self.hh.record(key, weight)?;
        } else {
            self.inner.update(key, weight)?;
            if let Some(tracker) = &mut self.tracker {
                tracker.observe(key, self.inner.estimate(key));
            }
        }
        self.ingested_total = self
            .ingested_total
            .checked_add(weight)
            .ok_or_else(|| Error::CounterOverflow("total ingested weight overflowed".into()))?;
        Ok(())
    }

    pub fn ingest<'a>(&mut self, items: impl IntoIterator<Item = &'a StreamItem>) -> Result<()> {
        for item in items {
            self.update(&item.key, item.weight)?;
        }
        Ok(())
    }

    /// Exact counter for heavy hitters, shared-sketch estimate otherwise.
    pub fn estimate(&self, key: &[u8]) -> u64 {
        match self.hh.get(key) {
            Some(count) => count,
            None => self.inner.estimate(key),
        }
    }

    /// Recomputes heavy-hitter membership from current evidence (exact
    /// counters plus tracked candidate estimates, thresholded against total
    /// ingested mass). Demoted keys fold their exact count into the shared
    /// sketch as one weighted update and are evicted; promoted keys are
    /// admitted seeded with their current shared-sketch estimate, which is
    /// never decremented. Both directions preserve overestimation.
    pub fn reoptimize(&mut self, params: &HeavyHitterParams) -> Result<()> {
        if self.config.unique_buckets == 0 {
            return Ok(());
        }
        let mut evidence: HashMap<Vec<u8>, u64> = HashMap::new();
        for (key, count) in self.hh.iter() {
            evidence.insert(key.to_vec(), count);
        }
        if let Some(tracker) = &self.tracker {
            for (key, est) in tracker.entries() {
                evidence.insert(key.clone(), est);
            }
        }
        let effective = HeavyHitterParams {
            k: params.k,
            capacity: params.capacity.min(self.config.unique_buckets),
        };
        let next: HashSet<Vec<u8>> =
            detect_heavy_hitters(&evidence, self.ingested_total, &effective)
                .into_iter()
                .collect();

        let demoted: Vec<Vec<u8>> = self
            .hh
            .iter()
            .filter(|(key, _)| !next.contains(*key))
            .map(|(key, _)| key.to_vec())
            .collect();
        for key in &demoted {
            let count = self.hh.remove(key).expect("demoted key was present");
            self.inner.update(key, count)?;
            if let Some(tracker) = &mut self.tracker {
                tracker.observe(key, self.inner.estimate(key));
            }
        }

        let mut promoted: Vec<&Vec<u8>> =
            next.iter().filter(|key| !self.hh.contains(key)).collect();
        promoted.sort();
        for key in promoted {
            let seed_count = self.inner.estimate(key);
            self.hh.admit(key, seed_count)?;
            if let Some(tracker) = &mut self.tracker {
                tracker.forget(key);
            }
        }
        Ok(())
    }

    /// Checkpoint blob: header, config, ingested total, sorted heavy-hitter
    /// entries (length-prefixed keys), then the shared-sketch blob.
    pub fn to_bytes(&self) -> Vec<u8> {
        let inner_blob = self.inner.to_bytes();
        let mut out = Vec::with_capacity(128 + inner_blob.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config.total_budget_bytes.to_le_bytes());
        out.extend_from_slice(&self.config.first_pass_budget_bytes.to_le_bytes());
        out.extend_from_slice(&(self.config.first_pass_depth as u64).to_le_bytes());
        out.extend_from_slice(&(self.config.unique_buckets as u64).to_le_bytes());
        out.extend_from_slice(&(self.config.inner_depth as u64).to_le_bytes());
        out.extend_from_slice(&self.config.first_pass_fraction.to_bits().to_le_bytes());
        out.extend_from_slice(&self.config.heaviness_k.to_le_bytes());
        out.extend_from_slice(&self.config.master_seed.to_le_bytes());
        out.push(match self.config.core {
            SketchCore::CountMin => 0,
            SketchCore::CountSketch => 1,
        });
        out.push(self.config.track_candidates as u8);
        out.extend_from_slice(&self.ingested_total.to_le_bytes());
        out.extend_from_slice(&(self.hh.len() as u64).to_le_bytes());
        for (key, count) in self.hh.iter() {
            out.extend_from_slice(&(key.len() as u32).to_le_bytes());
            out.extend_from_slice(key);
            out.extend_from_slice(&count.to_le_bytes());
        }
        out.extend_from_slice(&(inner_blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&inner_blob);
        out
    }

    /// Inverse of [`to_bytes`]. Candidate-tracking state is not part of the
    /// checkpoint; a restored sketch starts with an empty candidate list.
    pub fn from_bytes(blob: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { blob, pos: 0 };
        let magic = cursor.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Corrupt("checkpoint has wrong magic".into()));
        }
        let version = cursor.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Corrupt(format!(
                "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let total_budget_bytes = cursor.u64()?;
        let first_pass_budget_bytes = cursor.u64()?;
        let first_pass_depth = cursor.usize()?;
        let unique_buckets = cursor.usize()?;
        let inner_depth = cursor.usize()?;
        let first_pass_fraction = f64::from_bits(cursor.u64()?);
        let heaviness_k = cursor.u64()?;
        let master_seed = cursor.u64()?;
        let core = match cursor.u8()? {
            0 => SketchCore::CountMin,
            1 => SketchCore::CountSketch,
            other => return Err(Error::Corrupt(format!("unknown sketch core tag {other}"))),
        };
        let track_candidates = match cursor.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Corrupt(format!("invalid tracking flag {other}"))),
        };
        let config = DoubleHashConfig {
            total_budget_bytes,
            first_pass_budget_bytes,
            first_pass_depth,
            unique_buckets,
            inner_depth,
            first_pass_fraction,
            heaviness_k,
            master_seed,
            core,
            track_candidates,
        }
        .validated()
        .map_err(|e| Error::Corrupt(format!("checkpoint config: {e}")))?;

        let ingested_total = cursor.u64()?;
        let hh_len = cursor.usize()?;
        if hh_len > config.unique_buckets {
            return Err(Error::Corrupt(format!(
                "checkpoint lists {hh_len} heavy hitters but capacity is {}",
                config.unique_buckets
            )));
        }
        let mut hh = HeavyHitterTable::new(config.unique_buckets);
        let mut prev_key: Option<Vec<u8>> = None;
        for _ in 0..hh_len {
            let key_len = cursor.u32()? as usize;
            let key = cursor.take(key_len)?.to_vec();
            let count = cursor.u64()?;
            if let Some(prev) = &prev_key {
                if *prev >= key {
                    return Err(Error::Corrupt("heavy-hitter keys out of order".into()));
                }
            }
            hh.admit(&key, count)
                .map_err(|e| Error::Corrupt(format!("heavy-hitter entry: {e}")))?;
            prev_key = Some(key);
        }
        let inner_len = cursor.usize()?;
        let inner_blob = cursor.take(inner_len)?;
        let inner = match config.core {
            SketchCore::CountMin => InnerSketch::Cm(CountMinSketch::from_bytes(inner_blob)?),
            SketchCore::CountSketch => InnerSketch::Cs(CountSketch::from_bytes(inner_blob)?),
        };
        let expected = config.inner_sketch_config();
        let actual = match &inner {
            InnerSketch::Cm(sk) => *sk.config(),
            InnerSketch::Cs(sk) => *sk.config(),
        };
        if actual != expected {
            return Err(Error::Corrupt(
                "checkpoint shared sketch does not match its config".into(),
            ));
        }
        if cursor.pos != blob.len() {
            return Err(Error::Corrupt(format!(
                "checkpoint has {} trailing bytes",
                blob.len() - cursor.pos
            )));
        }
        let tracker = (config.track_candidates && config.unique_buckets > 0)
            .then(|| CandidateTracker::new(CANDIDATE_FACTOR * config.unique_buckets));
        Ok(Self { config, hh, inner, ingested_total, tracker })
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"DHCK";
const CHECKPOINT_VERSION: u32 = 1;

struct Cursor<'a> {
    blob: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.blob.len())
            .ok_or_else(|| Error::Corrupt("checkpoint truncated".into()))?;
        let slice = &self.blob[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?)
            .map_err(|_| Error::Corrupt("checkpoint length does not fit in memory".into()))
    }
}

/// Count-min estimates of every distinct key in the prefix, plus the prefix
/// mass, using the transient first-pass sketch.
fn prefix_estimates(
    prefix: &[StreamItem],
    config: &DoubleHashConfig,
) -> Result<(HashMap<Vec<u8>, u64>, u64)> {
    let mut sketch = CountMinSketch::new(config.first_pass_sketch_config())?;
    let mut distinct: HashSet<&[u8]> = HashSet::new();
    let mut total: u64 = 0;
    for item in prefix {
        sketch.update(&item.key, item.weight)?;
        distinct.insert(&item.key);
        total = total
            .checked_add(item.weight)
            .ok_or_else(|| Error::CounterOverflow("prefix mass overflowed".into()))?;
    }
    if total == 0 {
        return Err(Error::EmptyPrefix);
    }
    let estimates = distinct
        .into_iter()
        .map(|key| (key.to_vec(), sketch.estimate(key)))
        .collect();
    Ok((estimates, total))
}

/// First pass: sketch the prefix, estimate every key seen, return the
/// heavy-hitter list for the main pass. Empty when the config has no unique
/// buckets to fill.
pub fn first_pass(prefix: &[StreamItem], config: &DoubleHashConfig) -> Result<Vec<Vec<u8>>> {
    let (estimates, total) = prefix_estimates(prefix, config)?;
    if config.unique_buckets == 0 {
        return Ok(Vec::new());
    }
    Ok(detect_heavy_hitters(&estimates, total, &config.heavy_hitter_params()?))
}

/// Default tuning grid for a budget: shared-table depths 1 through 5
/// crossed with unique-bucket allocations of 0 through 6 eighths of the
/// budget, restricted to feasible combinations.
pub fn default_grid(budget_bytes: u64) -> Vec<(usize, usize)> {
    let mut grid = Vec::new();
    for eighths in 0..=6u64 {
        let unique = (budget_bytes * eighths / (8 * UNIQUE_BUCKET_BYTES)) as usize;
        for depth in 1..=5usize {
            let unique_bytes = UNIQUE_BUCKET_BYTES * unique as u64;
            let feasible = budget_bytes > unique_bytes
                && (budget_bytes - unique_bytes) / (SHARED_BUCKET_BYTES * depth as u64) >= 1;
            if feasible {
                grid.push((unique, depth));
            }
        }
    }
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Grid search over `(unique_buckets, inner_depth)` candidates: heavy
/// hitters come from one first pass over the training stream, each candidate
/// counts the validation stream fresh, and the config with the lowest
/// validation error wins (ties prefer fewer unique buckets, then fewer hash
/// functions). Candidates inherit the template's heaviness threshold and cap
/// the heavy-hitter list at their own bucket count.
pub fn tune(
    training: &[StreamItem],
    validation: &[StreamItem],
    template: &DoubleHashConfig,
    grid: &[(usize, usize)],
    metric: Metric,
) -> Result<DoubleHashConfig> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut candidates: Vec<(usize, usize)> = grid.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let (estimates, total) = prefix_estimates(training, template)?;
    let truth = exact_counts(validation);

    let mut best: Option<(f64, DoubleHashConfig)> = None;
    for (unique_buckets, inner_depth) in candidates {
        let config = DoubleHashConfig { unique_buckets, inner_depth, ..*template }.validated()?;
        let heavy = if unique_buckets == 0 {
            Vec::new()
        } else {
            detect_heavy_hitters(&estimates, total, &config.heavy_hitter_params()?)
        };
        let mut sketch = DoubleHashSketch::new(config, &heavy)?;
        sketch.ingest(validation)?;
        let guesses: HashMap<Vec<u8>, u64> =
            truth.keys().map(|key| (key.clone(), sketch.estimate(key))).collect();
        let error = avg_error(&guesses, &truth, metric)?;
        if best.as_ref().is_none_or(|(best_error, _)| error < *best_error) {
            best = Some((error, config));
        }
    }
    Ok(best.expect("grid is nonempty").1)
}

/// One tuned, test-window-ingested sketch from a rolling schedule.
#[derive(Debug)]
pub struct WindowSketch {
    /// Index of the test window within the input slice.
    pub window: usize,
    pub config: DoubleHashConfig,
    pub sketch: DoubleHashSketch,
}

/// Rolling schedule over ordered windows: each test window gets parameters
/// tuned on the `train_windows` windows immediately before its validation
/// window (the window just prior to the test), then ingests the test window
/// fresh. Requires `train_windows + 1` windows of history before the first
/// test window.
pub fn rolling_schedule(
    windows: &[Vec<StreamItem>],
    train_windows: usize,
    template: &DoubleHashConfig,
    grid: &[(usize, usize)],
    metric: Metric,
) -> Result<Vec<WindowSketch>> {
    if train_windows == 0 {
        return Err(Error::InvalidParameter("need at least one training window".into()));
    }
    let needed = train_windows + 1;
    if windows.len() < needed + 1 {
        return Err(Error::InsufficientHistory {
            needed,
            available: windows.len().saturating_sub(1),
        });
    }
    let mut results = Vec::new();
    for test in needed..windows.len() {
        let training: Vec<StreamItem> = windows[test - needed..test - 1]
            .iter()
            .flat_map(|w| w.iter().cloned())
            .collect();
        let validation = &windows[test - 1];
        let config = tune(&training, validation, template, grid, metric)?;
        let heavy = first_pass(&training, &config)?;
        let mut sketch = DoubleHashSketch::new(config, &heavy)?;
        sketch.ingest(&windows[test])?;
        results.push(WindowSketch { window: test, config, sketch });
    }
    Ok(results)
}

/// Oracle baseline: heavy hitters are the top keys by exact test-window
/// frequency, and the grid split is chosen by test error itself. Returns the
/// winning config and its error. Lower-bounds what first-pass selection can
/// achieve on the same budget.
pub fn ideal_learned_sketch(
    test_counts: &HashMap<Vec<u8>, u64>,
    template: &DoubleHashConfig,
    grid: &[(usize, usize)],
    metric: Metric,
) -> Result<(DoubleHashConfig, f64)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if test_counts.is_empty() {
        return Err(Error::EmptyTruth);
    }
    let mut candidates: Vec<(usize, usize)> = grid.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let mut by_weight: Vec<(&Vec<u8>, u64)> =
        test_counts.iter().map(|(key, &count)| (key, count)).collect();
    by_weight.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let ordered: BTreeMap<&Vec<u8>, u64> = test_counts.iter().map(|(k, &c)| (k, c)).collect();

    let mut best: Option<(f64, DoubleHashConfig)> = None;
    for (unique_buckets, inner_depth) in candidates {
        let config = DoubleHashConfig { unique_buckets, inner_depth, ..*template }.validated()?;
        let heavy: Vec<Vec<u8>> = by_weight
            .iter()
            .take(unique_buckets)
            .map(|(key, _)| (*key).clone())
            .collect();
        let mut sketch = DoubleHashSketch::new(config, &heavy)?;
        // Ingesting each key's total weight once is equivalent to replaying
        // the stream item by item.
        for (key, count) in &ordered {
            sketch.update(key, *count)?;
        }
        let guesses: HashMap<Vec<u8>, u64> =
            test_counts.keys().map(|key| (key.clone(), sketch.estimate(key))).collect();
        let error = avg_error(&guesses, test_counts, metric)?;
        if best.as_ref().is_none_or(|(best_error, _)| error < *best_error) {
            best = Some((error, config));
        }
    }
    let (error, config) = best.expect("grid is nonempty");
    Ok((config, error))
}

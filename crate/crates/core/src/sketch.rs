//! Baseline sketches: count-min and count-sketch.
//!
//! Both maintain a `depth x width` counter table behind per-row hash
//! functions derived from a single master seed. Counters are 64-bit
//! internally; the 4-bytes-per-bucket accounting used for budget sweeps lives
//! in the evaluation module and is a cost model, not a storage layout.
//!
//! Overflow is a hard error: an update that would overflow any touched cell
//! changes nothing and poisons the sketch, so counters never wrap silently
//! and a poisoned table still holds the last consistent state.

use crate::hashing::{row_index_seed, row_sign_seed, HashFunction, SignFunction};
use crate::{Error, Result};

const CM_MAGIC: &[u8; 4] = b"DHCM";
const CS_MAGIC: &[u8; 4] = b"DHCS";
const BLOB_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

/// Shape and seeding of a sketch: `width` buckets per row, `depth` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchConfig {
    pub width: usize,
    pub depth: usize,
    pub master_seed: u64,
}

impl SketchConfig {
    pub fn new(width: usize, depth: usize, master_seed: u64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParameter("sketch width must be at least 1".into()));
        }
        if depth == 0 {
            return Err(Error::InvalidParameter("sketch depth must be at least 1".into()));
        }
        Ok(Self { width, depth, master_seed })
    }
}

/// Number of counter cells a config allocates: `width * depth`.
pub fn sketch_memory_cells(config: &SketchConfig) -> usize {
    config.width * config.depth
}

fn row_hashes(config: &SketchConfig) -> Result<Vec<HashFunction>> {
    (0..config.depth)
        .map(|row| HashFunction::new(row_index_seed(config.master_seed, row), config.width))
        .collect()
}

fn row_signs(config: &SketchConfig) -> Vec<SignFunction> {
    (0..config.depth)
        .map(|row| SignFunction::new(row_sign_seed(config.master_seed, row)))
        .collect()
}

/// Median with a fixed tie rule: lower of the two middle values when the
/// count is even.
fn median_lower(values: &mut [i64]) -> i64 {
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Count-min sketch: per-row bucket counters, estimate = min over rows.
#[derive(Debug, Clone)]
pub struct CountMinSketch {
    config: SketchConfig,
    table: Vec<u64>,
    rows: Vec<HashFunction>,
    poisoned: bool,
}

impl CountMinSketch {
    pub fn new(config: SketchConfig) -> Result<Self> {
        let rows = row_hashes(&config)?;
        let table = vec![0u64; sketch_memory_cells(&config)];
        Ok(Self { config, table, rows, poisoned: false })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// Adds `weight` to `key`'s bucket in every row. Either all rows are
    /// updated or, on overflow, none are and the sketch is poisoned.
    pub fn update(&mut self, key: &[u8], weight: u64) -> Result<()> {
        if self.poisoned {
            return Err(Error::Poisoned);
        }
        if weight == 0 {
            return Ok(());
        }
        let width = self.config.width;
        for (row, hash) in self.rows.iter().enumerate() {
            let cell = row * width + hash.index(key);
            if self.table[cell].checked_add(weight).is_none() {
                self.poisoned = true;
                return Err(Error::CounterOverflow(format!(
                    "count-min cell at row {row} cannot absorb weight {weight}"
                )));
            }
        }
        for (row, hash) in self.rows.iter().enumerate() {
            self.table[row * width + hash.index(key)] += weight;
        }
        Ok(())
    }

    /// Smallest bucket value across rows; never less than the key's true
    /// ingested weight.
    pub fn estimate(&self, key: &[u8]) -> u64 {
        let width = self.config.width;
        self.rows
            .iter()
            .enumerate()
            .map(|(row, hash)| self.table[row * width + hash.index(key)])
            .min()
            .expect("depth >= 1")
    }

    /// Flat binary blob: magic, version, width, depth, master seed, then
    /// row-major little-endian counters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.table.len() * 8);
        out.extend_from_slice(CM_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.width as u64).to_le_bytes());
        out.extend_from_slice(&(self.config.depth as u64).to_le_bytes());
        out.extend_from_slice(&self.config.master_seed.to_le_bytes());
        for cell in &self.table {
            out.extend_from_slice(&cell.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(blob: &[u8]) -> Result<Self> {
        let (config, body) = parse_header(blob, CM_MAGIC, "count-min")?;
        let mut sketch = Self::new(config)?;
        for (cell, chunk) in sketch.table.iter_mut().zip(body.chunks_exact(8)) {
            *cell = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Ok(sketch)
    }
}

/// Count-sketch: signed bucket counters with per-row signs, estimate =
/// median over rows. Unbiased, unlike count-min, but can underestimate.
#[derive(Debug, Clone)]
pub struct CountSketch {
    config: SketchConfig,
    table: Vec<i64>,
    rows: Vec<HashFunction>,
    signs: Vec<SignFunction>,
    poisoned: bool,
}

impl CountSketch {
    pub fn new(config: SketchConfig) -> Result<Self> {
        let rows = row_hashes(&config)?;
        let signs = row_signs(&config);
        let table = vec![0i64; sketch_memory_cells(&config)];
        Ok(Self { config, table, rows, signs, poisoned: false })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// Adds `sign(key) * weight` to `key`'s bucket in every row, with the
    /// same all-or-nothing overflow contract as count-min.
    pub fn update(&mut self, key: &[u8], weight: u64) -> Result<()> {
        if self.poisoned {
            return Err(Error::Poisoned);
        }
        if weight == 0 {
            return Ok(());
        }
        let Ok(weight) = i64::try_from(weight) else {
            self.poisoned = true;
            return Err(Error::CounterOverflow(format!(
                "count-sketch weight {weight} exceeds signed counter range"
            )));
        };
        let width = self.config.width;
        for (row, hash) in self.rows.iter().enumerate() {
            let cell = row * width + hash.index(key);
            let delta = self.signs[row].sign(key) * weight;
            if self.table[cell].checked_add(delta).is_none() {
                self.poisoned = true;
                return Err(Error::CounterOverflow(format!(
                    "count-sketch cell at row {row} cannot absorb weight {weight}"
                )));
            }
        }
        for (row, hash) in self.rows.iter().enumerate() {
            self.table[row * width + hash.index(key)] += self.signs[row].sign(key) * weight;
        }
        Ok(())
    }

    /// Median over rows of `sign(key) * bucket`; lower-middle on even depth.
    pub fn estimate(&self, key: &[u8]) -> i64 {
        let width = self.config.width;
        let mut values: Vec<i64> = self
            .rows
            .iter()
            .enumerate()
            .map(|(row, hash)| self.signs[row].sign(key) * self.table[row * width + hash.index(key)])
            .collect();
        median_lower(&mut values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.table.len() * 8);
        out.extend_from_slice(CS_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.width as u64).to_le_bytes());
        out.extend_from_slice(&(self.config.depth as u64).to_le_bytes());
        out.extend_from_slice(&self.config.master_seed.to_le_bytes());
        for cell in &self.table {
            out.extend_from_slice(&cell.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(blob: &[u8]) -> Result<Self> {
        let (config, body) = parse_header(blob, CS_MAGIC, "count-sketch")?;
        let mut sketch = Self::new(config)?;
        for (cell, chunk) in sketch.table.iter_mut().zip(body.chunks_exact(8)) {
            *cell = i64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Ok(sketch)
    }
}

/// Validates magic, version, and exact body length; returns the decoded
/// config and the counter bytes.
fn parse_header<'a>(blob: &'a [u8], magic: &[u8; 4], kind: &str) -> Result<(SketchConfig, &'a [u8])> {
    if blob.len() < HEADER_LEN {
        return Err(Error::Corrupt(format!(
            "{kind} blob is {} bytes, shorter than the {HEADER_LEN}-byte header",
            blob.len()
        )));
    }
    if &blob[0..4] != magic {
        return Err(Error::Corrupt(format!("{kind} blob has wrong magic")));
    }
    let version = u32::from_le_bytes(blob[4..8].try_into().expect("4 bytes"));
    if version != BLOB_VERSION {
        return Err(Error::Corrupt(format!(
            "{kind} blob version {version}, expected {BLOB_VERSION}"
        )));
    }
    let width = u64::from_le_bytes(blob[8..16].try_into().expect("8 bytes"));
    let depth = u64::from_le_bytes(blob[16..24].try_into().expect("8 bytes"));
    let master_seed = u64::from_le_bytes(blob[24..32].try_into().expect("8 bytes"));
    let width = usize::try_from(width)
        .map_err(|_| Error::Corrupt(format!("{kind} blob width does not fit in memory")))?;
    let depth = usize::try_from(depth)
        .map_err(|_| Error::Corrupt(format!("{kind} blob depth does not fit in memory")))?;
    let config = SketchConfig::new(width, depth, master_seed)
        .map_err(|e| Error::Corrupt(format!("{kind} blob header: {e}")))?;
    let cells = width
        .checked_mul(depth)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Corrupt(format!("{kind} blob dimensions overflow")))?;
    let body = &blob[HEADER_LEN..];
    if body.len() != cells {
        return Err(Error::Corrupt(format!(
            "{kind} blob body is {} bytes, expected {cells}",
            body.len()
        )));
    }
    Ok((config, body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn cfg(width: usize, depth: usize, seed: u64) -> SketchConfig {
        SketchConfig::new(width, depth, seed).unwrap()
    }

    /// True when every row's hash is injective on `keys`.
    fn rows_injective(config: &SketchConfig, keys: &[&[u8]]) -> bool {
        row_hashes(config).unwrap().iter().all(|hash| {
            let mut seen = std::collections::HashSet::new();
            keys.iter().all(|key| seen.insert(hash.index(key)))
        })
    }

    #[test]
    fn memory_cells_is_width_times_depth() {
        assert_eq!(sketch_memory_cells(&cfg(1, 1, 0)), 1);
        assert_eq!(sketch_memory_cells(&cfg(1000, 4, 0)), 4000);
    }

    #[test]
    fn config_rejects_zero_dimensions() {
        assert!(SketchConfig::new(0, 1, 0).is_err());
        assert!(SketchConfig::new(1, 0, 0).is_err());
    }

    #[test]
    fn median_lower_tie_rule() {
        assert_eq!(median_lower(&mut [7]), 7);
        assert_eq!(median_lower(&mut [2, 1]), 1);
        assert_eq!(median_lower(&mut [3, 1, 2]), 2);
        assert_eq!(median_lower(&mut [5, 1, 4, 2]), 2);
        assert_eq!(median_lower(&mut [-3, 10, 0, 2, 8]), 2);
    }

    #[test]
    fn cm_fresh_sketch_estimates_zero() {
        let sk = CountMinSketch::new(cfg(64, 4, 1)).unwrap();
        assert_eq!(sk.estimate(b"anything"), 0);
    }

    #[test]
    fn cm_single_update_is_exact() {
        let mut sk = CountMinSketch::new(cfg(64, 4, 1)).unwrap();
        sk.update(b"x", 5).unwrap();
        assert_eq!(sk.estimate(b"x"), 5);
    }

    #[test]
    fn cm_zero_weight_changes_nothing() {
        let mut sk = CountMinSketch::new(cfg(64, 4, 1)).unwrap();
        sk.update(b"x", 0).unwrap();
        assert_eq!(sk.table, vec![0u64; 256]);
    }

    #[test]
    fn cm_single_cell_sums_collisions() {
        let mut sk = CountMinSketch::new(cfg(1, 1, 9)).unwrap();
        sk.update(b"x", 3).unwrap();
        sk.update(b"y", 4).unwrap();
        assert_eq!(sk.estimate(b"x"), 7);
        assert_eq!(sk.estimate(b"y"), 7);
    }

    #[test]
    fn cm_collision_free_instance_is_exact() {
        let keys: [&[u8]; 2] = [b"a", b"b"];
        let config = cfg(64, 2, 3);
        assert!(rows_injective(&config, &keys), "seed 3 must separate a and b");
        let mut sk = CountMinSketch::new(config).unwrap();
        for _ in 0..10 {
            sk.update(b"a", 1).unwrap();
        }
        sk.update(b"b", 2).unwrap();
        assert_eq!(sk.estimate(b"a"), 10);
        assert_eq!(sk.estimate(b"b"), 2);
    }

    #[test]
    fn cm_never_underestimates_and_never_decreases() {
        let mut sk = CountMinSketch::new(cfg(8, 2, 77)).unwrap();
        let mut exact: HashMap<Vec<u8>, u64> = HashMap::new();
        let mut prev: HashMap<Vec<u8>, u64> = HashMap::new();
        for step in 0..500u64 {
            let key = format!("k{}", step % 23).into_bytes();
            let weight = step % 7;
            sk.update(&key, weight).unwrap();
            *exact.entry(key).or_default() += weight;
            for (key, &count) in &exact {
                let est = sk.estimate(key);
                assert!(est >= count, "estimate {est} below exact {count}");
                assert!(est >= prev.get(key).copied().unwrap_or(0), "estimate decreased");
                prev.insert(key.clone(), est);
            }
        }
    }

    #[test]
    fn cm_rows_conserve_total_weight() {
        let mut sk = CountMinSketch::new(cfg(16, 3, 5)).unwrap();
        let mut total = 0u64;
        for step in 0..200u64 {
            let weight = step % 11 + 1;
            sk.update(format!("k{step}").as_bytes(), weight).unwrap();
            total += weight;
        }
        for row in 0..3 {
            let row_sum: u64 = sk.table[row * 16..(row + 1) * 16].iter().sum();
            assert_eq!(row_sum, total);
        }
    }

    #[test]
    fn cm_deeper_sketch_never_estimates_higher() {
        let shallow_cfg = cfg(32, 2, 42);
        let deep_cfg = cfg(32, 3, 42);
        let mut shallow = CountMinSketch::new(shallow_cfg).unwrap();
        let mut deep = CountMinSketch::new(deep_cfg).unwrap();
        for step in 0..300u64 {
            let key = format!("k{}", step % 40).into_bytes();
            shallow.update(&key, 1).unwrap();
            deep.update(&key, 1).unwrap();
        }
        for id in 0..40 {
            let key = format!("k{id}").into_bytes();
            assert!(deep.estimate(&key) <= shallow.estimate(&key));
        }
    }

    #[test]
    fn cm_overflow_poisons_without_partial_writes() {
        let mut sk = CountMinSketch::new(cfg(1, 2, 0)).unwrap();
        sk.update(b"x", u64::MAX - 1).unwrap();
        let before = sk.table.clone();
        let err = sk.update(b"y", 2).unwrap_err();
        assert!(matches!(err, Error::CounterOverflow(_)));
        assert_eq!(sk.table, before, "failed update must not touch any cell");
        assert!(sk.is_poisoned());
        assert!(matches!(sk.update(b"z", 1).unwrap_err(), Error::Poisoned));
        assert_eq!(sk.estimate(b"x"), u64::MAX - 1);
    }

    #[test]
    fn cs_fresh_sketch_estimates_zero() {
        let sk = CountSketch::new(cfg(64, 4, 1)).unwrap();
        assert_eq!(sk.estimate(b"anything"), 0);
    }

    #[test]
    fn cs_own_sign_cancels() {
        let mut sk = CountSketch::new(cfg(1, 1, 8)).unwrap();
        sk.update(b"x", 5).unwrap();
        assert_eq!(sk.estimate(b"x"), 5);
    }

    #[test]
    fn cs_zero_weight_changes_nothing() {
        let mut sk = CountSketch::new(cfg(64, 4, 1)).unwrap();
        sk.update(b"x", 0).unwrap();
        assert_eq!(sk.table, vec![0i64; 256]);
    }

    #[test]
    fn cs_single_cell_follows_replayed_signs() {
        let config = cfg(1, 1, 31);
        let mut sk = CountSketch::new(config).unwrap();
        sk.update(b"x", 3).unwrap();
        sk.update(b"y", 4).unwrap();
        let sign = row_signs(&config)[0];
        let expected_x = 3 + sign.sign(b"x") * sign.sign(b"y") * 4;
        assert_eq!(sk.estimate(b"x"), expected_x);
        assert!(expected_x == 7 || expected_x == -1);
    }

    #[test]
    fn cs_collision_free_instance_is_exact() {
        let keys: [&[u8]; 3] = [b"a", b"b", b"c"];
        let config = cfg(64, 3, 3);
        assert!(rows_injective(&config, &keys));
        let mut sk = CountSketch::new(config).unwrap();
        sk.update(b"a", 10).unwrap();
        sk.update(b"b", 2).unwrap();
        sk.update(b"c", 6).unwrap();
        assert_eq!(sk.estimate(b"a"), 10);
        assert_eq!(sk.estimate(b"b"), 2);
        assert_eq!(sk.estimate(b"c"), 6);
    }

    #[test]
    fn cs_mean_estimate_is_nearly_unbiased() {
        // Crowded table (16 buckets, 30 keys) so collisions are common; the
        // signed-sum construction should still be right on average. The probe
        // key is heavy so sampling noise stays well inside the tolerance.
        let mut stream: Vec<(Vec<u8>, u64)> = vec![(b"hot".to_vec(), 200)];
        for id in 0..29u64 {
            stream.push((format!("k{id}").into_bytes(), 10));
        }
        let truth = 200.0;
        let mut sum = 0.0;
        let trials = 1500u64;
        for seed in 0..trials {
            let mut sk = CountSketch::new(cfg(16, 1, seed)).unwrap();
            for (key, weight) in &stream {
                sk.update(key, *weight).unwrap();
            }
            sum += sk.estimate(b"hot") as f64;
        }
        let mean = sum / trials as f64;
        let rel = (mean - truth).abs() / truth;
        assert!(rel < 0.02, "mean {mean} vs truth {truth}, rel err {rel}");
    }

    #[test]
    fn cs_overflow_poisons_without_partial_writes() {
        let mut sk = CountSketch::new(cfg(1, 1, 0)).unwrap();
        let sign = row_signs(sk.config())[0].sign(b"x");
        sk.update(b"x", (i64::MAX - 1) as u64).unwrap();
        let before = sk.table.clone();
        let err = sk.update(b"x", 5).unwrap_err();
        assert!(matches!(err, Error::CounterOverflow(_)));
        assert_eq!(sk.table, before);
        assert!(sk.is_poisoned());
        assert_eq!(sk.estimate(b"x"), sign * sign * (i64::MAX - 1));
    }

    #[test]
    fn cm_blob_round_trips() {
        let mut sk = CountMinSketch::new(cfg(16, 3, 99)).unwrap();
        for step in 0..100u64 {
            sk.update(format!("k{step}").as_bytes(), step + 1).unwrap();
        }
        let blob = sk.to_bytes();
        let back = CountMinSketch::from_bytes(&blob).unwrap();
        assert_eq!(back.config(), sk.config());
        assert_eq!(back.table, sk.table);
        assert_eq!(back.to_bytes(), blob);
    }

    #[test]
    fn cs_blob_round_trips() {
        let mut sk = CountSketch::new(cfg(16, 4, 99)).unwrap();
        for step in 0..100u64 {
            sk.update(format!("k{step}").as_bytes(), step + 1).unwrap();
        }
        let blob = sk.to_bytes();
        let back = CountSketch::from_bytes(&blob).unwrap();
        assert_eq!(back.table, sk.table);
    }

    #[test]
    fn blob_validation_rejects_corruption() {
        let sk = CountMinSketch::new(cfg(4, 2, 7)).unwrap();
        let blob = sk.to_bytes();

        let mut wrong_magic = blob.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(CountMinSketch::from_bytes(&wrong_magic), Err(Error::Corrupt(_))));

        let mut wrong_version = blob.clone();
        wrong_version[4] = 9;
        assert!(matches!(CountMinSketch::from_bytes(&wrong_version), Err(Error::Corrupt(_))));

        let truncated = &blob[..blob.len() - 1];
        assert!(matches!(CountMinSketch::from_bytes(truncated), Err(Error::Corrupt(_))));

        let mut trailing = blob.clone();
        trailing.push(0);
        assert!(matches!(CountMinSketch::from_bytes(&trailing), Err(Error::Corrupt(_))));

        // A count-sketch blob is not a count-min blob.
        let cs = CountSketch::new(cfg(4, 2, 7)).unwrap();
        assert!(matches!(CountMinSketch::from_bytes(&cs.to_bytes()), Err(Error::Corrupt(_))));
    }
}

//! Heavy-hitter selection and exact per-key counters.
//!
//! A key is heavy when its frequency is strictly greater than a `1/k`
//! fraction of the total stream weight, so fewer than `k` heavy hitters can
//! exist. Selected keys get their own unique bucket in a [`HeavyHitterTable`]
//! and are counted exactly from admission onward.

use std::collections::BTreeMap;
use std::collections::HashMap;

use crate::{Error, Result};

/// Selection parameters: threshold fraction `1/k` and unique-bucket budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeavyHitterParams {
    pub k: u64,
    pub capacity: usize,
}

impl HeavyHitterParams {
    pub fn new(k: u64, capacity: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter("heaviness parameter k must be at least 2".into()));
        }
        if capacity == 0 {
            return Err(Error::InvalidParameter(
                "heavy-hitter capacity must be at least 1".into(),
            ));
        }
        Ok(Self { k, capacity })
    }
}

/// Keys whose estimate strictly exceeds `total_weight / k`, ordered by
/// estimate descending with ties broken by key, truncated to
/// `min(k - 1, capacity)`.
///
/// `total_weight` is the mass the estimates were taken over and must be
/// positive for the threshold to be meaningful.
pub fn detect_heavy_hitters(
    estimates: &HashMap<Vec<u8>, u64>,
    total_weight: u64,
    params: &HeavyHitterParams,
) -> Vec<Vec<u8>> {
    // Strictness as cross-multiplication keeps the comparison exact; u128
    // because estimate * k can exceed u64.
    let mut heavy: Vec<(&Vec<u8>, u64)> = estimates
        .iter()
        .filter(|(_, &est)| u128::from(est) * u128::from(params.k) > u128::from(total_weight))
        .map(|(key, &est)| (key, est))
        .collect();
    heavy.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let keep = (params.k - 1).min(params.capacity as u64) as usize;
    heavy.truncate(keep);
    heavy.into_iter().map(|(key, _)| key.clone()).collect()
}

/// Exact counters for admitted keys, at most `capacity` of them.
///
/// Capacity 0 is allowed at this level (a configuration with no unique
/// buckets degenerates to a plain sketch); selection parameters still
/// require at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeavyHitterTable {
    capacity: usize,
    entries: BTreeMap<Vec<u8>, u64>,
}

impl HeavyHitterTable {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: BTreeMap::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &[u8]) -> Option<u64> {
        self.entries.get(key).copied()
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u64)> {
        self.entries.iter().map(|(key, &count)| (key.as_slice(), count))
    }

    /// Gives `key` its own bucket starting at `initial_count` (0 for keys
    /// selected before their counting starts, the current estimate for
    /// mid-stream promotions).
    pub fn admit(&mut self, key: &[u8], initial_count: u64) -> Result<()> {
        if self.entries.len() >= self.capacity {
            return Err(Error::CapacityExceeded { capacity: self.capacity });
        }
        if self.entries.contains_key(key) {
            return Err(Error::DuplicateKey);
        }
        self.entries.insert(key.to_vec(), initial_count);
        Ok(())
    }

    /// Adds `weight` to an admitted key's counter. Routing a key that was
    /// never admitted here is a router bug, reported as an error.
    pub fn record(&mut self, key: &[u8], weight: u64) -> Result<()> {
        let counter = self.entries.get_mut(key).ok_or(Error::KeyNotAdmitted)?;
        *counter = counter.checked_add(weight).ok_or_else(|| {
            Error::CounterOverflow(format!("unique bucket cannot absorb weight {weight}"))
        })?;
        Ok(())
    }

    /// Evicts `key`, returning its counter; used when a key is demoted back
    /// into the shared sketch.
    pub fn remove(&mut self, key: &[u8]) -> Option<u64> {
        self.entries.remove(key)
    }
}

//! Property tests for the structural invariants: round-trips, one-sided
//! error, heavy-hitter threshold strictness, and metric identities.

use std::collections::{BTreeMap, HashMap};

use dhsketch::{
    avg_error, detect_heavy_hitters, rank_key, tune, zipf_pmf, CountMinSketch, CountSketch,
    DoubleHashConfig, DoubleHashSketch, HeavyHitterParams, Metric, SketchConfig, StreamItem,
};
use proptest::prelude::*;

fn key() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), 0..12)
}

fn ops() -> impl Strategy<Value = Vec<(Vec<u8>, u64)>> {
    prop::collection::vec((key(), 0u64..=500), 0..40)
}

fn truth_of(ops: &[(Vec<u8>, u64)]) -> BTreeMap<Vec<u8>, u64> {
    let mut truth = BTreeMap::new();
    for (key, weight) in ops {
        *truth.entry(key.clone()).or_insert(0u64) += weight;
    }
    truth
}

proptest! {
    #[test]
    fn rank_keys_round_trip(rank: u64) {
        prop_assert_eq!(dhsketch::key_rank(&rank_key(rank)).unwrap(), rank);
    }

    #[test]
    fn cm_round_trips_and_overestimates(
        width in 1usize..64,
        depth in 1usize..6,
        seed: u64,
        ops in ops(),
    ) {
        let config = SketchConfig { width, depth, master_seed: seed };
        let mut sketch = CountMinSketch::new(config).unwrap();
        for (key, weight) in &ops {
            sketch.update(key, *weight).unwrap();
        }
        let restored = CountMinSketch::from_bytes(&sketch.to_bytes()).unwrap();
        for (key, count) in truth_of(&ops) {
            prop_assert!(sketch.estimate(&key) >= count);
            prop_assert_eq!(restored.estimate(&key), sketch.estimate(&key));
        }
        prop_assert_eq!(restored.estimate(b"absent probe"), sketch.estimate(b"absent probe"));
    }

    #[test]
    fn cs_round_trips(
        width in 1usize..64,
        depth in 1usize..6,
        seed: u64,
        ops in ops(),
    ) {
        let config = SketchConfig { width, depth, master_seed: seed };
        let mut sketch = CountSketch::new(config).unwrap();
        for (key, weight) in &ops {
            sketch.update(key, *weight).unwrap();
        }
        let restored = CountSketch::from_bytes(&sketch.to_bytes()).unwrap();
        for (key, _) in truth_of(&ops) {
            prop_assert_eq!(restored.estimate(&key), sketch.estimate(&key));
        }
    }

    #[test]
    fn double_hash_round_trips_and_overestimates(
        unique in 0usize..=8,
        depth in 1usize..=3,
        width_units in 1u64..=64,
        seed: u64,
        heavy_pool in prop::collection::btree_set(key(), 0..=8usize),
        ops in ops(),
    ) {
        let budget = 8 * unique as u64 + 4 * depth as u64 * width_units;
        let config = DoubleHashConfig::new(budget, unique, depth, seed).unwrap();
        let heavy: Vec<Vec<u8>> = heavy_pool.into_iter().take(unique).collect();
        let mut sketch = DoubleHashSketch::new(config, &heavy).unwrap();
        for (key, weight) in &ops {
            sketch.update(key, *weight).unwrap();
        }
        let restored = DoubleHashSketch::from_bytes(&sketch.to_bytes()).unwrap();
        for (key, count) in truth_of(&ops) {
            prop_assert!(sketch.estimate(&key) >= count);
            prop_assert_eq!(restored.estimate(&key), sketch.estimate(&key));
        }
        for key in &heavy {
            prop_assert_eq!(restored.estimate(key), sketch.estimate(key));
        }
    }

    #[test]
    fn heavy_hitter_lists_are_strict_sorted_and_capped(
        counts in prop::collection::hash_map(key(), 0u64..=10_000, 0..30),
        k in 2u64..=6,
        capacity in 1usize..=4,
    ) {
        let total: u64 = counts.values().sum();
        let params = HeavyHitterParams::new(k, capacity).unwrap();
        let hits = detect_heavy_hitters(&counts, total, &params);
        prop_assert!(hits.len() <= ((k - 1) as usize).min(capacity));
        let mut previous: Option<u64> = None;
        for key in &hits {
            let count = counts[key];
            prop_assert!((count as u128) * (k as u128) > total as u128);
            if let Some(prev) = previous {
                prop_assert!(count <= prev);
            }
            previous = Some(count);
        }
    }

    #[test]
    fn constant_overestimate_shifts_both_metrics_by_that_constant(
        counts in prop::collection::hash_map(key(), 1u64..=1_000, 1..20),
        shift in 0u64..=100,
    ) {
        let estimates: HashMap<Vec<u8>, u64> =
            counts.iter().map(|(key, count)| (key.clone(), count + shift)).collect();
        for metric in [Metric::PerItem, Metric::Weighted] {
            let error = avg_error(&estimates, &counts, metric).unwrap();
            prop_assert!((error - shift as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn zipf_pmf_is_a_nonincreasing_distribution(
        num_elements in 1u64..=500,
        exponent in 0.0f64..=3.0,
    ) {
        let spec = dhsketch::ZipfSpec::new(num_elements, exponent, 1, 0).unwrap();
        let mut sum = 0.0;
        let mut previous = f64::INFINITY;
        for rank in 1..=num_elements {
            let p = zipf_pmf(rank, &spec).unwrap();
            prop_assert!(p > 0.0);
            prop_assert!(p <= previous + 1e-15);
            previous = p;
            sum += p;
        }
        prop_assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn tune_always_picks_a_grid_member() {
    let stream: Vec<StreamItem> = (0..400)
        .map(|step| StreamItem::unit(rank_key(step % 37).to_vec()))
        .collect();
    let template = DoubleHashConfig::new(600, 0, 2, 9).unwrap();
    let grid = [(0, 1), (0, 2), (8, 2), (16, 1)];
    let tuned = tune(&stream, &stream, &template, &grid, Metric::PerItem).unwrap();
    assert!(grid.contains(&(tuned.unique_buckets, tuned.inner_depth)));
    assert_eq!(tuned.total_budget_bytes, 600);
}

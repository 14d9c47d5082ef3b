//! Checks the expected high-load insert advantage of the tombstone filters over the
//! plain quotient filter in a finished sweep.

use std::collections::BTreeMap;

use graveyard_core::Contender;

use crate::workload::{BenchSample, OpKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRow {
    pub load_factor: f64,
    pub base_qf: f64,
    /// Fastest tombstone contender at this load.
    pub best: Contender,
    pub best_throughput: f64,
}

impl ShapeRow {
    pub fn holds(&self) -> bool {
        self.best_throughput >= self.base_qf
    }
}

/// One row per insert-sample load factor at or above `min_load` where both the
/// plain filter and at least one tombstone filter have a sample.
pub fn insert_shape(samples: &[BenchSample], min_load: f64) -> Vec<ShapeRow> {
    let key = |l: f64| (l * 1e6).round() as i64;
    // Per load: base throughput, and the best tombstone contender so far.
    type Entry = (Option<f64>, Option<(Contender, f64)>);
    let mut by_load: BTreeMap<i64, Entry> = BTreeMap::new();
    for s in samples
        .iter()
        .filter(|s| s.op_kind == OpKind::Insert && s.load_factor >= min_load - 1e-9)
    {
        let e = by_load.entry(key(s.load_factor)).or_default();
        if s.policy.is_graveyard() {
            if e.1.is_none_or(|(_, t)| s.throughput_ops_s > t) {
                e.1 = Some((s.policy, s.throughput_ops_s));
            }
        } else {
            e.0 = Some(s.throughput_ops_s);
        }
    }
    by_load
        .into_iter()
        .filter_map(|(k, (base, best))| {
            let (best, best_throughput) = best?;
            Some(ShapeRow {
                load_factor: k as f64 / 1e6,
                base_qf: base?,
                best,
                best_throughput,
            })
        })
        .collect()
}

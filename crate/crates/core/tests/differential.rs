use graveyard_core::oracle_ref::{differential_run, DiffConfig};
use graveyard_core::Contender;

fn checked_every_op(q: u32, high_water: f64) -> DiffConfig {
    let mut cfg = DiffConfig::new(q, 4);
    cfg.decode_every = 1;
    cfg.invariants_every = 1;
    cfg.high_water = high_water;
    cfg
}

#[test]
fn every_op_checked_small_tables() {
    for seed in 0..8u64 {
        let report = differential_run(
            seed,
            5_000,
            &checked_every_op(5 + (seed % 2) as u32, 0.95),
            &Contender::ALL,
        );
        assert!(report.is_clean(), "{report}");
    }
}

// Draining only starts once the table is completely full, which exercises the
// capacity-exhausted rollback.
#[test]
fn every_op_checked_to_full() {
    for seed in 0..4u64 {
        let report = differential_run(seed, 5_000, &checked_every_op(4, 1.0), &Contender::ALL);
        assert!(report.is_clean(), "{report}");
        assert!(report.capacity_events > 0);
    }
}

#[test]
fn seed_one_q8() {
    let report = differential_run(1, 10_000, &DiffConfig::new(8, 8), &Contender::ALL);
    assert!(report.is_clean(), "{report}");
    assert!(report.machine_lines().is_empty());
}

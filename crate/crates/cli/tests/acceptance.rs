//! Acceptance report: one line per criterion. Criteria 1 to 7 are binding and make the
//! process exit nonzero on failure. Criterion 8 only reports the benchmark shape.
//! Set `ACCEPTANCE_SKIP_BENCH=1` to skip the (long) benchmark run.

use std::process::ExitCode;
use std::time::Instant;

use graveyard_cli::{emit_csv, emit_plot, insert_shape, run_workload, WorkloadKind, WorkloadSpec};
use graveyard_core::oracle_ref::{
    check_between_runs, check_cleanup, check_graveyard, churned_table, closed_form_fp,
    differential_run, DiffConfig, DiffReport, ViolationKind,
};
use graveyard_core::{
    cleanup_threshold, tombstone_budget, Contender, FilterConfig, FilterTable, PolicyKind, Slot,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn first_lines(reports: &[DiffReport], pred: impl Fn(&ViolationKind) -> bool) -> String {
    reports
        .iter()
        .flat_map(|r| r.violations.iter())
        .filter(|v| pred(&v.kind))
        .take(3)
        .map(|v| {
            format!(
                "[seed {} op {} {}: {}]",
                v.seed, v.op_index, v.contender, v.kind
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// The shared fuzz runs behind criteria 1 to 3.
fn fuzz_runs() -> Vec<DiffReport> {
    (0..10u64)
        .map(|seed| {
            let cfg = DiffConfig::new(8 + (seed % 5) as u32, 8);
            differential_run(seed, 100_000, &cfg, &Contender::ALL)
        })
        .collect()
}

fn count_kind(
    reports: &[DiffReport],
    label: &str,
    pred: impl Fn(&ViolationKind) -> bool + Copy,
) -> Outcome {
    let n: usize = reports.iter().map(|r| r.count(pred)).sum();
    let ops: usize = reports.iter().map(|r| r.ops_run).sum();
    let other: usize = reports.iter().map(|r| r.violations.len()).sum::<usize>() - n;
    let mut detail = format!("{n} {label} over {ops} ops");
    if n > 0 {
        detail += &format!(" {}", first_lines(reports, pred));
    }
    if other > 0 {
        detail += &format!(
            "; {other} other violations {}",
            first_lines(reports, |k| !pred(k))
        );
    }
    outcome(n == 0 && other == 0, detail)
}

fn criterion_1(reports: &[DiffReport]) -> Outcome {
    let positives: usize = reports.iter().map(|r| r.positive_queries).sum();
    let mut o = count_kind(reports, "false negatives", |k| {
        *k == ViolationKind::FalseNegative
    });
    o.detail += &format!(", {positives} positive queries, q=8..12, 6 contenders");
    o
}

fn criterion_2(reports: &[DiffReport]) -> Outcome {
    let checks: usize = reports.iter().map(|r| r.decode_checks).sum();
    let mut o = count_kind(reports, "decode mismatches", |k| {
        *k == ViolationKind::DecodeMismatch
    });
    o.detail += &format!(", {checks} decode checks every 1000 ops");
    o
}

fn criterion_3(reports: &[DiffReport]) -> Outcome {
    let queries: usize = reports.iter().map(|r| r.queries).sum();
    let mut o = count_kind(reports, "divergences", |k| {
        *k == ViolationKind::QueryDivergence
    });
    o.detail += &format!(" across {queries} queries");
    o
}

fn criterion_4() -> Outcome {
    let reports: Vec<DiffReport> = (0..10u64)
        .map(|seed| {
            let mut cfg = DiffConfig::new(6, 8);
            cfg.invariants_every = 1;
            cfg.decode_every = 1;
            cfg.high_water = 0.95;
            differential_run(seed, 10_000, &cfg, &Contender::ALL)
        })
        .collect();
    let checks: usize = reports.iter().map(|r| r.invariant_checks).sum();
    let mut o = count_kind(reports.as_slice(), "invariant violations", |k| {
        matches!(k, ViolationKind::Invariant(_))
    });
    o.detail += &format!(" in {checks} per-op checks at q=6");
    o
}

fn criterion_5() -> Outcome {
    let mut bad = Vec::new();
    let n25 = 1usize << 25;
    if cleanup_threshold(n25, 0.8) != 1_677_721 {
        bad.push(format!(
            "threshold(2^25, 0.8) = {}",
            cleanup_threshold(n25, 0.8)
        ));
    }
    if tombstone_budget(n25, 0.8) != 3_355_443 {
        bad.push(format!(
            "budget(2^25, 0.8) = {}",
            tombstone_budget(n25, 0.8)
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let q = rng.random_range(3..=30u32);
        let k = rng.random_range(0..=1000u64);
        let size = 1usize << q;
        let load = k as f64 / 1000.0;
        // size * (1 - k/1000) / d, floored in integers.
        let exact = |d: u64| (size as u64 * (1000 - k) / (1000 * d)) as usize;
        if cleanup_threshold(size, load) != exact(4) {
            bad.push(format!("threshold(2^{q}, {load})"));
        }
        if tombstone_budget(size, load) != exact(2) {
            bad.push(format!("budget(2^{q}, {load})"));
        }
    }
    let detail = if bad.is_empty() {
        "2 examples and 20 random pairs exact".to_string()
    } else {
        format!("mismatches: {}", bad.join(", "))
    };
    outcome(bad.is_empty(), detail)
}

fn criterion_6() -> Outcome {
    const QUERIES: u64 = 1_000_000;
    let (q, r, n) = (10, 6, 768);
    let expect = closed_form_fp(n, q, r);
    let se = (expect * (1.0 - expect) / QUERIES as f64).sqrt();
    let mut details = Vec::new();
    let mut pass = true;
    for c in [
        Contender::BaseQf,
        Contender::Policy(PolicyKind::GraveyardHashing),
    ] {
        let mut t = FilterTable::new(c.config(q, r, 0x5eed)).expect("valid config");
        // Stored keys and probes live in disjoint key spaces.
        for i in 0..n as u64 {
            t.insert(&(i << 1).to_le_bytes())
                .expect("room for 768 keys");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let hits = (0..QUERIES)
            .filter(|_| t.query(&((rng.random::<u64>() << 1) | 1).to_le_bytes()))
            .count();
        let rate = hits as f64 / QUERIES as f64;
        let z = (rate - expect) / se;
        pass &= z.abs() <= 3.0;
        details.push(format!("{c} {rate:.6} (z {z:+.2})"));
    }
    outcome(
        pass,
        format!(
            "expected {expect:.6} +- {:.6}: {}",
            3.0 * se,
            details.join(", ")
        ),
    )
}

fn slots(t: &FilterTable) -> Vec<Slot> {
    (0..t.capacity()).map(|i| t.slot(i)).collect()
}

fn criterion_7() -> Outcome {
    type Pass = fn(&mut FilterTable) -> Result<(), graveyard_core::FilterError>;
    type Check = fn(&FilterTable) -> Result<(), String>;
    let passes: [(&str, Pass, Check); 2] = [
        (
            "between_runs",
            FilterTable::redistribute_between_runs,
            check_between_runs,
        ),
        ("clean_up", FilterTable::redistribute_cleanup, check_cleanup),
    ];
    let mut failures = Vec::new();
    let mut cases = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..400u64 {
        let q = 3 + (seed % 8) as u32;
        let high = rng.random_range(0.05..0.99);
        let cfg = FilterConfig::new(q, 4, seed, PolicyKind::NoRedistribution);
        let (t, present) = churned_table(cfg, seed, 6 << q, high).expect("churn stays in bounds");
        for (name, pass, check) in passes {
            cases += 1;
            let mut u = t.clone();
            let result = pass(&mut u)
                .map_err(|e| e.to_string())
                .and_then(|()| check(&u))
                .and_then(|()| {
                    let once = slots(&u);
                    pass(&mut u).map_err(|e| e.to_string())?;
                    if slots(&u) != once {
                        return Err("second pass changed the layout".into());
                    }
                    if u.decode().map_err(|e| e.to_string())? != present {
                        return Err("membership changed".into());
                    }
                    Ok(())
                });
            if let Err(e) = result {
                failures.push(format!("{name} seed {seed} q {q}: {e}"));
            }
        }
    }

    let mut exact = 0;
    for q in 3..=16u32 {
        let mut t = FilterTable::new(FilterConfig::new(q, 4, 0, PolicyKind::GraveyardHashing))
            .expect("valid config");
        t.redistribute_graveyard().expect("empty table");
        cases += 1;
        let k = tombstone_budget(t.capacity(), 0.0);
        if t.tombstone_count() == k {
            exact += 1;
        } else {
            failures.push(format!(
                "graveyard q {q}: {} tombstones, budget {k}",
                t.tombstone_count()
            ));
        }
    }

    let mut spaced = 0;
    for seed in 0..2000u64 {
        let q = 4 + (seed % 5) as u32;
        let high = rng.random_range(0.01..0.2);
        let cfg = FilterConfig::new(q, 4, seed, PolicyKind::NoRedistribution);
        let (mut t, present) =
            churned_table(cfg, seed, 6 << q, high).expect("churn stays in bounds");
        t.redistribute_graveyard().expect("sparse table");
        let result = check_graveyard(&t).and_then(|applies| {
            if t.decode().map_err(|e| e.to_string())? != present {
                return Err("membership changed".into());
            }
            Ok(applies)
        });
        match result {
            Ok(true) => spaced += 1,
            Ok(false) => {}
            Err(e) => failures.push(format!("graveyard seed {seed} q {q}: {e}")),
        }
    }
    cases += spaced;
    let enough = spaced >= 200;
    if !enough {
        failures.push(format!(
            "only {spaced} sparse tables met the spacing precondition"
        ));
    }
    let detail = if failures.is_empty() {
        format!(
            "{cases} cases: between-runs and clean-up with idempotence, {exact} empty-table budgets, {spaced} sparse spacing checks"
        )
    } else {
        format!(
            "{} failures: {}",
            failures.len(),
            failures[..failures.len().min(3)].join("; ")
        )
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_8() -> Outcome {
    let mut spec = WorkloadSpec::new(WorkloadKind::Mixed, 20, 7, 0);
    spec.query_secs = 2.0;
    let samples = match run_workload(&spec) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("benchmark failed: {e}")),
    };
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let csv = dir.join("acceptance_mixed_q20.csv");
    let svg = dir.join("acceptance_mixed_q20.svg");
    if let Err(e) = emit_csv(&samples, &csv).and_then(|()| emit_plot(&csv, &svg)) {
        return outcome(false, format!("could not write results: {e}"));
    }
    let rows = insert_shape(&samples, 0.80);
    for r in &rows {
        println!(
            "    load {:.2}: base_qf {:>12.0} ops/s, best {} {:>12.0} ops/s{}",
            r.load_factor,
            r.base_qf,
            r.best,
            r.best_throughput,
            if r.holds() { "" } else { "  (below)" }
        );
    }
    let held = rows.iter().filter(|r| r.holds()).count();
    outcome(
        !rows.is_empty() && held == rows.len(),
        format!(
            "tombstone policy >= base_qf at {held} of {} insert loads >= 0.80; wrote {} and {}",
            rows.len(),
            csv.display(),
            svg.display()
        ),
    )
}

fn report(id: u32, o: &Outcome, secs: f64, soft: bool) {
    let verdict = match (o.pass, soft) {
        (true, _) => "PASS",
        (false, false) => "FAIL",
        (false, true) => "MISS (soft)",
    };
    println!("criterion {id}: {verdict} ({secs:.1}s) {}", o.detail);
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut record = |id: u32, o: Outcome, secs: f64| {
        report(id, &o, secs, false);
        failed += usize::from(!o.pass);
    };

    let start = Instant::now();
    let reports = fuzz_runs();
    let fuzz_secs = start.elapsed().as_secs_f64();
    record(1, criterion_1(&reports), fuzz_secs);
    record(2, criterion_2(&reports), fuzz_secs);
    record(3, criterion_3(&reports), fuzz_secs);
    let rest: [(u32, fn() -> Outcome); 4] = [
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    for (id, f) in rest {
        let start = Instant::now();
        let o = f();
        record(id, o, start.elapsed().as_secs_f64());
    }

    if std::env::var_os("ACCEPTANCE_SKIP_BENCH").is_some() {
        println!("criterion 8: SKIPPED (ACCEPTANCE_SKIP_BENCH set)");
    } else {
        let start = Instant::now();
        let o = criterion_8();
        report(8, &o, start.elapsed().as_secs_f64(), true);
    }

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} binding criteria failed");
        ExitCode::FAILURE
    }
}

use std::collections::BTreeMap;

use graveyard_cli::{run_contender, run_workload, BenchError, OpKind, WorkloadKind, WorkloadSpec};
use graveyard_core::{Contender, Fingerprint, PolicyKind};

fn quick(kind: WorkloadKind, q: u32) -> WorkloadSpec {
    let mut spec = WorkloadSpec::new(kind, q, 7, 11);
    spec.query_secs = 0.0;
    spec
}

fn counts(spec: &WorkloadSpec) -> BTreeMap<(Contender, OpKind), usize> {
    let mut out = BTreeMap::new();
    for s in run_workload(spec).unwrap() {
        *out.entry((s.policy, s.op_kind)).or_default() += 1;
    }
    out
}

#[test]
fn insert_only_sample_counts() {
    let spec = quick(WorkloadKind::InsertOnly, 10);
    let c = counts(&spec);
    for &p in &Contender::ALL {
        assert_eq!(c[&(p, OpKind::Insert)], 19, "{p}");
        assert_eq!(c[&(p, OpKind::RandomQuery)], 19, "{p}");
        assert_eq!(c[&(p, OpKind::SuccessfulQuery)], 19, "{p}");
        assert!(!c.contains_key(&(p, OpKind::Delete)));
    }
}

#[test]
fn delete_only_sample_counts() {
    let spec = quick(WorkloadKind::DeleteOnly, 10);
    let c = counts(&spec);
    for &p in &Contender::ALL {
        assert_eq!(c[&(p, OpKind::Delete)], 19, "{p}");
        assert_eq!(
            c[&(p, OpKind::RandomQuery)] + c[&(p, OpKind::SuccessfulQuery)],
            38
        );
        assert!(!c.contains_key(&(p, OpKind::Insert)));
    }
}

#[test]
fn mixed_sample_counts() {
    let spec = quick(WorkloadKind::Mixed, 10);
    let c = counts(&spec);
    for &p in &Contender::ALL {
        assert_eq!(c[&(p, OpKind::Insert)], 18, "{p}");
        assert_eq!(c[&(p, OpKind::Delete)], 17, "{p}");
        assert_eq!(
            c[&(p, OpKind::RandomQuery)] + c[&(p, OpKind::SuccessfulQuery)],
            36
        );
    }
}

#[test]
fn mixed_phases_grow_two_steps_and_shrink_one() {
    let spec = quick(WorkloadKind::Mixed, 10);
    let batch = spec.batch() as f64 / spec.capacity() as f64;
    let samples = run_contender(&spec, Contender::BaseQf, |_, _| {}).unwrap();
    let updates: Vec<_> = samples
        .iter()
        .filter(|s| matches!(s.op_kind, OpKind::Insert | OpKind::Delete))
        .collect();
    let mut load = 0.0;
    for s in &updates[..updates.len() - 1] {
        let expect = match s.op_kind {
            OpKind::Insert => load + 2.0 * batch,
            _ => load - batch,
        };
        assert!((s.load_factor - expect).abs() < 1e-9, "{s:?}");
        load = s.load_factor;
    }
    let last = updates.last().unwrap();
    assert_eq!(last.op_kind, OpKind::Insert);
    assert!((last.load_factor - 19.0 * batch).abs() < 1e-9);
}

#[test]
fn sample_accounting_matches_element_count() {
    for kind in [
        WorkloadKind::InsertOnly,
        WorkloadKind::DeleteOnly,
        WorkloadKind::Mixed,
    ] {
        let spec = quick(kind, 9);
        for &p in &Contender::ALL {
            let mut live: i64 = if kind == WorkloadKind::DeleteOnly {
                (spec.phases() * spec.batch()) as i64
            } else {
                0
            };
            run_contender(&spec, p, |s, t| {
                match s.op_kind {
                    OpKind::Insert => live += s.op_count as i64,
                    OpKind::Delete => live -= s.op_count as i64,
                    _ => {}
                }
                assert_eq!(live, t.element_count() as i64, "{kind} {p} {s:?}");
                let expect = t.element_count() as f64 / t.capacity() as f64;
                assert_eq!(s.load_factor, expect);
            })
            .unwrap();
        }
    }
}

#[test]
fn same_work_across_policies_and_runs() {
    let spec = quick(WorkloadKind::Mixed, 9);
    let snapshot = |p: Contender| {
        let mut states: Vec<Vec<Fingerprint>> = Vec::new();
        let samples = run_contender(&spec, p, |s, t| {
            if matches!(s.op_kind, OpKind::Insert | OpKind::Delete) {
                states.push(t.decode().unwrap());
            }
        })
        .unwrap();
        let counts: Vec<(OpKind, u64)> = samples
            .iter()
            .filter(|s| matches!(s.op_kind, OpKind::Insert | OpKind::Delete))
            .map(|s| (s.op_kind, s.op_count))
            .collect();
        (states, counts)
    };
    let reference = snapshot(Contender::BaseQf);
    assert_eq!(reference, snapshot(Contender::BaseQf));
    for &p in &Contender::ALL[1..] {
        assert_eq!(reference, snapshot(p), "{p}");
    }
}

#[test]
fn overfilling_truncates_with_flagged_sample() {
    // 8 slots, batches of round(0.32 * 8) = 3, three phases: the last batch overflows.
    let mut spec = quick(WorkloadKind::InsertOnly, 3);
    spec.step = 0.32;
    spec.max_load = 0.99;
    for &p in &Contender::ALL {
        let samples = run_contender(&spec, p, |_, _| {}).unwrap();
        let inserts: Vec<_> = samples
            .iter()
            .filter(|s| s.op_kind == OpKind::Insert)
            .collect();
        assert_eq!(inserts.len(), 3, "{p}");
        let last = samples.last().unwrap();
        assert!(last.truncated, "{p}");
        assert_eq!(last.op_count, 2, "{p}");
        assert_eq!(last.load_factor, 1.0);
        assert!(samples[..samples.len() - 1].iter().all(|s| !s.truncated));
    }
}

#[test]
fn successful_queries_on_empty_table_record_nothing() {
    let spec = quick(WorkloadKind::DeleteOnly, 8);
    let samples = run_contender(&spec, Contender::Policy(PolicyKind::CleanUp), |_, _| {}).unwrap();
    let last = samples.last().unwrap();
    assert_eq!(last.op_kind, OpKind::SuccessfulQuery);
    assert_eq!(last.load_factor, 0.0);
    assert_eq!(last.op_count, 0);
    assert!(samples
        .iter()
        .filter(|s| s.op_kind == OpKind::RandomQuery)
        .all(|s| s.op_count > 0));
}

#[test]
fn parallel_matches_sequential_work() {
    let mut spec = quick(WorkloadKind::InsertOnly, 8);
    let key = |v: Vec<graveyard_cli::BenchSample>| {
        v.into_iter()
            .filter(|s| s.op_kind == OpKind::Insert)
            .map(|s| (s.policy, s.op_count, s.load_factor.to_bits()))
            .collect::<Vec<_>>()
    };
    let seq = key(run_workload(&spec).unwrap());
    spec.parallel = true;
    assert_eq!(seq, key(run_workload(&spec).unwrap()));
}

#[test]
fn invalid_specs_are_rejected() {
    let ok = quick(WorkloadKind::InsertOnly, 8);
    let cases: [fn(&mut WorkloadSpec); 6] = [
        |s| s.step = 0.0,
        |s| s.step = 1.0,
        |s| s.max_load = 1.0,
        |s| s.max_load = 0.01,
        |s| s.contenders.clear(),
        |s| s.query_secs = f64::NAN,
    ];
    for f in cases {
        let mut s = ok.clone();
        f(&mut s);
        assert!(
            matches!(run_workload(&s), Err(BenchError::InvalidSpec(_))),
            "{s:?}"
        );
    }
    let mut s = ok;
    s.q = 40;
    assert!(matches!(run_workload(&s), Err(BenchError::Filter(_))));
}

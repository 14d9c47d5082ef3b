//! Exact references for differential testing: a multiset membership oracle, a
//! brute-force reference layout, the false-positive closed form, and a harness that
//! drives several filters and the oracle through one randomized operation stream.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::contender::Contender;
use crate::error::FilterError;
use crate::filter_core::{
    fingerprint, split, FilterConfig, FilterTable, Fingerprint, MetaFlag, SlotContent,
};

/// Exact multiset of stored fingerprints plus the keys behind them.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    bits: u32,
    seed: u64,
    fingerprints: BTreeMap<Fingerprint, usize>,
    keys: Vec<Vec<u8>>,
    positions: FxHashMap<Vec<u8>, Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleOp<'a> {
    Insert(&'a [u8]),
    Delete(&'a [u8]),
}

impl ExactOracle {
    /// `bits` and `seed` must match the filters under test.
    pub fn new(bits: u32, seed: u64) -> Self {
        ExactOracle {
            bits,
            seed,
            fingerprints: BTreeMap::new(),
            keys: Vec::new(),
            positions: FxHashMap::default(),
        }
    }

    pub fn fingerprint_of(&self, key: &[u8]) -> Fingerprint {
        fingerprint(key, self.seed, self.bits)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains_key(&self, key: &[u8]) -> bool {
        self.positions.contains_key(key)
    }

    pub fn contains_fp(&self, fp: Fingerprint) -> bool {
        self.fingerprints.contains_key(&fp)
    }

    /// Stored fingerprints, ascending, with multiplicity.
    pub fn multiset(&self) -> Vec<Fingerprint> {
        let mut out = Vec::with_capacity(self.keys.len());
        for (&f, &c) in &self.fingerprints {
            out.extend(std::iter::repeat_n(f, c));
        }
        out
    }

    /// A uniformly chosen present key.
    pub fn sample_key<R: Rng>(&self, rng: &mut R) -> Option<&[u8]> {
        if self.keys.is_empty() {
            return None;
        }
        Some(&self.keys[rng.random_range(0..self.keys.len())])
    }

    fn insert(&mut self, key: &[u8]) {
        *self
            .fingerprints
            .entry(self.fingerprint_of(key))
            .or_default() += 1;
        self.positions
            .entry(key.to_vec())
            .or_default()
            .push(self.keys.len());
        self.keys.push(key.to_vec());
    }

    fn delete(&mut self, key: &[u8]) -> bool {
        let Some(slots) = self.positions.get_mut(key) else {
            return false;
        };
        let i = slots.pop().expect("position lists are never left empty");
        if slots.is_empty() {
            self.positions.remove(key);
        }
        let last = self.keys.len() - 1;
        if i != last {
            let moved = self.keys[last].clone();
            let list = self
                .positions
                .get_mut(&moved)
                .expect("moved key is indexed");
            let p = list
                .iter()
                .position(|&x| x == last)
                .expect("moved key lists its slot");
            list[p] = i;
        }
        self.keys.swap_remove(i);
        let f = self.fingerprint_of(key);
        let c = self
            .fingerprints
            .get_mut(&f)
            .expect("key implies fingerprint");
        *c -= 1;
        if *c == 0 {
            self.fingerprints.remove(&f);
        }
        true
    }
}

/// Applies `op`; returns `false` and changes nothing when deleting an absent key.
pub fn oracle_apply(o: &mut ExactOracle, op: OracleOp<'_>) -> bool {
    match op {
        OracleOp::Insert(k) => {
            o.insert(k);
            true
        }
        OracleOp::Delete(k) => o.delete(k),
    }
}

/// One cell of a tombstone-free reference layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefSlot {
    pub occupied: bool,
    pub continuation: bool,
    pub shifted: bool,
    pub remainder: Option<u64>,
}

/// The unique tombstone-free layout of `fps` in a `2^q`-slot ring.
///
/// Elements are sorted by `(quotient, remainder)` and given positions on an unrolled
/// line. Each must sit at or after its quotient and after its predecessor; the first
/// must also sit after the last one once that wraps past the end. The constraints are
/// relaxed until nothing moves.
pub fn ref_layout(fps: &[Fingerprint], q: u32, r: u32) -> Vec<RefSlot> {
    let n = 1usize << q;
    assert!(fps.len() <= n, "more fingerprints than slots");
    let mut items: Vec<(usize, u64)> = fps.iter().map(|&f| split(f, q, r)).collect();
    items.sort_unstable();
    let mut pos: Vec<usize> = items.iter().map(|&(b, _)| b).collect();
    loop {
        let mut changed = false;
        for i in 0..items.len() {
            let lower = if i == 0 {
                let last = pos[items.len() - 1];
                (last + 1).saturating_sub(n).max(items[0].0)
            } else {
                pos[i - 1] + 1
            };
            if pos[i] < lower {
                pos[i] = lower;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = vec![RefSlot::default(); n];
    for (i, &(b, rem)) in items.iter().enumerate() {
        let s = &mut out[pos[i] % n];
        s.remainder = Some(rem);
        s.continuation = i > 0 && items[i - 1].0 == b;
        s.shifted = pos[i] != b;
        out[b].occupied = true;
    }
    out
}

/// The physical layout of `t` in the same shape, with tombstones read as empty.
pub fn table_layout(t: &FilterTable) -> Vec<RefSlot> {
    (0..t.capacity())
        .map(|i| {
            let s = t.slot(i);
            match s.content {
                SlotContent::Remainder(rem) => RefSlot {
                    occupied: s.is_occupied,
                    continuation: s.is_continuation,
                    shifted: s.is_shifted,
                    remainder: Some(rem),
                },
                _ => RefSlot {
                    occupied: s.is_occupied,
                    ..RefSlot::default()
                },
            }
        })
        .collect()
}

/// Probability that a uniformly random absent fingerprint collides with one of `n`
/// independent stored fingerprints: `1 - (1 - 2^-(q+r))^n`.
pub fn closed_form_fp(n: usize, q: u32, r: u32) -> f64 {
    let p = 0.5f64.powi((q + r) as i32);
    -((n as f64) * (-p).ln_1p()).exp_m1()
}

/// A table put through `steps` random inserts and deletes of raw fingerprints.
/// Inserts happen with probability 0.6 while the element load is below `high`;
/// deletes pick a stored fingerprint uniformly. Returns the table and its contents.
pub fn churned_table(
    config: FilterConfig,
    seed: u64,
    steps: usize,
    high: f64,
) -> Result<(FilterTable, Vec<Fingerprint>), FilterError> {
    let mut t = FilterTable::new(config)?;
    let mask = (1u64 << config.fingerprint_bits()) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut present = Vec::new();
    for _ in 0..steps {
        let grow = t.element_load() < high && (present.is_empty() || rng.random_bool(0.6));
        if grow {
            let fp = Fingerprint(rng.random::<u64>() & mask);
            t.insert_fp(fp)?;
            present.push(fp);
        } else if !present.is_empty() {
            let fp = present.swap_remove(rng.random_range(0..present.len()));
            t.delete_fp(fp)?;
        }
    }
    present.sort_unstable();
    Ok((t, present))
}

fn image_of(t: &FilterTable) -> Result<crate::filter_core::TableImage, String> {
    t.image().map_err(|e| e.to_string())
}

fn tombstones_attached(img: &crate::filter_core::TableImage) -> Result<(), String> {
    if img.head_tombstones > 0 {
        return Err(format!(
            "{} tombstones not attached to a run",
            img.head_tombstones
        ));
    }
    match img.runs.iter().find(|r| r.trailing > 1) {
        Some(r) => Err(format!(
            "run of bucket {} carries {} tombstones",
            r.bucket, r.trailing
        )),
        None => Ok(()),
    }
}

/// Post-state of a between-runs pass: every tombstone sits directly after a run and
/// no run carries more than one.
pub fn check_between_runs(t: &FilterTable) -> Result<(), String> {
    tombstones_attached(&image_of(t)?)
}

/// Post-state of a clean-up pass: the between-runs shape, and a run boundary inside
/// a cluster lacks its tombstone only when the cluster cannot grow by one slot
/// without closing the last empty slot before the next cluster.
pub fn check_cleanup(t: &FilterTable) -> Result<(), String> {
    let img = image_of(t)?;
    tombstones_attached(&img)?;
    let Some(base) = crate::redistribution::relayout_base(t, &img) else {
        return Ok(());
    };
    let n = t.capacity();
    let at = |off: usize| t.slot((base + off) & (n - 1));
    let is_empty = |off: usize| at(off).content == SlotContent::Empty;

    // (start, end, first boundary without a tombstone) in offsets from base.
    let mut clusters: Vec<(usize, usize, Option<usize>)> = Vec::new();
    let mut off = 0;
    while off < n {
        if is_empty(off) {
            off += 1;
            continue;
        }
        let start = off;
        let mut missing = None;
        off += 1;
        while off < n && !is_empty(off) && at(off).is_shifted {
            let s = at(off);
            let run_start = !s.is_tombstone && !s.is_continuation;
            if run_start && missing.is_none() && !at(off - 1).is_tombstone {
                missing = Some((base + off) & (n - 1));
            }
            off += 1;
        }
        clusters.push((start, off, missing));
    }
    for (c, &(_, end, missing)) in clusters.iter().enumerate() {
        let Some(slot) = missing else { continue };
        let next_start = clusters.get(c + 1).map_or(n + clusters[0].0, |x| x.0);
        let room = (n - end).min((next_start - end).saturating_sub(1));
        if room > 0 {
            return Err(format!(
                "boundary at slot {slot} has no tombstone with {room} slots of room"
            ));
        }
    }
    Ok(())
}

/// Length of the cluster containing slot `p`, or 0 if `p` is empty.
fn covering_cluster_len(t: &FilterTable, p: usize) -> usize {
    let n = t.capacity();
    let empty = |i: usize| t.slot(i & (n - 1)).content == SlotContent::Empty;
    if empty(p) {
        return 0;
    }
    let mut start = p;
    for _ in 0..n {
        if !t.slot(start).is_shifted {
            break;
        }
        start = (start + n - 1) & (n - 1);
    }
    let mut len = 1;
    while len < n && !empty(start + len) && t.slot((start + len) & (n - 1)).is_shifted {
        len += 1;
    }
    len
}

/// Post-state of a graveyard pass. When every target `floor(j * N / k)` lies in a
/// cluster shorter than `N / k`, the table must hold exactly `k` tombstones, and
/// matching tombstones to targets in ring order (under some rotation) must put each
/// within its target's cluster length. Returns `Ok(false)` when the precondition
/// does not hold.
pub fn check_graveyard(t: &FilterTable) -> Result<bool, String> {
    let img = image_of(t)?;
    let n = t.capacity();
    let k = crate::redistribution::tombstone_budget(n, t.element_load()).min(n);
    if crate::redistribution::relayout_base(t, &img).is_none() {
        return Ok(false);
    }
    if k == 0 {
        return match t.tombstone_count() {
            0 => Ok(true),
            c => Err(format!("{c} tombstones for a budget of 0")),
        };
    }
    let targets: Vec<(usize, usize)> = (0..k)
        .map(|j| {
            let p = j * n / k;
            (p, covering_cluster_len(t, p))
        })
        .collect();
    if targets.iter().any(|&(_, len)| len * k >= n) {
        return Ok(false);
    }
    let mut tombs: Vec<usize> = img.tombs.iter().map(|r| r.slot).collect();
    tombs.sort_unstable();
    if tombs.len() != k {
        return Err(format!("{} tombstones for a budget of {k}", tombs.len()));
    }
    let circ = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(n - d)
    };
    let mut best: Option<(usize, usize, usize)> = None;
    for rot in 0..k {
        let bad: Vec<usize> = (0..k)
            .filter(|&i| circ(targets[i].0, tombs[(i + rot) % k]) > targets[i].1)
            .collect();
        if bad.is_empty() {
            return Ok(true);
        }
        if best.is_none_or(|(c, _, _)| bad.len() < c) {
            best = Some((bad.len(), rot, bad[0]));
        }
    }
    let (count, rot, i) = best.expect("k > 0");
    let (target, bound) = targets[i];
    let tomb = tombs[(i + rot) % k];
    Err(format!(
        "{count} tombstones off target; e.g. slot {tomb} is {} from target {target} (cluster length {bound})",
        circ(target, tomb)
    ))
}

/// One metadata-bit flip applied to one contender after a given operation.
#[derive(Debug, Clone, Copy)]
pub struct Fault {
    pub after_op: usize,
    pub contender: Contender,
    pub slot: usize,
    pub flag: MetaFlag,
}

#[derive(Debug, Clone)]
pub struct DiffConfig {
    pub q: u32,
    pub r: u32,
    /// Compare each decode with the oracle every this many operations (and at the end).
    pub decode_every: usize,
    /// Run the full structural check every this many operations (0 disables).
    pub invariants_every: usize,
    /// Element load at which the stream turns from filling to draining.
    pub high_water: f64,
    /// Element load at which it turns back.
    pub low_water: f64,
    pub fault: Option<Fault>,
}

impl DiffConfig {
    pub fn new(q: u32, r: u32) -> Self {
        DiffConfig {
            q,
            r,
            decode_every: 1000,
            invariants_every: 0,
            high_water: 0.9,
            low_water: 0.1,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    FalseNegative,
    DecodeMismatch,
    Invariant(String),
    QueryDivergence,
    OpError(String),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::FalseNegative => f.write_str("false_negative"),
            ViolationKind::DecodeMismatch => f.write_str("decode_mismatch"),
            ViolationKind::Invariant(why) => write!(f, "invariant: {why}"),
            ViolationKind::QueryDivergence => f.write_str("query_divergence"),
            ViolationKind::OpError(why) => write!(f, "op_error: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub seed: u64,
    /// Index of the operation after which the violation was observed.
    pub op_index: usize,
    pub contender: Contender,
    pub kind: ViolationKind,
    /// Length of the shortest prefix of the stream that reproduces a check failure for
    /// this contender, when it could be determined by replay.
    pub minimal_prefix: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct DiffReport {
    pub seed: u64,
    pub ops_run: usize,
    pub inserts: usize,
    pub deletes: usize,
    pub queries: usize,
    pub positive_queries: usize,
    /// Inserts refused by some contender and rolled back everywhere.
    pub capacity_events: usize,
    pub decode_checks: usize,
    pub invariant_checks: usize,
    pub violations: Vec<Violation>,
}

impl DiffReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&ViolationKind) -> bool) -> usize {
        self.violations.iter().filter(|v| pred(&v.kind)).count()
    }

    /// One `seed,op,policy,kind` line per violation.
    pub fn machine_lines(&self) -> Vec<String> {
        self.violations
            .iter()
            .map(|v| format!("{},{},{},{}", v.seed, v.op_index, v.contender, v.kind))
            .collect()
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "seed {}: {} ops ({} inserts, {} deletes, {} queries), {} capacity events, {} violations",
            self.seed,
            self.ops_run,
            self.inserts,
            self.deletes,
            self.queries,
            self.capacity_events,
            self.violations.len()
        )?;
        for v in &self.violations {
            write!(f, "  op {} {}: {}", v.op_index, v.contender, v.kind)?;
            if let Some(p) = v.minimal_prefix {
                write!(f, " (minimal prefix {p})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Insert(u64),
    Delete(u64),
    Query(u64),
}

struct Lane {
    contender: Contender,
    table: FilterTable,
    dead: bool,
}

/// Drives one randomized stream through a filter per contender and the oracle.
///
/// The stream alternates filling phases (60% inserts, 15% deletes, 25% queries) and
/// draining phases (inserts and deletes swapped) between the configured water marks.
/// Half the queries target a present key. A contender is reported at most once.
pub fn differential_run(
    seed: u64,
    op_count: usize,
    config: &DiffConfig,
    contenders: &[Contender],
) -> DiffReport {
    let mut report = DiffReport {
        seed,
        ..DiffReport::default()
    };
    let mut lanes: Vec<Lane> = contenders
        .iter()
        .map(|&c| Lane {
            contender: c,
            table: FilterTable::new(c.config(config.q, config.r, seed))
                .expect("valid differential configuration"),
            dead: false,
        })
        .collect();
    let mut oracle = ExactOracle::new(config.q + config.r, seed);
    let capacity = 1usize << config.q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut filling = true;
    let mut log: Vec<Op> = Vec::with_capacity(op_count);

    for op_index in 0..op_count {
        let load = oracle.len() as f64 / capacity as f64;
        if filling && load >= config.high_water {
            filling = false;
        } else if !filling && load <= config.low_water {
            filling = true;
        }
        let (p_ins, p_del) = if filling { (0.6, 0.15) } else { (0.15, 0.6) };
        let x: f64 = rng.random();
        let op = if x < p_ins || oracle.is_empty() && x < p_ins + p_del {
            Op::Insert(rng.random())
        } else if x < p_ins + p_del {
            let k = oracle.sample_key(&mut rng).expect("non-empty");
            Op::Delete(u64::from_le_bytes(k.try_into().expect("8-byte key")))
        } else if rng.random_bool(0.5) && !oracle.is_empty() {
            let k = oracle.sample_key(&mut rng).expect("non-empty");
            Op::Query(u64::from_le_bytes(k.try_into().expect("8-byte key")))
        } else {
            Op::Query(rng.random())
        };
        log.push(op);
        report.ops_run += 1;

        match op {
            Op::Insert(k) => {
                let key = k.to_le_bytes();
                let mut ok = Vec::new();
                let mut refused = false;
                for (li, lane) in lanes.iter_mut().enumerate() {
                    if lane.dead {
                        continue;
                    }
                    match lane.table.insert(&key) {
                        Ok(()) => ok.push(li),
                        Err(FilterError::CapacityExhausted) => {
                            refused = true;
                            if lane.table.len() < lane.table.capacity() {
                                lane.dead = true;
                                let why = format!(
                                    "insert refused with {} of {} slots live",
                                    lane.table.len(),
                                    lane.table.capacity()
                                );
                                report.violations.push(violation(
                                    seed,
                                    op_index,
                                    lane,
                                    ViolationKind::OpError(why),
                                ));
                            }
                        }
                        Err(e) => {
                            lane.dead = true;
                            report
                                .violations
                                .push(violation(seed, op_index, lane, op_error(e)));
                        }
                    }
                }
                if refused {
                    report.capacity_events += 1;
                    for li in ok {
                        let lane = &mut lanes[li];
                        if let Err(e) = lane.table.delete(&key) {
                            lane.dead = true;
                            report
                                .violations
                                .push(violation(seed, op_index, lane, op_error(e)));
                        }
                    }
                    // Keep the stream and the oracle in agreement.
                    log.pop();
                    log.push(Op::Query(k));
                } else {
                    report.inserts += 1;
                    oracle_apply(&mut oracle, OracleOp::Insert(&key));
                }
            }
            Op::Delete(k) => {
                let key = k.to_le_bytes();
                report.deletes += 1;
                for lane in lanes.iter_mut().filter(|l| !l.dead) {
                    if let Err(e) = lane.table.delete(&key) {
                        lane.dead = true;
                        report
                            .violations
                            .push(violation(seed, op_index, lane, op_error(e)));
                    }
                }
                oracle_apply(&mut oracle, OracleOp::Delete(&key));
            }
            Op::Query(k) => {
                let key = k.to_le_bytes();
                report.queries += 1;
                let present = oracle.contains_key(&key);
                if present {
                    report.positive_queries += 1;
                }
                let mut reference: Option<bool> = None;
                for lane in lanes.iter_mut().filter(|l| !l.dead) {
                    let got = lane.table.query(&key);
                    if present && !got {
                        lane.dead = true;
                        report.violations.push(violation(
                            seed,
                            op_index,
                            lane,
                            ViolationKind::FalseNegative,
                        ));
                        continue;
                    }
                    match reference {
                        None => reference = Some(got),
                        Some(r) if r != got => {
                            lane.dead = true;
                            report.violations.push(violation(
                                seed,
                                op_index,
                                lane,
                                ViolationKind::QueryDivergence,
                            ));
                        }
                        Some(_) => {}
                    }
                }
            }
        }

        if let Some(fault) = config.fault {
            if fault.after_op == op_index {
                for lane in lanes.iter_mut().filter(|l| l.contender == fault.contender) {
                    lane.table.inject_fault(fault.slot, fault.flag);
                }
            }
        }

        let last = op_index + 1 == op_count;
        let check_decode = config.decode_every > 0 && (op_index + 1) % config.decode_every == 0;
        let check_inv =
            config.invariants_every > 0 && (op_index + 1) % config.invariants_every == 0;
        if check_decode || check_inv || last {
            let expect = (check_decode || last).then(|| oracle.multiset());
            for lane in lanes.iter_mut().filter(|l| !l.dead) {
                if let Some(kind) = check_lane(&lane.table, expect.as_deref(), check_inv) {
                    lane.dead = true;
                    report
                        .violations
                        .push(violation(seed, op_index, lane, kind));
                }
            }
            if check_decode || last {
                report.decode_checks += 1;
            }
            if check_inv {
                report.invariant_checks += 1;
            }
        }
    }

    for v in &mut report.violations {
        v.minimal_prefix = minimal_prefix(seed, config, v.contender, &log[..=v.op_index]);
    }
    report
}

fn violation(seed: u64, op_index: usize, lane: &Lane, kind: ViolationKind) -> Violation {
    Violation {
        seed,
        op_index,
        contender: lane.contender,
        kind,
        minimal_prefix: None,
    }
}

fn op_error(e: FilterError) -> ViolationKind {
    match e {
        FilterError::StructuralCorruption { .. } => ViolationKind::Invariant(e.to_string()),
        other => ViolationKind::OpError(other.to_string()),
    }
}

fn check_lane(
    t: &FilterTable,
    expect: Option<&[Fingerprint]>,
    full: bool,
) -> Option<ViolationKind> {
    if full {
        if let Err(e) = t.check_invariants() {
            return Some(ViolationKind::Invariant(e.to_string()));
        }
    }
    if let Some(expect) = expect {
        match t.decode() {
            Ok(d) if d == expect => {}
            Ok(_) => return Some(ViolationKind::DecodeMismatch),
            Err(e) => return Some(ViolationKind::Invariant(e.to_string())),
        }
    }
    None
}

/// Replays `ops` on a fresh filter for `contender`, checking after every step, and
/// returns the length of the first failing prefix.
fn minimal_prefix(
    seed: u64,
    config: &DiffConfig,
    contender: Contender,
    ops: &[Op],
) -> Option<usize> {
    let mut t = FilterTable::new(contender.config(config.q, config.r, seed)).ok()?;
    let mut oracle = ExactOracle::new(config.q + config.r, seed);
    for (i, &op) in ops.iter().enumerate() {
        match op {
            Op::Insert(k) => {
                let key = k.to_le_bytes();
                if t.insert(&key).is_err() {
                    return Some(i + 1);
                }
                oracle_apply(&mut oracle, OracleOp::Insert(&key));
            }
            Op::Delete(k) => {
                let key = k.to_le_bytes();
                if t.delete(&key).is_err() {
                    return Some(i + 1);
                }
                oracle_apply(&mut oracle, OracleOp::Delete(&key));
            }
            Op::Query(k) => {
                let key = k.to_le_bytes();
                if oracle.contains_key(&key) && !t.query(&key) {
                    return Some(i + 1);
                }
            }
        }
        if let Some(f) = config.fault {
            if f.after_op == i && f.contender == contender {
                t.inject_fault(f.slot, f.flag);
            }
        }
        if check_lane(&t, Some(&oracle.multiset()), true).is_some() {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter_core::{FilterConfig, MetaFlag};
    use crate::redistribution::PolicyKind;

    fn fp(b: usize, rem: u64) -> Fingerprint {
        Fingerprint::from_parts(b, rem, 4)
    }

    #[test]
    fn oracle_inverse_and_multiset() {
        let mut o = ExactOracle::new(16, 3);
        assert!(oracle_apply(&mut o, OracleOp::Insert(b"a")));
        assert!(oracle_apply(&mut o, OracleOp::Delete(b"a")));
        assert!(o.is_empty() && o.multiset().is_empty());
        oracle_apply(&mut o, OracleOp::Insert(b"b"));
        oracle_apply(&mut o, OracleOp::Insert(b"b"));
        oracle_apply(&mut o, OracleOp::Delete(b"b"));
        assert_eq!(o.len(), 1);
        assert!(o.contains_key(b"b"));
        assert!(!oracle_apply(&mut o, OracleOp::Delete(b"zz")));
        assert_eq!(o.len(), 1);
    }

    #[test]
    fn oracle_swap_remove_bookkeeping() {
        let mut o = ExactOracle::new(20, 1);
        for k in [b"x", b"y", b"z", b"y"] {
            oracle_apply(&mut o, OracleOp::Insert(k));
        }
        assert!(oracle_apply(&mut o, OracleOp::Delete(b"x")));
        assert!(oracle_apply(&mut o, OracleOp::Delete(b"y")));
        assert!(oracle_apply(&mut o, OracleOp::Delete(b"y")));
        assert!(!o.contains_key(b"y"));
        assert!(oracle_apply(&mut o, OracleOp::Delete(b"z")));
        assert!(o.is_empty());
    }

    #[test]
    fn ref_layout_empty() {
        assert!(ref_layout(&[], 3, 4)
            .iter()
            .all(|s| *s == RefSlot::default()));
    }

    #[test]
    fn ref_layout_three_insert() {
        let l = ref_layout(&[fp(2, 5), fp(1, 9), fp(1, 3)], 3, 4);
        let s = |occupied, continuation, shifted, rem| RefSlot {
            occupied,
            continuation,
            shifted,
            remainder: Some(rem),
        };
        assert_eq!(l[1], s(true, false, false, 3));
        assert_eq!(l[2], s(true, true, true, 9));
        assert_eq!(l[3], s(false, false, true, 5));
        assert_eq!(l[0], RefSlot::default());
    }

    #[test]
    fn ref_layout_wraps() {
        let l = ref_layout(&[fp(7, 1), fp(7, 2), fp(0, 4)], 3, 4);
        assert_eq!(l[7].remainder, Some(1));
        assert_eq!(l[0].remainder, Some(2));
        assert!(l[0].continuation && l[0].shifted && l[0].occupied);
        assert_eq!(l[1].remainder, Some(4));
        assert!(!l[1].continuation && l[1].shifted);
    }

    #[test]
    fn ref_layout_full_ring() {
        let fps: Vec<_> = (0..8).map(|i| fp(5, i)).collect();
        let l = ref_layout(&fps, 3, 4);
        assert!(l.iter().all(|s| s.remainder.is_some()));
        assert_eq!(l[5].remainder, Some(0));
        assert_eq!(l[4].remainder, Some(7));
    }

    #[test]
    fn ref_layout_matches_insert_only_filter() {
        let mut t = FilterTable::new(FilterConfig::baseline(3, 4, 0)).unwrap();
        let fps = [fp(1, 3), fp(1, 9), fp(2, 5)];
        for f in fps {
            t.insert_fp(f).unwrap();
        }
        assert_eq!(table_layout(&t), ref_layout(&fps, 3, 4));
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(closed_form_fp(0, 10, 6), 0.0);
        assert!((closed_form_fp(1, 10, 6) - 2f64.powi(-16)).abs() < 1e-20);
        // 1 - (65535/65536)^768 by repeated multiplication.
        let miss = (0..768).fold(1.0f64, |acc, _| acc * (65535.0 / 65536.0));
        let p = closed_form_fp(768, 10, 6);
        assert!((p - (1.0 - miss)).abs() < 1e-12, "{p}");
        assert!((p - 0.01165).abs() < 1e-5, "{p}");
    }

    #[test]
    fn differential_zero_ops() {
        let r = differential_run(1, 0, &DiffConfig::new(8, 8), &Contender::ALL);
        assert!(r.is_clean());
        assert_eq!(r.ops_run, 0);
    }

    #[test]
    fn differential_small_clean() {
        let mut cfg = DiffConfig::new(8, 8);
        cfg.invariants_every = 50;
        let r = differential_run(1, 10_000, &cfg, &Contender::ALL);
        assert!(r.is_clean(), "{r}");
        assert!(r.positive_queries > 0 && r.deletes > 0);
    }

    #[test]
    fn differential_detects_fault() {
        let mut cfg = DiffConfig::new(6, 6);
        cfg.decode_every = 1;
        cfg.invariants_every = 1;
        // An occupied flip is caught whether slot 0 was empty or not.
        cfg.fault = Some(Fault {
            after_op: 200,
            contender: Contender::Policy(PolicyKind::GraveyardHashing),
            slot: 0,
            flag: MetaFlag::Occupied,
        });
        let r = differential_run(5, 400, &cfg, &Contender::ALL);
        assert_eq!(r.violations.len(), 1, "{r}");
        let v = &r.violations[0];
        assert_eq!(v.contender, Contender::Policy(PolicyKind::GraveyardHashing));
        assert_eq!(v.op_index, 200);
        assert_eq!(v.minimal_prefix, Some(201));
        assert_eq!(r.machine_lines()[0].split(',').count(), 4);
    }
}

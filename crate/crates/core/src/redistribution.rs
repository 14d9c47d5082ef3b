//! Redistribution policies, their trigger arithmetic, and the procedures that remove
//! or place tombstones.
//!
//! The three scheduled policies rebuild the whole table in one pass. The live runs
//! are first laid out without tombstones to find an anchor: the lowest-index slot that
//! stays empty in that layout. The rebuild then lays runs out linearly starting right
//! after the anchor, adding tombstones only where the remaining runs still fit.

use std::fmt;

use crate::error::FilterError;
use crate::filter_core::{
    word_is_empty, word_is_live, word_is_run_start, word_remainder, DeleteMode, FilterTable,
    RunRecord, TableImage, CONTINUATION, META_BITS, OCCUPIED, SHIFTED, TOMBSTONE,
};
use crate::graveyard_ops::TombstonePayload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    /// Tombstones are only ever consumed by later inserts.
    NoRedistribution,
    /// Queries and deletes compact the tombstones they walk over.
    AmortizedClean,
    /// Periodically keeps at most one trailing tombstone per run.
    BetweenRuns,
    /// Between-runs, then one tombstone at every run boundary inside a cluster.
    CleanUp,
    /// Periodically clears all tombstones and spreads a fresh budget evenly.
    GraveyardHashing,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::NoRedistribution,
        PolicyKind::AmortizedClean,
        PolicyKind::BetweenRuns,
        PolicyKind::CleanUp,
        PolicyKind::GraveyardHashing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::NoRedistribution => "no_redistribution",
            PolicyKind::AmortizedClean => "amortized_clean",
            PolicyKind::BetweenRuns => "between_runs",
            PolicyKind::CleanUp => "clean_up",
            PolicyKind::GraveyardHashing => "graveyard_hashing",
        }
    }

    /// Whether the policy runs a periodic whole-table redistribution.
    pub fn is_scheduled(self) -> bool {
        matches!(
            self,
            PolicyKind::BetweenRuns | PolicyKind::CleanUp | PolicyKind::GraveyardHashing
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RedistState {
    /// Inserts plus deletes since the last redistribution.
    pub ops_since_last: u64,
    /// Element load captured when the last redistribution ran.
    pub load_at_last: f64,
}

/// `size * (1 - load)`, snapped to the nearest integer when within rounding noise so
/// that exact products floor correctly.
fn free_slots(size: usize, load: f64) -> f64 {
    let f = size as f64 * (1.0 - load);
    let r = f.round();
    if (f - r).abs() < 1e-6 {
        r
    } else {
        f
    }
}

/// Number of updates tolerated between scheduled redistributions:
/// `floor(size * (1 - load) / 4)`.
pub fn cleanup_threshold(size: usize, load: f64) -> usize {
    (free_slots(size, load).max(0.0) / 4.0).floor() as usize
}

/// Tombstones placed by the graveyard policy: `floor(size * (1 - load) / 2)`.
pub fn tombstone_budget(size: usize, load: f64) -> usize {
    (free_slots(size, load).max(0.0) / 2.0).floor() as usize
}

/// Live runs rotated to start after the anchor, with the suffix sums that decide
/// whether a tombstone still leaves room for everything after it.
struct Plan<'a> {
    img: &'a TableImage,
    n: usize,
    base: usize,
    order: Vec<usize>,
    offs: Vec<usize>,
    /// `suffix_len[i]`: live slots in runs `i..`.
    suffix_len: Vec<usize>,
    /// `suffix_end[i]`: where runs `i..` end when laid out from offset 0.
    suffix_end: Vec<usize>,
}

impl<'a> Plan<'a> {
    /// `None` when the table has no slot to spare.
    fn new(t: &FilterTable, img: &'a TableImage) -> Option<Plan<'a>> {
        let n = t.capacity();
        if img.live_count() >= n {
            return None;
        }
        let runs = &img.runs;
        let anchor = if runs.is_empty() {
            0
        } else {
            // Tombstone-free ring layout in the image's own order. The wrapped tail
            // enters at offset 0 with `carry` slots.
            let origin = runs[0].bucket;
            let offs: Vec<usize> = runs.iter().map(|r| t.dist(origin, r.bucket)).collect();
            let mut tail = 0usize;
            let mut max_end = 0usize;
            for i in (0..runs.len()).rev() {
                tail += runs[i].len;
                max_end = max_end.max(offs[i] + tail);
            }
            // Offsets below the wrapped tail's end are taken. The anchor is the
            // physically lowest slot among the gaps the greedy pass leaves.
            let mut cur = max_end.saturating_sub(n);
            let mut best: Option<usize> = None;
            let mut gap = |a: usize, b: usize| {
                if a < b {
                    let lo = (origin + a) & t.mask;
                    let wraps = origin + a < n && origin + b > n;
                    let m = if wraps { 0 } else { lo };
                    best = Some(best.map_or(m, |x: usize| x.min(m)));
                }
            };
            for (i, r) in runs.iter().enumerate() {
                gap(cur, offs[i].max(cur));
                cur = cur.max(offs[i]) + r.len;
            }
            gap(cur, n);
            best?
        };
        let base = t.next(anchor);

        // Runs are in ring order, so ordering by distance from `base` is a rotation.
        let first = (0..runs.len())
            .min_by_key(|&i| t.dist(base, runs[i].bucket))
            .unwrap_or(0);
        let mut order: Vec<usize> = (0..runs.len()).collect();
        order.rotate_left(first);
        let offs: Vec<usize> = order
            .iter()
            .map(|&i| t.dist(base, runs[i].bucket))
            .collect();
        let m = order.len();
        let mut suffix_len = vec![0; m + 1];
        let mut suffix_end = vec![0; m + 1];
        for j in (0..m).rev() {
            suffix_len[j] = suffix_len[j + 1] + runs[order[j]].len;
            suffix_end[j] = suffix_end[j + 1].max(offs[j] + suffix_len[j]);
        }
        Some(Plan {
            img,
            n,
            base,
            order,
            offs,
            suffix_len,
            suffix_end,
        })
    }

    fn run(&self, j: usize) -> &RunRecord {
        &self.img.runs[self.order[j]]
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    /// Whether runs `j..` fit when the next free position is `c`.
    fn fits(&self, j: usize, c: usize) -> bool {
        (c + self.suffix_len[j]).max(self.suffix_end[j]) <= self.n
    }
}

/// First slot of the frame the full-table relayouts work in, or `None` when the
/// table has no free slot. Depends only on the live contents.
pub(crate) fn relayout_base(t: &FilterTable, img: &TableImage) -> Option<usize> {
    Plan::new(t, img).map(|p| p.base)
}

#[derive(Debug, Clone, Copy)]
enum Entry {
    Run { j: usize, pos: usize },
    Tomb { pos: usize },
}

/// Greedy left-to-right layout in offsets from the plan's base.
struct Builder<'p, 'a> {
    plan: &'p Plan<'a>,
    cur: usize,
    next_run: usize,
    out: Vec<Entry>,
}

impl<'p, 'a> Builder<'p, 'a> {
    fn new(plan: &'p Plan<'a>) -> Self {
        Builder {
            plan,
            cur: 0,
            next_run: 0,
            out: Vec::with_capacity(plan.len() * 2),
        }
    }

    fn place_run(&mut self) -> usize {
        let j = self.next_run;
        let pos = self.cur.max(self.plan.offs[j]);
        self.out.push(Entry::Run { j, pos });
        self.cur = pos + self.plan.run(j).len;
        self.next_run += 1;
        pos
    }

    fn try_tomb_at(&mut self, pos: usize) -> bool {
        debug_assert!(pos >= self.cur);
        if !self.plan.fits(self.next_run, pos + 1) {
            return false;
        }
        self.out.push(Entry::Tomb { pos });
        self.cur = pos + 1;
        true
    }
}

impl FilterTable {
    /// Called after every insert and delete.
    pub(crate) fn maybe_redistribute(&mut self) -> Result<(), FilterError> {
        if !self.config.policy.is_scheduled() || self.config.delete_mode == DeleteMode::Shift {
            return Ok(());
        }
        self.redist.ops_since_last += 1;
        let threshold = cleanup_threshold(self.capacity(), self.redist.load_at_last);
        if self.redist.ops_since_last > threshold as u64 {
            self.redistribute()?;
        }
        Ok(())
    }

    /// Runs the configured policy's redistribution now and resets the trigger state.
    /// No-op for the unscheduled policies.
    pub fn redistribute(&mut self) -> Result<(), FilterError> {
        match self.config.policy {
            PolicyKind::NoRedistribution | PolicyKind::AmortizedClean => return Ok(()),
            PolicyKind::BetweenRuns => self.redistribute_between_runs()?,
            PolicyKind::CleanUp => self.redistribute_cleanup()?,
            PolicyKind::GraveyardHashing => self.redistribute_graveyard()?,
        }
        self.redist = RedistState {
            ops_since_last: 0,
            load_at_last: self.element_load(),
        };
        Ok(())
    }

    /// Keeps one tombstone after each run that has any; drops every other tombstone.
    pub fn redistribute_between_runs(&mut self) -> Result<(), FilterError> {
        let img = self.image()?;
        let Some(plan) = Plan::new(self, &img) else {
            return Ok(());
        };
        let entries = between_runs_layout(&plan);
        self.write_layout(&plan, &entries);
        Ok(())
    }

    /// Between-runs, then a tombstone at each run boundary inside a cluster while the
    /// cluster can grow without touching the next one.
    pub fn redistribute_cleanup(&mut self) -> Result<(), FilterError> {
        let img = self.image()?;
        let Some(plan) = Plan::new(self, &img) else {
            return Ok(());
        };
        let mut keep = vec![false; plan.len()];
        let mut starts = vec![0; plan.len()];
        let mut ends = vec![0; plan.len()];
        let mut last = 0;
        for e in between_runs_layout(&plan) {
            match e {
                Entry::Run { j, pos } => {
                    starts[j] = pos;
                    ends[j] = pos + plan.run(j).len;
                    last = j;
                }
                Entry::Tomb { .. } => {
                    keep[last] = true;
                    ends[last] += 1;
                }
            }
        }

        // Clusters: maximal groups of runs where each later run is shifted.
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        for (j, (&start, &off)) in starts.iter().zip(&plan.offs).enumerate() {
            if start == off {
                clusters.push((j, j + 1));
            } else {
                clusters.last_mut().expect("first run is unshifted").1 = j + 1;
            }
        }
        for (c, &(lo, hi)) in clusters.iter().enumerate() {
            let end = ends[hi - 1];
            let room = match clusters.get(c + 1) {
                Some(&(next, _)) => (starts[next] - end).saturating_sub(1),
                None => {
                    let wrap_gap = plan.n - end + starts[0];
                    (plan.n - end).min(wrap_gap.saturating_sub(1))
                }
            };
            let mut budget = room;
            for flag in keep[lo..hi - 1].iter_mut() {
                if budget == 0 {
                    break;
                }
                if !*flag {
                    *flag = true;
                    budget -= 1;
                }
            }
        }

        let mut b = Builder::new(&plan);
        for &k in &keep {
            b.place_run();
            if k {
                let cur = b.cur;
                b.try_tomb_at(cur);
            }
        }
        let entries = b.out;
        self.write_layout(&plan, &entries);
        Ok(())
    }

    /// Clears every tombstone, then places `tombstone_budget` tombstones at evenly
    /// spaced targets. A target inside a run's span goes right after that run.
    pub fn redistribute_graveyard(&mut self) -> Result<(), FilterError> {
        let img = self.image()?;
        let Some(plan) = Plan::new(self, &img) else {
            return Ok(());
        };
        let n = plan.n;
        let k = tombstone_budget(n, self.element_load()).min(n);
        let mut targets: Vec<usize> = (0..k).map(|j| j * n / k).collect();
        let first = targets.partition_point(|&p| p < plan.base);
        targets.rotate_left(first);
        targets
            .iter_mut()
            .for_each(|p| *p = self.dist(plan.base, *p));

        let mut b = Builder::new(&plan);
        let mut ti = 0;
        let mut dropped = 0;
        for j in 0..plan.len() {
            while ti < k && targets[ti] < b.cur.max(plan.offs[j]) {
                let pos = targets[ti].max(b.cur);
                dropped += usize::from(!b.try_tomb_at(pos));
                ti += 1;
            }
            b.place_run();
            while ti < k && targets[ti] < b.cur {
                let cur = b.cur;
                dropped += usize::from(!b.try_tomb_at(cur));
                ti += 1;
            }
        }
        while ti < k {
            let pos = targets[ti].max(b.cur);
            if pos >= n || !b.try_tomb_at(pos) {
                dropped += 1;
            }
            ti += 1;
        }
        // Targets pushed off the end of the frame wrap into the free slots at its
        // start, which sit right after them in ring order.
        let first = match b.out.first() {
            Some(Entry::Run { pos, .. } | Entry::Tomb { pos }) => *pos,
            None => n,
        };
        let mut entries: Vec<Entry> = (0..dropped.min(first))
            .map(|pos| Entry::Tomb { pos })
            .collect();
        entries.extend(b.out);
        self.write_layout(&plan, &entries);
        Ok(())
    }

    /// Rewrites the whole table from a planned layout and rebuilds payloads.
    fn write_layout(&mut self, plan: &Plan<'_>, entries: &[Entry]) {
        let base = plan.base;
        self.slots.fill(0);
        self.payloads.clear();
        // Occupied bits first, so an unshifted run start already reads as non-empty
        // when the tombstone after it is written.
        for j in 0..plan.len() {
            let b = plan.run(j).bucket;
            self.slots[b] |= OCCUPIED;
        }
        let mut tombs = 0;
        let mut runs_seen = 0;
        for e in entries {
            match *e {
                Entry::Run { j, pos } => {
                    let run = plan.run(j);
                    let start = (base + pos) & self.mask;
                    let head_shift = if pos != plan.offs[j] { SHIFTED } else { 0 };
                    for (k, &rem) in plan.img.remainders(run).iter().enumerate() {
                        let flags = if k == 0 {
                            head_shift
                        } else {
                            CONTINUATION | SHIFTED
                        };
                        self.slots[(start + k) & self.mask] |= (rem << META_BITS) | flags;
                    }
                    runs_seen += 1;
                }
                Entry::Tomb { pos } => {
                    let i = (base + pos) & self.mask;
                    let attached = pos != 0 && !word_is_empty(self.slots[self.prev(i)]);
                    self.slots[i] |= TOMBSTONE | if attached { CONTINUATION | SHIFTED } else { 0 };
                    let m = plan.len();
                    let payload = if m == 0 {
                        TombstonePayload::NONE
                    } else {
                        let g = runs_seen % m;
                        TombstonePayload {
                            predecessor: Some(plan.run((g + m - 1) % m).bucket),
                            successor: Some(plan.run(g).bucket),
                        }
                    };
                    self.payloads.set(i, payload);
                    tombs += 1;
                }
            }
        }
        self.tombstone_count = tombs;
    }

    /// Removes the tombstones among slots `cs..=end` and slides the content
    /// after them left as far as bucket positions allow. `cs` must start a cluster.
    pub(crate) fn amortized_clean(&mut self, cs: usize, end: usize) {
        #[derive(Clone, Copy)]
        enum Item {
            RunStart { rem: u64, bucket_off: usize },
            Cont { rem: u64 },
            Tomb { slot: usize },
        }
        let n = self.capacity();
        let end_off = self.dist(cs, end);
        let mut items = Vec::new();
        let mut removed = Vec::new();
        let mut scan = cs;
        let mut pos = cs;
        let mut region = 0;
        while region < n {
            let w = self.slots[pos];
            if word_is_empty(w) || (region > end_off && w & SHIFTED == 0) {
                break;
            }
            if w & TOMBSTONE != 0 {
                if region <= end_off {
                    removed.push(pos);
                } else {
                    items.push(Item::Tomb { slot: pos });
                }
            } else if word_is_run_start(w) {
                let bucket = self.next_occupied(scan);
                scan = self.next(bucket);
                items.push(Item::RunStart {
                    rem: word_remainder(w),
                    bucket_off: self.dist(cs, bucket),
                });
            } else {
                debug_assert!(word_is_live(w));
                items.push(Item::Cont {
                    rem: word_remainder(w),
                });
            }
            pos = self.next(pos);
            region += 1;
        }
        if removed.is_empty() {
            return;
        }

        let mut moved = Vec::new();
        for &slot in &removed {
            self.payloads.remove(slot);
        }
        for it in &items {
            if let Item::Tomb { slot } = *it {
                let p = self.payloads.remove(slot).unwrap_or(TombstonePayload::NONE);
                moved.push(p);
            }
        }
        for k in 0..region {
            let i = (cs + k) & self.mask;
            self.slots[i] &= OCCUPIED;
        }
        let mut cur = 0;
        let mut moved = moved.into_iter();
        for it in items {
            let (p, word) = match it {
                Item::RunStart { rem, bucket_off } => {
                    let p = cur.max(bucket_off);
                    let sh = if p != bucket_off { SHIFTED } else { 0 };
                    (p, (rem << META_BITS) | sh)
                }
                Item::Cont { rem } => (cur, (rem << META_BITS) | CONTINUATION | SHIFTED),
                Item::Tomb { .. } => {
                    let i = (cs + cur) & self.mask;
                    let attached = cur != 0 && !word_is_empty(self.slots[self.prev(i)]);
                    let payload = moved.next().expect("one payload per kept tombstone");
                    self.payloads.set(i, payload);
                    let flags = if attached { CONTINUATION | SHIFTED } else { 0 };
                    (cur, TOMBSTONE | flags)
                }
            };
            let i = (cs + p) & self.mask;
            self.slots[i] |= word;
            cur = p + 1;
        }
        self.tombstone_count -= removed.len();
    }
}

fn between_runs_layout(plan: &Plan<'_>) -> Vec<Entry> {
    let mut b = Builder::new(plan);
    for j in 0..plan.len() {
        b.place_run();
        if plan.run(j).trailing > 0 {
            let cur = b.cur;
            b.try_tomb_at(cur);
        }
    }
    b.out
}

//! Base quotient-filter table: hashing, the bucket/remainder split, cluster and run
//! navigation, and the insert/query/delete entry points.
//!
//! Each slot is one `u64` word: the low four bits are metadata and the remainder sits
//! above them.
//!
//! ```text
//!  63 ........ 4 | 3         | 2       | 1            | 0
//!  remainder     | tombstone | shifted | continuation | occupied
//! ```
//!
//! `occupied` belongs to the slot *index* (some live element has this index as its
//! bucket) and never moves; the other bits and the remainder travel with the content.
//! A slot is empty iff all four metadata bits are clear.
//!
//! Tombstones never start a run. An attached tombstone has `continuation` and
//! `shifted` set; a tombstone heading its own stretch of the table has both clear.

mod image;

pub(crate) use image::{RunRecord, TableImage};

use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::FilterError;
use crate::graveyard_ops::{PayloadStore, ReuseDecision, RunEvent};
use crate::redistribution::{PolicyKind, RedistState};

pub(crate) const OCCUPIED: u64 = 1;
pub(crate) const CONTINUATION: u64 = 1 << 1;
pub(crate) const SHIFTED: u64 = 1 << 2;
pub(crate) const TOMBSTONE: u64 = 1 << 3;
pub(crate) const META_BITS: u32 = 4;
pub(crate) const META_MASK: u64 = (1 << META_BITS) - 1;

pub(crate) const MIN_Q: u32 = 3;
pub(crate) const MAX_Q: u32 = 30;
pub(crate) const MAX_R: u32 = 32;

#[inline]
pub(crate) fn word_is_empty(w: u64) -> bool {
    w & META_MASK == 0
}

#[inline]
pub(crate) fn word_is_live(w: u64) -> bool {
    w & META_MASK != 0 && w & TOMBSTONE == 0
}

#[inline]
pub(crate) fn word_is_run_start(w: u64) -> bool {
    word_is_live(w) && w & CONTINUATION == 0
}

#[inline]
pub(crate) fn word_remainder(w: u64) -> u64 {
    w >> META_BITS
}

/// How a filter removes elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeleteMode {
    /// Deleted elements become tombstones.
    Tombstone,
    /// Classic quotient-filter deletion: the cluster is shifted left over the hole.
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Bucket bits; the table has `2^q` slots.
    pub q: u32,
    /// Remainder bits stored per slot.
    pub r: u32,
    pub seed: u64,
    pub policy: PolicyKind,
    pub delete_mode: DeleteMode,
}

impl FilterConfig {
    pub fn new(q: u32, r: u32, seed: u64, policy: PolicyKind) -> Self {
        FilterConfig {
            q,
            r,
            seed,
            policy,
            delete_mode: DeleteMode::Tombstone,
        }
    }

    /// A plain quotient filter: shifting deletes, no tombstones, no redistribution.
    pub fn baseline(q: u32, r: u32, seed: u64) -> Self {
        FilterConfig {
            q,
            r,
            seed,
            policy: PolicyKind::NoRedistribution,
            delete_mode: DeleteMode::Shift,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if !(MIN_Q..=MAX_Q).contains(&self.q) {
            return Err(FilterError::InvalidConfig(format!(
                "q = {} outside {MIN_Q}..={MAX_Q}",
                self.q
            )));
        }
        if !(1..=MAX_R).contains(&self.r) {
            return Err(FilterError::InvalidConfig(format!(
                "r = {} outside 1..={MAX_R}",
                self.r
            )));
        }
        if self.q + self.r > 64 {
            return Err(FilterError::InvalidConfig(format!(
                "q + r = {} exceeds 64",
                self.q + self.r
            )));
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        1usize << self.q
    }

    pub fn fingerprint_bits(&self) -> u32 {
        self.q + self.r
    }

    pub fn split(&self, fp: Fingerprint) -> (usize, u64) {
        split(fp, self.q, self.r)
    }
}

/// The `(q + r)`-bit hash of a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub u64);

impl Fingerprint {
    pub fn from_parts(quotient: usize, remainder: u64, r: u32) -> Self {
        Fingerprint(((quotient as u64) << r) | remainder)
    }
}

#[inline]
fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Hashes `key` with xxh3 under `seed` and keeps the low `bits` bits.
pub fn fingerprint(key: &[u8], seed: u64, bits: u32) -> Fingerprint {
    Fingerprint(xxh3_64_with_seed(key, seed) & low_mask(bits))
}

/// Splits a fingerprint into `(quotient, remainder)`: the high `q` bits and the low `r` bits.
#[inline]
pub fn split(fp: Fingerprint, q: u32, r: u32) -> (usize, u64) {
    let quotient = (fp.0 >> r) & low_mask(q);
    (quotient as usize, fp.0 & low_mask(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotContent {
    Empty,
    Remainder(u64),
    Tombstone,
}

/// Decoded view of one table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub is_occupied: bool,
    pub is_continuation: bool,
    pub is_shifted: bool,
    pub is_tombstone: bool,
    pub content: SlotContent,
}

/// Metadata bits addressable by fault injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaFlag {
    Occupied,
    Continuation,
    Shifted,
    Tombstone,
}

impl MetaFlag {
    fn bit(self) -> u64 {
        match self {
            MetaFlag::Occupied => OCCUPIED,
            MetaFlag::Continuation => CONTINUATION,
            MetaFlag::Shifted => SHIFTED,
            MetaFlag::Tombstone => TOMBSTONE,
        }
    }
}

/// Where a bucket's run sits, as found by the cluster walk.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RunLocation {
    pub cluster_start: usize,
    pub run_start: usize,
    pub saw_tombstone: bool,
}

#[derive(Debug, Clone)]
pub struct FilterTable {
    pub(crate) config: FilterConfig,
    pub(crate) slots: Vec<u64>,
    pub(crate) mask: usize,
    pub(crate) element_count: usize,
    pub(crate) tombstone_count: usize,
    pub(crate) redist: RedistState,
    pub(crate) payloads: PayloadStore,
}

impl FilterTable {
    pub fn new(config: FilterConfig) -> Result<Self, FilterError> {
        config.validate()?;
        let n = config.capacity();
        Ok(FilterTable {
            config,
            slots: vec![0; n],
            mask: n - 1,
            element_count: 0,
            tombstone_count: 0,
            redist: RedistState::default(),
            payloads: PayloadStore::default(),
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.element_count
    }

    pub fn is_empty(&self) -> bool {
        self.element_count == 0
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn tombstone_count(&self) -> usize {
        self.tombstone_count
    }

    pub fn redist_state(&self) -> &RedistState {
        &self.redist
    }

    pub fn payloads(&self) -> &PayloadStore {
        &self.payloads
    }

    /// Live elements over table size.
    pub fn element_load(&self) -> f64 {
        self.element_count as f64 / self.capacity() as f64
    }

    /// Live elements plus tombstones over table size.
    pub fn physical_load(&self) -> f64 {
        (self.element_count + self.tombstone_count) as f64 / self.capacity() as f64
    }

    pub fn fingerprint_of(&self, key: &[u8]) -> Fingerprint {
        fingerprint(key, self.config.seed, self.config.fingerprint_bits())
    }

    pub fn slot(&self, i: usize) -> Slot {
        let w = self.slots[i & self.mask];
        let content = if word_is_empty(w) {
            SlotContent::Empty
        } else if w & TOMBSTONE != 0 {
            SlotContent::Tombstone
        } else {
            SlotContent::Remainder(word_remainder(w))
        };
        Slot {
            is_occupied: w & OCCUPIED != 0,
            is_continuation: w & CONTINUATION != 0,
            is_shifted: w & SHIFTED != 0,
            is_tombstone: w & TOMBSTONE != 0,
            content,
        }
    }

    /// Flips one metadata bit in place. Only meant for exercising corruption detectors.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, slot: usize, flag: MetaFlag) {
        let i = slot & self.mask;
        self.slots[i] ^= flag.bit();
    }

    // ---- index arithmetic -------------------------------------------------

    #[inline]
    pub(crate) fn next(&self, i: usize) -> usize {
        (i + 1) & self.mask
    }

    #[inline]
    pub(crate) fn prev(&self, i: usize) -> usize {
        i.wrapping_sub(1) & self.mask
    }

    /// Circular distance walking right from `from` to `to`.
    #[inline]
    pub(crate) fn dist(&self, from: usize, to: usize) -> usize {
        to.wrapping_sub(from) & self.mask
    }

    #[inline]
    pub(crate) fn is_occupied(&self, i: usize) -> bool {
        self.slots[i] & OCCUPIED != 0
    }

    #[inline]
    pub(crate) fn is_live(&self, i: usize) -> bool {
        word_is_live(self.slots[i])
    }

    #[inline]
    pub(crate) fn is_tombstone(&self, i: usize) -> bool {
        self.slots[i] & TOMBSTONE != 0
    }

    #[inline]
    pub(crate) fn slot_is_empty(&self, i: usize) -> bool {
        word_is_empty(self.slots[i])
    }

    #[inline]
    pub(crate) fn remainder_at(&self, i: usize) -> u64 {
        word_remainder(self.slots[i])
    }

    #[inline]
    fn is_live_continuation(&self, i: usize) -> bool {
        let w = self.slots[i];
        word_is_live(w) && w & CONTINUATION != 0
    }

    /// First index at or after `from` (circularly) whose occupied bit is set.
    #[inline]
    pub(crate) fn next_occupied(&self, from: usize) -> usize {
        let mut i = from;
        for _ in 0..self.slots.len() {
            if self.slots[i] & OCCUPIED != 0 {
                return i;
            }
            i = self.next(i);
        }
        panic!("filter metadata corrupted: no occupied bucket at or after {from}");
    }

    /// Nearest occupied bucket strictly after `b`, wrapping back to `b` itself.
    pub(crate) fn next_occupied_after(&self, b: usize) -> Option<usize> {
        let mut i = self.next(b);
        for _ in 0..self.slots.len() {
            if self.is_occupied(i) {
                return Some(i);
            }
            i = self.next(i);
        }
        None
    }

    /// Nearest occupied bucket strictly before `b`, wrapping back to `b` itself.
    pub(crate) fn prev_occupied_before(&self, b: usize) -> Option<usize> {
        let mut i = self.prev(b);
        for _ in 0..self.slots.len() {
            if self.is_occupied(i) {
                return Some(i);
            }
            i = self.prev(i);
        }
        None
    }

    // ---- navigation -------------------------------------------------------

    /// Walks left from the non-empty slot `i` to the nearest unshifted slot.
    pub fn find_cluster_start(&self, i: usize) -> usize {
        let mut j = i & self.mask;
        for _ in 0..self.slots.len() {
            if self.slots[j] & SHIFTED == 0 {
                return j;
            }
            j = self.prev(j);
        }
        panic!("filter metadata corrupted: every slot is shifted");
    }

    /// Index of the first slot of bucket `b`'s run. `b` must be occupied.
    pub fn find_run(&self, b: usize) -> usize {
        self.locate_run(b & self.mask).run_start
    }

    pub(crate) fn locate_run(&self, b: usize) -> RunLocation {
        debug_assert!(self.is_occupied(b));
        let w = self.slots[b];
        if w & (SHIFTED | TOMBSTONE | CONTINUATION) == 0 {
            // A live unshifted slot holds the start of its own bucket's run.
            return RunLocation {
                cluster_start: b,
                run_start: b,
                saw_tombstone: false,
            };
        }
        let cs = self.find_cluster_start(b);
        let mut pos = cs;
        let mut scan = cs;
        let mut saw_tombstone = false;
        for _ in 0..self.slots.len() {
            let w = self.slots[pos];
            if w & TOMBSTONE != 0 {
                saw_tombstone = true;
            } else if word_is_run_start(w) {
                let bucket = self.next_occupied(scan);
                if bucket == b {
                    return RunLocation {
                        cluster_start: cs,
                        run_start: pos,
                        saw_tombstone,
                    };
                }
                scan = self.next(bucket);
            }
            pos = self.next(pos);
        }
        panic!("filter metadata corrupted: run of bucket {b} not found");
    }

    /// Bucket of the run owning the live slot `i`.
    pub(crate) fn bucket_of(&self, i: usize) -> usize {
        debug_assert!(self.is_live(i));
        let cs = self.find_cluster_start(i);
        let mut pos = cs;
        let mut scan = cs;
        let mut current = None;
        for _ in 0..self.slots.len() {
            if word_is_run_start(self.slots[pos]) {
                let bucket = self.next_occupied(scan);
                scan = self.next(bucket);
                current = Some(bucket);
            }
            if pos == i {
                return current.expect("live slot precedes every run start of its cluster");
            }
            pos = self.next(pos);
        }
        panic!("filter metadata corrupted: slot {i} unreachable from its cluster start");
    }

    // ---- insert -----------------------------------------------------------

    pub fn insert(&mut self, key: &[u8]) -> Result<(), FilterError> {
        self.insert_fp(self.fingerprint_of(key))
    }

    pub fn insert_fp(&mut self, fp: Fingerprint) -> Result<(), FilterError> {
        let (b, rem) = self.config.split(fp);
        let at = self.place(b, rem, true)?;
        self.after_insert(at, b)
    }

    /// Inserts without the canonical-slot tombstone shortcut, always taking the
    /// cluster walk. Used to compare the two insertion paths.
    pub fn insert_fp_by_walk(&mut self, fp: Fingerprint) -> Result<(), FilterError> {
        let (b, rem) = self.config.split(fp);
        let at = self.place(b, rem, false)?;
        self.after_insert(at, b)
    }

    fn after_insert(&mut self, at: usize, b: usize) -> Result<(), FilterError> {
        self.element_count += 1;
        if self.tombstone_count > 0 {
            self.update_adjacent_tombstones(at, RunEvent::Created { bucket: b });
        }
        self.maybe_redistribute()?;
        Ok(())
    }

    /// Stores `(b, rem)` and returns the slot it landed in.
    fn place(&mut self, b: usize, rem: u64, allow_reuse: bool) -> Result<usize, FilterError> {
        let w = self.slots[b];
        if word_is_empty(w) {
            self.slots[b] = (rem << META_BITS) | OCCUPIED;
            return Ok(b);
        }
        if allow_reuse && w & TOMBSTONE != 0 {
            if let ReuseDecision::ReuseAt(i) = self.try_reuse_tombstone(b, rem) {
                self.fill_reused_tombstone(i, b, rem);
                return Ok(i);
            }
        }
        self.place_by_walk(b, rem)
    }

    fn place_by_walk(&mut self, b: usize, rem: u64) -> Result<usize, FilterError> {
        let cs = self.find_cluster_start(b);
        let target = self.dist(cs, b);
        let mut pos = cs;
        let mut scan = cs;
        // First slot after the most recent live element.
        let mut gap_start = cs;
        let mut seen_live = false;
        for _ in 0..self.slots.len() {
            let w = self.slots[pos];
            if word_is_empty(w) {
                break;
            }
            if w & TOMBSTONE == 0 {
                seen_live = true;
                if w & CONTINUATION == 0 {
                    let bucket = self.next_occupied(scan);
                    scan = self.next(bucket);
                    let off = self.dist(cs, bucket);
                    if off == target {
                        return self.insert_into_run(cs, pos, b, rem);
                    }
                    if off > target {
                        break;
                    }
                }
                gap_start = self.next(pos);
            }
            pos = self.next(pos);
        }

        // New run. It goes after every run of a smaller bucket; any tombstone in the
        // gap before `pos` that is not left of the canonical slot can take it directly.
        debug_assert!(!self.is_occupied(b));
        // Without an empty slot the walk ends back at `cs`, which then stands for the
        // position after the last run.
        // With no live slot at all the gap is the whole ring.
        let span = if !seen_live && pos == cs {
            self.slots.len()
        } else {
            self.dist(gap_start, pos)
        };
        let mut at = pos;
        let mut t = gap_start;
        for _ in 0..span {
            if self.dist(cs, t) >= target {
                at = t;
                break;
            }
            t = self.next(t);
        }
        let placed = self.shift_insert(cs, at, b, rem, false)?;
        self.slots[b] |= OCCUPIED;
        Ok(placed)
    }

    fn insert_into_run(
        &mut self,
        cs: usize,
        run_start: usize,
        b: usize,
        rem: u64,
    ) -> Result<usize, FilterError> {
        let mut j = run_start;
        for _ in 0..self.slots.len() {
            if self.remainder_at(j) > rem {
                let is_start = j == run_start;
                let placed = self.shift_insert(cs, j, b, rem, !is_start)?;
                if is_start {
                    let old_start = self.next(placed);
                    self.slots[old_start] |= CONTINUATION;
                }
                return Ok(placed);
            }
            let nj = self.next(j);
            if !self.is_live_continuation(nj) {
                return self.shift_insert(cs, nj, b, rem, true);
            }
            j = nj;
        }
        unreachable!("run of bucket {b} spans the whole table")
    }

    /// Stores `(b, rem)` so that it ends up just before the content now at `at`, and
    /// returns its slot.
    ///
    /// Normally the content from `at` is pushed one slot right, up to the first empty
    /// slot or tombstone, which absorbs the push. When nothing on the right can absorb
    /// it without wrapping into the cluster start `cs`, the content between the nearest
    /// tombstone on the left and `at` is pulled one slot left instead. `at == cs` with
    /// `b != cs` means the walk went all the way round the table.
    fn shift_insert(
        &mut self,
        cs: usize,
        at: usize,
        b: usize,
        rem: u64,
        continuation: bool,
    ) -> Result<usize, FilterError> {
        let n = self.slots.len();
        let wrapped = at == cs && b != cs;
        let at_off = if wrapped { n } else { self.dist(cs, at) };
        let cont = if continuation { CONTINUATION } else { 0 };
        if !wrapped {
            let limit = n - at_off;
            let mut end = at;
            let mut found = false;
            for _ in 0..limit {
                let w = self.slots[end];
                if word_is_empty(w) || w & TOMBSTONE != 0 {
                    found = true;
                    break;
                }
                end = self.next(end);
            }
            if found {
                if self.slots[end] & TOMBSTONE != 0 {
                    self.payloads.remove(end);
                    self.tombstone_count -= 1;
                }
                let mut j = end;
                while j != at {
                    let src = self.prev(j);
                    self.slots[j] =
                        (self.slots[j] & OCCUPIED) | (self.slots[src] & !OCCUPIED) | SHIFTED;
                    j = src;
                }
                let sh = if at != b { SHIFTED } else { 0 };
                self.slots[at] = (self.slots[at] & OCCUPIED) | (rem << META_BITS) | cont | sh;
                return Ok(at);
            }
        }

        // Pull left. The new element lands at `at - 1`, which must not precede `b`.
        let target = self.dist(cs, b);
        if at_off == 0 || at_off - 1 < target {
            return Err(FilterError::CapacityExhausted);
        }
        let mut t_off = at_off - 1;
        while t_off > 0 && self.slots[(cs + t_off) & self.mask] & TOMBSTONE == 0 {
            t_off -= 1;
        }
        // A tombstone at the cluster start itself works too: the slot after it is a
        // shifted run start of bucket `cs`, and lands unshifted at `cs`.
        if t_off == 0 && self.slots[cs] & TOMBSTONE == 0 {
            return Err(FilterError::CapacityExhausted);
        }
        // Buckets of the run starts that move, so their shifted bits can be recomputed.
        let mut buckets = Vec::new();
        let mut scan = cs;
        for off in 0..at_off {
            let w = self.slots[(cs + off) & self.mask];
            if word_is_run_start(w) {
                let bucket = self.next_occupied(scan);
                scan = self.next(bucket);
                if off > t_off {
                    buckets.push(bucket);
                }
            }
        }
        let t = (cs + t_off) & self.mask;
        self.payloads.remove(t);
        self.tombstone_count -= 1;
        let mut moved = buckets.into_iter();
        for off in t_off..at_off - 1 {
            let dest = (cs + off) & self.mask;
            let w = self.slots[(dest + 1) & self.mask];
            let sh = if word_is_run_start(w) {
                if moved.next().expect("one bucket per moved run start") != dest {
                    SHIFTED
                } else {
                    0
                }
            } else {
                SHIFTED
            };
            self.slots[dest] = (self.slots[dest] & OCCUPIED) | (w & !(OCCUPIED | SHIFTED)) | sh;
        }
        let placed = (cs + at_off - 1) & self.mask;
        let sh = if placed != b { SHIFTED } else { 0 };
        self.slots[placed] = (self.slots[placed] & OCCUPIED) | (rem << META_BITS) | cont | sh;
        Ok(placed)
    }

    // ---- query ------------------------------------------------------------

    /// Membership test. Under [`PolicyKind::AmortizedClean`] the walk also compacts
    /// away any tombstone it stepped over, hence `&mut self`.
    pub fn query(&mut self, key: &[u8]) -> bool {
        self.query_fp(self.fingerprint_of(key))
    }

    pub fn query_fp(&mut self, fp: Fingerprint) -> bool {
        let (b, rem) = self.config.split(fp);
        if !self.is_occupied(b) {
            return false;
        }
        let loc = self.locate_run(b);
        let (found, last) = self.scan_run_for(loc.run_start, rem);
        if loc.saw_tombstone && self.config.policy == PolicyKind::AmortizedClean {
            self.amortized_clean(loc.cluster_start, last);
        }
        found
    }

    /// Membership test that never mutates the table.
    pub fn contains_fp(&self, fp: Fingerprint) -> bool {
        let (b, rem) = self.config.split(fp);
        if !self.is_occupied(b) {
            return false;
        }
        let loc = self.locate_run(b);
        self.scan_run_for(loc.run_start, rem).0
    }

    /// Scans a sorted run for `rem`; returns whether it was found and the last slot read.
    fn scan_run_for(&self, run_start: usize, rem: u64) -> (bool, usize) {
        let mut j = run_start;
        loop {
            let stored = self.remainder_at(j);
            if stored == rem {
                return (true, j);
            }
            if stored > rem {
                return (false, j);
            }
            let nj = self.next(j);
            if !self.is_live_continuation(nj) {
                return (false, j);
            }
            j = nj;
        }
    }

    // ---- delete -----------------------------------------------------------

    pub fn delete(&mut self, key: &[u8]) -> Result<(), FilterError> {
        self.delete_fp(self.fingerprint_of(key))
    }

    /// Removes one copy of `fp`. Deleting a fingerprint that was never inserted is a
    /// caller error: it either reports [`FilterError::NotFound`] or, on a fingerprint
    /// collision, evicts the colliding element.
    pub fn delete_fp(&mut self, fp: Fingerprint) -> Result<(), FilterError> {
        let (b, rem) = self.config.split(fp);
        if !self.is_occupied(b) {
            return Err(FilterError::NotFound);
        }
        let loc = self.locate_run(b);
        let mut victim = None;
        let mut j = loc.run_start;
        let run_end = loop {
            if victim.is_none() {
                let stored = self.remainder_at(j);
                if stored == rem {
                    victim = Some(j);
                } else if stored > rem {
                    return Err(FilterError::NotFound);
                }
            }
            let nj = self.next(j);
            if !self.is_live_continuation(nj) {
                break j;
            }
            j = nj;
        };
        let Some(victim) = victim else {
            return Err(FilterError::NotFound);
        };

        let run_removed = self.make_tombstone(run_end, victim);
        if run_removed {
            self.slots[b] &= !OCCUPIED;
        }
        match self.config.delete_mode {
            DeleteMode::Shift => self.amortized_clean(loc.cluster_start, run_end),
            DeleteMode::Tombstone => {
                let event = if run_removed {
                    RunEvent::Removed { bucket: b }
                } else {
                    RunEvent::Shortened { bucket: b }
                };
                self.update_adjacent_tombstones(run_end, event);
                if self.config.policy == PolicyKind::AmortizedClean {
                    self.amortized_clean(loc.cluster_start, run_end);
                }
            }
        }
        self.maybe_redistribute()?;
        Ok(())
    }

    // ---- whole-table views ------------------------------------------------

    /// Reconstructs the multiset of stored fingerprints, sorted ascending.
    pub fn decode(&self) -> Result<Vec<Fingerprint>, FilterError> {
        let image = self.image()?;
        let r = self.config.r;
        let mut out = Vec::with_capacity(self.element_count);
        for run in &image.runs {
            for &rem in image.remainders(run) {
                out.push(Fingerprint::from_parts(run.bucket, rem, r));
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

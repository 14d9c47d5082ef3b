//! Tombstone mechanics: payload computation and storage, tombstone creation on
//! delete, the reuse check on insert, and payload maintenance when runs appear,
//! shrink or disappear.

use rustc_hash::FxHashMap;

use crate::filter_core::{FilterTable, CONTINUATION, META_BITS, OCCUPIED, SHIFTED, TOMBSTONE};

const NONE: u32 = u32::MAX;

/// Buckets of the runs owning the nearest live slot on each side of a tombstone.
/// Both are `None` exactly when the table holds no element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TombstonePayload {
    pub predecessor: Option<usize>,
    pub successor: Option<usize>,
}

impl TombstonePayload {
    pub const NONE: TombstonePayload = TombstonePayload {
        predecessor: None,
        successor: None,
    };

    fn pack(self) -> u64 {
        let enc = |x: Option<usize>| x.map_or(NONE, |v| v as u32) as u64;
        (enc(self.predecessor) << 32) | enc(self.successor)
    }

    fn unpack(w: u64) -> Self {
        let dec = |x: u32| (x != NONE).then_some(x as usize);
        TombstonePayload {
            predecessor: dec((w >> 32) as u32),
            successor: dec(w as u32),
        }
    }
}

/// Out-of-line payloads, keyed by tombstone slot index.
#[derive(Debug, Clone, Default)]
pub struct PayloadStore {
    map: FxHashMap<u32, u64>,
}

impl PayloadStore {
    pub fn get(&self, slot: usize) -> Option<TombstonePayload> {
        self.map
            .get(&(slot as u32))
            .map(|&w| TombstonePayload::unpack(w))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.map.contains_key(&(slot as u32))
    }

    /// Entries in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, TombstonePayload)> + '_ {
        self.map
            .iter()
            .map(|(&k, &w)| (k as usize, TombstonePayload::unpack(w)))
    }

    pub(crate) fn set(&mut self, slot: usize, payload: TombstonePayload) {
        self.map.insert(slot as u32, payload.pack());
    }

    pub(crate) fn remove(&mut self, slot: usize) -> Option<TombstonePayload> {
        self.map
            .remove(&(slot as u32))
            .map(TombstonePayload::unpack)
    }

    pub(crate) fn clear(&mut self) {
        self.map.clear();
    }

    fn set_all(&mut self, payload: TombstonePayload) {
        let w = payload.pack();
        for v in self.map.values_mut() {
            *v = w;
        }
    }
}

/// Outcome of the canonical-slot tombstone check on insert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReuseDecision {
    ReuseAt(usize),
    Fallback,
}

/// Structural change around one run, used to refresh neighbouring payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunEvent {
    /// A live element was stored; it may have started a new run.
    Created { bucket: usize },
    /// A run lost one element and is still non-empty.
    Shortened { bucket: usize },
    /// A run lost its last element.
    Removed { bucket: usize },
}

impl FilterTable {
    /// Recomputes the payload a tombstone at slot `i` should carry.
    pub fn compute_payload(&self, i: usize) -> TombstonePayload {
        if self.element_count == 0 {
            return TombstonePayload::NONE;
        }
        let i = i & self.mask;
        let mut left = self.prev(i);
        while !self.is_live(left) {
            left = self.prev(left);
        }
        let mut right = self.next(i);
        while !self.is_live(right) {
            right = self.next(right);
        }
        TombstonePayload {
            predecessor: Some(self.bucket_of(left)),
            successor: Some(self.bucket_of(right)),
        }
    }

    /// Removes the element at `victim` from the run ending at `run_end` by compacting
    /// the run suffix left, and turns `run_end` into a tombstone. Payload contents
    /// are left to the caller. Returns whether the run is now empty.
    pub(crate) fn make_tombstone(&mut self, run_end: usize, victim: usize) -> bool {
        let mut j = victim;
        while j != run_end {
            let nj = self.next(j);
            let rem = self.slots[nj] >> META_BITS;
            self.slots[j] = (self.slots[j] & ((1 << META_BITS) - 1)) | (rem << META_BITS);
            j = nj;
        }
        let w = self.slots[run_end];
        let emptied = w & CONTINUATION == 0;
        let attach = if w & SHIFTED != 0 {
            CONTINUATION | SHIFTED
        } else {
            0
        };
        self.slots[run_end] = (w & OCCUPIED) | TOMBSTONE | attach;
        self.payloads.set(run_end, TombstonePayload::NONE);
        self.element_count -= 1;
        self.tombstone_count += 1;
        emptied
    }

    /// Decides whether the tombstone in canonical slot `b` can take `(b, rem)` in place.
    ///
    /// The nearest live element on the left lies before `b` and so belongs to a bucket
    /// no later than `b`; only the right side needs checking. That is done against the
    /// first live slot `j` after `b`: it must belong to a later bucket, or be the start
    /// of `b`'s own run directly after the tombstone with a remainder no smaller than
    /// `rem`.
    pub fn try_reuse_tombstone(&self, b: usize, rem: u64) -> ReuseDecision {
        let b = b & self.mask;
        debug_assert!(self.is_tombstone(b));
        let succ = match self.payloads.get(b).and_then(|p| p.successor) {
            Some(s) => s,
            None => return ReuseDecision::ReuseAt(b),
        };
        let mut j = self.next(b);
        loop {
            if j == b || self.slot_is_empty(j) {
                return ReuseDecision::ReuseAt(b);
            }
            if self.is_live(j) {
                break;
            }
            j = self.next(j);
        }
        let disp = self.dist(succ, j);
        let dist = self.dist(b, j);
        let ties_in_order = disp == dist && j == self.next(b) && rem <= self.remainder_at(j);
        if disp < dist || ties_in_order {
            ReuseDecision::ReuseAt(b)
        } else {
            ReuseDecision::Fallback
        }
    }

    /// Writes `(b, rem)` over the tombstone at `i` after a positive reuse decision.
    pub(crate) fn fill_reused_tombstone(&mut self, i: usize, b: usize, rem: u64) {
        debug_assert_eq!(i, b);
        let joins_run = self.is_occupied(b);
        self.payloads.remove(i);
        self.tombstone_count -= 1;
        self.slots[i] = (rem << META_BITS) | OCCUPIED;
        if joins_run {
            let nj = self.next(i);
            self.slots[nj] |= CONTINUATION;
        }
    }

    /// Refreshes the payloads of tombstones next to the live slot or tombstone `at`.
    pub fn update_adjacent_tombstones(&mut self, at: usize, event: RunEvent) {
        if self.tombstone_count == 0 {
            return;
        }
        match event {
            RunEvent::Created { bucket } => {
                if self.element_count == 1 {
                    self.payloads.set_all(TombstonePayload {
                        predecessor: Some(bucket),
                        successor: Some(bucket),
                    });
                    return;
                }
                // Left neighbours now see this element as their successor.
                let mut j = self.prev(at);
                while !self.is_live(j) {
                    if self.is_tombstone(j) {
                        let mut p = self.payloads.get(j).unwrap_or(TombstonePayload::NONE);
                        p.successor = Some(bucket);
                        self.payloads.set(j, p);
                    }
                    j = self.prev(j);
                }
                let mut j = self.next(at);
                while !self.is_live(j) {
                    if self.is_tombstone(j) {
                        let mut p = self.payloads.get(j).unwrap_or(TombstonePayload::NONE);
                        p.predecessor = Some(bucket);
                        self.payloads.set(j, p);
                    }
                    j = self.next(j);
                }
            }
            RunEvent::Shortened { bucket } | RunEvent::Removed { bucket } => {
                let payload = if self.element_count == 0 {
                    TombstonePayload::NONE
                } else {
                    let predecessor = if matches!(event, RunEvent::Shortened { .. }) {
                        Some(bucket)
                    } else {
                        self.prev_occupied_before(bucket)
                    };
                    let successor = self.next_occupied_after(bucket);
                    TombstonePayload {
                        predecessor,
                        successor,
                    }
                };
                if self.element_count == 0 {
                    self.payloads.set_all(payload);
                    return;
                }
                // `at` is the new tombstone; every tombstone in its live-free gap shares
                // the same neighbours.
                let mut j = at;
                while !self.is_live(j) {
                    if self.is_tombstone(j) {
                        self.payloads.set(j, payload);
                    }
                    j = self.prev(j);
                }
                let mut j = self.next(at);
                while !self.is_live(j) {
                    if self.is_tombstone(j) {
                        self.payloads.set(j, payload);
                    }
                    j = self.next(j);
                }
            }
        }
    }
}

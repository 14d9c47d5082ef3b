//! Whole-table scan: validates the metadata and extracts the run structure in ring
//! order. Used by decode, the invariant checker and the full-table redistributions.

use super::{
    word_is_empty, word_remainder, FilterTable, CONTINUATION, OCCUPIED, SHIFTED, TOMBSTONE,
};
use crate::error::FilterError;
use crate::graveyard_ops::TombstonePayload;

#[derive(Debug, Clone, Copy)]
pub(crate) struct RunRecord {
    pub bucket: usize,
    /// Slot of the run's first element.
    pub start: usize,
    pub rem_offset: usize,
    pub len: usize,
    /// Tombstones directly after the last element, before any empty or live slot.
    pub trailing: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TombRecord {
    pub slot: usize,
    /// Index of the run following this tombstone in ring order, modulo the run count.
    pub gap: usize,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TableImage {
    /// Runs in ring order from the scan origin.
    pub runs: Vec<RunRecord>,
    pub rems: Vec<u64>,
    pub tombs: Vec<TombRecord>,
    /// Tombstones not directly after a run.
    pub head_tombstones: usize,
}

impl TableImage {
    pub fn remainders(&self, run: &RunRecord) -> &[u64] {
        &self.rems[run.rem_offset..run.rem_offset + run.len]
    }

    pub fn live_count(&self) -> usize {
        self.rems.len()
    }

    /// Payload a tombstone in gap `gap` should carry.
    pub fn gap_payload(&self, gap: usize) -> TombstonePayload {
        let n = self.runs.len();
        if n == 0 {
            return TombstonePayload::NONE;
        }
        let g = gap % n;
        TombstonePayload {
            predecessor: Some(self.runs[(g + n - 1) % n].bucket),
            successor: Some(self.runs[g].bucket),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Prev {
    Empty,
    Live,
    TrailingTomb,
    HeadTomb,
}

impl FilterTable {
    /// Scan origin: the slot after some empty slot, or else any unshifted slot.
    fn scan_origin(&self) -> Result<usize, FilterError> {
        if let Some(e) = self.slots.iter().position(|&w| word_is_empty(w)) {
            return Ok(self.next(e));
        }
        self.slots
            .iter()
            .position(|&w| w & SHIFTED == 0)
            .ok_or_else(|| FilterError::corrupt(0, "no empty or unshifted slot"))
    }

    pub(crate) fn image(&self) -> Result<TableImage, FilterError> {
        let n = self.slots.len();
        let origin = self.scan_origin()?;
        let mut img = TableImage {
            runs: Vec::new(),
            rems: Vec::with_capacity(self.element_count),
            tombs: Vec::with_capacity(self.tombstone_count),
            head_tombstones: 0,
        };
        let mut prev = Prev::Empty;
        // Offset from origin where the search for the next run's bucket resumes.
        let mut scan_off = 0usize;
        let occupied_at = |off: usize| self.slots[(origin + off) & self.mask] & OCCUPIED != 0;

        for k in 0..n {
            let pos = (origin + k) & self.mask;
            let w = self.slots[pos];
            if word_is_empty(w) {
                prev = Prev::Empty;
                continue;
            }
            let cont = w & CONTINUATION != 0;
            let shifted = w & SHIFTED != 0;
            if shifted && prev == Prev::Empty {
                return Err(FilterError::corrupt(
                    pos,
                    "shifted slot after an empty slot",
                ));
            }
            if w & TOMBSTONE != 0 {
                if cont != shifted {
                    return Err(FilterError::corrupt(
                        pos,
                        "tombstone continuation and shifted bits differ",
                    ));
                }
                match prev {
                    Prev::Live | Prev::TrailingTomb => {
                        img.runs
                            .last_mut()
                            .expect("live slot belongs to a run")
                            .trailing += 1;
                        img.tombs.push(TombRecord {
                            slot: pos,
                            gap: img.runs.len(),
                        });
                        prev = Prev::TrailingTomb;
                    }
                    Prev::Empty | Prev::HeadTomb => {
                        img.head_tombstones += 1;
                        img.tombs.push(TombRecord {
                            slot: pos,
                            gap: img.runs.len(),
                        });
                        prev = Prev::HeadTomb;
                    }
                }
                continue;
            }
            if cont {
                if prev != Prev::Live {
                    return Err(FilterError::corrupt(
                        pos,
                        "continuation does not follow a live slot",
                    ));
                }
                if !shifted {
                    return Err(FilterError::corrupt(pos, "unshifted continuation"));
                }
                img.rems.push(word_remainder(w));
                img.runs.last_mut().expect("checked above").len += 1;
            } else {
                let bucket_off = (scan_off..=k).find(|&o| occupied_at(o)).ok_or_else(|| {
                    FilterError::corrupt(pos, "run start without an occupied bucket")
                })?;
                if shifted != (bucket_off != k) {
                    return Err(FilterError::corrupt(
                        pos,
                        "shifted bit disagrees with run position",
                    ));
                }
                scan_off = bucket_off + 1;
                img.runs.push(RunRecord {
                    bucket: (origin + bucket_off) & self.mask,
                    start: pos,
                    rem_offset: img.rems.len(),
                    len: 1,
                    trailing: 0,
                });
                img.rems.push(word_remainder(w));
            }
            prev = Prev::Live;
        }
        if let Some(off) = (scan_off..n).find(|&o| occupied_at(o)) {
            return Err(FilterError::corrupt(
                (origin + off) & self.mask,
                "occupied bucket has no run",
            ));
        }
        Ok(img)
    }

    /// Full structural check: metadata, counters, run order, payload keys and
    /// payload contents.
    pub fn check_invariants(&self) -> Result<(), FilterError> {
        let img = self.image()?;
        if img.live_count() != self.element_count {
            return Err(FilterError::corrupt(
                0,
                format!(
                    "element_count {} but {} live slots",
                    self.element_count,
                    img.live_count()
                ),
            ));
        }
        if img.tombs.len() != self.tombstone_count {
            return Err(FilterError::corrupt(
                0,
                format!(
                    "tombstone_count {} but {} tombstone slots",
                    self.tombstone_count,
                    img.tombs.len()
                ),
            ));
        }
        for run in &img.runs {
            if img.remainders(run).windows(2).any(|w| w[0] > w[1]) {
                return Err(FilterError::corrupt(
                    run.start,
                    "run remainders out of order",
                ));
            }
        }
        if self.payloads.len() != img.tombs.len() {
            return Err(FilterError::corrupt(
                0,
                format!(
                    "{} payloads for {} tombstones",
                    self.payloads.len(),
                    img.tombs.len()
                ),
            ));
        }
        for t in &img.tombs {
            let expect = img.gap_payload(t.gap);
            match self.payloads.get(t.slot) {
                None => return Err(FilterError::corrupt(t.slot, "tombstone without payload")),
                Some(p) if p != expect => {
                    return Err(FilterError::corrupt(
                        t.slot,
                        format!("stale payload {p:?}, expected {expect:?}"),
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

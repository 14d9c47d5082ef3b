//! A quotient filter whose deletions leave tombstones behind, and whose tombstones
//! are reused by later insertions and periodically redistributed to break up the
//! primary clusters that linear probing produces at high load.
//!
//! The table is a circular array of `2^q` slots. Every key hashes to a `(q + r)`-bit
//! [`Fingerprint`]; the high `q` bits pick the canonical slot (the bucket) and the low
//! `r` bits are stored. Runs of equal-bucket remainders are kept sorted and contiguous,
//! runs are ordered by bucket, and the usual three metadata bits (`is_occupied`,
//! `is_continuation`, `is_shifted`) plus a fourth `is_tombstone` bit let every
//! operation reconstruct which bucket a stored remainder belongs to.
//!
//! ```
//! use graveyard_core::{FilterConfig, FilterTable, PolicyKind};
//!
//! let mut filter = FilterTable::new(FilterConfig::new(10, 6, 7, PolicyKind::GraveyardHashing)).unwrap();
//! filter.insert(b"apple").unwrap();
//! assert!(filter.query(b"apple"));
//! filter.delete(b"apple").unwrap();
//! assert!(!filter.query(b"apple"));
//! ```
//!
//! Module map:
//!
//! - [`filter_core`]: configuration, hashing, slot navigation and the insert/query/delete entry points.
//! - [`graveyard_ops`]: tombstone payloads, tombstone creation and reuse.
//! - [`redistribution`]: the five redistribution policies and their trigger arithmetic.
//! - [`oracle_ref`]: exact references used by differential tests.

pub mod filter_core;
pub mod graveyard_ops;
pub mod oracle_ref;
pub mod redistribution;

mod contender;
mod error;

pub use contender::{Contender, ParseContenderError};
pub use error::FilterError;
pub use filter_core::{
    fingerprint, split, DeleteMode, FilterConfig, FilterTable, Fingerprint, MetaFlag, Slot,
    SlotContent,
};
pub use graveyard_ops::{PayloadStore, ReuseDecision, RunEvent, TombstonePayload};
pub use redistribution::{cleanup_threshold, tombstone_budget, PolicyKind, RedistState};

//! Fixtures for the micro-benchmarks: tables at a given load, built the way the sweep
//! builds them (insert-only or after churn), plus fresh key streams.

use graveyard_core::{Contender, FilterTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A table with its present keys and a generator for keys it has never seen.
pub struct Fixture {
    pub table: FilterTable,
    pub present: Vec<u64>,
    rng: ChaCha8Rng,
}

impl Fixture {
    /// Fills a `2^q`-slot table to `load` with random keys.
    pub fn filled(contender: Contender, q: u32, r: u32, load: f64, seed: u64) -> Self {
        let mut f = Self::empty(contender, q, r, seed);
        let target = (load * f.table.capacity() as f64) as usize;
        f.grow_to(target);
        f
    }

    /// Fills to `load`, then replaces `churn` times the capacity in delete/insert
    /// pairs, so tombstone policies reach a steady state.
    pub fn churned(contender: Contender, q: u32, r: u32, load: f64, churn: f64, seed: u64) -> Self {
        let mut f = Self::filled(contender, q, r, load, seed);
        let pairs = (churn * f.table.capacity() as f64) as usize;
        for _ in 0..pairs {
            let i = f.rng.random_range(0..f.present.len());
            let k = f.present.swap_remove(i);
            f.table.delete(&k.to_le_bytes()).expect("present key");
            let k = f.fresh_key();
            f.table
                .insert(&k.to_le_bytes())
                .expect("a slot was just freed");
            f.present.push(k);
        }
        f
    }

    fn empty(contender: Contender, q: u32, r: u32, seed: u64) -> Self {
        Fixture {
            table: FilterTable::new(contender.config(q, r, seed)).expect("valid benchmark config"),
            present: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn grow_to(&mut self, n: usize) {
        while self.present.len() < n {
            let k = self.fresh_key();
            self.table.insert(&k.to_le_bytes()).expect("below capacity");
            self.present.push(k);
        }
    }

    /// Keys are even; stored keys and probes drawn from `absent_keys` never coincide.
    pub fn fresh_key(&mut self) -> u64 {
        self.rng.random::<u64>() << 1
    }

    pub fn fresh_keys(&mut self, n: usize) -> Vec<u64> {
        (0..n).map(|_| self.fresh_key()).collect()
    }

    pub fn absent_keys(&mut self, n: usize) -> Vec<u64> {
        (0..n).map(|_| self.fresh_key() | 1).collect()
    }

    pub fn sample_present(&mut self, n: usize) -> Vec<u64> {
        (0..n)
            .map(|_| self.present[self.rng.random_range(0..self.present.len())])
            .collect()
    }
}

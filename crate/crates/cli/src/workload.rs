//! The sweep protocol: grow (or shrink) each filter in batches of `step` times its
//! capacity, timing every batch, and after each net change of `step` run one phase of
//! uniformly random queries and one of queries for present keys.

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::time::{Duration, Instant};

use graveyard_core::{Contender, FilterError, FilterTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadKind {
    #[serde(rename = "insert")]
    InsertOnly,
    #[serde(rename = "delete")]
    DeleteOnly,
    /// Cycles of inserting `2 * step` of capacity then deleting `step` of capacity.
    #[serde(rename = "mixed")]
    Mixed,
}

impl WorkloadKind {
    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::InsertOnly => "insert",
            WorkloadKind::DeleteOnly => "delete",
            WorkloadKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "insert" => Ok(WorkloadKind::InsertOnly),
            "delete" => Ok(WorkloadKind::DeleteOnly),
            "mixed" => Ok(WorkloadKind::Mixed),
            other => Err(format!(
                "unknown workload `{other}` (insert, delete, mixed)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Insert,
    Delete,
    RandomQuery,
    SuccessfulQuery,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [
        OpKind::Insert,
        OpKind::Delete,
        OpKind::RandomQuery,
        OpKind::SuccessfulQuery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Insert => "insert",
            OpKind::Delete => "delete",
            OpKind::RandomQuery => "random_query",
            OpKind::SuccessfulQuery => "successful_query",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| format!("unknown op kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub q: u32,
    pub r: u32,
    pub seed: u64,
    /// Load-factor change per phase, as a fraction of capacity.
    pub step: f64,
    /// Wall-clock length of each query phase.
    pub query_secs: f64,
    pub max_load: f64,
    pub contenders: Vec<Contender>,
    /// Run contenders on separate threads.
    pub parallel: bool,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, q: u32, r: u32, seed: u64) -> Self {
        WorkloadSpec {
            kind,
            q,
            r,
            seed,
            step: 0.05,
            query_secs: 2.0,
            max_load: 0.95,
            contenders: Contender::ALL.to_vec(),
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if !(self.step > 0.0 && self.step < 1.0) {
            return bad(format!("step {} not in (0, 1)", self.step));
        }
        if !(self.max_load > 0.0 && self.max_load < 1.0) {
            return bad(format!("max_load {} not in (0, 1)", self.max_load));
        }
        if !(self.query_secs >= 0.0 && self.query_secs.is_finite()) {
            return bad(format!("query_secs {} is not a duration", self.query_secs));
        }
        if self.contenders.is_empty() {
            return bad("no policies selected".into());
        }
        if self.phases() == 0 {
            return bad(format!(
                "max_load {} is below one step of {}",
                self.max_load, self.step
            ));
        }
        Contender::BaseQf
            .config(self.q, self.r, self.seed)
            .validate()?;
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        1usize << self.q
    }

    /// Number of `step`-sized load changes between empty and `max_load`.
    pub fn phases(&self) -> usize {
        ((self.max_load + 1e-9) / self.step).floor() as usize
    }

    /// Elements per `step` of load.
    pub fn batch(&self) -> usize {
        ((self.step * self.capacity() as f64).round() as usize).max(1)
    }

    fn query_duration(&self) -> Duration {
        Duration::from_secs_f64(self.query_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    #[serde(serialize_with = "ser_display", deserialize_with = "de_from_str")]
    pub policy: Contender,
    pub workload: WorkloadKind,
    pub q: u32,
    pub r: u32,
    pub seed: u64,
    /// Element load when the phase ended.
    pub load_factor: f64,
    pub op_kind: OpKind,
    pub op_count: u64,
    pub elapsed_ns: u64,
    pub throughput_ops_s: f64,
    /// Set on the last sample of a run cut short by a full table.
    #[serde(skip)]
    pub truncated: bool,
}

fn ser_display<S: serde::Serializer>(c: &Contender, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(c)
}

fn de_from_str<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Contender, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl BenchSample {
    pub fn new(
        spec: &WorkloadSpec,
        policy: Contender,
        load_factor: f64,
        op_kind: OpKind,
        op_count: u64,
        elapsed_ns: u64,
    ) -> Self {
        let throughput_ops_s = if elapsed_ns == 0 {
            0.0
        } else {
            op_count as f64 / (elapsed_ns as f64 / 1e9)
        };
        BenchSample {
            policy,
            workload: spec.kind,
            q: spec.q,
            r: spec.r,
            seed: spec.seed,
            load_factor,
            op_kind,
            op_count,
            elapsed_ns,
            throughput_ops_s,
            truncated: false,
        }
    }
}

/// Runs every selected contender, in the order listed, and concatenates their samples.
pub fn run_workload(spec: &WorkloadSpec) -> Result<Vec<BenchSample>, BenchError> {
    spec.validate()?;
    let per_policy: Vec<Result<Vec<BenchSample>, BenchError>> = if spec.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = spec
                .contenders
                .iter()
                .map(|&c| s.spawn(move || run_contender(spec, c, |_, _| {})))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("benchmark thread panicked"))
                .collect()
        })
    } else {
        spec.contenders
            .iter()
            .map(|&c| run_contender(spec, c, |_, _| {}))
            .collect()
    };
    let mut out = Vec::new();
    for samples in per_policy {
        out.extend(samples?);
    }
    Ok(out)
}

/// Key streams shared by every contender: updates, random queries, and the picks
/// for successful queries each have their own generator.
struct Streams {
    updates: ChaCha8Rng,
    random_queries: ChaCha8Rng,
    picks: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Streams {
            updates: ChaCha8Rng::seed_from_u64(seed),
            random_queries: ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)),
            picks: ChaCha8Rng::seed_from_u64(seed.wrapping_add(2)),
        }
    }
}

struct Runner<'a, F> {
    spec: &'a WorkloadSpec,
    contender: Contender,
    table: FilterTable,
    present: Vec<u64>,
    rng: Streams,
    samples: Vec<BenchSample>,
    observe: F,
}

impl<F: FnMut(&BenchSample, &FilterTable)> Runner<'_, F> {
    fn emit(&mut self, kind: OpKind, count: u64, elapsed: Duration) {
        let s = BenchSample::new(
            self.spec,
            self.contender,
            self.table.element_load(),
            kind,
            count,
            elapsed.as_nanos() as u64,
        );
        (self.observe)(&s, &self.table);
        self.samples.push(s);
    }

    /// Inserts `n` fresh keys. `Ok(false)` when the table filled up part way.
    fn insert_batch(&mut self, n: usize, timed: bool) -> Result<bool, FilterError> {
        let keys: Vec<u64> = (0..n).map(|_| self.rng.updates.random()).collect();
        let start = Instant::now();
        let mut done = 0;
        let mut full = false;
        for &k in &keys {
            match self.table.insert(&k.to_le_bytes()) {
                Ok(()) => done += 1,
                Err(FilterError::CapacityExhausted) => {
                    full = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let elapsed = start.elapsed();
        self.present.extend_from_slice(&keys[..done]);
        if timed || full {
            self.emit(OpKind::Insert, done as u64, elapsed);
        }
        if full {
            self.samples.last_mut().expect("just emitted").truncated = true;
        }
        Ok(!full)
    }

    fn delete_batch(&mut self, n: usize) -> Result<(), FilterError> {
        let n = n.min(self.present.len());
        let victims: Vec<u64> = (0..n)
            .map(|_| {
                let i = self.rng.updates.random_range(0..self.present.len());
                self.present.swap_remove(i)
            })
            .collect();
        let start = Instant::now();
        for &k in &victims {
            self.table.delete(&k.to_le_bytes())?;
        }
        let elapsed = start.elapsed();
        self.emit(OpKind::Delete, n as u64, elapsed);
        Ok(())
    }

    fn query_phases(&mut self) {
        const CHUNK: usize = 256;
        let budget = self.spec.query_duration();

        let start = Instant::now();
        let mut count = 0u64;
        let mut hits = 0u64;
        loop {
            for _ in 0..CHUNK {
                let k: u64 = self.rng.random_queries.random();
                hits += u64::from(self.table.query(&k.to_le_bytes()));
            }
            count += CHUNK as u64;
            if start.elapsed() >= budget {
                break;
            }
        }
        black_box(hits);
        self.emit(OpKind::RandomQuery, count, start.elapsed());

        let start = Instant::now();
        let mut count = 0u64;
        let mut hits = 0u64;
        if !self.present.is_empty() {
            loop {
                for _ in 0..CHUNK {
                    let i = self.rng.picks.random_range(0..self.present.len());
                    hits += u64::from(self.table.query(&self.present[i].to_le_bytes()));
                }
                count += CHUNK as u64;
                if start.elapsed() >= budget {
                    break;
                }
            }
        }
        assert_eq!(
            hits, count,
            "{}: present key reported absent",
            self.contender
        );
        self.emit(OpKind::SuccessfulQuery, count, start.elapsed());
    }
}

/// Runs one contender through the workload. `observe` sees every sample together
/// with the table as it stood when the sample was taken.
pub fn run_contender(
    spec: &WorkloadSpec,
    contender: Contender,
    observe: impl FnMut(&BenchSample, &FilterTable),
) -> Result<Vec<BenchSample>, BenchError> {
    spec.validate()?;
    let mut run = Runner {
        spec,
        contender,
        table: FilterTable::new(contender.config(spec.q, spec.r, spec.seed))?,
        present: Vec::new(),
        rng: Streams::new(spec.seed),
        samples: Vec::new(),
        observe,
    };
    let phases = spec.phases();
    let batch = spec.batch();
    match spec.kind {
        WorkloadKind::InsertOnly => {
            for _ in 0..phases {
                if !run.insert_batch(batch, true)? {
                    break;
                }
                run.query_phases();
            }
        }
        WorkloadKind::DeleteOnly => {
            // Untimed prefill with the policy already active.
            if run.insert_batch(phases * batch, false)? {
                for _ in 0..phases {
                    run.delete_batch(batch)?;
                    run.query_phases();
                }
            }
        }
        WorkloadKind::Mixed => {
            let mut level = 0;
            while level < phases {
                let grow = (phases - level).min(2);
                if !run.insert_batch(grow * batch, true)? {
                    break;
                }
                level += grow;
                if level < phases {
                    run.delete_batch(batch)?;
                    level -= 1;
                }
                run.query_phases();
            }
        }
    }
    Ok(run.samples)
}

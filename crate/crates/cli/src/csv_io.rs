use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use crate::workload::BenchSample;
use crate::BenchError;

pub const CSV_HEADER: [&str; 10] = [
    "policy",
    "workload",
    "q",
    "r",
    "seed",
    "load_factor",
    "op_kind",
    "op_count",
    "elapsed_ns",
    "throughput_ops_s",
];

/// Header line, then one row per sample in the given order.
pub fn write_csv<W: Write>(samples: &[BenchSample], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(samples: &[BenchSample], path: &Path) -> Result<(), BenchError> {
    let file = File::create(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(samples, io::BufWriter::new(file)).map_err(|source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a sample CSV. Columns may come in any order; extra columns are ignored.
pub fn read_csv(path: &Path) -> Result<Vec<BenchSample>, BenchError> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut idx = [0usize; CSV_HEADER.len()];
    for (slot, name) in idx.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| BenchError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })?;
    }

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| match source.position() {
            Some(p) => BenchError::Malformed {
                path: path.to_path_buf(),
                line: p.line(),
                reason: source.to_string(),
            },
            None => csv_err(source),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let malformed = |reason: String| BenchError::Malformed {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let raw = |i: usize| rec.get(idx[i]).unwrap_or("");
        macro_rules! col {
            ($i:expr) => {
                parse_field(raw($i), CSV_HEADER[$i]).map_err(malformed)?
            };
        }
        out.push(BenchSample {
            policy: col!(0),
            workload: col!(1),
            q: col!(2),
            r: col!(3),
            seed: col!(4),
            load_factor: col!(5),
            op_kind: col!(6),
            op_count: col!(7),
            elapsed_ns: col!(8),
            throughput_ops_s: col!(9),
            truncated: false,
        });
    }
    Ok(out)
}

fn parse_field<T: FromStr>(raw: &str, column: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| format!("bad `{column}` value `{raw}`: {e}"))
}

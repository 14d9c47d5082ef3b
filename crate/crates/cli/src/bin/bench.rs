use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use graveyard_cli::{emit_csv, emit_plot, insert_shape, run_workload, WorkloadKind, WorkloadSpec};
use graveyard_core::Contender;

/// Throughput sweep over element load for the quotient filter and its tombstone
/// policies. Each phase changes the load by `--step` of capacity, timed as one
/// batch, then runs one random-query and one successful-query phase.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Args {
    /// insert: grow to --max-load. delete: prefill to --max-load (untimed), then
    /// shrink to empty. mixed: repeat "insert 2 x step of capacity, delete 1 x step
    /// of capacity" (10% / 5% at the default step) until --max-load is reached.
    #[arg(long)]
    workload: WorkloadKind,
    /// Table size is 2^q slots.
    #[arg(long, default_value_t = 16)]
    q: u32,
    /// Remainder bits per slot.
    #[arg(long, default_value_t = 7)]
    r: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Seconds per query phase.
    #[arg(long = "query-secs", default_value_t = 2.0)]
    query_secs: f64,
    #[arg(long = "max-load", default_value_t = 0.95)]
    max_load: f64,
    /// Comma-separated: base_qf, no_redistribution, amortized_clean, between_runs,
    /// clean_up, graveyard_hashing. Defaults to all of them.
    #[arg(long, value_delimiter = ',')]
    policies: Vec<Contender>,
    #[arg(long)]
    csv: PathBuf,
    /// Also write an SVG chart built from the CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Benchmark the policies on parallel threads.
    #[arg(long)]
    parallel: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = WorkloadSpec {
        kind: args.workload,
        q: args.q,
        r: args.r,
        seed: args.seed,
        step: args.step,
        query_secs: args.query_secs,
        max_load: args.max_load,
        contenders: if args.policies.is_empty() {
            Contender::ALL.to_vec()
        } else {
            args.policies
        },
        parallel: args.parallel,
    };
    match run(&spec, &args.csv, args.plot.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(
    spec: &WorkloadSpec,
    csv: &std::path::Path,
    plot: Option<&std::path::Path>,
) -> Result<(), graveyard_cli::BenchError> {
    let samples = run_workload(spec)?;
    for s in samples.iter().filter(|s| s.truncated) {
        eprintln!(
            "bench: {} stopped early at load {:.3}: table full",
            s.policy, s.load_factor
        );
    }
    emit_csv(&samples, csv)?;
    println!(
        "{:<20} {:>6} {:<17} {:>14}",
        "policy", "load", "op", "ops/s"
    );
    for s in &samples {
        println!(
            "{:<20} {:>6.3} {:<17} {:>14.0}",
            s.policy.name(),
            s.load_factor,
            s.op_kind.name(),
            s.throughput_ops_s
        );
    }
    let shape = insert_shape(&samples, 0.75);
    if !shape.is_empty() {
        let held = shape.iter().filter(|r| r.holds()).count();
        println!(
            "insert throughput at load >= 0.75: a tombstone policy matches or beats base_qf at {held} of {} loads",
            shape.len()
        );
    }
    if let Some(p) = plot {
        emit_plot(csv, p)?;
    }
    println!("wrote {}", csv.display());
    Ok(())
}

//! Experiment drivers: compile rates of synthesized predicates, verdict
//! tallies against ground truth, and exploit mitigation on a benchmark of
//! vulnerable contracts. Each driver produces a report that serializes to
//! line-delimited records plus a plain-text summary.

mod report;
mod rq1;
mod rq2;
mod rq3;

use thiserror::Error;

pub use report::{emit_report, from_jsonl, to_jsonl, Report, ReportError, Table};
pub use rq1::{ground_truth_replay, rq1_samples, run_rq1, sample_key, Rq1Failure, Rq1Options, Rq1Record, Rq1Stats};
pub use rq2::{load_rq2_manifest, run_rq2, Rq2Pair, Rq2Record, Rq2Tally};
pub use rq3::{
    entry_sample_id, load_bench, run_rq3, BenchmarkEntry, EntryOutcome, MitigationReport, Rq3Options, VariantTotals,
    DEFAULT_ENV_ALLOWLIST,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

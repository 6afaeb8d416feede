//! Campaign runs: score reports, aggregation and significance.

mod aggregate;
mod evaluate;
mod report;
mod significance;

pub use aggregate::{aggregate, aggregate_with, finite_median, AggregateRow, AggregateTable, Aggregation};
pub use evaluate::{evaluate_estimates, evaluate_track, run_parallel, EvalConfig};
pub use report::{parse_report, read_report, report_json, write_report, TrackScore, SCHEMA_VERSION};
pub use significance::{pairwise_significance, SignificanceMatrix};

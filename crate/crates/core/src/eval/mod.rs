//! Average precision and the label-fraction evaluation protocol.

mod ap;
mod method;
mod sweep;

pub use ap::{average_precision, mean_ap, RankedPredictions};
pub use method::{MethodTag, Solver};
pub use sweep::{
    class_aps, format_summary, holdout_split, run_sweep, summarize, tune, write_reports_csv,
    ClassAp, EvalReport, SummaryRow, SweepConfig, TuneCandidate, TuneConfig, TuneResult,
};

//! Offline evaluation: classification metrics, per-word traces and dial
//! sweeps.

mod metrics;
mod sweep;
mod trace;

pub use metrics::{evaluate, evaluate_predictions, ClassMetrics, EvalReport};
pub use sweep::{dial_sweep, spearman, SweepRow, SweepTable};
pub use trace::{trace, trace_csv, trace_jsonl, trace_svg, TraceRecord};

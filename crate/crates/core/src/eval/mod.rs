//! Metrics, windowed inference and report generation.

mod infer;
mod metrics;
mod report;

pub use infer::{infer_windowed, infer_windowed_detailed, window_bounds, window_input, Decode, WindowedInference};
pub use metrics::{acc_link, acc_nor, v_one_to_many, RADAR_MIN_EXCLUSIVE};
pub use report::{
    classical_plan, evaluate, evaluate_sequences, score_links, score_model, Aggregate, EvalPlan, EvalReport,
    InferSettings, Method, RecordScore, ReportRow, REPORT_COLUMNS,
};

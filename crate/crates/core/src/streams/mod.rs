//! Drift stream generation, prequential evaluation and the metric suite.

mod generator;
mod metrics;
mod prequential;

pub use generator::{
    generate_stream, read_stream, write_stream, Centroid, Concept, Drift, DriftKind, ImbalanceStep, StreamRecord,
    StreamSpec, DEFAULT_SCALE, FULL_IMBALANCE_SWITCH, FULL_STREAM_LENGTH,
};
pub use metrics::{classification_metrics, tpcr, tpsr, ClassificationMetrics, MetricSuite, TaskRecord};
pub use prequential::{drift_eval_curve, format_curve, ConstantModel, CurveRow, NearestCentroid, StreamModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StreamError {
    #[error("invalid stream spec: {0}")]
    InvalidSpec(String),
    #[error("drift windows {first} and {second} overlap")]
    OverlappingDrifts { first: usize, second: usize },
    #[error("no records")]
    Empty,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

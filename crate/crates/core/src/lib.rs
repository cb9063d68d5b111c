//! Gaze-driven intention inference for an assisted block-copy pick-and-place task.
//!
//! The pipeline turns a stream of 2D gaze samples into per-object visual
//! attention profiles ([`attention`]), builds candidate feature vectors from
//! them ([`intent`]), scores every candidate with a kernel SVM trained by SMO
//! ([`svm`]) and resolves the candidates one-vs-all into a single predicted
//! target. [`control`] turns those predictions into assistive effector motion,
//! [`synth`] generates labelled gaze corpora and [`eval`] holds the
//! anticipation-time analysis.

pub mod attention;
pub mod control;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod intent;
pub mod svm;
pub mod synth;
pub mod world;

pub use attention::{AttentionConfig, GazeSample, GazeTrace, VisualAttentionProfile};
pub use exec::Execution;
pub use geometry::Point2;
pub use intent::{ActionKind, IntentModels, Prediction, PredictorConfig};

pub use world::{BoardLayout, BoardState, ObjectId};

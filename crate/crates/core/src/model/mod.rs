//! Domain types for instances, plans and constraint deltas, together with
//! validation, delta application and the canonical JSON documents.

mod delta;
mod document;
mod instance;
mod plan;
mod validate;

pub use delta::{apply_deltas, Change, ConstraintDelta, DeltaDocument, DeltaKind, DependencySign};
pub use document::{load_instance, save_instance};
pub use instance::{
    Capability, Minutes, ObjectiveWeights, ProblemInstance, RobotType, RobotUnit, Task, TimeWindow,
};
pub use plan::{Plan, PlanDocument, PlanEntry, SolveStats, SolveStatus};
pub use validate::{validate_instance, ValidationIssue, ValidationReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown robot type `{0}`")]
    UnknownRobotType(String),
    #[error("`{task}` is not a predecessor of `{successor}`")]
    RemovingAbsentDependency { task: String, successor: String },
    #[error("invalid delta: {0}")]
    InvalidDelta(String),
}

impl ModelError {
    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        ModelError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

//! Progress-function language.
//!
//! A program is a list of subtasks, one per line:
//!
//! ```text
//! # comments run to end of line
//! subtask decreasing: mean(dist(left_hand_pos, cup_left_handle_pos), dist(right_hand_pos, cup_right_handle_pos))
//! subtask decreasing: rot_dist(object_rot, goal_rot)
//! ```
//!
//! Each subtask expression must type-check to a scalar against the
//! environment's [`FeatureSchema`]. Evaluation yields a [`ProgressReport`]
//! holding one value and one direction flag per subtask.

mod ast;
pub mod builtins;
mod eval;
mod lexer;
mod parser;
mod schema;

pub use ast::{BinOp, Builtin, Expr, ProgressProgram, Subtask, MAX_SUBTASKS};
pub use eval::EvalError;
pub use parser::parse;
pub use schema::{EnvFeatures, FeatureSchema, SchemaError, SemType, Value};

use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("{loc}: lexical error: {message}")]
    Lex { loc: Loc, message: String },
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: Loc, message: String },
    #[error("{loc}: unknown feature `{name}`")]
    UnknownFeature { loc: Loc, name: String },
    #[error("{loc}: unknown function `{name}`")]
    UnknownFunction { loc: Loc, name: String },
    #[error("{loc}: `{function}` expects {expected} argument(s), found {found}")]
    Arity { loc: Loc, function: String, expected: String, found: usize },
    #[error("{loc}: type mismatch in {context}: expected {expected}, found {found}")]
    Type { loc: Loc, context: String, expected: SemType, found: SemType },
    #[error("{loc}: a program needs between 1 and {max} subtasks, found {found}", max = MAX_SUBTASKS)]
    SubtaskCount { loc: Loc, found: usize },
}

impl DslError {
    pub fn loc(&self) -> Loc {
        match self {
            DslError::Lex { loc, .. }
            | DslError::Syntax { loc, .. }
            | DslError::UnknownFeature { loc, .. }
            | DslError::UnknownFunction { loc, .. }
            | DslError::Arity { loc, .. }
            | DslError::Type { loc, .. }
            | DslError::SubtaskCount { loc, .. } => *loc,
        }
    }
}

/// Output of a progress function: `values[i]` is the progress scalar of
/// subtask `i` and `increasing[i]` tells whether larger values mean progress.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProgressReport {
    pub values: Vec<f64>,
    pub increasing: Vec<bool>,
}

impl ProgressReport {
    pub fn new(values: Vec<f64>, increasing: Vec<bool>) -> Self {
        debug_assert_eq!(values.len(), increasing.len());
        Self { values, increasing }
    }

    /// All-decreasing report, the common shape for distance-based programs.
    pub fn decreasing(values: Vec<f64>) -> Self {
        let increasing = vec![false; values.len()];
        Self { values, increasing }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

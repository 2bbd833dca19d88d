//! Forward-mode automatic differentiation over the global dof vector.
//!
//! Expressions are built as graphs of [`Operator`] nodes and evaluated against an
//! [`EquationSystem`], which owns the dof layout and the current, previous-timestep
//! and previous-iterate states. Evaluation yields [`Operand`] values; vector values
//! that depend on unknowns are [`AdValue`]s carrying a sparse Jacobian.
//!
//! Nodes are immutable and children are fixed at construction, so every graph is
//! acyclic.

mod operand;
mod operator;
mod system;

use thiserror::Error;

pub use operand::{combine, result_kind, AdValue, BinaryOp, Operand, OperandKind, COMBINATION_TABLE};
pub use operator::{apply_function, ElementFunction, Node, NodeKind, Operator, ScalarFn, TimeLevel};
pub use system::{Equation, EquationSystem, GridRef, LinearSystem, VariableId, VariableInfo};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported combination: {left} {op} {right}")]
    UnsupportedCombination { op: BinaryOp, left: OperandKind, right: OperandKind },
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("unknown parameter: {0}")]
    UnknownParameter(String),
    #[error("unknown grid: {0}")]
    UnknownGrid(String),
    #[error("variable already registered: {0}")]
    DuplicateVariable(String),
    #[error("{function}() undefined at {value}")]
    DomainError { function: String, value: f64 },
}

//! Error types shared across the engine.

use thiserror::Error;

/// Errors raised by the expression kernel.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("division by an expression identical to zero")]
    DivisionByZero,
    #[error("implicit relation for `{0}` is degenerate: derivative by the defined symbol vanishes")]
    DegenerateImplicitRelation(String),
    #[error("probabilistic zero test exhausted its resampling budget")]
    ProbeExhausted,
    #[error("unknown function symbol `{0}`")]
    UnknownSymbol(String),
}

/// Errors raised while building or using a prolonged chart.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum JetError {
    #[error("system is not in orthonomic solved form: {0}")]
    NotOrthonomic(String),
    #[error("substitution cycle while prolonging the system: {0}")]
    InconsistentSystem(String),
    #[error("jet order {requested} exceeds the chart cap {cap}; re-prolong at a higher truncation")]
    TruncationOverflow { requested: usize, cap: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Errors raised by module-level linear algebra.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("kernel chain did not stabilize within {0} iterations")]
    NoStabilization(usize),
    #[error("modules live on different charts")]
    ChartMismatch,
}

impl From<ExprError> for ModError {
    fn from(e: ExprError) -> Self {
        ModError::Jet(JetError::Expr(e))
    }
}

/// Errors raised by the controllability layer.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CtrlError {
    #[error(transparent)]
    Mod(#[from] ModError),
    #[error("filtration violates the growth conditions: {0}")]
    NotGoodFiltration(String),
    #[error("no polynomial of admissible degree fits the dimension tail: {0:?}")]
    NoPolynomialTail(Vec<usize>),
    #[error("kernel chain for the default fields disagrees with a randomized combination; the chosen fields may be too special")]
    NotTooSpecialSuspect,
    #[error("module is not flat; no reduced coordinate description is emitted")]
    NotFlat,
    #[error("input does not match a recognized obstruction shape: {0}")]
    ShapeMismatch(String),
}

impl From<JetError> for CtrlError {
    fn from(e: JetError) -> Self {
        CtrlError::Mod(ModError::Jet(e))
    }
}

impl From<ExprError> for CtrlError {
    fn from(e: ExprError) -> Self {
        CtrlError::Mod(ModError::from(e))
    }
}

/// Parse errors carry a source position for diagnostics.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared symbol `{name}` at {line}:{col}")]
    UndeclaredSymbol { name: String, line: usize, col: usize },
    #[error("system is not orthonomic: {0}")]
    NotOrthonomic(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

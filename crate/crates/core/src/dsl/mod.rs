//! Mapper language: lexer, parser, static validation and evaluation.
//!
//! Machine sizes are never part of a source file; evaluation always takes a
//! [`MachineShape`](crate::MachineShape) from the caller.

pub mod ast;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod validate;

pub use ast::{
    Assign, BinOp, Constraint, Expr, FuncDef, FuncStmt, Item, MapperProgram, Param, Pos,
    Primitive, Statement, StatementKind,
};
pub use eval::{compile_mapper, eval_mapping, BindingTable, EvalError, MappingFunction, Value};
pub use parser::parse;
pub use validate::{has_errors, validate, Diagnostic, DiagnosticKind, Severity};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax { line: usize, col: usize, expected: String, found: String },
    #[error("{line}:{col}: function `{name}` is defined more than once")]
    DuplicateFunction { name: String, line: usize, col: usize },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. } | ParseError::DuplicateFunction { line, col, .. } => {
                (*line, *col)
            }
        }
    }
}

/// Words that start a statement and cannot name a variable or function.
pub const KEYWORDS: &[&str] =
    &["IndexTaskMap", "Task", "Region", "Layout", "GarbageCollect", "Backpressure", "def", "return"];

pub const PROC_KINDS: &[&str] = &["CPU", "GPU", "OMP"];
pub const MEMORIES: &[&str] = &["SYSMEM", "FBMEM", "ZCMEM"];
pub const CONSTRAINTS: &[&str] = &["SOA", "AOS", "C_order", "F_order"];

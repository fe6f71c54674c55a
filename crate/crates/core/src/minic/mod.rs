//! MiniC: the small C-like target language.
//!
//! Integers, booleans and immutable strings; functions, globals, `if`,
//! `while`, `break`, `return` and statement labels. The grammar is described
//! in `docs/minic.md`.

mod ast;
mod check;
mod lexer;
mod parser;
mod print;

use std::fmt;

use thiserror::Error;

pub use ast::{builtin_arity, BinOp, Expr, ExprKind, FunctionDef, Global, MiniProgram, Stmt, StmtKind, UnOp, BUILTINS};
pub use check::check_probe;

/// Byte range of a node in its source, with the position of its first byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ErrorKind,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub(crate) fn syntax(line: u32, column: u32, message: impl Into<String>) -> ParseError {
        ParseError { kind: ErrorKind::Syntax, line, column, message: message.into() }
    }

    pub(crate) fn semantic(span: Span, message: impl Into<String>) -> ParseError {
        ParseError { kind: ErrorKind::Semantic, line: span.line, column: span.column, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Syntax => "syntax error",
            ErrorKind::Semantic => "error",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.column, self.message)
    }
}

/// Parses and checks a whole program. `name` becomes the program name used
/// for the root event.
pub fn parse_program(name: &str, source: &str) -> Result<MiniProgram, ParseError> {
    let program = parser::parse(name, source)?;
    check::check_program(&program)?;
    Ok(program)
}

/// Parses a standalone expression such as a probe.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    parser::parse_expression(source)
}

/// Canonical rendering of an expression; identical for expressions that
/// differ only in layout or redundant parentheses.
pub fn expr_to_string(expr: &Expr) -> String {
    print::expr(expr)
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

//! The rule language: assertions, queries and message clauses evaluated over
//! an event trace. The grammar is described in `docs/forman.md`.

mod ast;
mod lexer;
mod parser;
mod print;

use thiserror::Error;

pub use ast::{
    Aggregate, BinOp, Expr, PathExpr, PathLeaf, Pattern, Quantified, Quantifier, Rule, RuleSet, Scope, Selection,
    ValueAt,
};
pub use print::quote;

/// A lexical, syntactic or binding error in a rule file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct FormanError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

/// Parses a rule file.
pub fn parse_rules(source: &str) -> Result<RuleSet, FormanError> {
    parser::parse(source)
}

/// Parses a standalone expression in which `metavars` are already bound.
pub fn parse_expr(source: &str, metavars: &[&str]) -> Result<Expr, FormanError> {
    parser::parse_expression(source, metavars)
}

/// Canonical text of a single rule, as it appears in a rule set listing.
pub fn rule_to_string(rule: &Rule) -> String {
    print::rule(rule)
}

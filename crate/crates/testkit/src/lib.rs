//! Generators and independent reference implementations used by the evtrace
//! test suites.
//!
//! * [`program_gen`] produces seeded random MiniC programs.
//! * [`reference`] is a second MiniC interpreter that counts grammar events.
//! * [`agreement`] runs seeded comparisons of the evaluator with the oracles.
//! * [`brute`] evaluates rule expressions by exhaustive enumeration.
//! * [`paths`] decides path-expression membership by splitting sequences.
//! * [`traces`] produces random traces and rule expressions.
//! * [`corpus`] loads the bundled example programs, inputs and rules.

pub mod agreement;
pub mod brute;
pub mod corpus;
pub mod paths;
pub mod program_gen;
pub mod reference;
pub mod traces;

use evtrace::minic::{Expr, ExprKind, MiniProgram, Stmt, StmtKind};

/// Number of statement and expression nodes in the program, counting every
/// function body. Declarations of globals are not counted.
pub fn count_nodes(p: &MiniProgram) -> usize {
    p.functions.iter().map(|f| f.body.iter().map(stmt_nodes).sum::<usize>()).sum()
}

fn stmt_nodes(s: &Stmt) -> usize {
    1 + match &s.kind {
        StmtKind::Expr(e) => expr_nodes(e),
        StmtKind::VarDecl(_, init) => init.as_ref().map_or(0, expr_nodes),
        StmtKind::If(c, t, e) => expr_nodes(c) + stmt_nodes(t) + e.as_deref().map_or(0, stmt_nodes),
        StmtKind::While(c, b) => expr_nodes(c) + stmt_nodes(b),
        StmtKind::Return(e) => e.as_ref().map_or(0, expr_nodes),
        StmtKind::Break => 0,
        StmtKind::Labeled { body, .. } => stmt_nodes(body),
        StmtKind::Block(items) => items.iter().map(stmt_nodes).sum(),
    }
}

fn expr_nodes(e: &Expr) -> usize {
    1 + match &e.kind {
        ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Var(_) => 0,
        ExprKind::Assign(_, v) | ExprKind::Unary(_, v) => expr_nodes(v),
        ExprKind::Binary(_, a, b) | ExprKind::Comma(a, b) => expr_nodes(a) + expr_nodes(b),
        ExprKind::Ternary(c, a, b) => expr_nodes(c) + expr_nodes(a) + expr_nodes(b),
        ExprKind::Call(_, args) => args.iter().map(expr_nodes).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_count() {
        let p = evtrace::parse_program("t", "var x; func main() { x = 1 + 2; if (x) { } }").unwrap();
        // statement, assignment, sum, two literals; if, variable, block
        assert_eq!(count_nodes(&p), 8);
    }
}

//! Canonical pretty-printer. `parse(print(p))` prints back to the same text.

use std::fmt::{self, Write};

use super::ast::*;
use crate::value::Value;

const COMMA: u8 = 1;
const ASSIGN: u8 = 2;
const TERNARY: u8 = 3;
const UNARY: u8 = 10;

fn binop_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 4,
        BinOp::And => 5,
        BinOp::Eq | BinOp::Ne => 6,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 7,
        BinOp::Add | BinOp::Sub => 8,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 9,
    }
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Comma(..) => COMMA,
        ExprKind::Assign(..) => ASSIGN,
        ExprKind::Ternary(..) => TERNARY,
        ExprKind::Binary(op, ..) => binop_prec(*op),
        ExprKind::Unary(..) => UNARY,
        _ => 11,
    }
}

pub(super) fn expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\u{c}' => out.push_str("\\f"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let p = prec(e);
    let paren = p < min_prec;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Int(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Str(s) => out.push_str(&quote(s)),
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Assign(name, value) => {
            out.push_str(name);
            out.push_str(" = ");
            write_expr(out, value, ASSIGN);
        }
        ExprKind::Binary(op, a, b) => {
            write_expr(out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, p + 1);
        }
        ExprKind::Unary(op, a) => {
            out.push_str(op.symbol());
            write_expr(out, a, UNARY);
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, ASSIGN);
            }
            out.push(')');
        }
        ExprKind::Comma(a, b) => {
            write_expr(out, a, COMMA);
            out.push_str(", ");
            write_expr(out, b, COMMA + 1);
        }
        ExprKind::Ternary(c, a, b) => {
            write_expr(out, c, TERNARY + 1);
            out.push_str(" ? ");
            write_expr(out, a, ASSIGN);
            out.push_str(" : ");
            write_expr(out, b, ASSIGN);
        }
    }
    if paren {
        out.push(')');
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    write_stmt_inline(out, s, depth);
}

// writes a statement whose indentation has already been emitted
fn write_stmt_inline(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Expr(e) => {
            out.push_str(&expr(e));
            out.push_str(";\n");
        }
        StmtKind::VarDecl(name, init) => {
            out.push_str("var ");
            out.push_str(name);
            if let Some(e) = init {
                out.push_str(" = ");
                out.push_str(&expr(e));
            }
            out.push_str(";\n");
        }
        StmtKind::If(cond, then, other) => {
            let _ = write!(out, "if ({})", expr(cond));
            write_body(out, then, depth);
            if let Some(o) = other {
                indent(out, depth);
                out.push_str("else");
                write_body(out, o, depth);
            }
        }
        StmtKind::While(cond, body) => {
            let _ = write!(out, "while ({})", expr(cond));
            write_body(out, body, depth);
        }
        StmtKind::Return(value) => match value {
            Some(e) => {
                let _ = writeln!(out, "return {};", expr(e));
            }
            None => out.push_str("return;\n"),
        },
        StmtKind::Break => out.push_str("break;\n"),
        StmtKind::Labeled { label, body, .. } => {
            let _ = write!(out, "{label}: ");
            write_stmt_inline(out, body, depth);
        }
        StmtKind::Block(stmts) => write_block(out, stmts, depth),
    }
}

// branch bodies always print as blocks on the same line as their header,
// except that non-block bodies are wrapped on their own line
fn write_body(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Block(stmts) => {
            out.push(' ');
            write_block(out, stmts, depth)
        }
        _ => {
            out.push('\n');
            write_stmt(out, s, depth + 1);
        }
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in stmts {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push_str("}\n");
}

fn literal(v: &Value) -> String {
    match v {
        Value::Str(s) => quote(s),
        other => other.to_string(),
    }
}

impl fmt::Display for MiniProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for g in &self.globals {
            match &g.init {
                Some(v) => {
                    let _ = writeln!(out, "var {} = {};", g.name, literal(v));
                }
                None => {
                    let _ = writeln!(out, "var {};", g.name);
                }
            }
        }
        for func in &self.functions {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = write!(out, "func {}({}) ", func.name, func.params.join(", "));
            write_block(&mut out, &func.body, 0);
        }
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use crate::minic::{expr_to_string, parse_expr, parse_program};

    #[test]
    fn redundant_parentheses_vanish() {
        let e = parse_expr("((a + (b * c))) - (d - e)").unwrap();
        assert_eq!(expr_to_string(&e), "a + b * c - (d - e)");
        let e = parse_expr("strlen(source_buffer) >10").unwrap();
        assert_eq!(expr_to_string(&e), "strlen(source_buffer) > 10");
        let e = parse_expr("(a, b) ? (x = 1) : - -3").unwrap();
        assert_eq!(expr_to_string(&e), "(a, b) ? x = 1 : --3");
    }

    #[test]
    fn program_round_trip() {
        let src = r#"
            var g = -3; var s = "a\tb";
            func f(a, b) { if (a) return b; else { while (a < 3) a = a + 1; } }
            func main() { L: f(1, 2); var x = g ? 1 : 2; }
        "#;
        let p = parse_program("t", src).unwrap();
        let once = p.to_string();
        let twice = parse_program("t", &once).unwrap().to_string();
        assert_eq!(once, twice);
    }
}

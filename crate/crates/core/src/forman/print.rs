//! Canonical rendering of rule sets; parsing the output yields the same AST.

use std::fmt::{self, Write};

use super::ast::*;

const QUANT: u8 = 0;
const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const CMP: u8 = 4;
const ADD: u8 = 5;
const MUL: u8 = 6;
const NEG: u8 = 7;
const SATISFIES: u8 = 8;
const PRIMARY: u8 = 9;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Quant(_) => QUANT,
        Expr::Binary(op, ..) => match op {
            BinOp::Or => OR,
            BinOp::And => AND,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => CMP,
            BinOp::Add | BinOp::Sub => ADD,
            BinOp::Mul | BinOp::Div | BinOp::Rem => MUL,
        },
        Expr::Not(_) => NOT,
        Expr::Neg(_) => NEG,
        Expr::Satisfies(..) => SATISFIES,
        _ => PRIMARY,
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

pub fn expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, QUANT);
    out
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let p = prec(e);
    let paren = p < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Bool(true) => out.push_str("TRUE"),
        Expr::Bool(false) => out.push_str("FALSE"),
        Expr::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Str(s) => out.push_str(&quote(s)),
        Expr::Var(v) => out.push_str(v),
        Expr::Value(v) => {
            let _ = write!(out, "VALUE({})(AT {} {})", v.cast.keyword(), v.metavar, v.text);
        }
        Expr::SourceText(m) => {
            let _ = write!(out, "SOURCE_TEXT({m})");
        }
        Expr::Card(agg) => {
            out.push_str("CARD ");
            write_aggregate(out, agg);
        }
        Expr::List(agg) => write_aggregate(out, agg),
        Expr::Quant(q) => {
            out.push_str(q.quantifier.keyword());
            out.push(' ');
            write_selection(out, &q.selection);
            if let Some(b) = &q.body {
                out.push(' ');
                write_expr(out, b, OR);
            }
        }
        Expr::Satisfies(list, path) => {
            write_expr(out, list, PRIMARY);
            out.push_str(" SATISFIES ");
            write_path(out, path, 0);
        }
        Expr::Not(inner) => {
            out.push_str("NOT ");
            write_expr(out, inner, NOT);
        }
        Expr::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, NEG);
        }
        Expr::Binary(op, a, b) => {
            let (lmin, rmin) = if p == CMP { (ADD, ADD) } else { (p, p + 1) };
            write_expr(out, a, lmin);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, rmin);
        }
    }
    if paren {
        out.push(')');
    }
}

fn write_pattern(out: &mut String, p: &Pattern) {
    out.push_str(p.kind.keyword());
    if let Some(is) = &p.is {
        out.push_str(" IS ");
        out.push_str(&quote(is));
    }
    if let Some(c) = &p.context {
        out.push_str(" & (");
        write_expr(out, c, QUANT);
        out.push(')');
    }
}

fn write_selection(out: &mut String, s: &Selection) {
    if s.all {
        out.push_str("ALL ");
    }
    if let Some(m) = &s.metavar {
        let _ = write!(out, "{m}: ");
    }
    write_pattern(out, &s.pattern);
    out.push_str(" FROM ");
    match &s.from {
        Scope::Program => out.push_str("execute_program"),
        Scope::Metavar(m) => out.push_str(m),
    }
}

fn write_aggregate(out: &mut String, agg: &Aggregate) {
    out.push_str("[ ");
    write_selection(out, &agg.selection);
    if let Some(a) = &agg.apply {
        out.push_str(" APPLY ");
        write_expr(out, a, QUANT);
    }
    out.push_str(" ]");
}

// path precedence: 0 alternation, 1 sequence, 2 postfix operand
fn write_path(out: &mut String, p: &PathExpr, min: u8) {
    let level = match p {
        PathExpr::Alt(_) => 0,
        PathExpr::Seq(_) => 1,
        _ => 2,
    };
    let paren = level < min;
    if paren {
        out.push('(');
    }
    match p {
        PathExpr::Leaf(leaf) => {
            if let Some(m) = &leaf.metavar {
                let _ = write!(out, "{m}: ");
            }
            write_pattern(out, &leaf.pattern);
        }
        PathExpr::Alt(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                write_path(out, item, 1);
            }
        }
        PathExpr::Seq(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_path(out, item, 2);
            }
        }
        PathExpr::Star(inner) | PathExpr::Plus(inner) | PathExpr::Opt(inner) => {
            // a leaf followed by an operator is grouped so the operator is
            // never read as part of a context expression
            let needs_group = !matches!(**inner, PathExpr::Star(_) | PathExpr::Plus(_) | PathExpr::Opt(_));
            if needs_group {
                out.push('(');
                write_path(out, inner, 0);
                out.push(')');
            } else {
                write_path(out, inner, 2);
            }
            out.push(match p {
                PathExpr::Star(_) => '*',
                PathExpr::Plus(_) => '+',
                _ => '?',
            });
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn rule(r: &Rule) -> String {
    let mut out = expr(&r.body);
    for clause in &r.say {
        out.push(' ');
        write_say(&mut out, clause);
    }
    if !r.onfail.is_empty() {
        out.push_str(" ONFAIL");
        for clause in &r.onfail {
            out.push(' ');
            write_say(&mut out, clause);
        }
    }
    out.push(';');
    out
}

fn write_say(out: &mut String, items: &[Expr]) {
    out.push_str("SAY(");
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write_expr(out, item, PRIMARY);
    }
    out.push(')');
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut i = 0;
        while i < self.rules.len() {
            match &self.rules[i].scope {
                None => {
                    writeln!(f, "{}", rule(&self.rules[i]))?;
                    i += 1;
                }
                Some(scope) => {
                    writeln!(f, "WITHIN {scope}")?;
                    while i < self.rules.len() && self.rules[i].scope.as_ref() == Some(scope) {
                        writeln!(f, "    {}", rule(&self.rules[i]))?;
                        i += 1;
                    }
                    writeln!(f, "END")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&expr(self))
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_path(&mut out, self, 0);
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use crate::forman::parse_rules;

    fn reprint(src: &str) -> String {
        parse_rules(src).unwrap().to_string()
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(
            reprint("[X: func_call & SOURCE_TEXT(X)=='a' OR SOURCE_TEXT(X)=='b' FROM execute_program] SATISFIES(func_call IS a func_call IS 'b')+ SAY('ok');"),
            "[ X: func_call & (SOURCE_TEXT(X) == 'a' OR SOURCE_TEXT(X) == 'b') FROM execute_program ] SATISFIES (func_call IS 'a' func_call IS 'b')+ SAY('ok');\n"
        );
        assert_eq!(
            reprint("WITHIN f TRUE SAY('a' 1 - 2 (-3)); END"),
            "WITHIN f\n    TRUE SAY('a' (1 - 2) (-3));\nEND\n"
        );
        assert_eq!(
            reprint("NOT (EXISTS X: ex_stmt FROM execute_program) AND 1 < 2 SAY('x');"),
            "NOT (EXISTS X: ex_stmt FROM execute_program) AND 1 < 2 SAY('x');\n"
        );
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let src = "WITHIN get_source_line
            EXISTS L: ex_stmt IS 'Get_Line:' FROM execute_program VALUE(int)(AT L strlen(source_buffer) >10)
              SAY('Too long input line detected at stmt') SAY(L)
              SAY('It is ' VALUE(int)(AT L strlen(source_buffer)) ' characters long')
              ONFAIL SAY('No long input lines detected');
            END
            [ eval_expr & (TRUE) FROM execute_program ] SATISFIES (A: eval_expr IS 'x = 0' & (VALUE(bool)(AT A x)))(eval_expr)* | ex_stmt? SAY('it\\'s');";
        let once = reprint(src);
        let rs1 = parse_rules(src).unwrap();
        let rs2 = parse_rules(&once).unwrap();
        assert_eq!(rs1, rs2);
        assert_eq!(rs2.to_string(), once);
    }
}

//! Name resolution and structural checks.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::{ParseError, Span};

pub(super) fn check_program(program: &MiniProgram) -> Result<(), ParseError> {
    let mut globals = HashSet::new();
    for g in &program.globals {
        if !globals.insert(g.name.as_str()) {
            return Err(ParseError::semantic(g.span, format!("duplicate global `{}`", g.name)));
        }
    }

    let mut arities = HashMap::new();
    for f in &program.functions {
        if builtin_arity(&f.name).is_some() {
            return Err(ParseError::semantic(f.span, format!("`{}` is a builtin and cannot be redefined", f.name)));
        }
        if arities.insert(f.name.as_str(), f.params.len()).is_some() {
            return Err(ParseError::semantic(f.span, format!("duplicate function `{}`", f.name)));
        }
    }
    match program.function("main") {
        None => {
            let end = Span { line: program.source.lines().count().max(1) as u32, column: 1, ..Span::default() };
            return Err(ParseError::semantic(end, "program has no `main` function"));
        }
        Some(main) if !main.params.is_empty() => {
            return Err(ParseError::semantic(main.span, "`main` takes no parameters"));
        }
        Some(_) => {}
    }

    for f in &program.functions {
        let mut cx = Checker {
            globals: &globals,
            arities: &arities,
            scopes: vec![HashSet::new()],
            loop_depth: 0,
            labels: HashSet::new(),
        };
        for p in &f.params {
            if !cx.scopes[0].insert(p.clone()) {
                return Err(ParseError::semantic(f.span, format!("duplicate parameter `{p}`")));
            }
        }
        for s in &f.body {
            cx.stmt(s)?;
        }
    }
    Ok(())
}

/// Checks an expression evaluated as a probe: no assignments, no calls to
/// user functions or `getline`, and every variable must be a global or (when
/// `function` is known) a parameter or local of that function.
pub fn check_probe(expr: &Expr, program: &MiniProgram, function: Option<&str>) -> Result<(), String> {
    let mut locals = HashSet::new();
    if let Some(f) = function.and_then(|name| program.function(name)) {
        locals.extend(f.params.iter().cloned());
        for s in &f.body {
            collect_locals(s, &mut locals);
        }
    }
    probe_expr(expr, program, &locals)
}

fn collect_locals(s: &Stmt, out: &mut HashSet<String>) {
    match &s.kind {
        StmtKind::VarDecl(name, _) => {
            out.insert(name.clone());
        }
        StmtKind::If(_, a, b) => {
            collect_locals(a, out);
            if let Some(b) = b {
                collect_locals(b, out);
            }
        }
        StmtKind::While(_, body) | StmtKind::Labeled { body, .. } => collect_locals(body, out),
        StmtKind::Block(stmts) => stmts.iter().for_each(|s| collect_locals(s, out)),
        StmtKind::Expr(_) | StmtKind::Return(_) | StmtKind::Break => {}
    }
}

fn probe_expr(e: &Expr, program: &MiniProgram, locals: &HashSet<String>) -> Result<(), String> {
    match &e.kind {
        ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) => Ok(()),
        ExprKind::Var(name) => {
            if program.is_global(name) || locals.contains(name) {
                Ok(())
            } else {
                Err(format!("probe references unknown variable `{name}`"))
            }
        }
        ExprKind::Assign(..) => Err("probes may not assign variables".into()),
        ExprKind::Call(name, args) => {
            match builtin_arity(name) {
                None => return Err(format!("probes may only call builtins, not `{name}`")),
                Some(_) if name == "getline" => return Err("probes may not read program input".into()),
                Some(Some(n)) if n != args.len() => return Err(format!("`{name}` expects {n} argument(s)")),
                Some(_) => {}
            }
            args.iter().try_for_each(|a| probe_expr(a, program, locals))
        }
        ExprKind::Binary(_, a, b) | ExprKind::Comma(a, b) => {
            probe_expr(a, program, locals)?;
            probe_expr(b, program, locals)
        }
        ExprKind::Unary(_, a) => probe_expr(a, program, locals),
        ExprKind::Ternary(a, b, c) => {
            probe_expr(a, program, locals)?;
            probe_expr(b, program, locals)?;
            probe_expr(c, program, locals)
        }
    }
}

struct Checker<'a> {
    globals: &'a HashSet<&'a str>,
    arities: &'a HashMap<&'a str, usize>,
    scopes: Vec<HashSet<String>>,
    loop_depth: usize,
    labels: HashSet<String>,
}

impl Checker<'_> {
    fn declared(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name)) || self.globals.contains(name)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ParseError> {
        match &s.kind {
            StmtKind::Expr(e) => self.expr(e),
            StmtKind::VarDecl(name, init) => {
                if let Some(e) = init {
                    self.expr(e)?;
                }
                let scope = self.scopes.last_mut().expect("at least one scope");
                if !scope.insert(name.clone()) {
                    return Err(ParseError::semantic(s.span, format!("`{name}` is already declared in this block")));
                }
                Ok(())
            }
            StmtKind::If(cond, then, other) => {
                self.expr(cond)?;
                self.nested(then)?;
                match other {
                    Some(o) => self.nested(o),
                    None => Ok(()),
                }
            }
            StmtKind::While(cond, body) => {
                self.expr(cond)?;
                self.loop_depth += 1;
                let r = self.nested(body);
                self.loop_depth -= 1;
                r
            }
            StmtKind::Return(value) => match value {
                Some(e) => self.expr(e),
                None => Ok(()),
            },
            StmtKind::Break => {
                if self.loop_depth == 0 {
                    Err(ParseError::semantic(s.span, "`break` outside of a loop"))
                } else {
                    Ok(())
                }
            }
            StmtKind::Labeled { label, label_span, body } => {
                if !self.labels.insert(label.clone()) {
                    return Err(ParseError::semantic(*label_span, format!("duplicate label `{label}`")));
                }
                self.stmt(body)
            }
            StmtKind::Block(stmts) => {
                self.scopes.push(HashSet::new());
                let r = stmts.iter().try_for_each(|s| self.stmt(s));
                self.scopes.pop();
                r
            }
        }
    }

    // a branch or loop body gets its own scope even without braces
    fn nested(&mut self, s: &Stmt) -> Result<(), ParseError> {
        self.scopes.push(HashSet::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    fn expr(&mut self, e: &Expr) -> Result<(), ParseError> {
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) => Ok(()),
            ExprKind::Var(name) => {
                if self.declared(name) {
                    Ok(())
                } else {
                    Err(ParseError::semantic(e.span, format!("undeclared identifier `{name}`")))
                }
            }
            ExprKind::Assign(name, value) => {
                if !self.declared(name) {
                    return Err(ParseError::semantic(e.span, format!("assignment to undeclared identifier `{name}`")));
                }
                self.expr(value)
            }
            ExprKind::Call(name, args) => {
                let expected = match (self.arities.get(name.as_str()), builtin_arity(name)) {
                    (Some(&n), _) => Some(n),
                    (None, Some(arity)) => arity,
                    (None, None) => {
                        return Err(ParseError::semantic(e.span, format!("call to undefined function `{name}`")))
                    }
                };
                if let Some(n) = expected {
                    if n != args.len() {
                        return Err(ParseError::semantic(
                            e.span,
                            format!("`{name}` expects {n} argument(s), got {}", args.len()),
                        ));
                    }
                }
                args.iter().try_for_each(|a| self.expr(a))
            }
            ExprKind::Binary(_, a, b) | ExprKind::Comma(a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            ExprKind::Unary(_, a) => self.expr(a),
            ExprKind::Ternary(a, b, c) => {
                self.expr(a)?;
                self.expr(b)?;
                self.expr(c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::minic::{parse_expr, parse_program, ErrorKind};

    fn semantic_error(src: &str) -> String {
        let err = parse_program("t", src).unwrap_err();
        assert_eq!(err.kind, ErrorKind::Semantic, "{err}");
        err.message
    }

    #[test]
    fn break_outside_loop() {
        assert!(semantic_error("func main() { break; }").contains("break"));
        parse_program("t", "func main() { while (true) { if (1) break; } }").unwrap();
    }

    #[test]
    fn undeclared_and_missing_main() {
        assert!(semantic_error("func main() { x = 0; }").contains("undeclared"));
        assert!(semantic_error("func f() { }").contains("main"));
        assert!(semantic_error("func main(a) { }").contains("parameters"));
        assert!(semantic_error("func main() { { var y; } y = 1; }").contains("undeclared"));
    }

    #[test]
    fn calls_and_labels() {
        assert!(semantic_error("func main() { nope(); }").contains("undefined"));
        assert!(semantic_error("func main() { strlen(); }").contains("argument"));
        assert!(semantic_error("func main() { L: 1; L: 2; }").contains("label"));
        assert!(semantic_error("func print() { } func main() { }").contains("builtin"));
        assert!(semantic_error("func f() {} func f() {} func main() {}").contains("duplicate"));
    }

    #[test]
    fn probes_are_restricted() {
        let p = parse_program("t", "var g; func f(a) { var loc = 1; return a + loc; } func main() { f(1); }").unwrap();
        let check = |src: &str, f: Option<&str>| super::check_probe(&parse_expr(src).unwrap(), &p, f);
        assert!(check("g + 1", None).is_ok());
        assert!(check("loc * a", Some("f")).is_ok());
        assert!(check("loc", None).is_err());
        assert!(check("g = 1", None).is_err());
        assert!(check("f(1)", None).is_err());
        assert!(check("getline()", None).is_err());
        assert!(check("strlen(\"abc\") > 1 ? print(\"x\") : 1", None).is_ok());
    }
}

//! Static footprint analysis: which events a rule set can look at and which
//! probes it reads, so the interpreter records nothing else.

use std::collections::BTreeSet;
use std::fmt;

use crate::forman::{Aggregate, BinOp, Expr, PathExpr, Pattern, RuleSet, Scope, Selection, ValueAt};
use crate::minic::{self, MiniProgram};
use crate::runtime::{ProbeGuard, ProbeRequest};
use crate::trace::EventKind;

/// An event shape: a kind plus optional exact name and enclosing function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Footprint {
    pub kind: EventKind,
    pub name: Option<String>,
    pub enclosing_function: Option<String>,
}

impl Footprint {
    pub fn new(kind: EventKind, name: Option<&str>, enclosing_function: Option<&str>) -> Footprint {
        Footprint { kind, name: name.map(str::to_string), enclosing_function: enclosing_function.map(str::to_string) }
    }

    pub fn matches(&self, kind: EventKind, name: &str, enclosing_function: &str) -> bool {
        self.kind == kind
            && self.name.as_deref().is_none_or(|n| n == name)
            && self.enclosing_function.as_deref().is_none_or(|f| f == enclosing_function)
    }
}

impl fmt::Display for Footprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.keyword())?;
        if let Some(n) = &self.name {
            write!(f, " IS {}", crate::forman::quote(n))?;
        }
        if let Some(func) = &self.enclosing_function {
            write!(f, " WITHIN {func}")?;
        }
        Ok(())
    }
}

/// Record-time event filter. The program root is always recorded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Filter {
    pub pass_all: bool,
    pub footprints: BTreeSet<Footprint>,
    /// Shapes kept only so that scoping ancestors survive filtering.
    pub keep_structure: BTreeSet<Footprint>,
}

impl Filter {
    pub fn pass_all() -> Filter {
        Filter { pass_all: true, ..Filter::default() }
    }

    /// A filter admitting nothing but the root.
    pub fn empty() -> Filter {
        Filter::default()
    }

    pub fn admits(&self, kind: EventKind, name: &str, enclosing_function: &str) -> bool {
        self.pass_all
            || self.footprints.iter().any(|f| f.matches(kind, name, enclosing_function))
            || self.keep_structure.iter().any(|f| f.matches(kind, name, enclosing_function))
    }

    /// Human-readable listing, one shape per line.
    pub fn summary(&self) -> String {
        if self.pass_all {
            return "all events\n".to_string();
        }
        let mut out = String::new();
        for f in &self.footprints {
            out.push_str(&format!("record {f}\n"));
        }
        for f in &self.keep_structure {
            out.push_str(&format!("keep {f}\n"));
        }
        if out.is_empty() {
            out.push_str("program root only\n");
        }
        out
    }
}

/// Derives the filter and the probe requests needed to evaluate `rules`.
///
/// Every event any selection of the rule set can examine is admitted, and
/// every `VALUE(..)(AT M e)` becomes a probe aimed at the shape of `M`'s
/// pattern. Context conditions never narrow the filter.
pub fn derive_footprint(rules: &RuleSet) -> (Filter, Vec<ProbeRequest>) {
    let mut d = Deriver::default();
    for rule in &rules.rules {
        d.scope = rule.scope.clone();
        d.env.clear();
        if let Some(f) = &rule.scope {
            d.filter.keep_structure.insert(Footprint::new(EventKind::FuncCall, Some(f), None));
        }
        let witness = d.expr(&rule.body, None);
        let pushed = witness.is_some();
        if let Some(b) = witness {
            d.env.push(b);
        }
        for item in rule.say.iter().chain(&rule.onfail).flatten() {
            d.expr(item, None);
        }
        if pushed {
            d.env.pop();
        }
    }
    (d.filter, d.probes)
}

/// Checks that every probe only reads variables visible where it runs and
/// has no effect on program state.
pub fn validate_probes(probes: &[ProbeRequest], program: &MiniProgram) -> Result<(), String> {
    for p in probes {
        minic::check_probe(&p.expr, program, p.target.enclosing_function.as_deref())
            .map_err(|e| format!("probe `{}`: {e}", p.expr_text))?;
    }
    Ok(())
}

#[derive(Clone)]
struct Binding {
    name: String,
    id: usize,
    target: Footprint,
}

#[derive(Clone)]
struct Guard {
    binding: usize,
    guard: ProbeGuard,
}

#[derive(Default)]
struct Deriver {
    filter: Filter,
    probes: Vec<ProbeRequest>,
    scope: Option<String>,
    env: Vec<Binding>,
    next_id: usize,
}

impl Deriver {
    fn footprint(&self, p: &Pattern) -> Footprint {
        Footprint::new(p.kind, p.is.as_deref(), self.scope.as_deref())
    }

    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.env.iter().rev().find(|b| b.name == name)
    }

    fn bind(&mut self, name: &Option<String>, pattern: &Pattern) -> Option<Binding> {
        let name = name.as_ref()?;
        self.next_id += 1;
        Some(Binding { name: name.clone(), id: self.next_id, target: self.footprint(pattern) })
    }

    fn probe(&mut self, v: &ValueAt, guard: Option<&Guard>) {
        let Some(b) = self.lookup(&v.metavar).cloned() else { return };
        let guard = guard.filter(|g| g.binding == b.id).map(|g| g.guard.clone());
        let existing = self.probes.iter_mut().find(|p| p.target == b.target && p.expr_text == v.text);
        match existing {
            // a probe requested both with and without a guard, or under two
            // different guards, must always run
            Some(p) => {
                if p.guard != guard {
                    p.guard = None;
                }
            }
            None => {
                let mut req = ProbeRequest::new(b.target, v.expr.clone());
                req.expr_text = v.text.clone();
                req.guard = guard;
                self.probes.push(req);
            }
        }
    }

    // Records the selection and returns the binding it introduces, without
    // leaving it on the environment.
    fn selection(&mut self, s: &Selection, guard: Option<&Guard>) -> Option<Binding> {
        let fp = self.footprint(&s.pattern);
        self.filter.footprints.insert(fp);
        if let Scope::Metavar(m) = &s.from {
            if let Some(b) = self.lookup(m) {
                let target = b.target.clone();
                self.filter.keep_structure.insert(target);
            }
        }
        let binding = self.bind(&s.metavar, &s.pattern);
        self.with(binding.clone(), |d| {
            if let Some(c) = &s.pattern.context {
                d.expr(c, guard);
            }
        });
        binding
    }

    fn with(&mut self, binding: Option<Binding>, f: impl FnOnce(&mut Self)) {
        let pushed = binding.is_some();
        if let Some(b) = binding {
            self.env.push(b);
        }
        f(self);
        if pushed {
            self.env.pop();
        }
    }

    fn aggregate(&mut self, agg: &Aggregate, guard: Option<&Guard>) {
        let binding = self.selection(&agg.selection, guard);
        self.with(binding, |d| {
            if let Some(a) = &agg.apply {
                d.expr(a, guard);
            }
        });
    }

    fn path(&mut self, p: &PathExpr, guard: Option<&Guard>) {
        for leaf in p.leaves() {
            // leaves only test events that were already selected, so they
            // add no shapes of their own
            let binding = self.bind(&leaf.metavar, &leaf.pattern);
            self.with(binding, |d| {
                if let Some(c) = &leaf.pattern.context {
                    d.expr(c, guard);
                }
            });
        }
    }

    /// Walks `e`; returns the binding of `e` itself when it is a quantifier.
    fn expr(&mut self, e: &Expr, guard: Option<&Guard>) -> Option<Binding> {
        match e {
            Expr::Bool(_) | Expr::Int(_) | Expr::Str(_) | Expr::Var(_) | Expr::SourceText(_) => None,
            Expr::Value(v) => {
                self.probe(v, guard);
                None
            }
            Expr::Card(agg) | Expr::List(agg) => {
                self.aggregate(agg, guard);
                None
            }
            Expr::Quant(q) => {
                let binding = self.selection(&q.selection, guard);
                self.with(binding.clone(), |d| {
                    if let Some(b) = &q.body {
                        d.expr(b, guard);
                    }
                });
                binding
            }
            Expr::Satisfies(list, path) => {
                self.expr(list, guard);
                self.path(path, guard);
                None
            }
            Expr::Not(inner) | Expr::Neg(inner) => {
                self.expr(inner, guard);
                None
            }
            Expr::Binary(op, a, b) => {
                self.expr(a, guard);
                let inner = match (op, &**a) {
                    (BinOp::And | BinOp::Or, Expr::Value(v)) => self.lookup(&v.metavar).map(|bnd| Guard {
                        binding: bnd.id,
                        guard: ProbeGuard { expr_text: v.text.clone(), cast: v.cast, expect: *op == BinOp::And },
                    }),
                    _ => None,
                };
                // probes on the right of AND/OR run only when the left side
                // does not already decide the result
                let g = inner.as_ref().or(guard);
                self.expr(b, g);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forman::parse_rules;

    fn derive(src: &str) -> (Filter, Vec<ProbeRequest>) {
        derive_footprint(&parse_rules(src).unwrap())
    }

    #[test]
    fn pass_all_admits_everything() {
        let f = Filter::pass_all();
        for k in EventKind::ALL {
            assert!(f.admits(k, "anything", "main"));
        }
    }

    #[test]
    fn constant_rule_needs_no_events() {
        let (f, p) = derive("TRUE SAY('x');");
        assert!(f.footprints.is_empty() && f.keep_structure.is_empty() && p.is_empty());
        assert!(!f.admits(EventKind::ExStmt, "x;", "main"));
    }

    #[test]
    fn page_number_query() {
        let (f, p) = derive(
            "WITHIN print_page_header TRUE SAY('h: ' [ C: func_call IS 'printf' FROM execute_program \
             APPLY VALUE(int)(AT C page_number) ]); END",
        );
        let printf = Footprint::new(EventKind::FuncCall, Some("printf"), Some("print_page_header"));
        assert_eq!(f.footprints, BTreeSet::from([printf.clone()]));
        assert_eq!(
            f.keep_structure,
            BTreeSet::from([Footprint::new(EventKind::FuncCall, Some("print_page_header"), None)])
        );
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].target.clone(), p[0].expr_text.as_str()), (printf, "page_number"));
        assert!(!f.admits(EventKind::FuncCall, "get_token", "main"));
        assert!(f.admits(EventKind::FuncCall, "printf", "print_page_header"));
        assert!(!f.admits(EventKind::FuncCall, "printf", "main"));
    }

    #[test]
    fn contexts_never_narrow() {
        let (f, _) = derive(
            "TRUE SAY(CARD [ALL F: func_call & SOURCE_TEXT(F) == 'get_token' FROM execute_program]) \
             SAY(CARD [func_call IS get_source_line FROM execute_program]);",
        );
        assert!(f.admits(EventKind::FuncCall, "get_source_line", "main"));
        assert!(f.admits(EventKind::FuncCall, "anything", "main"));
    }

    #[test]
    fn from_metavariable_keeps_its_scope() {
        let (f, _) = derive("EXISTS X: func_call IS 'f' FROM execute_program CARD [eval_expr FROM X] > 0 SAY(X);");
        assert!(f.keep_structure.contains(&Footprint::new(EventKind::FuncCall, Some("f"), None)));
    }

    #[test]
    fn and_guards_probes_on_the_same_binding() {
        let (_, p) = derive(
            "FOREACH L: ex_stmt IS 'L:' FROM execute_program \
             VALUE(int)(AT L n > 1 ? print(\"a\") : 1) AND VALUE(int)(AT L print(n)) SAY('x');",
        );
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].guard, None);
        let g = p[1].guard.as_ref().unwrap();
        assert_eq!((g.expr_text.as_str(), g.expect), ("n > 1 ? print(\"a\") : 1", true));

        // an unguarded use of the same probe elsewhere removes the guard
        let (_, p) = derive(
            "FOREACH L: ex_stmt FROM execute_program VALUE(int)(AT L a) OR VALUE(int)(AT L b) SAY('x'); \
             FOREACH L: ex_stmt FROM execute_program VALUE(int)(AT L b) SAY('y');",
        );
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|r| r.guard.is_none()));

        // different bindings are never guarded by each other
        let (_, p) = derive(
            "FOREACH L: ex_stmt FROM execute_program VALUE(int)(AT L a) AND \
             (EXISTS L: eval_expr FROM execute_program VALUE(int)(AT L b)) SAY('x');",
        );
        assert!(p.iter().all(|r| r.guard.is_none()));
    }

    #[test]
    fn probes_are_validated_against_the_program() {
        let prog = minic::parse_program("t", "var g; func f() { var loc; } func main() { f(); }").unwrap();
        let (_, p) = derive("WITHIN f EXISTS X: ex_stmt FROM execute_program VALUE(int)(AT X loc + g) SAY('x'); END");
        assert!(validate_probes(&p, &prog).is_ok());
        let (_, p) = derive("EXISTS X: ex_stmt FROM execute_program VALUE(int)(AT X loc) SAY('x');");
        assert!(validate_probes(&p, &prog).unwrap_err().contains("loc"));
    }
}

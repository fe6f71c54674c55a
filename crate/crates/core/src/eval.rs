//! Post-mortem evaluation of rule sets over a recorded trace.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::forman::{
    Aggregate, BinOp, Expr, PathExpr, PathLeaf, Pattern, Quantified, Quantifier, Rule, RuleSet, Scope, Selection,
};
use crate::trace::{Event, EventId, Trace};
use crate::value::Value;

/// Metavariable bindings in effect.
pub type Binding = BTreeMap<String, EventId>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

fn err<T>(message: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError(message.into()))
}

/// Result of a rule-language expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalValue {
    Int(i64),
    Bool(bool),
    Str(String),
    Event(EventId),
    List(Vec<EvalValue>),
}

impl EvalValue {
    pub fn truthy(&self) -> bool {
        match self {
            EvalValue::Int(n) => *n != 0,
            EvalValue::Bool(b) => *b,
            EvalValue::Str(s) => !s.is_empty(),
            EvalValue::Event(_) => true,
            EvalValue::List(items) => !items.is_empty(),
        }
    }

    fn from_value(v: Value) -> EvalValue {
        match v {
            Value::Int(n) => EvalValue::Int(n),
            Value::Bool(b) => EvalValue::Bool(b),
            Value::Str(s) => EvalValue::Str(s),
            Value::Unit => EvalValue::Str(String::new()),
        }
    }

    fn as_int(&self) -> Option<i64> {
        match self {
            EvalValue::Int(n) => Some(*n),
            EvalValue::Bool(b) => Some(i64::from(*b)),
            _ => None,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            EvalValue::Int(_) => "int",
            EvalValue::Bool(_) => "bool",
            EvalValue::Str(_) => "str",
            EvalValue::Event(_) => "event",
            EvalValue::List(_) => "list",
        }
    }
}

/// Outcome of `EXISTS` or `FOREACH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantOutcome {
    pub value: bool,
    /// The first satisfying event for `EXISTS`, the first counterexample for
    /// `FOREACH`.
    pub witness: Option<EventId>,
    /// Number of body evaluations performed before the result was known.
    pub visited: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Say,
    Onfail,
    Error,
}

/// One rendered message clause, or an evaluation error for a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    /// Index of the rule in its rule set.
    pub rule: usize,
    /// Line where the rule starts.
    pub line: u32,
    pub kind: MessageKind,
    pub text: String,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MessageKind::Error => write!(f, "error: rule at line {}: {}", self.line, self.text),
            _ => f.write_str(&self.text),
        }
    }
}

/// The two-line rendering of an event used in messages.
pub fn render_event(e: &Event) -> String {
    format!(
        "{} :> '{}' source line {} within function {}\nTime= {} .. {}",
        e.kind.keyword(),
        e.name,
        e.source_line,
        e.enclosing_function,
        e.begin_time,
        e.end_time
    )
}

/// Evaluates every rule in order. Errors in one rule are reported as an
/// error message and do not stop the others.
pub fn run_rules(trace: &Trace, rules: &RuleSet) -> Vec<Message> {
    let mut out = Vec::new();
    for (index, rule) in rules.rules.iter().enumerate() {
        let mut ev = Evaluator::new(trace).within(rule.scope.as_deref());
        ev.rule(index, rule, &mut out);
    }
    out
}

/// Evaluation context: the trace, the `WITHIN` function of the current rule
/// and the current metavariable bindings.
pub struct Evaluator<'t> {
    trace: &'t Trace,
    within: Option<String>,
    pub binding: Binding,
}

impl<'t> Evaluator<'t> {
    pub fn new(trace: &'t Trace) -> Evaluator<'t> {
        Evaluator { trace, within: None, binding: Binding::new() }
    }

    /// Restricts selections to events whose enclosing function is `f`.
    pub fn within(mut self, f: Option<&str>) -> Evaluator<'t> {
        self.within = f.map(str::to_string);
        self
    }

    fn rule(&mut self, index: usize, rule: &Rule, out: &mut Vec<Message>) {
        let message = |kind, text| Message { rule: index, line: rule.line, kind, text };
        let verdict = match &rule.body {
            Expr::Quant(q) => self.eval_quantifier(q).map(|o| {
                if let (Some(m), Some(w)) = (&q.selection.metavar, o.witness) {
                    self.binding.insert(m.clone(), w);
                }
                o.value
            }),
            body => self.eval(body).map(|v| v.truthy()),
        };
        let holds = match verdict {
            Ok(v) => v,
            Err(e) => {
                out.push(message(MessageKind::Error, e.0));
                return;
            }
        };
        let (kind, clauses) = if holds { (MessageKind::Say, &rule.say) } else { (MessageKind::Onfail, &rule.onfail) };
        for clause in clauses {
            match self.render_items(clause) {
                Ok(text) => out.push(message(kind, text)),
                Err(e) => {
                    out.push(message(MessageKind::Error, e.0));
                    return;
                }
            }
        }
    }

    fn bound(&self, m: &str) -> Result<EventId, EvalError> {
        match self.binding.get(m) {
            Some(id) => Ok(*id),
            None => err(format!("metavariable `{m}` is not bound")),
        }
    }

    fn with_binding<T>(
        &mut self,
        name: Option<&String>,
        id: EventId,
        f: impl FnOnce(&mut Self) -> Result<T, EvalError>,
    ) -> Result<T, EvalError> {
        let Some(name) = name else { return f(self) };
        let saved = self.binding.insert(name.clone(), id);
        let r = f(self);
        match saved {
            Some(prev) => self.binding.insert(name.clone(), prev),
            None => self.binding.remove(name),
        };
        r
    }

    /// Kind, `IS` name, `WITHIN` function and context condition, with the
    /// pattern's own metavariable bound to `e` while the context runs.
    pub fn match_pattern(
        &mut self,
        e: EventId,
        pattern: &Pattern,
        metavar: Option<&String>,
    ) -> Result<bool, EvalError> {
        let ev = self.trace.event(e);
        if ev.kind != pattern.kind || pattern.is.as_ref().is_some_and(|n| *n != ev.name) {
            return Ok(false);
        }
        if self.within.as_ref().is_some_and(|f| *f != ev.enclosing_function) {
            return Ok(false);
        }
        match &pattern.context {
            None => Ok(true),
            Some(c) => self.with_binding(metavar, e, |ev| Ok(ev.eval(c)?.truthy())),
        }
    }

    /// Events strictly inside the scope that match the selection, in begin
    /// order. Without `ALL`, events nested in an earlier selected event are
    /// skipped.
    pub fn select(&mut self, s: &Selection) -> Result<Vec<EventId>, EvalError> {
        let scope = match &s.from {
            Scope::Program => self.trace.root(),
            Scope::Metavar(m) => self.bound(m)?,
        };
        let last = self.trace.subtree_end(scope).0;
        let mut out = Vec::new();
        let mut skip_through = scope.0;
        for i in scope.0 + 1..=last {
            if !s.all && i <= skip_through {
                continue;
            }
            let id = EventId(i);
            if self.match_pattern(id, &s.pattern, s.metavar.as_ref())? {
                out.push(id);
                if !s.all {
                    skip_through = self.trace.subtree_end(id).0;
                }
            }
        }
        Ok(out)
    }

    pub fn eval_quantifier(&mut self, q: &Quantified) -> Result<QuantOutcome, EvalError> {
        let events = self.select(&q.selection)?;
        let stop_on = q.quantifier == Quantifier::Exists;
        let mut visited = 0;
        for id in events {
            visited += 1;
            let holds = match &q.body {
                None => true,
                Some(b) => self.with_binding(q.selection.metavar.as_ref(), id, |ev| Ok(ev.eval(b)?.truthy()))?,
            };
            if holds == stop_on {
                return Ok(QuantOutcome { value: stop_on, witness: Some(id), visited });
            }
        }
        Ok(QuantOutcome { value: !stop_on, witness: None, visited })
    }

    /// Selected events, or the `APPLY` value for each of them.
    pub fn eval_aggregate(&mut self, agg: &Aggregate) -> Result<Vec<EvalValue>, EvalError> {
        let events = self.select(&agg.selection)?;
        match &agg.apply {
            None => Ok(events.into_iter().map(EvalValue::Event).collect()),
            Some(apply) => events
                .into_iter()
                .map(|id| self.with_binding(agg.selection.metavar.as_ref(), id, |ev| ev.eval(apply)))
                .collect(),
        }
    }

    /// Whether the whole sequence spells a word of the path expression.
    pub fn match_path(&mut self, events: &[EventId], path: &PathExpr) -> Result<bool, EvalError> {
        let prog = Nfa::compile(path);
        let mut current = prog.closure([0]);
        for &e in events {
            let mut next_starts = Vec::new();
            for &pc in &current {
                if let Inst::Leaf(leaf) = prog.insts[pc] {
                    if self.match_pattern_bare(e, leaf)? {
                        next_starts.push(pc + 1);
                    }
                }
            }
            current = prog.closure(next_starts);
            if current.is_empty() {
                return Ok(false);
            }
        }
        Ok(current.iter().any(|&pc| matches!(prog.insts[pc], Inst::Match)))
    }

    // leaves test events already chosen by a selection, so the WITHIN
    // restriction does not apply to them again
    fn match_pattern_bare(&mut self, e: EventId, leaf: &PathLeaf) -> Result<bool, EvalError> {
        let within = self.within.take();
        let r = self.match_pattern(e, &leaf.pattern, leaf.metavar.as_ref());
        self.within = within;
        r
    }

    pub fn eval(&mut self, e: &Expr) -> Result<EvalValue, EvalError> {
        Ok(match e {
            Expr::Bool(b) => EvalValue::Bool(*b),
            Expr::Int(n) => EvalValue::Int(*n),
            Expr::Str(s) => EvalValue::Str(s.clone()),
            Expr::Var(m) => EvalValue::Event(self.bound(m)?),
            Expr::SourceText(m) => EvalValue::Str(self.trace.event(self.bound(m)?).name.clone()),
            Expr::Value(v) => {
                let event = self.trace.event(self.bound(&v.metavar)?);
                // events are named by kind, text and begin time, which do not
                // depend on the filter the trace was recorded with
                let at = format!("{} '{}' at time {}", event.kind.keyword(), event.name, event.begin_time);
                match event.probes.get(&v.text) {
                    None => return err(format!("probe `{}` was not recorded on {at}", v.text)),
                    Some(Err(msg)) => return err(format!("probe `{}` failed on {at}: {msg}", v.text)),
                    Some(Ok(value)) => match v.cast.apply(value) {
                        Ok(value) => EvalValue::from_value(value),
                        Err(msg) => return err(format!("probe `{}` on {at}: {msg}", v.text)),
                    },
                }
            }
            Expr::Card(agg) => EvalValue::Int(self.eval_aggregate(agg)?.len() as i64),
            Expr::List(agg) => EvalValue::List(self.eval_aggregate(agg)?),
            Expr::Quant(q) => EvalValue::Bool(self.eval_quantifier(q)?.value),
            Expr::Satisfies(list, path) => {
                let EvalValue::List(items) = self.eval(list)? else {
                    return err("SATISFIES needs a list of events on its left");
                };
                let mut events = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        EvalValue::Event(id) => events.push(id),
                        other => {
                            return err(format!("SATISFIES needs a list of events, found a {}", other.type_name()))
                        }
                    }
                }
                EvalValue::Bool(self.match_path(&events, path)?)
            }
            Expr::Not(inner) => EvalValue::Bool(!self.eval(inner)?.truthy()),
            Expr::Neg(inner) => match self.eval(inner)?.as_int() {
                Some(n) => EvalValue::Int(n.wrapping_neg()),
                None => return err("`-` needs an integer"),
            },
            Expr::Binary(BinOp::And, a, b) => EvalValue::Bool(self.eval(a)?.truthy() && self.eval(b)?.truthy()),
            Expr::Binary(BinOp::Or, a, b) => EvalValue::Bool(self.eval(a)?.truthy() || self.eval(b)?.truthy()),
            Expr::Binary(op, a, b) => {
                let (l, r) = (self.eval(a)?, self.eval(b)?);
                binary(*op, l, r)?
            }
        })
    }

    fn render_items(&mut self, items: &[Expr]) -> Result<String, EvalError> {
        let mut out = String::new();
        let mut prev_block = false;
        for (i, item) in items.iter().enumerate() {
            let v = self.eval(item)?;
            let block = is_block(&v);
            let text = self.render_value(&v);
            if i > 0 {
                if block || prev_block {
                    out.push('\n');
                } else if !(out.ends_with(char::is_whitespace)
                    || text.starts_with(|c: char| c.is_whitespace() || ",.;:!?".contains(c))
                    || text.is_empty())
                {
                    out.push(' ');
                }
            }
            out.push_str(&text);
            prev_block = block;
        }
        Ok(out)
    }

    fn render_value(&self, v: &EvalValue) -> String {
        match v {
            EvalValue::Int(n) => n.to_string(),
            EvalValue::Bool(b) => b.to_string(),
            EvalValue::Str(s) => s.clone(),
            EvalValue::Event(id) => render_event(self.trace.event(*id)),
            EvalValue::List(items) => {
                let sep = if items.iter().any(is_block) { "\n" } else { " " };
                items.iter().map(|i| self.render_value(i)).collect::<Vec<_>>().join(sep)
            }
        }
    }
}

// events and lists of events are rendered on lines of their own
fn is_block(v: &EvalValue) -> bool {
    match v {
        EvalValue::Event(_) => true,
        EvalValue::List(items) => !items.is_empty() && items.iter().all(is_block),
        _ => false,
    }
}

fn binary(op: BinOp, l: EvalValue, r: EvalValue) -> Result<EvalValue, EvalError> {
    use EvalValue::{Bool, Int, Str};
    let sym = op.symbol();
    let ints = |l: &EvalValue, r: &EvalValue| match (l.as_int(), r.as_int()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => err(format!("`{sym}` cannot combine {} and {}", l.type_name(), r.type_name())),
    };
    Ok(match op {
        BinOp::Eq | BinOp::Ne => {
            let equal = match (l.as_int(), r.as_int()) {
                (Some(a), Some(b)) => a == b,
                _ => l == r,
            };
            Bool(equal == (op == BinOp::Eq))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (&l, &r) {
                (Str(a), Str(b)) => a.cmp(b),
                _ => {
                    let (a, b) = ints(&l, &r)?;
                    a.cmp(&b)
                }
            };
            Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        BinOp::Add => match (&l, &r) {
            (Str(a), Str(b)) => Str(format!("{a}{b}")),
            _ => {
                let (a, b) = ints(&l, &r)?;
                Int(a.wrapping_add(b))
            }
        },
        BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
            let (a, b) = ints(&l, &r)?;
            match op {
                BinOp::Sub => Int(a.wrapping_sub(b)),
                BinOp::Mul => Int(a.wrapping_mul(b)),
                _ if b == 0 => return err("division by zero"),
                BinOp::Div => Int(a.wrapping_div(b)),
                _ => Int(a.wrapping_rem(b)),
            }
        }
        BinOp::And | BinOp::Or => unreachable!("short-circuit operators are evaluated lazily"),
    })
}

enum Inst<'p> {
    Leaf(&'p PathLeaf),
    Split(usize, usize),
    Jmp(usize),
    Match,
}

/// Thompson construction of a path expression.
struct Nfa<'p> {
    insts: Vec<Inst<'p>>,
}

impl<'p> Nfa<'p> {
    fn compile(path: &'p PathExpr) -> Nfa<'p> {
        let mut nfa = Nfa { insts: Vec::new() };
        nfa.emit(path);
        nfa.insts.push(Inst::Match);
        nfa
    }

    fn emit(&mut self, p: &'p PathExpr) {
        match p {
            PathExpr::Leaf(leaf) => self.insts.push(Inst::Leaf(leaf)),
            PathExpr::Seq(items) => items.iter().for_each(|i| self.emit(i)),
            PathExpr::Alt(items) => {
                let mut jumps = Vec::new();
                for (k, item) in items.iter().enumerate() {
                    if k + 1 < items.len() {
                        let split = self.insts.len();
                        self.insts.push(Inst::Split(split + 1, 0));
                        self.emit(item);
                        jumps.push(self.insts.len());
                        self.insts.push(Inst::Jmp(0));
                        let next = self.insts.len();
                        self.insts[split] = Inst::Split(split + 1, next);
                    } else {
                        self.emit(item);
                    }
                }
                let end = self.insts.len();
                for j in jumps {
                    self.insts[j] = Inst::Jmp(end);
                }
            }
            PathExpr::Star(inner) => {
                let split = self.insts.len();
                self.insts.push(Inst::Split(split + 1, 0));
                self.emit(inner);
                self.insts.push(Inst::Jmp(split));
                let end = self.insts.len();
                self.insts[split] = Inst::Split(split + 1, end);
            }
            PathExpr::Plus(inner) => {
                let start = self.insts.len();
                self.emit(inner);
                let end = self.insts.len() + 1;
                self.insts.push(Inst::Split(start, end));
            }
            PathExpr::Opt(inner) => {
                let split = self.insts.len();
                self.insts.push(Inst::Split(split + 1, 0));
                self.emit(inner);
                let end = self.insts.len();
                self.insts[split] = Inst::Split(split + 1, end);
            }
        }
    }

    /// Leaf and match states reachable from `starts` through jumps and splits.
    fn closure(&self, starts: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut seen = vec![false; self.insts.len()];
        let mut stack: Vec<usize> = starts.into_iter().collect();
        stack.reverse();
        let mut out = Vec::new();
        while let Some(pc) = stack.pop() {
            if std::mem::replace(&mut seen[pc], true) {
                continue;
            }
            match self.insts[pc] {
                Inst::Split(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                Inst::Jmp(t) => stack.push(t),
                Inst::Leaf(_) | Inst::Match => out.push(pc),
            }
        }
        out
    }
}

//! Brute-force reference evaluator for rule expressions.
//!
//! Selections are computed by testing every event of the trace for
//! containment by walking parent links, and the outermost-match rule is
//! applied by looking for a matching ancestor. Quantifiers, `AND` and `OR`
//! evaluate every operand and every member of the selection before combining
//! results, so nothing here depends on evaluation order or early exit.

use std::collections::BTreeMap;

use evtrace::eval::EvalValue;
use evtrace::forman::{Aggregate, BinOp, Expr, PathExpr, Pattern, Quantified, Quantifier, Scope, Selection};
use evtrace::{EventId, Trace, Value};

/// Outcome of a brute-force quantifier: its value, the first witness in
/// selection order, and that witness's 1-based position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteQuant {
    pub value: bool,
    pub witness: Option<EventId>,
    pub position: Option<usize>,
    pub selected: usize,
}

pub struct Brute<'t> {
    trace: &'t Trace,
    within: Option<String>,
    binding: BTreeMap<String, EventId>,
}

impl<'t> Brute<'t> {
    pub fn new(trace: &'t Trace, within: Option<&str>) -> Brute<'t> {
        Brute { trace, within: within.map(str::to_string), binding: BTreeMap::new() }
    }

    fn inside(&self, e: EventId, scope: EventId) -> bool {
        let mut cur = self.trace.event(e).parent;
        while let Some(p) = cur {
            if p == scope {
                return true;
            }
            cur = self.trace.event(p).parent;
        }
        false
    }

    fn bind<T>(&mut self, name: Option<&String>, id: EventId, f: impl FnOnce(&mut Self) -> T) -> T {
        let Some(name) = name else { return f(self) };
        let saved = self.binding.insert(name.clone(), id);
        let r = f(self);
        match saved {
            Some(prev) => self.binding.insert(name.clone(), prev),
            None => self.binding.remove(name),
        };
        r
    }

    pub fn matches(&mut self, e: EventId, p: &Pattern, metavar: Option<&String>, scoped: bool) -> Result<bool, String> {
        let ev = self.trace.event(e);
        let kind_ok = ev.kind == p.kind;
        let name_ok = p.is.as_ref().is_none_or(|n| *n == ev.name);
        let within_ok = !scoped || self.within.as_ref().is_none_or(|f| *f == ev.enclosing_function);
        let ctx_ok = match &p.context {
            None => true,
            Some(c) => self.bind(metavar, e, |b| b.eval(c))?.truthy(),
        };
        // the context is evaluated even when an earlier test already failed
        Ok(kind_ok && name_ok && within_ok && ctx_ok)
    }

    pub fn select(&mut self, s: &Selection) -> Result<Vec<EventId>, String> {
        let scope = match &s.from {
            Scope::Program => self.trace.root(),
            Scope::Metavar(m) => *self.binding.get(m).ok_or_else(|| format!("unbound {m}"))?,
        };
        let mut matching = Vec::new();
        for e in self.trace.events() {
            if self.inside(e.id, scope) && self.matches(e.id, &s.pattern, s.metavar.as_ref(), true)? {
                matching.push(e.id);
            }
        }
        if s.all {
            return Ok(matching);
        }
        let outermost =
            matching.iter().copied().filter(|&e| !matching.iter().any(|&a| a != e && self.inside(e, a))).collect();
        Ok(outermost)
    }

    pub fn quantifier(&mut self, q: &Quantified) -> Result<BruteQuant, String> {
        let events = self.select(&q.selection)?;
        let mut results = Vec::new();
        for &id in &events {
            let r = match &q.body {
                None => true,
                Some(b) => self.bind(q.selection.metavar.as_ref(), id, |br| br.eval(b))?.truthy(),
            };
            results.push(r);
        }
        let target = q.quantifier == Quantifier::Exists;
        let first = results.iter().position(|&r| r == target);
        let value = match q.quantifier {
            Quantifier::Exists => results.iter().any(|&r| r),
            Quantifier::Foreach => results.iter().all(|&r| r),
        };
        Ok(BruteQuant {
            value,
            witness: first.map(|i| events[i]),
            position: first.map(|i| i + 1),
            selected: events.len(),
        })
    }

    pub fn aggregate(&mut self, a: &Aggregate) -> Result<Vec<EvalValue>, String> {
        let events = self.select(&a.selection)?;
        let mut out = Vec::new();
        for id in events {
            out.push(match &a.apply {
                None => EvalValue::Event(id),
                Some(e) => self.bind(a.selection.metavar.as_ref(), id, |b| b.eval(e))?,
            });
        }
        Ok(out)
    }

    pub fn eval(&mut self, e: &Expr) -> Result<EvalValue, String> {
        Ok(match e {
            Expr::Bool(b) => EvalValue::Bool(*b),
            Expr::Int(n) => EvalValue::Int(*n),
            Expr::Str(s) => EvalValue::Str(s.clone()),
            Expr::Var(m) => EvalValue::Event(*self.binding.get(m).ok_or("unbound")?),
            Expr::SourceText(m) => {
                let id = *self.binding.get(m).ok_or("unbound")?;
                EvalValue::Str(self.trace.event(id).name.clone())
            }
            Expr::Value(v) => {
                let id = *self.binding.get(&v.metavar).ok_or("unbound")?;
                let raw = match self.trace.event(id).probes.get(&v.text) {
                    Some(Ok(raw)) => raw.clone(),
                    _ => return Err(format!("no probe {} on {id}", v.text)),
                };
                let converted = v.cast.apply(&raw)?;
                match converted {
                    Value::Int(n) => EvalValue::Int(n),
                    Value::Bool(b) => EvalValue::Bool(b),
                    Value::Str(s) => EvalValue::Str(s),
                    Value::Unit => EvalValue::Str(String::new()),
                }
            }
            Expr::Card(a) => EvalValue::Int(self.aggregate(a)?.len() as i64),
            Expr::List(a) => EvalValue::List(self.aggregate(a)?),
            Expr::Quant(q) => EvalValue::Bool(self.quantifier(q)?.value),
            Expr::Satisfies(list, path) => {
                let EvalValue::List(items) = self.eval(list)? else {
                    return Err("not a list".into());
                };
                let mut ids = Vec::new();
                for i in items {
                    match i {
                        EvalValue::Event(id) => ids.push(id),
                        _ => return Err("not an event".into()),
                    }
                }
                let trace = self.trace;
                EvalValue::Bool(crate::paths::path_member(path, &ids, &mut |id, leaf| {
                    let ev = trace.event(id);
                    ev.kind == leaf.pattern.kind && leaf.pattern.is.as_ref().is_none_or(|n| *n == ev.name)
                }))
            }
            Expr::Not(a) => EvalValue::Bool(!self.eval(a)?.truthy()),
            Expr::Neg(a) => EvalValue::Int(-as_int(&self.eval(a)?)?),
            Expr::Binary(op, a, b) => {
                let l = self.eval(a)?;
                let r = self.eval(b)?;
                combine(*op, &l, &r)?
            }
        })
    }
}

fn as_int(v: &EvalValue) -> Result<i64, String> {
    match v {
        EvalValue::Int(n) => Ok(*n),
        EvalValue::Bool(b) => Ok(*b as i64),
        _ => Err("not an int".into()),
    }
}

fn combine(op: BinOp, l: &EvalValue, r: &EvalValue) -> Result<EvalValue, String> {
    use EvalValue::{Bool, Int, Str};
    Ok(match op {
        BinOp::And => Bool(l.truthy() && r.truthy()),
        BinOp::Or => Bool(l.truthy() || r.truthy()),
        BinOp::Eq | BinOp::Ne => {
            let eq = match (as_int(l), as_int(r)) {
                (Ok(a), Ok(b)) => a == b,
                _ => l == r,
            };
            Bool(if op == BinOp::Eq { eq } else { !eq })
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (l, r) {
                (Str(a), Str(b)) => a.cmp(b),
                _ => as_int(l)?.cmp(&as_int(r)?),
            };
            Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        BinOp::Add => match (l, r) {
            (Str(a), Str(b)) => Str(format!("{a}{b}")),
            _ => Int(as_int(l)? + as_int(r)?),
        },
        BinOp::Sub => Int(as_int(l)? - as_int(r)?),
        BinOp::Mul => Int(as_int(l)? * as_int(r)?),
        BinOp::Div | BinOp::Rem => {
            let (a, b) = (as_int(l)?, as_int(r)?);
            if b == 0 {
                return Err("division by zero".into());
            }
            Int(if op == BinOp::Div { a / b } else { a % b })
        }
    })
}

/// Whether `p` has no pattern context anywhere, so that leaves can be matched
/// by kind and name alone.
pub fn path_is_plain(p: &PathExpr) -> bool {
    p.leaves().iter().all(|l| l.pattern.context.is_none())
}

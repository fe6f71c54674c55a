//! Random traces and random rule expressions for differential testing of the
//! evaluator.
//!
//! Every event of a random trace carries the probes `x` (an int in 0..5) and
//! `y` (a bool), and the generated expressions read only those, never divide
//! and never negate, so evaluating them cannot fail.

use std::collections::BTreeMap;

use evtrace::trace::GroupTag;
use evtrace::{Event, EventId, EventKind, Trace, Value};
use rand::seq::SliceRandom;
use rand::Rng;

pub const NAMES: [&str; 3] = ["a", "b", "c"];
pub const FUNCTIONS: [&str; 3] = ["main", "f", "g"];

/// A random well-nested trace with at most `max_events` events. Kinds, names
/// and enclosing functions are drawn freely, so the trace need not follow the
/// event grammar.
pub fn random_trace<R: Rng>(rng: &mut R, max_events: usize) -> Trace {
    let mut b = TraceGen { events: Vec::new(), clock: 0, budget: max_events.max(1) };
    b.node(rng, None, 0);
    Trace::new("random", b.events).expect("generated traces are well nested")
}

struct TraceGen {
    events: Vec<Event>,
    clock: u64,
    budget: usize,
}

impl TraceGen {
    fn node<R: Rng>(&mut self, rng: &mut R, parent: Option<EventId>, depth: usize) {
        self.budget -= 1;
        let id = EventId(self.events.len());
        let kind = if parent.is_none() {
            EventKind::ExecuteProgram
        } else {
            *[EventKind::ExStmt, EventKind::EvalExpr, EventKind::FuncCall, EventKind::Destination].choose(rng).unwrap()
        };
        let mut probes = BTreeMap::new();
        probes.insert("x".to_string(), Ok(Value::Int(rng.gen_range(0..5))));
        probes.insert("y".to_string(), Ok(Value::Bool(rng.gen_bool(0.5))));
        self.clock += 1;
        self.events.push(Event {
            id,
            kind,
            name: NAMES.choose(rng).unwrap().to_string(),
            source_line: rng.gen_range(1..50),
            enclosing_function: FUNCTIONS.choose(rng).unwrap().to_string(),
            begin_time: self.clock,
            end_time: self.clock,
            parent,
            unordered_group: if rng.gen_bool(0.2) { parent.map(|p| GroupTag(p.0 as u64)) } else { None },
            probes,
        });
        if kind == EventKind::Destination {
            return;
        }
        let want = if parent.is_none() {
            6
        } else if depth < 4 {
            rng.gen_range(0..4)
        } else {
            0
        };
        for _ in 0..want {
            if self.budget == 0 {
                break;
            }
            self.node(rng, Some(id), depth + 1);
        }
        self.clock += 1;
        self.events[id.0].end_time = self.clock;
    }
}

/// A flat trace whose top-level events spell `word`, for path tests. The ids
/// of the letters are `1..=word.len()`.
pub fn word_trace(word: &[(EventKind, String)]) -> Trace {
    let mut events = vec![Event {
        id: EventId(0),
        kind: EventKind::ExecuteProgram,
        name: "word".into(),
        source_line: 1,
        enclosing_function: "word".into(),
        begin_time: 1,
        end_time: 2 * word.len() as u64 + 2,
        parent: None,
        unordered_group: None,
        probes: BTreeMap::new(),
    }];
    for (i, (kind, name)) in word.iter().enumerate() {
        let t = 2 * i as u64 + 2;
        events.push(Event {
            id: EventId(i + 1),
            kind: *kind,
            name: name.clone(),
            source_line: 1,
            enclosing_function: "main".into(),
            begin_time: t,
            end_time: t + 1,
            parent: Some(EventId(0)),
            unordered_group: None,
            probes: BTreeMap::new(),
        });
    }
    Trace::new("word", events).expect("flat traces are well nested")
}

/// Random rule-language expressions over the probes of [`random_trace`].
pub struct QueryGen<'r, R: Rng> {
    rng: &'r mut R,
    next: usize,
}

impl<'r, R: Rng> QueryGen<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        QueryGen { rng, next: 0 }
    }

    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("M{}", self.next)
    }

    /// A top-level expression: a quantifier, a count comparison, an `APPLY`
    /// list or a boolean combination of those.
    pub fn query(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 | 1 => self.quantifier(&[], 2),
            2 => self.card(&[], 1),
            3 => self.list(&[]),
            4 => {
                let op = if self.rng.gen_bool(0.5) { "AND" } else { "OR" };
                format!("({}) {op} ({})", self.quantifier(&[], 1), self.card(&[], 1))
            }
            _ => format!("NOT ({})", self.quantifier(&[], 1)),
        }
    }

    /// A quantified expression with its body in parentheses.
    pub fn quantifier(&mut self, bound: &[String], depth: usize) -> String {
        let q = if self.rng.gen_bool(0.5) { "EXISTS" } else { "FOREACH" };
        let m = self.fresh();
        let sel = self.selection(bound, &m, true);
        let mut inner = bound.to_vec();
        inner.push(m.clone());
        if self.rng.gen_bool(0.15) {
            return format!("{q} {sel}");
        }
        format!("{q} {sel} ({})", self.condition(&inner, &m, depth))
    }

    fn selection(&mut self, bound: &[String], m: &str, named: bool) -> String {
        let all = if self.rng.gen_bool(0.5) { "ALL " } else { "" };
        let kind = ["ex_stmt", "eval_expr", "func_call", "destination"].choose(self.rng).unwrap();
        let is = match self.rng.gen_range(0..4) {
            0 => format!(" IS '{}'", NAMES.choose(self.rng).unwrap()),
            1 => format!(" IS {}", NAMES.choose(self.rng).unwrap()),
            _ => String::new(),
        };
        let ctx = if named && self.rng.gen_bool(0.35) { format!(" & {}", self.atom(m)) } else { String::new() };
        let from = match bound.choose(self.rng) {
            Some(b) if self.rng.gen_bool(0.6) => b.clone(),
            _ => "execute_program".to_string(),
        };
        let label = if named { format!("{m}: ") } else { String::new() };
        format!("{all}{label}{kind}{is}{ctx} FROM {from}")
    }

    // a comparison about the event bound to `m`
    fn atom(&mut self, m: &str) -> String {
        match self.rng.gen_range(0..4) {
            0 => {
                let op = ["==", "!=", "<", "<=", ">", ">="].choose(self.rng).unwrap();
                format!("VALUE(int)(AT {m} x) {op} {}", self.rng.gen_range(0..5))
            }
            1 => format!("VALUE(bool)(AT {m} y)"),
            2 => format!("SOURCE_TEXT({m}) == '{}'", NAMES.choose(self.rng).unwrap()),
            _ => format!("VALUE(int)(AT {m} x) + VALUE(int)(AT {m} y) > {}", self.rng.gen_range(0..5)),
        }
    }

    fn condition(&mut self, bound: &[String], m: &str, depth: usize) -> String {
        match self.rng.gen_range(0..6) {
            0 if depth > 0 => self.quantifier(bound, depth - 1),
            1 if depth > 0 => self.card(bound, depth - 1),
            2 => format!("{} AND {}", self.atom(m), self.atom(m)),
            3 => format!("{} OR NOT {}", self.atom(m), self.atom(m)),
            _ => self.atom(m),
        }
    }

    /// `CARD [...]` compared with a small constant.
    pub fn card(&mut self, bound: &[String], _depth: usize) -> String {
        let m = self.fresh();
        let named = self.rng.gen_bool(0.7);
        let sel = self.selection(bound, &m, named);
        let op = ["==", "!=", "<", ">", ">="].choose(self.rng).unwrap();
        format!("CARD [{sel}] {op} {}", self.rng.gen_range(0..8))
    }

    /// `[M: ... APPLY ...]`
    pub fn list(&mut self, bound: &[String]) -> String {
        let m = self.fresh();
        let sel = self.selection(bound, &m, true);
        let apply = match self.rng.gen_range(0..3) {
            0 => format!("VALUE(int)(AT {m} x)"),
            1 => format!("SOURCE_TEXT({m})"),
            _ => format!("VALUE(int)(AT {m} x) * 2 + 1"),
        };
        format!("[{sel} APPLY {apply}]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn traces_respect_the_size_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t = random_trace(&mut rng, 200);
            assert!(t.len() <= 200);
        }
    }

    #[test]
    fn queries_parse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let text = QueryGen::new(&mut rng).query();
            evtrace::forman::parse_expr(&text, &[]).unwrap_or_else(|e| panic!("{text}: {e}"));
        }
    }
}

//! The event trace: events as time intervals, the PRECEDES and IN relations,
//! and a checker for the event grammar axioms.
//!
//! Event ids are assigned in begin-record order, so the ids of a trace are a
//! preorder numbering of the event tree and the descendants of an event form a
//! contiguous id range. Most queries below lean on that.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::value::ProbeResult;

/// The five event types of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    ExecuteProgram,
    ExStmt,
    EvalExpr,
    FuncCall,
    Destination,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::ExecuteProgram,
        EventKind::ExStmt,
        EventKind::EvalExpr,
        EventKind::FuncCall,
        EventKind::Destination,
    ];

    /// Rule-language spelling of the kind.
    pub fn keyword(self) -> &'static str {
        match self {
            EventKind::ExecuteProgram => "execute_program",
            EventKind::ExStmt => "ex_stmt",
            EventKind::EvalExpr => "eval_expr",
            EventKind::FuncCall => "func_call",
            EventKind::Destination => "destination",
        }
    }

    pub fn from_keyword(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.keyword() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub usize);

impl EventId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Tag shared by sibling events that form an unordered set (call arguments,
/// operands of an operator with unspecified evaluation order). The runtime
/// uses the begin time of the grouping event, which is unique per trace and
/// independent of filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupTag(pub u64);

/// Step-counter value.
pub type Time = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: EventId,
    pub kind: EventKind,
    pub name: String,
    pub source_line: u32,
    pub enclosing_function: String,
    pub begin_time: Time,
    pub end_time: Time,
    pub parent: Option<EventId>,
    pub unordered_group: Option<GroupTag>,
    /// Probe expression text to the value recorded at the end of the event.
    pub probes: BTreeMap<String, ProbeResult>,
}

impl Event {
    pub fn duration(&self) -> Time {
        self.end_time - self.begin_time
    }

    pub fn is_atomic(&self) -> bool {
        self.begin_time == self.end_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace has no events")]
    Empty,
    #[error("event at position {position} carries id {found}")]
    IdOutOfOrder { position: usize, found: EventId },
    #[error("event {0} must be the only execute_program event and have no parent")]
    BadRoot(EventId),
    #[error("event {0} has no valid parent")]
    MissingParent(EventId),
    #[error("event {0} ends before it begins")]
    NegativeInterval(EventId),
    #[error("event {child} is not contained in its parent {parent}")]
    NotContained { child: EventId, parent: EventId },
    #[error("events {first} and {second} overlap")]
    Overlap { first: EventId, second: EventId },
    #[error("event ids are not in begin order at {0}")]
    NotPreorder(EventId),
    #[error("unknown event id {0}")]
    UnknownEvent(EventId),
}

/// A complete, immutable event trace.
#[derive(Debug, Clone)]
pub struct Trace {
    source_name: String,
    events: Vec<Event>,
    children: Vec<Vec<EventId>>,
    // last id in the subtree rooted at each event
    subtree_end: Vec<usize>,
}

impl PartialEq for Trace {
    fn eq(&self, other: &Self) -> bool {
        self.source_name == other.source_name && self.events == other.events
    }
}

impl Trace {
    /// Builds a trace, checking ids, parent links and interval nesting.
    pub fn new(source_name: impl Into<String>, events: Vec<Event>) -> Result<Trace, TraceError> {
        if events.is_empty() {
            return Err(TraceError::Empty);
        }
        for (position, e) in events.iter().enumerate() {
            if e.id.0 != position {
                return Err(TraceError::IdOutOfOrder { position, found: e.id });
            }
            if e.begin_time > e.end_time {
                return Err(TraceError::NegativeInterval(e.id));
            }
            let is_root = position == 0;
            if is_root != (e.kind == EventKind::ExecuteProgram) || (is_root && e.parent.is_some()) {
                return Err(TraceError::BadRoot(e.id));
            }
        }

        let n = events.len();
        let mut children = vec![Vec::<EventId>::new(); n];
        let mut stack: Vec<usize> = vec![0];
        for e in &events[1..] {
            let parent = match e.parent {
                Some(p) if p.0 < e.id.0 => p.0,
                _ => return Err(TraceError::MissingParent(e.id)),
            };
            while stack.last().is_some_and(|&top| top != parent) {
                stack.pop();
            }
            if stack.is_empty() {
                return Err(TraceError::NotPreorder(e.id));
            }
            let p = &events[parent];
            if e.begin_time < p.begin_time || e.end_time > p.end_time {
                return Err(TraceError::NotContained { child: e.id, parent: p.id });
            }
            if let Some(&prev) = children[parent].last() {
                let prev: &Event = &events[prev.0];
                if prev.end_time >= e.begin_time {
                    return Err(TraceError::Overlap { first: prev.id, second: e.id });
                }
            }
            children[parent].push(e.id);
            stack.push(e.id.0);
        }

        let mut subtree_end: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let p = events[i].parent.expect("checked above").0;
            subtree_end[p] = subtree_end[p].max(subtree_end[i]);
        }

        Ok(Trace { source_name: source_name.into(), events, children, subtree_end })
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn root(&self) -> EventId {
        EventId(0)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Panics on an unknown id; use [`Trace::get`] for checked access.
    pub fn event(&self, id: EventId) -> &Event {
        &self.events[id.0]
    }

    pub fn get(&self, id: EventId) -> Option<&Event> {
        self.events.get(id.0)
    }

    pub fn step_max(&self) -> Time {
        self.events[0].end_time
    }

    pub fn children(&self, id: EventId) -> &[EventId] {
        &self.children[id.0]
    }

    /// Proper descendants of `id` in id order.
    pub fn descendants(&self, id: EventId) -> impl Iterator<Item = EventId> {
        (id.0 + 1..=self.subtree_end[id.0]).map(EventId)
    }

    /// Last id inside the subtree of `id` (itself when it is a leaf).
    pub fn subtree_end(&self, id: EventId) -> EventId {
        EventId(self.subtree_end[id.0])
    }

    /// True when `ancestor` properly contains `id`.
    pub fn is_ancestor(&self, ancestor: EventId, id: EventId) -> bool {
        ancestor.0 < id.0 && id.0 <= self.subtree_end[ancestor.0]
    }

    fn check(&self, id: EventId) -> Result<&Event, TraceError> {
        self.get(id).ok_or(TraceError::UnknownEvent(id))
    }

    /// `a PRECEDES b`: `a` ends before `b` begins, neither contains the other,
    /// and they are not members of one unordered set.
    pub fn precedes(&self, a: EventId, b: EventId) -> Result<bool, TraceError> {
        let (ea, eb) = (self.check(a)?, self.check(b)?);
        if a == b || self.is_ancestor(a, b) || self.is_ancestor(b, a) {
            return Ok(false);
        }
        if ea.unordered_group.is_some() && ea.unordered_group == eb.unordered_group && ea.parent == eb.parent {
            return Ok(false);
        }
        Ok(ea.end_time < eb.begin_time)
    }

    /// `a IN b`: `b` is a proper ancestor of `a`.
    pub fn included_in(&self, a: EventId, b: EventId) -> Result<bool, TraceError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.is_ancestor(b, a))
    }

    /// Every event that precedes `a`, in id order.
    pub fn previous_path(&self, a: EventId) -> Result<Vec<EventId>, TraceError> {
        let target = self.check(a)?;
        let mut path = Vec::new();
        // only events beginning before `a` can precede it
        for e in &self.events[..a.0] {
            if e.end_time < target.begin_time && self.precedes(e.id, a)? {
                path.push(e.id);
            }
        }
        Ok(path)
    }
}

/// One axiom violation found by [`validate_grammar`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub event: EventId,
    pub axiom: u8,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GrammarReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks the containment structure of every event against the grammar:
///
/// ```text
/// execute_program :: ( ex_stmt | eval_expr )*
/// ex_stmt         :: ( ex_stmt | eval_expr )*
/// eval_expr       :: func_call | eval_expr* destination? | { eval_expr }+
/// func_call       :: { eval_expr }* ex_stmt*
/// ```
///
/// Destination events must be atomic leaves.
pub fn validate_grammar(trace: &Trace) -> GrammarReport {
    let mut violations = Vec::new();
    let mut report = |event: EventId, axiom: u8, message: String| {
        violations.push(Violation { event, axiom, message });
    };

    for e in trace.events() {
        let kids: Vec<&Event> = trace.children(e.id).iter().map(|&c| trace.event(c)).collect();
        match e.kind {
            EventKind::ExecuteProgram | EventKind::ExStmt => {
                let axiom = if e.kind == EventKind::ExecuteProgram { 1 } else { 2 };
                for k in &kids {
                    if !matches!(k.kind, EventKind::ExStmt | EventKind::EvalExpr) {
                        report(k.id, axiom, format!("{} may not contain {}", e.kind, k.kind));
                    }
                }
            }
            EventKind::EvalExpr => {
                if let Some(msg) = eval_expr_shape(&kids) {
                    report(e.id, 3, msg);
                }
            }
            EventKind::FuncCall => {
                let mut group = None;
                let mut in_body = false;
                for k in &kids {
                    match k.kind {
                        EventKind::EvalExpr if !in_body => match (group, k.unordered_group) {
                            (_, None) => report(k.id, 4, "argument evaluation is not part of an unordered set".into()),
                            (None, Some(g)) => group = Some(g),
                            (Some(g), Some(h)) if g != h => {
                                report(k.id, 4, "arguments belong to more than one unordered set".into())
                            }
                            _ => {}
                        },
                        EventKind::EvalExpr => {
                            report(k.id, 4, "argument evaluation after function body statements".into())
                        }
                        EventKind::ExStmt => in_body = true,
                        other => report(k.id, 4, format!("func_call may not contain {other}")),
                    }
                }
            }
            EventKind::Destination => {
                if !kids.is_empty() || !e.is_atomic() {
                    report(e.id, 3, "destination must be an atomic leaf event".into());
                }
            }
        }
    }

    GrammarReport { ok: violations.is_empty(), violations }
}

fn eval_expr_shape(kids: &[&Event]) -> Option<String> {
    if kids.is_empty() {
        return None;
    }
    if kids.iter().any(|k| k.kind == EventKind::FuncCall) {
        return (kids.len() != 1).then(|| "func_call must be the only event inside eval_expr".to_string());
    }
    let (last, init) = kids.split_last().expect("non-empty");
    let operands = if last.kind == EventKind::Destination { init } else { kids };
    if let Some(bad) = operands.iter().find(|k| k.kind != EventKind::EvalExpr) {
        return Some(format!("eval_expr may not contain {} here", bad.kind));
    }
    let groups: Vec<Option<GroupTag>> = operands.iter().map(|k| k.unordered_group).collect();
    let unordered = groups.first().copied().flatten();
    match unordered {
        None if groups.iter().any(Option::is_some) => Some("eval_expr mixes ordered and unordered operands".into()),
        Some(g) if groups.iter().any(|&h| h != Some(g)) => {
            Some("eval_expr mixes ordered and unordered operands".into())
        }
        Some(_) if last.kind == EventKind::Destination => {
            Some("an unordered operand set may not be followed by a destination".into())
        }
        _ => None,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Compact builder for hand-made traces in tests.
    pub(crate) struct Builder {
        events: Vec<Event>,
        stack: Vec<usize>,
        clock: Time,
    }

    impl Builder {
        pub(crate) fn new() -> Builder {
            let mut b = Builder { events: Vec::new(), stack: Vec::new(), clock: 0 };
            b.open(EventKind::ExecuteProgram, "prog", None);
            b
        }

        pub(crate) fn open(&mut self, kind: EventKind, name: &str, group: Option<u64>) -> EventId {
            self.clock += 1;
            let id = EventId(self.events.len());
            self.events.push(Event {
                id,
                kind,
                name: name.to_string(),
                source_line: 1,
                enclosing_function: "main".into(),
                begin_time: self.clock,
                end_time: self.clock,
                parent: self.stack.last().map(|&p| EventId(p)),
                unordered_group: group.map(GroupTag),
                probes: BTreeMap::new(),
            });
            self.stack.push(id.0);
            id
        }

        pub(crate) fn close(&mut self) {
            self.clock += 1;
            let i = self.stack.pop().unwrap();
            self.events[i].end_time = self.clock;
        }

        pub(crate) fn atomic(&mut self, kind: EventKind, name: &str) -> EventId {
            let id = self.open(kind, name, None);
            self.stack.pop();
            id
        }

        pub(crate) fn leaf(&mut self, kind: EventKind, name: &str, group: Option<u64>) -> EventId {
            let id = self.open(kind, name, group);
            self.close();
            id
        }

        pub(crate) fn finish(mut self) -> Trace {
            while !self.stack.is_empty() {
                self.close();
            }
            Trace::new("prog", self.events).unwrap()
        }
    }

    #[test]
    fn precedes_disjoint_and_nested() {
        let mut b = Builder::new();
        let s1 = b.open(EventKind::ExStmt, "a;", None);
        let inner = b.leaf(EventKind::EvalExpr, "1", None);
        b.close();
        let s2 = b.leaf(EventKind::ExStmt, "b;", None);
        let t = b.finish();
        assert!(t.precedes(s1, s2).unwrap());
        assert!(!t.precedes(s2, s1).unwrap());
        assert!(!t.precedes(inner, s1).unwrap());
        assert!(t.included_in(inner, s1).unwrap());
        assert!(t.included_in(s2, t.root()).unwrap());
        assert!(!t.included_in(s1, s2).unwrap());
        assert!(t.precedes(inner, s2).unwrap());
    }

    #[test]
    fn unordered_arguments_never_precede() {
        let mut b = Builder::new();
        b.open(EventKind::ExStmt, "f(1, 2);", None);
        b.open(EventKind::EvalExpr, "f(1, 2)", None);
        b.open(EventKind::FuncCall, "f", None);
        let a1 = b.leaf(EventKind::EvalExpr, "1", Some(7));
        let a2 = b.leaf(EventKind::EvalExpr, "2", Some(7));
        let t = b.finish();
        assert!(!t.precedes(a1, a2).unwrap());
        assert!(!t.precedes(a2, a1).unwrap());
        assert!(t.previous_path(a2).unwrap().is_empty());
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let t = Builder::new().finish();
        assert_eq!(t.precedes(EventId(0), EventId(9)), Err(TraceError::UnknownEvent(EventId(9))));
        assert!(t.included_in(EventId(4), EventId(0)).is_err());
        assert!(t.previous_path(EventId(1)).is_err());
    }

    #[test]
    fn first_event_has_empty_previous_path() {
        let mut b = Builder::new();
        let s = b.leaf(EventKind::ExStmt, "x;", None);
        let t = b.finish();
        assert!(t.previous_path(t.root()).unwrap().is_empty());
        assert!(t.previous_path(s).unwrap().is_empty());
    }

    #[test]
    fn destination_under_statement_violates_axiom_2() {
        let mut b = Builder::new();
        b.open(EventKind::ExStmt, "x = 1;", None);
        let d = b.atomic(EventKind::Destination, "x");
        let t = b.finish();
        let report = validate_grammar(&t);
        assert!(!report.ok);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].axiom, 2);
        assert_eq!(report.violations[0].event, d);
    }

    #[test]
    fn body_before_arguments_violates_axiom_4() {
        let mut b = Builder::new();
        b.open(EventKind::ExStmt, "f(1);", None);
        b.open(EventKind::EvalExpr, "f(1)", None);
        b.open(EventKind::FuncCall, "f", None);
        b.leaf(EventKind::ExStmt, "return;", None);
        b.leaf(EventKind::EvalExpr, "1", Some(3));
        let t = b.finish();
        let report = validate_grammar(&t);
        assert!(report.violations.iter().any(|v| v.axiom == 4));
    }

    #[test]
    fn assignment_shape_is_valid() {
        let mut b = Builder::new();
        b.open(EventKind::ExStmt, "x = 0;", None);
        b.open(EventKind::EvalExpr, "x = 0", None);
        b.leaf(EventKind::EvalExpr, "0", None);
        b.atomic(EventKind::Destination, "x");
        let t = b.finish();
        assert_eq!(validate_grammar(&t), GrammarReport { ok: true, violations: vec![] });
    }

    #[test]
    fn destination_must_be_last_and_atomic() {
        let mut b = Builder::new();
        b.open(EventKind::ExStmt, "x = 0;", None);
        b.open(EventKind::EvalExpr, "x = 0", None);
        b.atomic(EventKind::Destination, "x");
        b.leaf(EventKind::EvalExpr, "0", None);
        let t = b.finish();
        assert!(validate_grammar(&t).violations.iter().any(|v| v.axiom == 3));

        let mut b = Builder::new();
        b.open(EventKind::ExStmt, "x = 0;", None);
        b.open(EventKind::EvalExpr, "x = 0", None);
        b.leaf(EventKind::Destination, "x", None);
        let t = b.finish();
        assert!(!validate_grammar(&t).ok);
    }

    #[test]
    fn malformed_structures_are_rejected() {
        let mut b = Builder::new();
        b.leaf(EventKind::ExStmt, "a;", None);
        b.close();
        let mut events = b.events.clone();
        events[1].end_time = 100;
        assert!(matches!(Trace::new("p", events), Err(TraceError::NotContained { .. })));

        let mut events = b.events.clone();
        events[1].id = EventId(5);
        assert!(matches!(Trace::new("p", events), Err(TraceError::IdOutOfOrder { .. })));

        assert_eq!(Trace::new("p", vec![]), Err(TraceError::Empty));
    }

    #[test]
    fn overlapping_siblings_are_rejected() {
        let mut b = Builder::new();
        b.leaf(EventKind::ExStmt, "a;", None);
        b.leaf(EventKind::ExStmt, "b;", None);
        b.close();
        let mut events = b.events;
        events[1].end_time = events[2].begin_time;
        assert!(matches!(Trace::new("p", events), Err(TraceError::Overlap { .. })));
    }

    #[test]
    fn keyword_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(EventKind::from_keyword(k.keyword()), Some(k));
        }
        assert_eq!(EventKind::from_keyword("statement"), None);
    }
}

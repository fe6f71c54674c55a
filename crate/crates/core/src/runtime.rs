//! Tree-walking MiniC interpreter that records the event trace as it runs.
//!
//! Every statement execution, every expression evaluation other than a plain
//! variable read, every call and every assignment target is an event. Each
//! event boundary advances the step counter by one; atomic events (assignment
//! destinations and label traversals) take a single tick, so their begin and
//! end times coincide. The counter also ticks for events the filter drops, so
//! the times of recorded events do not depend on the filter.
//!
//! `return` and `break` unwind through the Rust call stack, which closes the
//! events of every statement being left in innermost-first order.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::filter::{Filter, Footprint};
use crate::minic::{self, BinOp, Expr, ExprKind, MiniProgram, Stmt, StmtKind, UnOp};
use crate::trace::{Event, EventId, EventKind, GroupTag, Time, Trace};
use crate::value::{Cast, ProbeResult, Value};

/// Default cap on generated events; `EVTRACE_MAX_EVENTS` overrides it in the
/// command-line tool.
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

/// Deepest MiniC call nesting before the run is aborted.
pub const MAX_CALL_DEPTH: usize = 200;

/// An expression to evaluate in program state at the end of every recorded
/// event that matches `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRequest {
    pub target: Footprint,
    pub expr: Expr,
    pub expr_text: String,
    pub guard: Option<ProbeGuard>,
}

impl ProbeRequest {
    pub fn new(target: Footprint, expr: Expr) -> ProbeRequest {
        let expr_text = minic::expr_to_string(&expr);
        ProbeRequest { target, expr, expr_text, guard: None }
    }
}

/// Evaluate the guarded probe only when another probe on the same event has
/// already produced a value whose converted truthiness equals `expect`. This
/// is how `VALUE(..) AND VALUE(..)` short-circuits side-effecting probes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeGuard {
    pub expr_text: String,
    pub cast: Cast,
    pub expect: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    pub max_events: u64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { max_events: DEFAULT_MAX_EVENTS }
    }
}

/// A fault in the target program. The trace is still closed and returned.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct RuntimeError {
    pub message: String,
    pub line: u32,
    /// Innermost recorded event open when the fault happened.
    pub event: Option<EventId>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Trace,
    pub program_output: String,
    pub steps: Time,
    pub events_emitted: u64,
    pub events_suppressed: u64,
    pub generated_by_kind: [u64; 5],
    pub emitted_by_kind: [u64; 5],
    pub error: Option<RuntimeError>,
}

impl RunResult {
    pub fn events_generated(&self) -> u64 {
        self.events_emitted + self.events_suppressed
    }
}

/// Outcome of an uninstrumented run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainRun {
    pub output: String,
    pub error: Option<RuntimeError>,
}

/// Runs `program` while recording events admitted by `filter` and evaluating
/// `probes` on them.
pub fn execute(
    program: &MiniProgram,
    stdin: &str,
    filter: &Filter,
    probes: &[ProbeRequest],
    options: ExecOptions,
) -> RunResult {
    let recorder = Recorder::new(filter, probes, options.max_events);
    let mut m = Machine::new(program, stdin, Some(recorder));
    let outcome = m.run();
    let mut rec = m.rec.take().expect("recorder present");
    let error = outcome.err().map(|fault| {
        let event = rec.innermost_recorded();
        rec.close_all();
        RuntimeError { message: fault.message, line: fault.line, event }
    });
    let steps = rec.clock;
    let suppressed = rec.generated - rec.events.len() as u64;
    let events_emitted = rec.events.len() as u64;
    let trace = Trace::new(program.name.clone(), rec.events).expect("the recorder only produces well-nested traces");
    RunResult {
        trace,
        program_output: m.output,
        steps,
        events_emitted,
        events_suppressed: suppressed,
        generated_by_kind: rec.generated_by_kind,
        emitted_by_kind: rec.emitted_by_kind,
        error,
    }
}

/// Runs `program` with no instrumentation at all.
pub fn run_plain(program: &MiniProgram, stdin: &str) -> PlainRun {
    let mut m = Machine::new(program, stdin, None);
    let error = m.run().err().map(|f| RuntimeError { message: f.message, line: f.line, event: None });
    PlainRun { output: m.output, error }
}

struct Fault {
    message: String,
    line: u32,
}

fn fault<T>(line: u32, message: impl Into<String>) -> Result<T, Fault> {
    Err(Fault { message: message.into(), line })
}

struct Open {
    slot: Option<usize>,
    // nearest recorded event at or above this one
    anchor: Option<EventId>,
    begin: Time,
}

struct Recorder<'a> {
    filter: &'a Filter,
    probes: &'a [ProbeRequest],
    max_events: u64,
    clock: Time,
    generated: u64,
    generated_by_kind: [u64; 5],
    emitted_by_kind: [u64; 5],
    events: Vec<Event>,
    open: Vec<Open>,
}

impl<'a> Recorder<'a> {
    fn new(filter: &'a Filter, probes: &'a [ProbeRequest], max_events: u64) -> Recorder<'a> {
        Recorder {
            filter,
            probes,
            max_events,
            clock: 0,
            generated: 0,
            generated_by_kind: [0; 5],
            emitted_by_kind: [0; 5],
            events: Vec::new(),
            open: Vec::new(),
        }
    }

    fn anchor(&self) -> Option<EventId> {
        self.open.last().and_then(|o| o.anchor)
    }

    fn innermost_recorded(&self) -> Option<EventId> {
        self.anchor()
    }

    /// Starts an event; returns the slot of the recorded event if admitted.
    fn start(
        &mut self,
        kind: EventKind,
        name: &str,
        line: u32,
        function: &str,
        group: Option<GroupTag>,
    ) -> Result<Option<usize>, Fault> {
        if self.generated >= self.max_events {
            return fault(line, format!("event limit of {} exceeded", self.max_events));
        }
        self.generated += 1;
        self.generated_by_kind[kind.index()] += 1;
        self.clock += 1;
        let admitted = kind == EventKind::ExecuteProgram || self.filter.admits(kind, name, function);
        if !admitted {
            return Ok(None);
        }
        let id = EventId(self.events.len());
        self.emitted_by_kind[kind.index()] += 1;
        self.events.push(Event {
            id,
            kind,
            name: name.to_string(),
            source_line: line,
            enclosing_function: function.to_string(),
            begin_time: self.clock,
            end_time: self.clock,
            parent: self.anchor(),
            unordered_group: group,
            probes: BTreeMap::new(),
        });
        Ok(Some(id.0))
    }

    fn begin(
        &mut self,
        kind: EventKind,
        name: &str,
        line: u32,
        function: &str,
        group: Option<GroupTag>,
    ) -> Result<(), Fault> {
        let slot = self.start(kind, name, line, function, group)?;
        let anchor = slot.map(EventId).or_else(|| self.anchor());
        self.open.push(Open { slot, anchor, begin: self.clock });
        Ok(())
    }

    fn end(&mut self) -> Option<usize> {
        self.clock += 1;
        let open = self.open.pop().expect("end without begin");
        if let Some(slot) = open.slot {
            self.events[slot].end_time = self.clock;
        }
        open.slot
    }

    fn close_all(&mut self) {
        while !self.open.is_empty() {
            self.end();
        }
    }
}

enum Flow {
    Normal,
    Break,
    Return(Value),
}

struct Frame<'p> {
    function: &'p str,
    scopes: Vec<HashMap<String, Value>>,
}

struct Machine<'p, 'r> {
    program: &'p MiniProgram,
    input: &'p str,
    input_pos: usize,
    output: String,
    globals: HashMap<String, Value>,
    frames: Vec<Frame<'p>>,
    rec: Option<Recorder<'r>>,
    // probe evaluation runs with recording switched off
    quiet: bool,
}

impl<'p, 'r> Machine<'p, 'r> {
    fn new(program: &'p MiniProgram, input: &'p str, rec: Option<Recorder<'r>>) -> Self {
        let globals =
            program.globals.iter().map(|g| (g.name.clone(), g.init.clone().unwrap_or(Value::Int(0)))).collect();
        Machine { program, input, input_pos: 0, output: String::new(), globals, frames: Vec::new(), rec, quiet: false }
    }

    fn run(&mut self) -> Result<(), Fault> {
        let name = self.program.name.as_str();
        self.begin(EventKind::ExecuteProgram, name, 1, name, None)?;
        let main = self.program.main();
        self.frames.push(Frame { function: "main", scopes: vec![HashMap::new()] });
        for s in &main.body {
            if let Flow::Return(_) = self.exec(s)? {
                break;
            }
        }
        self.frames.pop();
        self.end_event();
        Ok(())
    }

    fn function(&self) -> &'p str {
        self.frames.last().map_or(self.program.name.as_str(), |f| f.function)
    }

    fn recording(&mut self) -> Option<&mut Recorder<'r>> {
        if self.quiet {
            None
        } else {
            self.rec.as_mut()
        }
    }

    fn begin(
        &mut self,
        kind: EventKind,
        name: &str,
        line: u32,
        function: &str,
        group: Option<GroupTag>,
    ) -> Result<(), Fault> {
        match self.recording() {
            Some(rec) => rec.begin(kind, name, line, function, group),
            None => Ok(()),
        }
    }

    fn end_event(&mut self) {
        if let Some(slot) = self.recording().and_then(Recorder::end) {
            self.run_probes(slot);
        }
    }

    fn atomic(&mut self, kind: EventKind, name: &str, line: u32) -> Result<(), Fault> {
        let function = self.function();
        let slot = match self.recording() {
            Some(rec) => rec.start(kind, name, line, function, None)?,
            None => return Ok(()),
        };
        if let Some(slot) = slot {
            self.run_probes(slot);
        }
        Ok(())
    }

    /// Group tag for the children of the innermost open event.
    fn group_here(&mut self) -> Option<GroupTag> {
        self.recording().and_then(|r| r.open.last()).map(|o| GroupTag(o.begin))
    }

    fn run_probes(&mut self, slot: usize) {
        let Some(rec) = self.rec.as_ref() else { return };
        let probes = rec.probes;
        if probes.is_empty() {
            return;
        }
        let (kind, name, function) = {
            let e = &rec.events[slot];
            (e.kind, e.name.clone(), e.enclosing_function.clone())
        };
        let mut results: BTreeMap<String, ProbeResult> = BTreeMap::new();
        for req in probes {
            if !req.target.matches(kind, &name, &function) || results.contains_key(&req.expr_text) {
                continue;
            }
            if let Some(guard) = &req.guard {
                let pass = match results.get(&guard.expr_text) {
                    Some(Ok(v)) => guard.cast.apply(v).map(|v| v.truthy() == guard.expect),
                    _ => Ok(false),
                };
                if pass != Ok(true) {
                    continue;
                }
            }
            self.quiet = true;
            let value = self.eval(&req.expr, None).map_err(|f| f.message);
            self.quiet = false;
            results.insert(req.expr_text.clone(), value);
        }
        if let Some(rec) = self.rec.as_mut() {
            rec.events[slot].probes = results;
        }
    }

    fn lookup(&self, name: &str, line: u32) -> Result<Value, Fault> {
        if let Some(frame) = self.frames.last() {
            for scope in frame.scopes.iter().rev() {
                if let Some(v) = scope.get(name) {
                    return Ok(v.clone());
                }
            }
        }
        match self.globals.get(name) {
            Some(v) => Ok(v.clone()),
            None => fault(line, format!("unknown variable `{name}`")),
        }
    }

    fn store(&mut self, name: &str, value: Value, line: u32) -> Result<(), Fault> {
        if let Some(frame) = self.frames.last_mut() {
            for scope in frame.scopes.iter_mut().rev() {
                if let Some(slot) = scope.get_mut(name) {
                    *slot = value;
                    return Ok(());
                }
            }
        }
        match self.globals.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => fault(line, format!("unknown variable `{name}`")),
        }
    }

    fn declare(&mut self, name: &str, value: Value) {
        let frame = self.frames.last_mut().expect("statements run inside a frame");
        frame.scopes.last_mut().expect("frame has a scope").insert(name.to_string(), value);
    }

    fn scoped(&mut self, s: &Stmt) -> Result<Flow, Fault> {
        self.frames.last_mut().expect("frame").scopes.push(HashMap::new());
        let flow = self.exec(s);
        self.frames.last_mut().expect("frame").scopes.pop();
        flow
    }

    fn exec(&mut self, s: &Stmt) -> Result<Flow, Fault> {
        let line = s.span.line;
        if let StmtKind::Labeled { label, body, .. } = &s.kind {
            // the label traversal is an empty statement of its own
            self.atomic(EventKind::ExStmt, &format!("{label}:"), line)?;
            return self.exec(body);
        }
        let function = self.function();
        self.begin(EventKind::ExStmt, &s.text, line, function, None)?;
        let flow = match &s.kind {
            StmtKind::Expr(e) => {
                self.eval(e, None)?;
                Flow::Normal
            }
            StmtKind::VarDecl(name, init) => {
                let v = match init {
                    Some(e) => self.eval(e, None)?,
                    None => Value::Int(0),
                };
                self.declare(name, v);
                Flow::Normal
            }
            StmtKind::If(cond, then, other) => {
                if self.eval(cond, None)?.truthy() {
                    self.scoped(then)?
                } else if let Some(o) = other {
                    self.scoped(o)?
                } else {
                    Flow::Normal
                }
            }
            StmtKind::While(cond, body) => loop {
                if !self.eval(cond, None)?.truthy() {
                    break Flow::Normal;
                }
                match self.scoped(body)? {
                    Flow::Normal => {}
                    Flow::Break => break Flow::Normal,
                    ret @ Flow::Return(_) => break ret,
                }
            },
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, None)?,
                    None => Value::Unit,
                };
                Flow::Return(v)
            }
            StmtKind::Break => Flow::Break,
            StmtKind::Block(stmts) => {
                self.frames.last_mut().expect("frame").scopes.push(HashMap::new());
                let mut flow = Ok(Flow::Normal);
                for st in stmts {
                    match self.exec(st) {
                        Ok(Flow::Normal) => {}
                        other => {
                            flow = other;
                            break;
                        }
                    }
                }
                self.frames.last_mut().expect("frame").scopes.pop();
                flow?
            }
            StmtKind::Labeled { .. } => unreachable!("handled above"),
        };
        self.end_event();
        Ok(flow)
    }

    fn eval(&mut self, e: &Expr, group: Option<GroupTag>) -> Result<Value, Fault> {
        if let ExprKind::Var(name) = &e.kind {
            return self.lookup(name, e.span.line);
        }
        let function = self.function();
        self.begin(EventKind::EvalExpr, &e.text, e.span.line, function, group)?;
        let v = self.eval_node(e)?;
        self.end_event();
        Ok(v)
    }

    fn eval_node(&mut self, e: &Expr) -> Result<Value, Fault> {
        let line = e.span.line;
        Ok(match &e.kind {
            ExprKind::Int(n) => Value::Int(*n),
            ExprKind::Str(s) => Value::Str(s.clone()),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Var(_) => unreachable!("variable reads are handled by eval"),
            ExprKind::Assign(name, rhs) => {
                let v = self.eval(rhs, None)?;
                self.store(name, v.clone(), line)?;
                self.atomic(EventKind::Destination, name, line)?;
                v
            }
            ExprKind::Binary(op, a, b) if op.is_sequencing() => {
                let lhs = self.eval(a, None)?.truthy();
                let result = match op {
                    BinOp::And => lhs && self.eval(b, None)?.truthy(),
                    _ => lhs || self.eval(b, None)?.truthy(),
                };
                Value::Bool(result)
            }
            ExprKind::Binary(op, a, b) => {
                let group = self.group_here();
                let lhs = self.eval(a, group)?;
                let rhs = self.eval(b, group)?;
                binary(*op, lhs, rhs, line)?
            }
            ExprKind::Unary(op, a) => {
                let v = self.eval(a, None)?;
                match op {
                    UnOp::Not => Value::Bool(!v.truthy()),
                    UnOp::Neg => Value::Int(int_operand(&v, "-", line)?.wrapping_neg()),
                }
            }
            ExprKind::Call(name, args) => self.call(name, args, line)?,
            ExprKind::Comma(a, b) => {
                self.eval(a, None)?;
                self.eval(b, None)?
            }
            ExprKind::Ternary(c, a, b) => {
                if self.eval(c, None)?.truthy() {
                    self.eval(a, None)?
                } else {
                    self.eval(b, None)?
                }
            }
        })
    }

    fn call(&mut self, name: &str, args: &[Expr], line: u32) -> Result<Value, Fault> {
        let caller = self.function();
        self.begin(EventKind::FuncCall, name, line, caller, None)?;
        let group = self.group_here();
        let mut argv = Vec::with_capacity(args.len());
        for a in args {
            argv.push(self.eval(a, group)?);
        }
        let result = match self.program.function(name) {
            Some(f) => {
                if self.frames.len() >= MAX_CALL_DEPTH {
                    return fault(line, format!("call depth limit of {MAX_CALL_DEPTH} exceeded"));
                }
                let scope = f.params.iter().cloned().zip(argv).collect();
                self.frames.push(Frame { function: f.name.as_str(), scopes: vec![scope] });
                let mut result = Ok(Value::Unit);
                for s in &f.body {
                    match self.exec(s) {
                        Ok(Flow::Normal) => {}
                        Ok(Flow::Return(v)) => {
                            result = Ok(v);
                            break;
                        }
                        Ok(Flow::Break) => unreachable!("break outside a loop is rejected"),
                        Err(e) => {
                            result = Err(e);
                            break;
                        }
                    }
                }
                self.frames.pop();
                result?
            }
            None => self.builtin(name, argv, line)?,
        };
        self.end_event();
        Ok(result)
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>, line: u32) -> Result<Value, Fault> {
        match name {
            "print" => {
                let before = self.output.chars().count();
                for a in &args {
                    self.output.push_str(&a.to_string());
                }
                Ok(Value::Int((self.output.chars().count() - before) as i64))
            }
            "strlen" => Ok(Value::Int(str_operand(&args[0], "strlen", line)?.chars().count() as i64)),
            "getline" => {
                let rest = &self.input[self.input_pos..];
                let len = rest.find('\n').map_or(rest.len(), |i| i + 1);
                self.input_pos += len;
                Ok(Value::Str(rest[..len].to_string()))
            }
            "substr" => {
                let s = str_operand(&args[0], "substr", line)?;
                let start = int_operand(&args[1], "substr", line)?;
                let count = int_operand(&args[2], "substr", line)?;
                let len = s.chars().count() as i64;
                if start < 0 || count < 0 || start + count > len {
                    return fault(line, format!("substr({start}, {count}) out of range for length {len}"));
                }
                Ok(Value::Str(s.chars().skip(start as usize).take(count as usize).collect()))
            }
            "char_at" => {
                let s = str_operand(&args[0], "char_at", line)?;
                let i = int_operand(&args[1], "char_at", line)?;
                match usize::try_from(i).ok().and_then(|i| s.chars().nth(i)) {
                    Some(c) => Ok(Value::Int(c as i64)),
                    None => fault(line, format!("string index {i} out of range")),
                }
            }
            "to_str" => Ok(Value::Str(args[0].to_string())),
            other => fault(line, format!("unknown function `{other}`")),
        }
    }
}

fn int_operand(v: &Value, op: &str, line: u32) -> Result<i64, Fault> {
    match v {
        Value::Int(n) => Ok(*n),
        Value::Bool(b) => Ok(i64::from(*b)),
        other => fault(line, format!("`{op}` expects an int, got {}", other.type_name())),
    }
}

fn str_operand<'v>(v: &'v Value, op: &str, line: u32) -> Result<&'v str, Fault> {
    match v {
        Value::Str(s) => Ok(s),
        other => fault(line, format!("`{op}` expects a string, got {}", other.type_name())),
    }
}

fn binary(op: BinOp, lhs: Value, rhs: Value, line: u32) -> Result<Value, Fault> {
    use Value::{Bool, Int, Str};
    let sym = op.symbol();
    Ok(match op {
        BinOp::Add => match (&lhs, &rhs) {
            (Str(a), Str(b)) => Str(format!("{a}{b}")),
            _ => Int(int_operand(&lhs, sym, line)?.wrapping_add(int_operand(&rhs, sym, line)?)),
        },
        BinOp::Sub => Int(int_operand(&lhs, sym, line)?.wrapping_sub(int_operand(&rhs, sym, line)?)),
        BinOp::Mul => Int(int_operand(&lhs, sym, line)?.wrapping_mul(int_operand(&rhs, sym, line)?)),
        BinOp::Div | BinOp::Rem => {
            let (a, b) = (int_operand(&lhs, sym, line)?, int_operand(&rhs, sym, line)?);
            if b == 0 {
                return fault(line, "division by zero");
            }
            Int(if op == BinOp::Div { a.wrapping_div(b) } else { a.wrapping_rem(b) })
        }
        BinOp::Eq | BinOp::Ne => {
            let equal = match (&lhs, &rhs) {
                (Str(a), Str(b)) => a == b,
                (Value::Unit, Value::Unit) => true,
                (Str(_) | Value::Unit, _) | (_, Str(_) | Value::Unit) => false,
                _ => int_operand(&lhs, sym, line)? == int_operand(&rhs, sym, line)?,
            };
            Bool(equal == (op == BinOp::Eq))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (&lhs, &rhs) {
                (Str(a), Str(b)) => a.cmp(b),
                _ => int_operand(&lhs, sym, line)?.cmp(&int_operand(&rhs, sym, line)?),
            };
            Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        BinOp::And | BinOp::Or => unreachable!("sequencing operators short-circuit"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::parse_program;
    use crate::trace::validate_grammar;

    fn run(src: &str, input: &str) -> RunResult {
        let p = parse_program("t", src).unwrap();
        execute(&p, input, &Filter::pass_all(), &[], ExecOptions::default())
    }

    fn shape(t: &Trace) -> Vec<(usize, EventKind, String, Option<usize>)> {
        t.events().iter().map(|e| (e.id.0, e.kind, e.name.clone(), e.parent.map(|p| p.0))).collect()
    }

    #[test]
    fn single_assignment_tree() {
        let r = run("var x; func main() { x = 0; }", "");
        use EventKind::*;
        assert_eq!(
            shape(&r.trace),
            vec![
                (0, ExecuteProgram, "t".into(), None),
                (1, ExStmt, "x = 0;".into(), Some(0)),
                (2, EvalExpr, "x = 0".into(), Some(1)),
                (3, EvalExpr, "0".into(), Some(2)),
                (4, Destination, "x".into(), Some(2)),
            ]
        );
        let times: Vec<_> = r.trace.events().iter().map(|e| (e.begin_time, e.end_time)).collect();
        assert_eq!(times, vec![(1, 9), (2, 8), (3, 7), (4, 5), (6, 6)]);
        assert!(validate_grammar(&r.trace).ok);
        assert_eq!(r.steps, 9);
    }

    #[test]
    fn empty_main_is_just_the_root() {
        let r = run("func main() { }", "");
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.events_emitted, 1);
        assert_eq!((r.trace.event(r.trace.root()).begin_time, r.trace.step_max()), (1, 2));
    }

    #[test]
    fn empty_nested_block_is_one_statement() {
        let r = run("func main() { { } }", "");
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.trace.events()[1].kind, EventKind::ExStmt);
        assert_eq!(r.trace.events()[1].name, "{ }");
    }

    #[test]
    fn call_arguments_form_an_unordered_set() {
        let r = run("func f(a, b) { return a + b; } func main() { f(1, 2 * 3); }", "");
        let t = &r.trace;
        let call = t.events().iter().find(|e| e.kind == EventKind::FuncCall).unwrap();
        let kids = t.children(call.id);
        assert_eq!(kids.len(), 3);
        let g = t.event(kids[0]).unordered_group;
        assert!(g.is_some());
        assert_eq!(t.event(kids[1]).unordered_group, g);
        assert_eq!(t.event(kids[2]).kind, EventKind::ExStmt);
        assert_eq!(t.event(kids[2]).enclosing_function, "f");
        assert_eq!(call.enclosing_function, "main");
        assert!(!t.precedes(kids[0], kids[1]).unwrap());
        assert!(validate_grammar(t).ok);
    }

    #[test]
    fn return_unwinds_nested_statements() {
        let src = "func f() { var i = 0; while (true) { if (i == 3) { return i; } i = i + 1; } } \
                   func main() { print(f()); }";
        let r = run(src, "");
        assert_eq!(r.program_output, "3");
        assert!(r.error.is_none());
        assert!(validate_grammar(&r.trace).ok);
    }

    #[test]
    fn label_traversal_is_atomic() {
        let r = run("func main() { Here: print(1); }", "");
        let label = &r.trace.events()[1];
        assert_eq!((label.kind, label.name.as_str()), (EventKind::ExStmt, "Here:"));
        assert!(label.is_atomic());
        assert_eq!(r.trace.events()[2].name, "print(1);");
    }

    #[test]
    fn short_circuit_skips_events() {
        let r = run("var x; func main() { x = 0 && print(1); }", "");
        assert_eq!(r.program_output, "");
        assert!(!r.trace.events().iter().any(|e| e.kind == EventKind::FuncCall));
    }

    #[test]
    fn runtime_error_closes_trace() {
        let r = run("var x; func main() { x = 1; print(1 / (x - 1)); }", "");
        let err = r.error.unwrap();
        assert_eq!(err.message, "division by zero");
        let offending = r.trace.event(err.event.unwrap());
        assert_eq!(offending.name, "1 / (x - 1)");
        assert!(validate_grammar(&r.trace).ok);
    }

    #[test]
    fn builtins() {
        let src = r#"func main() {
            var s = getline();
            print(strlen(s), " ", substr(s, 1, 2), " ", char_at(s, 0), " ", to_str(12) + "!");
            print("|", getline(), "|", getline(), "|");
        }"#;
        let r = run(src, "abc\nd");
        assert_eq!(r.program_output, "4 bc 97 12!|d||");
        let r = run("func main() { char_at(\"ab\", 2); }", "");
        assert!(r.error.unwrap().message.contains("out of range"));
    }

    #[test]
    fn event_limit_stops_runaway_loops() {
        let p = parse_program("t", "func main() { while (true) { } }").unwrap();
        let r = execute(&p, "", &Filter::pass_all(), &[], ExecOptions { max_events: 1000 });
        assert_eq!(r.events_generated(), 1000);
        assert!(r.error.unwrap().message.contains("event limit"));
    }

    #[test]
    fn unbounded_recursion_is_reported() {
        let r = run("func f() { return f(); } func main() { f(); }", "");
        assert!(r.error.unwrap().message.contains("call depth"));
    }

    #[test]
    fn probes_see_end_state_and_may_print() {
        let p = parse_program("t", "var n; func main() { L: n = 5; M: n = n + 1; }").unwrap();
        let target = Footprint::new(EventKind::Destination, None, None);
        let req = ProbeRequest::new(target, minic::parse_expr("n * 10").unwrap());
        let printing = ProbeRequest::new(
            Footprint::new(EventKind::ExStmt, Some("M:"), Some("main")),
            minic::parse_expr("print(\"at M \", n)").unwrap(),
        );
        let r = execute(&p, "", &Filter::pass_all(), &[req, printing], ExecOptions::default());
        let values: Vec<_> = r
            .trace
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::Destination)
            .map(|e| e.probes["n * 10"].clone())
            .collect();
        assert_eq!(values, vec![Ok(Value::Int(50)), Ok(Value::Int(60))]);
        assert_eq!(r.program_output, "at M 5");
    }

    #[test]
    fn failing_probe_is_recorded_and_run_continues() {
        let p = parse_program("t", "var n; func main() { n = 1; print(\"done\"); }").unwrap();
        let req =
            ProbeRequest::new(Footprint::new(EventKind::Destination, None, None), minic::parse_expr("1 / 0").unwrap());
        let r = execute(&p, "", &Filter::pass_all(), &[req], ExecOptions::default());
        assert_eq!(r.program_output, "done");
        let d = r.trace.events().iter().find(|e| e.kind == EventKind::Destination).unwrap();
        assert_eq!(d.probes["1 / 0"], Err("division by zero".to_string()));
    }

    #[test]
    fn guarded_probe_only_runs_when_guard_holds() {
        let p = parse_program("t", "var n; func main() { n = 0; n = 1; }").unwrap();
        let target = Footprint::new(EventKind::Destination, None, None);
        let first = ProbeRequest::new(target.clone(), minic::parse_expr("n").unwrap());
        let mut second = ProbeRequest::new(target, minic::parse_expr("print(\"hit\")").unwrap());
        second.guard = Some(ProbeGuard { expr_text: "n".into(), cast: Cast::Int, expect: true });
        let r = execute(&p, "", &Filter::pass_all(), &[first, second], ExecOptions::default());
        assert_eq!(r.program_output, "hit");
    }

    #[test]
    fn plain_run_matches_instrumented_output() {
        let src = "var i; func main() { while (i < 3) { print(i); i = i + 1; } }";
        let p = parse_program("t", src).unwrap();
        let plain = run_plain(&p, "");
        assert_eq!(plain.output, "012");
        assert_eq!(run(src, "").program_output, plain.output);
    }
}

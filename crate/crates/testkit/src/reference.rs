//! A second, deliberately plain MiniC interpreter used as an oracle.
//!
//! It shares only the parser and the value type with the library. Instead of
//! building a trace it counts the events the grammar prescribes for each
//! construct, keeps the step counter, and notes every label traversal with a
//! snapshot of the global variables and the output produced so far.

use std::collections::{BTreeMap, HashMap};

use evtrace::minic::{BinOp, Expr, ExprKind, MiniProgram, Stmt, StmtKind, UnOp};
use evtrace::{EventKind, Value};

/// What the reference run observed.
#[derive(Debug, Clone, PartialEq)]
pub struct RefRun {
    pub output: String,
    /// Message of the fault that stopped the program, if any.
    pub error: Option<String>,
    /// Final step-counter value.
    pub steps: u64,
    /// Generated events per kind, indexed by [`EventKind::index`].
    pub events: [u64; 5],
    /// Number of calls per callee name, builtins included.
    pub calls: BTreeMap<String, u64>,
    pub labels: Vec<LabelVisit>,
}

impl RefRun {
    pub fn total_events(&self) -> u64 {
        self.events.iter().sum()
    }

    pub fn calls_to(&self, name: &str) -> u64 {
        self.calls.get(name).copied().unwrap_or(0)
    }

    pub fn visits(&self, label: &str) -> impl Iterator<Item = &LabelVisit> + '_ {
        let label = label.to_string();
        self.labels.iter().filter(move |v| v.label == label)
    }
}

/// One traversal of a statement label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVisit {
    /// Label text including the trailing colon, as in the trace.
    pub label: String,
    pub function: String,
    pub line: u32,
    /// Step-counter value of the traversal.
    pub time: u64,
    /// Length in bytes of the program output before the traversal.
    pub output_len: usize,
    pub globals: BTreeMap<String, Value>,
}

/// Runs `program` on `stdin`.
pub fn reference_run(program: &MiniProgram, stdin: &str) -> RefRun {
    let mut r = Ref {
        program,
        input: stdin.as_bytes(),
        pos: 0,
        run: RefRun {
            output: String::new(),
            error: None,
            steps: 0,
            events: [0; 5],
            calls: BTreeMap::new(),
            labels: Vec::new(),
        },
        open: 0,
        globals: program.globals.iter().map(|g| (g.name.clone(), g.init.clone().unwrap_or(Value::Int(0)))).collect(),
        locals: Vec::new(),
        function: Vec::new(),
    };
    r.enter(EventKind::ExecuteProgram);
    let result = r.main();
    if let Err(Stop::Fault(msg)) = result {
        r.run.error = Some(msg);
        // the interpreter closes every open event after a fault
        r.run.steps += r.open;
    } else {
        r.leave();
    }
    r.run
}

enum Stop {
    Break,
    Return(Value),
    Fault(String),
}

type Exec<T> = Result<T, Stop>;

fn fault<T>(msg: impl Into<String>) -> Exec<T> {
    Err(Stop::Fault(msg.into()))
}

struct Ref<'p> {
    program: &'p MiniProgram,
    input: &'p [u8],
    pos: usize,
    run: RefRun,
    open: u64,
    globals: HashMap<String, Value>,
    // one stack of block scopes per active call
    locals: Vec<Vec<HashMap<String, Value>>>,
    function: Vec<String>,
}

impl Ref<'_> {
    fn enter(&mut self, kind: EventKind) {
        self.run.events[kind.index()] += 1;
        self.run.steps += 1;
        self.open += 1;
    }

    fn leave(&mut self) {
        self.run.steps += 1;
        self.open -= 1;
    }

    fn atomic(&mut self, kind: EventKind) {
        self.run.events[kind.index()] += 1;
        self.run.steps += 1;
    }

    fn main(&mut self) -> Exec<()> {
        self.locals.push(vec![HashMap::new()]);
        self.function.push("main".into());
        let body = &self.program.main().body;
        for s in body {
            match self.stmt(s) {
                Ok(()) => {}
                Err(Stop::Return(_)) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn get(&self, name: &str) -> Exec<Value> {
        if let Some(scopes) = self.locals.last() {
            if let Some(v) = scopes.iter().rev().find_map(|s| s.get(name)) {
                return Ok(v.clone());
            }
        }
        match self.globals.get(name) {
            Some(v) => Ok(v.clone()),
            None => fault(format!("no variable {name}")),
        }
    }

    fn set(&mut self, name: &str, v: Value) -> Exec<()> {
        if let Some(scopes) = self.locals.last_mut() {
            if let Some(slot) = scopes.iter_mut().rev().find_map(|s| s.get_mut(name)) {
                *slot = v;
                return Ok(());
            }
        }
        match self.globals.get_mut(name) {
            Some(slot) => {
                *slot = v;
                Ok(())
            }
            None => fault(format!("no variable {name}")),
        }
    }

    fn with_scope(&mut self, f: impl FnOnce(&mut Self) -> Exec<()>) -> Exec<()> {
        self.locals.last_mut().unwrap().push(HashMap::new());
        let r = f(self);
        self.locals.last_mut().unwrap().pop();
        r
    }

    fn stmt(&mut self, s: &Stmt) -> Exec<()> {
        if let StmtKind::Labeled { label, body, .. } = &s.kind {
            self.atomic(EventKind::ExStmt);
            let mut globals: BTreeMap<String, Value> = BTreeMap::new();
            for (k, v) in &self.globals {
                globals.insert(k.clone(), v.clone());
            }
            self.run.labels.push(LabelVisit {
                label: format!("{label}:"),
                function: self.function.last().unwrap().clone(),
                line: s.span.line,
                time: self.run.steps,
                output_len: self.run.output.len(),
                globals,
            });
            return self.stmt(body);
        }
        self.enter(EventKind::ExStmt);
        let r = self.stmt_body(s);
        // a fault leaves events open; break and return close them on the way out
        if !matches!(r, Err(Stop::Fault(_))) {
            self.leave();
        }
        r
    }

    fn stmt_body(&mut self, s: &Stmt) -> Exec<()> {
        match &s.kind {
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::VarDecl(name, init) => {
                let v = match init {
                    Some(e) => self.expr(e)?,
                    None => Value::Int(0),
                };
                self.locals.last_mut().unwrap().last_mut().unwrap().insert(name.clone(), v);
            }
            StmtKind::If(c, then, other) => {
                if truthy(&self.expr(c)?) {
                    self.with_scope(|r| r.stmt(then))?;
                } else if let Some(o) = other {
                    self.with_scope(|r| r.stmt(o))?;
                }
            }
            StmtKind::While(c, body) => {
                while truthy(&self.expr(c)?) {
                    match self.with_scope(|r| r.stmt(body)) {
                        Ok(()) => {}
                        Err(Stop::Break) => break,
                        Err(e) => return Err(e),
                    }
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.expr(e)?,
                    None => Value::Unit,
                };
                return Err(Stop::Return(v));
            }
            StmtKind::Break => return Err(Stop::Break),
            StmtKind::Block(items) => {
                self.with_scope(|r| {
                    for st in items {
                        r.stmt(st)?;
                    }
                    Ok(())
                })?;
            }
            StmtKind::Labeled { .. } => unreachable!(),
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Exec<Value> {
        if let ExprKind::Var(name) = &e.kind {
            return self.get(name);
        }
        self.enter(EventKind::EvalExpr);
        let v = self.expr_inner(e)?;
        self.leave();
        Ok(v)
    }

    fn expr_inner(&mut self, e: &Expr) -> Exec<Value> {
        match &e.kind {
            ExprKind::Int(n) => Ok(Value::Int(*n)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(_) => unreachable!(),
            ExprKind::Assign(name, rhs) => {
                let v = self.expr(rhs)?;
                self.set(name, v.clone())?;
                self.atomic(EventKind::Destination);
                Ok(v)
            }
            ExprKind::Binary(BinOp::And, a, b) => {
                let l = truthy(&self.expr(a)?);
                Ok(Value::Bool(l && truthy(&self.expr(b)?)))
            }
            ExprKind::Binary(BinOp::Or, a, b) => {
                let l = truthy(&self.expr(a)?);
                Ok(Value::Bool(l || truthy(&self.expr(b)?)))
            }
            ExprKind::Binary(op, a, b) => {
                let l = self.expr(a)?;
                let r = self.expr(b)?;
                arith(*op, &l, &r)
            }
            ExprKind::Unary(UnOp::Not, a) => Ok(Value::Bool(!truthy(&self.expr(a)?))),
            ExprKind::Unary(UnOp::Neg, a) => Ok(Value::Int(int(&self.expr(a)?)?.wrapping_neg())),
            ExprKind::Comma(a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            ExprKind::Ternary(c, a, b) => {
                if truthy(&self.expr(c)?) {
                    self.expr(a)
                } else {
                    self.expr(b)
                }
            }
            ExprKind::Call(name, args) => self.call(name, args),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> Exec<Value> {
        self.enter(EventKind::FuncCall);
        *self.run.calls.entry(name.to_string()).or_insert(0) += 1;
        let mut values = Vec::new();
        for a in args {
            values.push(self.expr(a)?);
        }
        let result = match self.program.function(name) {
            None => self.builtin(name, &values)?,
            Some(f) => {
                if self.locals.len() >= 200 {
                    return fault("call depth");
                }
                let frame: HashMap<String, Value> = f.params.iter().cloned().zip(values).collect();
                self.locals.push(vec![frame]);
                self.function.push(f.name.clone());
                let mut result = Value::Unit;
                for s in &f.body {
                    match self.stmt(s) {
                        Ok(()) => {}
                        Err(Stop::Return(v)) => {
                            result = v;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                self.locals.pop();
                self.function.pop();
                result
            }
        };
        self.leave();
        Ok(result)
    }

    fn builtin(&mut self, name: &str, args: &[Value]) -> Exec<Value> {
        match name {
            "print" => {
                let mut n = 0;
                for a in args {
                    let text = match a {
                        Value::Int(i) => i.to_string(),
                        Value::Bool(b) => b.to_string(),
                        Value::Str(s) => s.clone(),
                        Value::Unit => String::new(),
                    };
                    n += text.chars().count();
                    self.run.output.push_str(&text);
                }
                Ok(Value::Int(n as i64))
            }
            "strlen" => Ok(Value::Int(string(&args[0])?.chars().count() as i64)),
            "getline" => {
                let rest = &self.input[self.pos..];
                let n = match rest.iter().position(|&b| b == b'\n') {
                    Some(i) => i + 1,
                    None => rest.len(),
                };
                self.pos += n;
                Ok(Value::Str(String::from_utf8_lossy(&rest[..n]).into_owned()))
            }
            "substr" => {
                let chars: Vec<char> = string(&args[0])?.chars().collect();
                let (i, n) = (int(&args[1])?, int(&args[2])?);
                if i < 0 || n < 0 || (i + n) as usize > chars.len() {
                    return fault("substr out of range");
                }
                Ok(Value::Str(chars[i as usize..(i + n) as usize].iter().collect()))
            }
            "char_at" => {
                let chars: Vec<char> = string(&args[0])?.chars().collect();
                let i = int(&args[1])?;
                if i < 0 || i as usize >= chars.len() {
                    return fault("char_at out of range");
                }
                Ok(Value::Int(chars[i as usize] as i64))
            }
            "to_str" => Ok(Value::Str(match &args[0] {
                Value::Int(i) => i.to_string(),
                Value::Bool(b) => b.to_string(),
                Value::Str(s) => s.clone(),
                Value::Unit => String::new(),
            })),
            _ => fault(format!("unknown function {name}")),
        }
    }
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Int(n) => *n != 0,
        Value::Bool(b) => *b,
        Value::Str(s) => !s.is_empty(),
        Value::Unit => false,
    }
}

fn int(v: &Value) -> Exec<i64> {
    match v {
        Value::Int(n) => Ok(*n),
        Value::Bool(b) => Ok(*b as i64),
        _ => fault("not an int"),
    }
}

fn string(v: &Value) -> Exec<&str> {
    match v {
        Value::Str(s) => Ok(s),
        _ => fault("not a string"),
    }
}

fn arith(op: BinOp, l: &Value, r: &Value) -> Exec<Value> {
    if let (Value::Str(a), Value::Str(b)) = (l, r) {
        return match op {
            BinOp::Add => Ok(Value::Str(format!("{a}{b}"))),
            BinOp::Eq => Ok(Value::Bool(a == b)),
            BinOp::Ne => Ok(Value::Bool(a != b)),
            BinOp::Lt => Ok(Value::Bool(a < b)),
            BinOp::Le => Ok(Value::Bool(a <= b)),
            BinOp::Gt => Ok(Value::Bool(a > b)),
            BinOp::Ge => Ok(Value::Bool(a >= b)),
            _ => fault("string arithmetic"),
        };
    }
    if matches!(op, BinOp::Eq | BinOp::Ne) {
        let nonnum = |v: &Value| matches!(v, Value::Str(_) | Value::Unit);
        if nonnum(l) || nonnum(r) {
            let same = matches!((l, r), (Value::Unit, Value::Unit));
            return Ok(Value::Bool(same == (op == BinOp::Eq)));
        }
    }
    let (a, b) = (int(l)?, int(r)?);
    Ok(match op {
        BinOp::Add => Value::Int(a.wrapping_add(b)),
        BinOp::Sub => Value::Int(a.wrapping_sub(b)),
        BinOp::Mul => Value::Int(a.wrapping_mul(b)),
        BinOp::Div | BinOp::Rem if b == 0 => return fault("division by zero"),
        BinOp::Div => Value::Int(a.wrapping_div(b)),
        BinOp::Rem => Value::Int(a.wrapping_rem(b)),
        BinOp::Lt => Value::Bool(a < b),
        BinOp::Le => Value::Bool(a <= b),
        BinOp::Gt => Value::Bool(a > b),
        BinOp::Ge => Value::Bool(a >= b),
        BinOp::Eq => Value::Bool(a == b),
        BinOp::Ne => Value::Bool(a != b),
        BinOp::And | BinOp::Or => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use evtrace::minic::parse_program;

    fn run(src: &str, input: &str) -> RefRun {
        reference_run(&parse_program("t", src).unwrap(), input)
    }

    #[test]
    fn single_assignment_counts() {
        let r = run("var x; func main() { x = 0; }", "");
        // root, statement, assignment, literal, destination
        assert_eq!(r.events, [1, 1, 2, 0, 1]);
        assert_eq!(r.steps, 9);
    }

    #[test]
    fn labels_record_time_and_state() {
        let r = run("var n; func main() { n = 4; L: print(n); }", "");
        assert_eq!(r.output, "4");
        let v = &r.labels[0];
        assert_eq!(v.label, "L:");
        assert_eq!(v.output_len, 0);
        assert_eq!(v.globals["n"], Value::Int(4));
        // root begins at 1 and the first statement spans 2..8
        assert_eq!(v.time, 9);
    }

    #[test]
    fn calls_and_input() {
        let src = "func f(a) { return a + 1; } func main() { var s = getline(); print(f(strlen(s))); }";
        let r = run(src, "abc\nrest");
        assert_eq!(r.output, "5");
        assert_eq!(r.calls_to("f"), 1);
        assert_eq!(r.calls_to("getline"), 1);
    }

    #[test]
    fn faults_close_open_events() {
        let r = run("func main() { print(1 / 0); }", "");
        assert!(r.error.is_some());
        // every opened event is also closed, so the step count is even
        assert_eq!(r.steps % 2, 0);
    }
}

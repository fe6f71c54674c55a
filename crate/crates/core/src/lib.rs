//! Event-trace recording and rule-based trace analysis for MiniC programs.
//!
//! A MiniC program runs under [`runtime::execute`], which records a tree of
//! events (statement executions, expression evaluations, calls and
//! assignment targets) shaped by a fixed event grammar. Rules written in the
//! [`forman`] language are evaluated over the recorded trace by
//! [`eval::run_rules`]; [`filter::derive_footprint`] works out beforehand
//! which events and probe values the rules need so that nothing else is
//! recorded. [`trace_io`] stores traces as begin/end record files.

pub mod eval;
pub mod filter;
pub mod forman;
pub mod minic;
pub mod runtime;
pub mod trace;
pub mod trace_io;
pub mod value;

pub use eval::{render_event, run_rules, Message, MessageKind};
pub use filter::{derive_footprint, Filter, Footprint};
pub use forman::{parse_rules, RuleSet};
pub use minic::{parse_program, MiniProgram};
pub use runtime::{execute, run_plain, ExecOptions, ProbeRequest, RunResult};
pub use trace::{validate_grammar, Event, EventId, EventKind, Trace};
pub use value::Value;

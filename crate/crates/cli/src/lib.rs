//! The `evtrace` command-line tool.
//!
//! Subcommands:
//!
//! * `check PROGRAM RULES` runs the program with the filter derived from the
//!   rules, then evaluates the rules over the trace.
//! * `run PROGRAM` runs the program without any instrumentation.
//! * `trace PROGRAM [RULES]` runs the program and saves the trace.
//! * `query TRACE RULES` evaluates rules over a saved trace.
//! * `stats PROGRAM [RULES]` prints event counts for a run.
//! * `validate TRACE` checks a saved trace against the event grammar.
//!
//! Program output goes to standard output, followed by the rule messages
//! (or into the `--report` file). Exit status: 0 when no `ONFAIL` branch
//! fired, 1 when one did, 2 on any error.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use evtrace::filter::validate_probes;
use evtrace::trace_io::{read_trace_with_header, write_trace, TraceHeader};
use evtrace::{
    derive_footprint, execute, parse_program, parse_rules, run_plain, run_rules, validate_grammar, EventKind,
    ExecOptions, Filter, Message, MessageKind, MiniProgram, RuleSet, RunResult,
};

/// Environment variable capping the number of generated events.
pub const MAX_EVENTS_VAR: &str = "EVTRACE_MAX_EVENTS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ONFAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "evtrace", version, about = "Record MiniC event traces and check rules over them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunOpts {
    /// File supplying the program's standard input.
    #[arg(long, value_name = "PATH")]
    pub stdin: Option<PathBuf>,
    /// Record every event instead of only those the rules need.
    #[arg(long)]
    pub no_filter: bool,
    /// Also save the recorded trace to this file.
    #[arg(long, value_name = "PATH")]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a program under a rule set and report the rule messages.
    Check {
        program: PathBuf,
        rules: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        /// Write rule messages to this file instead of standard output.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Run a program without instrumentation.
    Run {
        program: PathBuf,
        #[arg(long, value_name = "PATH")]
        stdin: Option<PathBuf>,
    },
    /// Run a program and save its trace.
    Trace {
        program: PathBuf,
        /// Rule set whose footprint selects the recorded events.
        rules: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Evaluate a rule set over a saved trace.
    Query {
        trace: PathBuf,
        rules: PathBuf,
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Print event counts for a run.
    Stats {
        program: PathBuf,
        rules: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check a saved trace against the event grammar.
    Validate { trace: PathBuf },
}

/// Result of running a program under a rule set.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub run: RunResult,
    pub filter: Filter,
    pub probes: Vec<evtrace::ProbeRequest>,
    pub messages: Vec<Message>,
}

impl CheckOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.run.error.is_some() {
            EXIT_ERROR
        } else {
            exit_code(&self.messages)
        }
    }
}

/// 2 if any rule failed to evaluate, 1 if any `ONFAIL` branch fired, else 0.
pub fn exit_code(messages: &[Message]) -> i32 {
    if messages.iter().any(|m| m.kind == MessageKind::Error) {
        EXIT_ERROR
    } else if messages.iter().any(|m| m.kind == MessageKind::Onfail) {
        EXIT_ONFAIL
    } else {
        EXIT_OK
    }
}

/// Messages as printed in a report, one per line.
pub fn format_messages(messages: &[Message]) -> String {
    let mut out = String::new();
    for m in messages {
        let _ = writeln!(out, "{m}");
    }
    out
}

/// Parses a program file's text; the file stem names the program.
pub fn load_program(path: &Path, source: &str) -> Result<MiniProgram> {
    let name = path.file_stem().map_or_else(|| "program".to_string(), |s| s.to_string_lossy().into_owned());
    parse_program(&name, source).map_err(|e| anyhow!("{}:{e}", path.display()))
}

pub fn load_rules(path: &Path, source: &str) -> Result<RuleSet> {
    parse_rules(source).map_err(|e| anyhow!("{}:{e}", path.display()))
}

/// Filter and probes for a run. Without rules every event is recorded.
pub fn plan(
    program: &MiniProgram,
    rules: Option<&RuleSet>,
    no_filter: bool,
) -> Result<(Filter, Vec<evtrace::ProbeRequest>)> {
    let Some(rules) = rules else { return Ok((Filter::pass_all(), Vec::new())) };
    let (filter, probes) = derive_footprint(rules);
    validate_probes(&probes, program).map_err(|e| anyhow!("{e}"))?;
    Ok((if no_filter { Filter::pass_all() } else { filter }, probes))
}

/// Runs `program` on `stdin` under `rules` and evaluates them.
pub fn check(
    program: &MiniProgram,
    rules: &RuleSet,
    stdin: &str,
    no_filter: bool,
    options: ExecOptions,
) -> Result<CheckOutcome> {
    let (filter, probes) = plan(program, Some(rules), no_filter)?;
    let run = execute(program, stdin, &filter, &probes, options);
    let messages = run_rules(&run.trace, rules);
    Ok(CheckOutcome { run, filter, probes, messages })
}

/// Reads the event cap from the environment.
pub fn exec_options() -> Result<ExecOptions> {
    match std::env::var(MAX_EVENTS_VAR) {
        Err(_) => Ok(ExecOptions::default()),
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(ExecOptions { max_events: n }),
            _ => bail!("{MAX_EVENTS_VAR} must be a positive integer, got `{v}`"),
        },
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_stdin(path: Option<&PathBuf>) -> Result<String> {
    path.map_or_else(|| Ok(String::new()), |p| read(p))
}

/// Text printed by `stats`.
pub fn stats_text(run: &RunResult) -> String {
    let mut out = String::new();
    let total = run.events_generated();
    let _ = writeln!(out, "events generated: {total}");
    let _ = writeln!(out, "events emitted: {}", run.events_emitted);
    let _ = writeln!(out, "events suppressed: {}", run.events_suppressed);
    let ratio = if total == 0 { 0.0 } else { run.events_emitted as f64 / total as f64 };
    let _ = writeln!(out, "emitted fraction: {ratio:.4}");
    let _ = writeln!(out, "steps: {}", run.steps);
    for kind in EventKind::ALL {
        let i = kind.index();
        let _ = writeln!(
            out,
            "{:<16} generated {:>9} emitted {:>9}",
            kind.keyword(),
            run.generated_by_kind[i],
            run.emitted_by_kind[i]
        );
    }
    out
}

fn save_trace(path: &Path, run: &RunResult, filter: &Filter, probes: &[evtrace::ProbeRequest]) -> Result<()> {
    let header = TraceHeader::new(run.trace.source_name(), filter, probes);
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = write_trace(std::io::BufWriter::new(file), &run.trace, &header)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn report_runtime_error(run: &RunResult, err: &mut dyn Write) -> bool {
    match &run.error {
        Some(e) => {
            let at = e.event.map(|id| format!(" (event {id})")).unwrap_or_default();
            let _ = writeln!(err, "evtrace: runtime error: {e}{at}");
            true
        }
        None => false,
    }
}

fn emit_messages(messages: &[Message], report: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    let text = format_messages(messages);
    match report {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => out.write_all(text.as_bytes()).context("cannot write to standard output"),
    }
}

/// Runs one command, writing to `out` and `err`; returns the exit status.
pub fn run_command(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "evtrace: {e:#}");
            EXIT_ERROR
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_command(cli.command, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Check { program, rules, opts, report } => {
            let p = load_program(&program, &read(&program)?)?;
            let r = load_rules(&rules, &read(&rules)?)?;
            let stdin = read_stdin(opts.stdin.as_ref())?;
            let outcome = check(&p, &r, &stdin, opts.no_filter, exec_options()?)?;
            out.write_all(outcome.run.program_output.as_bytes())?;
            report_runtime_error(&outcome.run, err);
            if let Some(path) = &opts.trace_out {
                save_trace(path, &outcome.run, &outcome.filter, &outcome.probes)?;
            }
            emit_messages(&outcome.messages, report.as_ref(), out)?;
            Ok(outcome.exit_code())
        }
        Command::Run { program, stdin } => {
            let p = load_program(&program, &read(&program)?)?;
            let input = read_stdin(stdin.as_ref())?;
            let run = run_plain(&p, &input);
            out.write_all(run.output.as_bytes())?;
            match run.error {
                Some(e) => {
                    let _ = writeln!(err, "evtrace: runtime error: {e}");
                    Ok(EXIT_ERROR)
                }
                None => Ok(EXIT_OK),
            }
        }
        Command::Trace { program, rules, opts } => {
            let p = load_program(&program, &read(&program)?)?;
            let r = match &rules {
                Some(path) => Some(load_rules(path, &read(path)?)?),
                None => None,
            };
            let (filter, probes) = plan(&p, r.as_ref(), opts.no_filter)?;
            let stdin = read_stdin(opts.stdin.as_ref())?;
            let run = execute(&p, &stdin, &filter, &probes, exec_options()?);
            out.write_all(run.program_output.as_bytes())?;
            let target = opts.trace_out.unwrap_or_else(|| program.with_extension("trace"));
            save_trace(&target, &run, &filter, &probes)?;
            Ok(if report_runtime_error(&run, err) { EXIT_ERROR } else { EXIT_OK })
        }
        Command::Query { trace, rules, report } => {
            let file = fs::File::open(&trace).with_context(|| format!("cannot read {}", trace.display()))?;
            let (_, t) =
                read_trace_with_header(BufReader::new(file)).map_err(|e| anyhow!("{}: {e}", trace.display()))?;
            let r = load_rules(&rules, &read(&rules)?)?;
            let messages = run_rules(&t, &r);
            emit_messages(&messages, report.as_ref(), out)?;
            Ok(exit_code(&messages))
        }
        Command::Stats { program, rules, opts } => {
            let p = load_program(&program, &read(&program)?)?;
            let r = match &rules {
                Some(path) => Some(load_rules(path, &read(path)?)?),
                None => None,
            };
            let (filter, probes) = plan(&p, r.as_ref(), opts.no_filter)?;
            let stdin = read_stdin(opts.stdin.as_ref())?;
            let run = execute(&p, &stdin, &filter, &probes, exec_options()?);
            if let Some(path) = &opts.trace_out {
                save_trace(path, &run, &filter, &probes)?;
            }
            out.write_all(stats_text(&run).as_bytes())?;
            Ok(if report_runtime_error(&run, err) { EXIT_ERROR } else { EXIT_OK })
        }
        Command::Validate { trace } => {
            let file = fs::File::open(&trace).with_context(|| format!("cannot read {}", trace.display()))?;
            let (_, t) =
                read_trace_with_header(BufReader::new(file)).map_err(|e| anyhow!("{}: {e}", trace.display()))?;
            let report = validate_grammar(&t);
            if report.ok {
                writeln!(out, "ok: {} events conform to the event grammar", t.len())?;
                Ok(EXIT_OK)
            } else {
                for v in &report.violations {
                    writeln!(out, "event {}: axiom {}: {}", v.event, v.axiom, v.message)?;
                }
                Ok(EXIT_ONFAIL)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message(kind: MessageKind, text: &str) -> Message {
        Message { rule: 0, line: 3, kind, text: text.to_string() }
    }

    #[test]
    fn exit_codes_rank_errors_over_onfail() {
        assert_eq!(exit_code(&[]), EXIT_OK);
        assert_eq!(exit_code(&[message(MessageKind::Say, "a")]), EXIT_OK);
        assert_eq!(exit_code(&[message(MessageKind::Say, "a"), message(MessageKind::Onfail, "b")]), EXIT_ONFAIL);
        assert_eq!(exit_code(&[message(MessageKind::Onfail, "b"), message(MessageKind::Error, "c")]), EXIT_ERROR);
    }

    #[test]
    fn messages_print_one_per_line() {
        let text = format_messages(&[message(MessageKind::Say, "ok"), message(MessageKind::Error, "boom")]);
        assert_eq!(text, "ok\nerror: rule at line 3: boom\n");
    }

    #[test]
    fn programs_are_named_after_the_file_stem() {
        let p = load_program(Path::new("dir/count.mc"), "func main() { }").unwrap();
        assert_eq!(p.name, "count");
        let e = load_program(Path::new("dir/bad.mc"), "func main() {").unwrap_err().to_string();
        assert!(e.starts_with("dir/bad.mc:1:"), "{e}");
    }

    #[test]
    fn plan_without_rules_records_everything() {
        let p = load_program(Path::new("t.mc"), "var x; func main() { x = 1; }").unwrap();
        let (filter, probes) = plan(&p, None, false).unwrap();
        assert!(filter.pass_all && probes.is_empty());
    }

    #[test]
    fn plan_keeps_probes_under_no_filter() {
        let p = load_program(Path::new("t.mc"), "var x; func main() { x = 1; }").unwrap();
        let rules = load_rules(
            Path::new("r.fmn"),
            "EXISTS D: destination IS x FROM execute_program VALUE(int)(AT D x) == 1 SAY('ok');",
        )
        .unwrap();
        let (derived, probes) = plan(&p, Some(&rules), false).unwrap();
        assert!(!derived.pass_all);
        assert_eq!(probes.len(), 1);
        let (all, probes) = plan(&p, Some(&rules), true).unwrap();
        assert!(all.pass_all);
        assert_eq!(probes.len(), 1);
    }

    #[test]
    fn plan_rejects_probes_on_unknown_variables() {
        let p = load_program(Path::new("t.mc"), "func main() { var y = 1; }").unwrap();
        let rules =
            load_rules(Path::new("r.fmn"), "EXISTS D: destination FROM execute_program VALUE(int)(AT D y) SAY('y');")
                .unwrap();
        assert!(plan(&p, Some(&rules), false).is_err());
    }

    #[test]
    fn stats_report_the_fraction_and_kinds() {
        let p = load_program(Path::new("t.mc"), "var x; func main() { x = 0; }").unwrap();
        let run = execute(&p, "", &Filter::pass_all(), &[], ExecOptions::default());
        let text = stats_text(&run);
        assert!(text.starts_with("events generated: 5\nevents emitted: 5\nevents suppressed: 0\n"), "{text}");
        assert!(text.contains("emitted fraction: 1.0000\nsteps: 9\n"), "{text}");
        assert_eq!(text.lines().filter(|l| l.contains(" generated ")).count(), EventKind::ALL.len());
    }
}

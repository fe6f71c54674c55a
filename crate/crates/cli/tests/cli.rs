//! End-to-end tests of the command line: exit codes, subcommand composition
//! and the files it writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use evtrace_cli::{main_with_args, EXIT_ERROR, EXIT_OK, EXIT_ONFAIL, MAX_EVENTS_VAR};
use evtrace_testkit::corpus;
use tempfile::TempDir;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn evtrace(args: &[&str]) -> Out {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with_args(std::iter::once("evtrace").chain(args.iter().copied()), &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Program and rule files in a fresh directory.
fn setup(program: &str, rules: &str) -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "prog.mc", program);
    let r = write(&dir, "rules.fmn", rules);
    (dir, p, r)
}

#[test]
fn trivial_rule_prints_ok_and_exits_zero() {
    let (_d, p, r) = setup("func main() { }", "TRUE SAY('ok');");
    let o = evtrace(&["check", s(&p), s(&r)]);
    assert_eq!((o.code, o.stdout.as_str(), o.stderr.as_str()), (EXIT_OK, "ok\n", ""));
}

#[test]
fn failing_exists_exits_one_with_its_message() {
    let (_d, p, r) = setup(
        "var x; func main() { x = 1; }",
        "EXISTS D: destination IS 'y' FROM execute_program SAY('found') ONFAIL SAY('no y assigned');",
    );
    let o = evtrace(&["check", s(&p), s(&r)]);
    assert_eq!((o.code, o.stdout.as_str()), (EXIT_ONFAIL, "no y assigned\n"));
}

#[test]
fn parse_errors_exit_two_with_positions() {
    let (_d, p, r) = setup("func main() { x = ; }", "TRUE SAY('ok');");
    let o = evtrace(&["check", s(&p), s(&r)]);
    assert_eq!(o.code, EXIT_ERROR);
    assert!(o.stderr.contains("prog.mc:1:"), "{}", o.stderr);
    assert!(o.stdout.is_empty());

    let (_d, p, r) = setup("func main() { }", "TRUE SAY('ok'");
    let o = evtrace(&["check", s(&p), s(&r)]);
    assert_eq!(o.code, EXIT_ERROR);
    assert!(o.stderr.contains("rules.fmn:1:"), "{}", o.stderr);
}

#[test]
fn runtime_errors_exit_two_but_rules_still_run() {
    let (_d, p, r) = setup(
        "var x; func main() { print(\"a\\n\"); x = 1 / 0; }",
        "TRUE SAY('calls' CARD [ALL func_call FROM execute_program]);",
    );
    let o = evtrace(&["check", s(&p), s(&r)]);
    assert_eq!(o.code, EXIT_ERROR);
    assert_eq!(o.stdout, "a\ncalls 1\n");
    assert!(o.stderr.contains("runtime error: line 1: division by zero"), "{}", o.stderr);
}

#[test]
fn evaluation_errors_exit_two() {
    let (_d, p, r) = setup("func main() { }", "TRUE SAY(1 / 0) ONFAIL SAY('unreached');");
    let o = evtrace(&["check", s(&p), s(&r)]);
    assert_eq!(o.code, EXIT_ERROR);
    assert_eq!(o.stdout, "error: rule at line 1: division by zero\n");
}

#[test]
fn probes_on_unknown_variables_are_rejected_before_running() {
    let (_d, p, r) = setup(
        "func main() { print(\"ran\"); }",
        "EXISTS C: func_call FROM execute_program VALUE(int)(AT C nope) SAY('x');",
    );
    let o = evtrace(&["check", s(&p), s(&r)]);
    assert_eq!(o.code, EXIT_ERROR);
    assert!(o.stdout.is_empty(), "the program must not run");
    assert!(o.stderr.contains("unknown variable `nope`"), "{}", o.stderr);
}

#[test]
fn report_flag_moves_messages_to_a_file() {
    let (d, p, r) = setup("func main() { print(\"out\\n\"); }", "TRUE SAY('ok');");
    let report = d.path().join("report.txt");
    let o = evtrace(&["check", s(&p), s(&r), "--report", s(&report)]);
    assert_eq!((o.code, o.stdout.as_str()), (EXIT_OK, "out\n"));
    assert_eq!(fs::read_to_string(report).unwrap(), "ok\n");
}

#[test]
fn single_assignment_trace_file_has_ten_records() {
    let (d, p, _) = setup("var x; func main() { x = 0; }", "");
    let target = d.path().join("prog.trace");
    let o = evtrace(&["trace", s(&p)]);
    assert_eq!(o.code, EXIT_OK);
    let text = fs::read_to_string(&target).unwrap();
    let want = "#evtrace-trace v1\n#source\tprog\n#filter\tall\n\
                B\t0\texecute_program\t1\t1\t-\tprog\tprog\n\
                B\t1\tex_stmt\t2\t1\t-\tmain\tx = 0;\n\
                B\t2\teval_expr\t3\t1\t-\tmain\tx = 0\n\
                B\t3\teval_expr\t4\t1\t-\tmain\t0\n\
                E\t3\t5\n\
                B\t4\tdestination\t6\t1\t-\tmain\tx\n\
                E\t4\t6\n\
                E\t2\t7\n\
                E\t1\t8\n\
                E\t0\t9\n";
    assert_eq!(text, want);
    let o = evtrace(&["validate", s(&target)]);
    assert_eq!((o.code, o.stdout.as_str()), (EXIT_OK, "ok: 5 events conform to the event grammar\n"));
}

#[test]
fn validate_reports_unreadable_and_ungrammatical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let truncated =
        write(&dir, "t.trace", "#evtrace-trace v1\n#source\tp\n#filter\tall\nB\t0\texecute_program\t1\t1\t-\tp\tp\n");
    let o = evtrace(&["validate", s(&truncated)]);
    assert_eq!(o.code, EXIT_ERROR);
    assert!(o.stderr.contains("unbalanced trace: events #0 never end"), "{}", o.stderr);

    // a destination with a child breaks the grammar but not the bracket nesting
    let bad = write(
        &dir,
        "bad.trace",
        "#evtrace-trace v1\n#source\tp\n#filter\tall\n\
         B\t0\texecute_program\t1\t1\t-\tp\tp\n\
         B\t1\tdestination\t2\t1\t-\tmain\tx\n\
         B\t2\teval_expr\t3\t1\t-\tmain\t0\n\
         E\t2\t4\nE\t1\t5\nE\t0\t6\n",
    );
    let o = evtrace(&["validate", s(&bad)]);
    assert_eq!(o.code, EXIT_ONFAIL);
    assert!(o.stdout.starts_with("event #"), "{}", o.stdout);
}

#[test]
fn check_equals_trace_then_query_on_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("run.trace");
    let mut compared = 0;
    for p in corpus::programs() {
        for r in corpus::rules_for(&p.stem) {
            let mut common = vec![s(&p.path), s(&r.path)];
            if let Some(i) = &p.input_path {
                common.extend(["--stdin", s(i)]);
            }
            let mut check_args = vec!["check"];
            check_args.extend(&common);
            let check = evtrace(&check_args);

            let mut trace_args = vec!["trace"];
            trace_args.extend(&common);
            trace_args.extend(["--trace-out", s(&trace)]);
            let traced = evtrace(&trace_args);
            let queried = evtrace(&["query", s(&trace), s(&r.path)]);

            let ctx = format!("{} with {}", p.stem, r.name);
            assert_eq!(check.stdout, traced.stdout + &queried.stdout, "{ctx}");
            assert_eq!(check.stderr, traced.stderr, "{ctx}");
            if check.stderr.is_empty() {
                assert_eq!(check.code, queried.code, "{ctx}");
            } else {
                assert_eq!((check.code, traced.code), (EXIT_ERROR, EXIT_ERROR), "{ctx}");
            }
            compared += 1;
        }
    }
    assert!(compared > 200, "{compared} pairs");
}

#[test]
fn trace_out_matches_the_trace_command() {
    let p = corpus::program("collatz");
    let r = corpus::rules("collatz.longest");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.trace"), dir.path().join("b.trace"));
    evtrace(&["check", s(&p.path), s(&r.path), "--trace-out", s(&a)]);
    evtrace(&["trace", s(&p.path), s(&r.path), "--trace-out", s(&b)]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.contains("#filter\tderived\n#record\tdestination\t=longest\t*\n"), "{text}");
    assert!(text.contains("#probe\tdestination\t=longest\t*\tlongest\n"), "{text}");
}

#[test]
fn stats_reports_per_kind_counts() {
    let (_d, p, r) =
        setup("var x; func main() { x = 0; print(x); }", "TRUE SAY(CARD [ALL func_call FROM execute_program]);");
    let o = evtrace(&["stats", s(&p), s(&r)]);
    assert_eq!(o.code, EXIT_OK);
    let want = "\
events generated: 8
events emitted: 2
events suppressed: 6
emitted fraction: 0.2500
steps: 15
execute_program  generated         1 emitted         1
ex_stmt          generated         2 emitted         0
eval_expr        generated         3 emitted         0
func_call        generated         1 emitted         1
destination      generated         1 emitted         0
";
    assert_eq!(o.stdout, want);
}

#[test]
fn run_prints_program_output_only() {
    let (_d, p, _) = setup("func main() { print(\"hi \", 1 + 2, \"\\n\"); }", "");
    let o = evtrace(&["run", s(&p)]);
    assert_eq!((o.code, o.stdout.as_str()), (EXIT_OK, "hi 3\n"));
}

#[test]
fn usage_errors_exit_two() {
    let o = evtrace(&["check", "only-one-arg"]);
    assert_eq!(o.code, EXIT_ERROR);
    let o = evtrace(&["frobnicate"]);
    assert_eq!(o.code, EXIT_ERROR);
    let o = evtrace(&["run", "/nonexistent/prog.mc"]);
    assert_eq!(o.code, EXIT_ERROR);
    assert!(o.stderr.contains("cannot read /nonexistent/prog.mc"), "{}", o.stderr);
}

#[test]
fn event_cap_comes_from_the_environment() {
    let (_d, p, r) =
        setup("var i = 0; func main() { while (i < 100) { i = i + 1; } print(\"done\\n\"); }", "TRUE SAY('ok');");
    let bin = env!("CARGO_BIN_EXE_evtrace");
    let o = Command::new(bin).args(["check", s(&p), s(&r)]).env(MAX_EVENTS_VAR, "50").output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_ERROR));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("event limit of 50 exceeded"), "{stderr}");
    assert_eq!(String::from_utf8_lossy(&o.stdout), "ok\n");

    let o = Command::new(bin).args(["check", s(&p), s(&r)]).env(MAX_EVENTS_VAR, "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&o.stderr).contains("must be a positive integer"));

    let o = Command::new(bin).args(["check", s(&p), s(&r)]).env_remove(MAX_EVENTS_VAR).output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "done\nok\n");
}

//! The instrumented interpreter against the reference interpreter and the
//! plain interpreter on seeded random programs.

use std::collections::BTreeSet;

use evtrace::filter::{Filter, Footprint};
use evtrace::{execute, parse_program, run_plain, validate_grammar, EventKind, ExecOptions};
use evtrace_testkit::program_gen::{random_program, MAX_NODES};
use evtrace_testkit::reference::reference_run;

const SEEDS: u64 = 300;

#[test]
fn runtime_matches_reference_counts() {
    let mut faulted = 0;
    let mut total_events = 0;
    for seed in 0..SEEDS {
        let src = random_program(seed, MAX_NODES);
        let p = parse_program("gen", &src).unwrap();
        let run = execute(&p, "", &Filter::pass_all(), &[], ExecOptions::default());
        let oracle = reference_run(&p, "");
        let ctx = || format!("seed {seed}\n{src}");
        assert_eq!(run.program_output, oracle.output, "{}", ctx());
        assert_eq!(run.error.is_some(), oracle.error.is_some(), "{}", ctx());
        assert_eq!(run.generated_by_kind, oracle.events, "{}", ctx());
        assert_eq!(run.steps, oracle.steps, "{}", ctx());
        assert_eq!(run.events_emitted, oracle.total_events(), "{}", ctx());
        assert_eq!(run.events_suppressed, 0);
        let report = validate_grammar(&run.trace);
        assert!(report.ok, "{}\n{:?}", ctx(), report.violations);
        faulted += usize::from(run.error.is_some());
        total_events += run.events_emitted;
    }
    // the generator must exercise both normal and faulting runs
    assert!(faulted > 0 && faulted < SEEDS as usize / 2, "{faulted} faulting runs");
    assert!(total_events > 20 * SEEDS, "{total_events} events");
}

#[test]
fn instrumentation_does_not_change_behaviour() {
    for seed in 0..SEEDS {
        let src = random_program(seed, MAX_NODES);
        let p = parse_program("gen", &src).unwrap();
        let plain = run_plain(&p, "");
        let run = execute(&p, "", &Filter::pass_all(), &[], ExecOptions::default());
        assert_eq!(plain.output, run.program_output, "seed {seed}");
        assert_eq!(plain.error.map(|e| e.message), run.error.map(|e| e.message), "seed {seed}");
    }
}

#[test]
fn filtered_events_keep_their_times() {
    let filters = [
        Filter::empty(),
        Filter {
            pass_all: false,
            footprints: BTreeSet::from([Footprint::new(EventKind::EvalExpr, None, None)]),
            keep_structure: BTreeSet::new(),
        },
        Filter {
            pass_all: false,
            footprints: BTreeSet::from([Footprint::new(EventKind::Destination, None, Some("main"))]),
            keep_structure: BTreeSet::from([Footprint::new(EventKind::FuncCall, Some("f0"), None)]),
        },
        Filter {
            pass_all: false,
            footprints: BTreeSet::from([Footprint::new(EventKind::ExStmt, None, Some("f1"))]),
            keep_structure: BTreeSet::new(),
        },
    ];
    for seed in 0..100 {
        let src = random_program(seed, MAX_NODES);
        let p = parse_program("gen", &src).unwrap();
        let full = execute(&p, "", &Filter::pass_all(), &[], ExecOptions::default());
        for f in &filters {
            let part = execute(&p, "", f, &[], ExecOptions::default());
            assert!(part.events_emitted <= full.events_emitted);
            assert_eq!(part.events_generated(), full.events_generated());
            assert_eq!(part.steps, full.steps);
            assert_eq!(part.program_output, full.program_output);
            // every recorded event appears unchanged in the unfiltered trace
            let shape = |e: &evtrace::Event| (e.kind, e.name.clone(), e.source_line, e.begin_time, e.end_time);
            let all: Vec<_> = full.trace.events().iter().map(shape).collect();
            for e in part.trace.events() {
                assert!(all.contains(&shape(e)), "seed {seed}: {e:?}");
            }
            // parents of recorded events are their nearest recorded ancestors
            for e in &part.trace.events()[1..] {
                let parent = part.trace.event(e.parent.unwrap());
                assert!(parent.begin_time <= e.begin_time && e.end_time <= parent.end_time);
            }
        }
    }
}

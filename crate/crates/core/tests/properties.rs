//! Property tests over generated programs, traces and rule expressions.

use evtrace::forman::parse_expr;
use evtrace::trace_io::{read_trace, trace_to_string, TraceHeader};
use evtrace::{execute, parse_program, EventId, ExecOptions, Filter, Trace};
use evtrace_testkit::program_gen::{random_program, MAX_NODES};
use evtrace_testkit::traces::{random_trace, QueryGen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn program_trace(seed: u64) -> Trace {
    let src = random_program(seed, MAX_NODES);
    let p = parse_program("gen", &src).unwrap();
    execute(&p, "", &Filter::pass_all(), &[], ExecOptions::default()).trace
}

fn ids(t: &Trace) -> impl Iterator<Item = EventId> + Clone {
    (0..t.len()).map(EventId)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn at_most_one_relation_holds(seed in any::<u64>()) {
        let t = program_trace(seed);
        prop_assume!(t.len() <= 200);
        for a in ids(&t) {
            for b in ids(&t) {
                if a == b {
                    continue;
                }
                let held = [
                    t.precedes(a, b).unwrap(),
                    t.precedes(b, a).unwrap(),
                    t.included_in(a, b).unwrap(),
                    t.included_in(b, a).unwrap(),
                ];
                prop_assert!(held.iter().filter(|&&h| h).count() <= 1, "{a} {b}");
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn precedes_is_irreflexive_and_transitive(seed in any::<u64>()) {
        let t = program_trace(seed);
        prop_assume!(t.len() <= 120);
        let n = t.len();
        let mut rel = vec![vec![false; n]; n];
        for a in 0..n {
            prop_assert!(!t.precedes(EventId(a), EventId(a)).unwrap());
            for b in 0..n {
                rel[a][b] = t.precedes(EventId(a), EventId(b)).unwrap();
            }
        }
        for a in 0..n {
            for b in 0..n {
                if !rel[a][b] {
                    continue;
                }
                for c in 0..n {
                    prop_assert!(!rel[b][c] || rel[a][c], "{a} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn previous_path_is_the_set_of_predecessors(seed in any::<u64>()) {
        let t = program_trace(seed);
        prop_assume!(t.len() <= 200);
        for a in ids(&t) {
            let want: Vec<EventId> = ids(&t).filter(|&e| e != a && t.precedes(e, a).unwrap()).collect();
            prop_assert_eq!(t.previous_path(a).unwrap(), want);
        }
    }

    #[test]
    fn intervals_form_balanced_brackets(seed in any::<u64>()) {
        let t = program_trace(seed);
        // begin records sort before end records at equal times only for
        // atomic events, which open and close at once
        let mut marks: Vec<(u64, i32, usize)> = Vec::new();
        for e in t.events() {
            marks.push((e.begin_time, 0, e.id.0));
            marks.push((e.end_time, 1, e.id.0));
        }
        marks.sort();
        let mut stack = Vec::new();
        for (_, end, id) in marks {
            if end == 0 {
                stack.push(id);
            } else {
                prop_assert_eq!(stack.pop(), Some(id));
            }
        }
        prop_assert!(stack.is_empty());
    }

    #[test]
    fn minic_printing_is_a_fixed_point(seed in any::<u64>()) {
        let src = random_program(seed, MAX_NODES);
        let first = parse_program("gen", &src).unwrap();
        let printed = first.to_string();
        let second = parse_program("gen", &printed).unwrap();
        prop_assert_eq!(second.to_string(), printed);
        prop_assert_eq!(evtrace_testkit::count_nodes(&first), evtrace_testkit::count_nodes(&second));
    }

    #[test]
    fn rule_printing_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = QueryGen::new(&mut rng).query();
        let e = parse_expr(&text, &[]).unwrap();
        let again = parse_expr(&e.to_string(), &[]).unwrap();
        prop_assert_eq!(&again, &e, "{}", text);
    }

    #[test]
    fn trace_files_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let traces = [random_trace(&mut rng, 200), program_trace(seed)];
        for t in traces {
            let header = TraceHeader::new(t.source_name(), &Filter::pass_all(), &[]);
            let text = trace_to_string(&t, &header);
            let back = read_trace(text.as_bytes()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}

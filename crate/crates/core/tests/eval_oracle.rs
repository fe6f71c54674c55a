//! The evaluator against the brute-force evaluator and the path oracle.

use evtrace_testkit::agreement::{paths_agree, queries_agree};

#[test]
fn random_queries_agree_with_brute_force() {
    let t = queries_agree(41, 300).unwrap_or_else(|e| panic!("{e}"));
    assert!(t.truthy > 30 && t.truthy < 270, "{t:?}");
    assert!(t.quantifiers > 50 && t.cards > 10 && t.aggregates > 10, "{t:?}");
}

#[test]
fn random_paths_agree_with_membership_oracle() {
    let accepted = paths_agree(42, 1000).unwrap_or_else(|e| panic!("{e}"));
    assert!(accepted > 200 && accepted < 800, "{accepted} accepted");
}

//! Seeded comparisons of the library evaluator with the brute-force
//! evaluator and the path-membership oracle.

use evtrace::eval::Evaluator;
use evtrace::forman::{parse_expr, Expr};
use evtrace::EventId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brute::Brute;
use crate::paths::{path_member, random_path, random_word, ALPHABET};
use crate::traces::{random_trace, word_trace, QueryGen, FUNCTIONS};

/// Largest random trace used for query comparisons.
pub const MAX_TRACE_EVENTS: usize = 200;
/// Longest event sequence used for path comparisons.
pub const MAX_WORD: usize = 12;

/// Tally of the query comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryTally {
    pub cases: usize,
    pub truthy: usize,
    pub quantifiers: usize,
    pub aggregates: usize,
    pub cards: usize,
}

/// Evaluates `cases` random queries on random traces with both evaluators.
/// Quantifiers must also agree on witness and on the number of body
/// evaluations. Returns the first disagreement as an error.
pub fn queries_agree(seed: u64, cases: usize) -> Result<QueryTally, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = QueryTally { cases, ..QueryTally::default() };
    for case in 0..cases {
        let trace = random_trace(&mut rng, MAX_TRACE_EVENTS);
        let text = QueryGen::new(&mut rng).query();
        let within = if rng.gen_bool(0.3) { Some(*FUNCTIONS.choose(&mut rng).unwrap()) } else { None };
        let ctx = |what: &str| format!("case {case} ({}): {text}: {what}", within.unwrap_or("no scope"));
        let expr = parse_expr(&text, &[]).map_err(|e| ctx(&e.to_string()))?;
        let mut fast = Evaluator::new(&trace).within(within);
        let mut slow = Brute::new(&trace, within);
        let got = fast.eval(&expr).map_err(|e| ctx(&e.to_string()))?;
        let want = slow.eval(&expr).map_err(|e| ctx(&e))?;
        if got != want {
            return Err(ctx(&format!("evaluator gave {got:?}, brute force gave {want:?}")));
        }
        tally.truthy += usize::from(got.truthy());
        if let Expr::Quant(q) = &expr {
            tally.quantifiers += 1;
            let o = fast.eval_quantifier(q).map_err(|e| ctx(&e.to_string()))?;
            let b = slow.quantifier(q).map_err(|e| ctx(&e))?;
            let visited = b.position.unwrap_or(b.selected);
            if (o.value, o.witness, o.visited) != (b.value, b.witness, visited) {
                return Err(ctx(&format!(
                    "quantifier gave {:?}, brute force gave {:?}",
                    (o.value, o.witness, o.visited),
                    (b.value, b.witness, visited)
                )));
            }
        }
        let mut outer = Vec::new();
        outer_aggregates(&expr, &mut outer);
        for e in outer {
            let (Expr::Card(agg) | Expr::List(agg)) = e else {
                continue;
            };
            if matches!(e, Expr::Card(_)) {
                tally.cards += 1;
            } else {
                tally.aggregates += 1;
            }
            let o = fast.eval_aggregate(agg).map_err(|e| ctx(&e.to_string()))?;
            let b = slow.aggregate(agg).map_err(|e| ctx(&e))?;
            if o != b {
                return Err(ctx(&format!("aggregate {e} gave {o:?}, brute force gave {b:?}")));
            }
        }
    }
    Ok(tally)
}

/// Matches `cases` random path expressions against event sequences of at
/// most [`MAX_WORD`] events, half of them sampled from the expression's own
/// language. Returns the number of accepted sequences.
pub fn paths_agree(seed: u64, cases: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    for case in 0..cases {
        let path = random_path(&mut rng, 3);
        let mut word = Vec::new();
        if rng.gen_bool(0.5) {
            random_word(&mut rng, &path, &mut word);
        }
        if word.len() > MAX_WORD || word.is_empty() && rng.gen_bool(0.5) {
            word.clear();
            for _ in 0..rng.gen_range(0..=MAX_WORD) {
                let (kind, name) = *ALPHABET.choose(&mut rng).unwrap();
                word.push((kind, name.unwrap_or("c").to_string()));
            }
        }
        let trace = word_trace(&word);
        let ids: Vec<EventId> = (1..=word.len()).map(EventId).collect();
        let got = Evaluator::new(&trace).match_path(&ids, &path).map_err(|e| format!("case {case}: {e}"))?;
        let want = path_member(&path, &ids, &mut |id, leaf| {
            let e = trace.event(id);
            e.kind == leaf.pattern.kind && leaf.pattern.is.as_ref().is_none_or(|n| *n == e.name)
        });
        if got != want {
            return Err(format!("case {case}: {path:?} on {word:?}: matcher said {got}, oracle said {want}"));
        }
        accepted += usize::from(got);
    }
    Ok(accepted)
}

/// `CARD` and list aggregates not nested under a binder, so that they can be
/// evaluated on their own.
fn outer_aggregates<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    match e {
        Expr::Card(_) | Expr::List(_) => out.push(e),
        Expr::Not(a) | Expr::Neg(a) => outer_aggregates(a, out),
        Expr::Binary(_, a, b) => {
            outer_aggregates(a, out);
            outer_aggregates(b, out);
        }
        Expr::Satisfies(list, _) => outer_aggregates(list, out),
        _ => {}
    }
}

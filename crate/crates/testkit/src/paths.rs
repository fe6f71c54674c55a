//! Path-expression oracle and generators.
//!
//! [`path_member`] decides membership by trying every way of splitting the
//! sequence among the parts of the expression, memoized on
//! (sub-expression, start, end). It shares nothing with the automaton used by
//! the library.

use std::collections::HashMap;

use evtrace::forman::{PathExpr, PathLeaf, Pattern};
use evtrace::{EventId, EventKind};
use rand::seq::SliceRandom;
use rand::Rng;

/// Whether the whole of `seq` is a word of `path`, with `leaf_matches`
/// deciding whether one event is accepted by one leaf.
pub fn path_member(path: &PathExpr, seq: &[EventId], leaf_matches: &mut dyn FnMut(EventId, &PathLeaf) -> bool) -> bool {
    let mut m = Membership { seq, leaf_matches, memo: HashMap::new() };
    m.spans(path, 0, seq.len())
}

struct Membership<'a, 'f> {
    seq: &'a [EventId],
    leaf_matches: &'f mut dyn FnMut(EventId, &PathLeaf) -> bool,
    memo: HashMap<(*const PathExpr, usize, usize), bool>,
}

impl Membership<'_, '_> {
    /// Does `seq[i..j]` belong to the language of `p`?
    fn spans(&mut self, p: &PathExpr, i: usize, j: usize) -> bool {
        let key = (p as *const PathExpr, i, j);
        if let Some(&r) = self.memo.get(&key) {
            return r;
        }
        let r = match p {
            PathExpr::Leaf(leaf) => j == i + 1 && (self.leaf_matches)(self.seq[i], leaf),
            PathExpr::Seq(items) => self.seq_spans(items, i, j),
            PathExpr::Alt(items) => items.iter().any(|q| self.spans(q, i, j)),
            PathExpr::Opt(q) => i == j || self.spans(q, i, j),
            PathExpr::Star(q) => i == j || self.repeat(q, p, i, j),
            PathExpr::Plus(q) if i == j => self.spans(q, i, j),
            PathExpr::Plus(q) => self.repeat_plus(q, i, j),
        };
        self.memo.insert(key, r);
        r
    }

    fn seq_spans(&mut self, items: &[PathExpr], i: usize, j: usize) -> bool {
        match items.split_first() {
            None => i == j,
            Some((first, rest)) => (i..=j).any(|k| self.spans(first, i, k) && self.seq_spans(rest, k, j)),
        }
    }

    // one non-empty piece of `q` followed by a word of `star`
    fn repeat(&mut self, q: &PathExpr, star: &PathExpr, i: usize, j: usize) -> bool {
        (i + 1..=j).any(|k| self.spans(q, i, k) && self.spans(star, k, j))
    }

    // one or more pieces of `q` covering `i..j`
    fn repeat_plus(&mut self, q: &PathExpr, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        self.spans(q, i, j) || (i + 1..j).any(|k| self.spans(q, i, k) && self.repeat_plus(q, k, j))
    }
}

/// Letters used by random paths: kind and optional name.
pub const ALPHABET: [(EventKind, Option<&str>); 5] = [
    (EventKind::FuncCall, Some("a")),
    (EventKind::FuncCall, Some("b")),
    (EventKind::FuncCall, None),
    (EventKind::ExStmt, Some("a")),
    (EventKind::ExStmt, None),
];

/// A random path expression of bounded depth over [`ALPHABET`].
pub fn random_path<R: Rng>(rng: &mut R, depth: usize) -> PathExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        let (kind, name) = *ALPHABET.choose(rng).unwrap();
        return PathExpr::Leaf(PathLeaf {
            metavar: None,
            pattern: Pattern { kind, is: name.map(str::to_string), context: None },
        });
    }
    match rng.gen_range(0..5) {
        0 => PathExpr::Seq((0..rng.gen_range(2..=3)).map(|_| random_path(rng, depth - 1)).collect()),
        1 => PathExpr::Alt((0..rng.gen_range(2..=3)).map(|_| random_path(rng, depth - 1)).collect()),
        2 => PathExpr::Star(Box::new(random_path(rng, depth - 1))),
        3 => PathExpr::Plus(Box::new(random_path(rng, depth - 1))),
        _ => PathExpr::Opt(Box::new(random_path(rng, depth - 1))),
    }
}

/// The (kind, name) letters a random word of `path` is spelled with; each
/// letter later becomes an event carrying that kind and name. Repetitions are
/// capped so the word stays short.
pub fn random_word<R: Rng>(rng: &mut R, path: &PathExpr, out: &mut Vec<(EventKind, String)>) {
    match path {
        PathExpr::Leaf(leaf) => {
            let name = match &leaf.pattern.is {
                Some(n) => n.clone(),
                None => ["a", "b", "c"].choose(rng).unwrap().to_string(),
            };
            out.push((leaf.pattern.kind, name));
        }
        PathExpr::Seq(items) => items.iter().for_each(|p| random_word(rng, p, out)),
        PathExpr::Alt(items) => {
            let pick = rng.gen_range(0..items.len());
            random_word(rng, &items[pick], out)
        }
        PathExpr::Star(p) => {
            for _ in 0..rng.gen_range(0..=2) {
                random_word(rng, p, out);
            }
        }
        PathExpr::Plus(p) => {
            for _ in 0..rng.gen_range(1..=2) {
                random_word(rng, p, out);
            }
        }
        PathExpr::Opt(p) => {
            if rng.gen_bool(0.5) {
                random_word(rng, p, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(name: &str) -> PathExpr {
        PathExpr::Leaf(PathLeaf {
            metavar: None,
            pattern: Pattern { kind: EventKind::FuncCall, is: Some(name.into()), context: None },
        })
    }

    // events are identified with letters: id 0 is `a`, id 1 is `b`
    fn word(s: &str) -> Vec<EventId> {
        s.bytes().map(|b| EventId((b - b'a') as usize)).collect()
    }

    fn member(p: &PathExpr, s: &str) -> bool {
        path_member(p, &word(s), &mut |id, l| l.pattern.is.as_deref() == Some(["a", "b"][id.0]))
    }

    #[test]
    fn kleene_identities() {
        let ab_plus = PathExpr::Plus(Box::new(PathExpr::Seq(vec![leaf("a"), leaf("b")])));
        assert!(!member(&ab_plus, ""));
        assert!(member(&ab_plus, "ab"));
        assert!(member(&ab_plus, "abab"));
        assert!(!member(&ab_plus, "aba"));
        let a_star = PathExpr::Star(Box::new(leaf("a")));
        assert!(member(&a_star, ""));
        assert!(member(&a_star, "aaa"));
        assert!(!member(&a_star, "ab"));
    }

    #[test]
    fn counter_pattern() {
        let p = PathExpr::Seq(vec![leaf("a"), PathExpr::Star(Box::new(leaf("b")))]);
        assert!(member(&p, "abb"));
        assert!(!member(&p, "ba"));
        let nested = PathExpr::Star(Box::new(PathExpr::Opt(Box::new(leaf("a")))));
        assert!(member(&nested, "aaaa"));
    }
}

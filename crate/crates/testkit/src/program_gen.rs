//! Seeded random MiniC programs.
//!
//! Generated programs always parse, always terminate and stay within a node
//! budget. Termination comes from two restrictions: every loop is a counted
//! `while` whose counter the body never assigns, and a function only calls
//! functions defined before it. Runtime faults such as division by zero are
//! possible on purpose, since a faulting run must still produce a valid trace.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upper bound on AST nodes used by the acceptance runs.
pub const MAX_NODES: usize = 60;

/// Generates the program for `seed` with at most `max_nodes` AST nodes as
/// counted by [`crate::count_nodes`].
pub fn random_program(seed: u64, max_nodes: usize) -> String {
    // the budget is tracked approximately while generating, so an oversized
    // candidate is discarded and the next one derived from the same seed
    for attempt in 0u64.. {
        let mut g = Gen::new(seed.wrapping_mul(1_000_003).wrapping_add(attempt), max_nodes);
        let src = g.program();
        let program = evtrace::minic::parse_program("gen", &src)
            .unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"));
        if crate::count_nodes(&program) <= max_nodes {
            return src;
        }
    }
    unreachable!("the attempt counter is unbounded")
}

struct Scope {
    // assignable variables
    vars: Vec<String>,
    // loop counters, readable but never assigned by generated code
    counters: Vec<String>,
}

struct Gen {
    rng: ChaCha8Rng,
    budget: usize,
    out: String,
    indent: usize,
    globals: Vec<String>,
    // functions callable from the function being generated, with arity
    callable: Vec<(String, usize)>,
    scopes: Vec<Scope>,
    loop_depth: usize,
    next_var: usize,
    next_label: usize,
}

impl Gen {
    fn new(seed: u64, budget: usize) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            budget,
            out: String::new(),
            indent: 0,
            globals: Vec::new(),
            callable: Vec::new(),
            scopes: Vec::new(),
            loop_depth: 0,
            next_var: 0,
            next_label: 0,
        }
    }

    fn take(&mut self, n: usize) -> bool {
        if self.budget >= n {
            self.budget -= n;
            true
        } else {
            false
        }
    }

    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn program(&mut self) -> String {
        let nglobals = self.rng.gen_range(0..=2);
        for i in 0..nglobals {
            let name = format!("g{i}");
            if self.rng.gen_bool(0.5) {
                let v = self.rng.gen_range(-3..10);
                self.line(&format!("var {name} = {v};"));
            } else {
                self.line(&format!("var {name};"));
            }
            self.globals.push(name);
        }
        let nfuncs = self.rng.gen_range(0..=2);
        for i in 0..nfuncs {
            // leave most of the budget for main
            if self.budget < 20 {
                break;
            }
            let name = format!("f{i}");
            let arity = self.rng.gen_range(0..=2);
            let share = self.budget / 3;
            self.function(&name, arity, share);
            self.callable.push((name, arity));
        }
        self.line("func main() {");
        self.indent += 1;
        self.scopes.push(Scope { vars: self.globals.clone(), counters: Vec::new() });
        let nstmts = self.rng.gen_range(1..=6);
        for _ in 0..nstmts {
            if self.budget == 0 {
                break;
            }
            self.stmt(2);
        }
        self.scopes.pop();
        self.indent -= 1;
        self.line("}");
        std::mem::take(&mut self.out)
    }

    fn function(&mut self, name: &str, arity: usize, share: usize) {
        let params: Vec<String> = (0..arity).map(|i| format!("p{i}")).collect();
        self.line(&format!("func {name}({}) {{", params.join(", ")));
        self.indent += 1;
        let mut vars = self.globals.clone();
        vars.extend(params);
        self.scopes.push(Scope { vars, counters: Vec::new() });
        let saved = self.budget;
        self.budget = share;
        let nstmts = self.rng.gen_range(0..=3);
        for _ in 0..nstmts {
            if self.budget == 0 {
                break;
            }
            self.stmt(1);
        }
        let left = self.budget;
        self.budget = 1;
        let ret = self.expr(0);
        self.line(&format!("return {ret};"));
        // the trailing return costs 2 nodes
        self.budget = saved.saturating_sub(share - left + 2);
        self.scopes.pop();
        self.indent -= 1;
        self.line("}");
    }

    fn readable(&self) -> Vec<String> {
        let mut names = Vec::new();
        for s in &self.scopes {
            names.extend(s.vars.iter().cloned());
            names.extend(s.counters.iter().cloned());
        }
        names
    }

    fn assignable(&self) -> Vec<String> {
        self.scopes.iter().flat_map(|s| s.vars.iter().cloned()).collect()
    }

    fn fresh_var(&mut self) -> String {
        self.next_var += 1;
        format!("v{}", self.next_var)
    }

    fn stmt(&mut self, depth: usize) {
        let choice = self.rng.gen_range(0..100);
        match choice {
            0..=29 => self.expr_stmt(),
            30..=44 => self.var_decl(),
            45..=57 if depth > 0 => self.if_stmt(depth),
            58..=69 if depth > 0 => self.while_stmt(depth),
            70..=77 => self.print_stmt(),
            78..=83 => self.labeled(depth),
            84..=88 if depth > 0 => self.block(depth),
            89..=93 if self.loop_depth > 0 => {
                if self.take(1) {
                    self.line("break;");
                }
            }
            _ => self.expr_stmt(),
        }
    }

    fn expr_stmt(&mut self) {
        let targets = self.assignable();
        if !self.take(1) {
            return;
        }
        if !targets.is_empty() && self.take(1) && self.rng.gen_bool(0.7) {
            let t = targets.choose(&mut self.rng).unwrap().clone();
            let e = self.expr(2);
            self.line(&format!("{t} = {e};"));
        } else {
            let e = self.expr(2);
            self.line(&format!("{e};"));
        }
    }

    fn var_decl(&mut self) {
        if !self.take(1) {
            return;
        }
        let name = self.fresh_var();
        if self.budget > 0 && self.rng.gen_bool(0.7) {
            let e = self.expr(2);
            self.line(&format!("var {name} = {e};"));
        } else {
            self.line(&format!("var {name};"));
        }
        self.scopes.last_mut().unwrap().vars.push(name);
    }

    fn print_stmt(&mut self) {
        // statement, call and one argument
        if !self.take(3) {
            return;
        }
        let arg = self.expr(1);
        let sep = if self.rng.gen_bool(0.5) && self.take(1) { ", \"\\n\"" } else { "" };
        self.line(&format!("print({arg}{sep});"));
    }

    fn labeled(&mut self, depth: usize) {
        if !self.take(1) {
            return;
        }
        self.next_label += 1;
        let label = format!("L{}", self.next_label);
        self.out.push_str(&"    ".repeat(self.indent));
        self.out.push_str(&format!("{label}:\n"));
        let before = self.out.len();
        self.stmt(depth.saturating_sub(1));
        if self.out.len() == before {
            // the body ran out of budget; a label needs a statement
            self.line("{ }");
        }
    }

    fn body(&mut self, depth: usize) {
        self.line("{");
        self.indent += 1;
        self.scopes.push(Scope { vars: Vec::new(), counters: Vec::new() });
        let n = self.rng.gen_range(0..=3);
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.stmt(depth - 1);
        }
        self.scopes.pop();
        self.indent -= 1;
    }

    fn block(&mut self, depth: usize) {
        if !self.take(1) {
            return;
        }
        self.body(depth);
        self.line("}");
    }

    fn if_stmt(&mut self, depth: usize) {
        // if, condition, then block
        if !self.take(3) {
            return;
        }
        let cond = self.expr(2);
        self.line(&format!("if ({cond})"));
        self.body(depth);
        if self.rng.gen_bool(0.4) && self.take(1) {
            self.line("} else");
            self.body(depth);
        }
        self.line("}");
    }

    fn while_stmt(&mut self, depth: usize) {
        // var decl (2), while (1), cond (3), block (1), increment (5)
        if !self.take(12) {
            return;
        }
        let counter = self.fresh_var();
        let bound = self.rng.gen_range(0..5);
        self.line(&format!("var {counter} = 0;"));
        self.line(&format!("while ({counter} < {bound})"));
        self.line("{");
        self.indent += 1;
        self.scopes.last_mut().unwrap().counters.push(counter.clone());
        // the increment comes first so that a later `break` cannot skip it
        // and the body cannot loop forever
        self.line(&format!("{counter} = {counter} + 1;"));
        self.scopes.push(Scope { vars: Vec::new(), counters: Vec::new() });
        self.loop_depth += 1;
        let n = self.rng.gen_range(0..=2);
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.stmt(depth - 1);
        }
        self.loop_depth -= 1;
        self.scopes.pop();
        self.indent -= 1;
        self.line("}");
    }

    /// An expression using at most the remaining budget (at least one node
    /// is always produced; callers reserve it).
    fn expr(&mut self, depth: usize) -> String {
        let choice = if depth == 0 || self.budget < 3 { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..10) };
        match choice {
            0 => {
                self.budget = self.budget.saturating_sub(1);
                self.rng.gen_range(0..10).to_string()
            }
            1 => {
                self.budget = self.budget.saturating_sub(1);
                let names = self.readable();
                match names.choose(&mut self.rng) {
                    Some(n) => n.clone(),
                    None => "1".to_string(),
                }
            }
            2..=4 => {
                self.budget -= 1;
                let op = ["+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||"]
                    .choose(&mut self.rng)
                    .unwrap();
                let a = self.expr(depth - 1);
                let b = self.expr(depth - 1);
                format!("({a} {op} {b})")
            }
            5 => {
                self.budget -= 1;
                let op = if self.rng.gen_bool(0.5) { "-" } else { "!" };
                let a = self.expr(depth - 1);
                format!("{op}{a}")
            }
            6 => {
                self.budget -= 1;
                let c = self.expr(depth - 1);
                let a = self.expr(depth - 1);
                let b = self.expr(depth - 1);
                format!("({c} ? {a} : {b})")
            }
            7 => {
                self.budget -= 1;
                let a = self.expr(depth - 1);
                let b = self.expr(depth - 1);
                format!("({a}, {b})")
            }
            8 if !self.callable.is_empty() => {
                let (name, arity) = self.callable.choose(&mut self.rng).unwrap().clone();
                if self.budget < 1 + arity {
                    self.budget -= 1;
                    return "2".to_string();
                }
                self.budget -= 1;
                let args: Vec<String> = (0..arity).map(|_| self.expr(0)).collect();
                format!("{name}({})", args.join(", "))
            }
            _ => {
                let targets = self.assignable();
                match targets.choose(&mut self.rng) {
                    Some(t) => {
                        let t = t.clone();
                        self.budget -= 1;
                        let e = self.expr(depth - 1);
                        format!("({t} = {e})")
                    }
                    None => {
                        self.budget -= 1;
                        "3".to_string()
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use evtrace::minic::parse_program;

    #[test]
    fn programs_parse_and_fit_the_budget() {
        for seed in 0..300 {
            let src = random_program(seed, MAX_NODES);
            let p = parse_program("gen", &src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
            let n = crate::count_nodes(&p);
            assert!(n <= MAX_NODES, "seed {seed}: {n} nodes\n{src}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(random_program(7, MAX_NODES), random_program(7, MAX_NODES));
        assert_ne!(random_program(7, MAX_NODES), random_program(8, MAX_NODES));
    }
}

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::FormanError;
use crate::minic;
use crate::trace::EventKind;
use crate::value::Cast;

pub(super) fn parse(source: &str) -> Result<RuleSet, FormanError> {
    let mut p = Parser { toks: tokenize(source)?, pos: 0, bound: Vec::new() };
    let mut rules = Vec::new();
    while p.peek() != &Tok::Eof {
        if p.eat_kw("WITHIN") {
            let scope = p.ident("function name after `WITHIN`")?;
            while !p.at_kw("END") {
                if p.peek() == &Tok::Eof {
                    return Err(p.error("expected `END` closing the `WITHIN` group"));
                }
                rules.push(p.rule(Some(scope.clone()))?);
            }
            p.bump();
            if p.peek() == &Tok::Semi {
                p.bump();
            }
        } else {
            rules.push(p.rule(None)?);
        }
    }
    Ok(RuleSet { rules })
}

pub(super) fn parse_expression(source: &str, metavars: &[&str]) -> Result<Expr, FormanError> {
    let mut p = Parser { toks: tokenize(source)?, pos: 0, bound: metavars.iter().map(|s| s.to_string()).collect() };
    let e = p.expr()?;
    p.expect(&Tok::Eof, "end of expression")?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Metavariables visible at the current point.
    bound: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> FormanError {
        let t = &self.toks[self.pos];
        FormanError { line: t.line, column: t.column, message: message.into() }
    }

    fn unexpected(&self, wanted: &str) -> FormanError {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Kw(k) if *k == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), FormanError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn expect(&mut self, tok: &Tok, wanted: &str) -> Result<(), FormanError> {
        if self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<String, FormanError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn require_bound(&self, name: &str) -> Result<(), FormanError> {
        if self.bound.iter().any(|b| b == name) {
            Ok(())
        } else {
            Err(self.error(format!("unbound metavariable `{name}`")))
        }
    }

    fn rule(&mut self, scope: Option<String>) -> Result<Rule, FormanError> {
        let line = self.toks[self.pos].line;
        let body = self.expr()?;
        // the witness of a top-level quantifier can be reported by the messages
        let witness = match &body {
            Expr::Quant(q) => q.selection.metavar.clone(),
            _ => None,
        };
        let pushed = witness.is_some();
        if let Some(m) = witness {
            self.bound.push(m);
        }
        let result = self.messages();
        if pushed {
            self.bound.pop();
        }
        let (say, onfail) = result?;
        if say.is_empty() && onfail.is_empty() {
            return Err(self.unexpected("`SAY` or `ONFAIL`"));
        }
        self.expect(&Tok::Semi, "`;` ending the rule")?;
        Ok(Rule { scope, body, say, onfail, line })
    }

    #[allow(clippy::type_complexity)]
    fn messages(&mut self) -> Result<(Vec<Vec<Expr>>, Vec<Vec<Expr>>), FormanError> {
        let mut say = Vec::new();
        while self.at_kw("SAY") {
            say.push(self.say_clause()?);
        }
        let mut onfail = Vec::new();
        if self.eat_kw("ONFAIL") {
            onfail.push(self.say_clause()?);
            while self.at_kw("SAY") {
                onfail.push(self.say_clause()?);
            }
        }
        Ok((say, onfail))
    }

    fn say_clause(&mut self) -> Result<Vec<Expr>, FormanError> {
        self.expect_kw("SAY")?;
        self.expect(&Tok::LParen, "`(` after `SAY`")?;
        let mut items = Vec::new();
        while self.peek() != &Tok::RParen {
            if !self.starts_expr() {
                return Err(self.unexpected("a message item or `)`"));
            }
            items.push(self.expr()?);
        }
        self.bump();
        Ok(items)
    }

    fn starts_expr(&self) -> bool {
        match self.peek() {
            Tok::Kw(k) => {
                matches!(*k, "TRUE" | "FALSE" | "VALUE" | "SOURCE_TEXT" | "CARD" | "EXISTS" | "FOREACH" | "NOT")
            }
            Tok::Int(_) | Tok::Str(_) | Tok::Ident(_) | Tok::LParen | Tok::LBracket | Tok::Minus => true,
            _ => false,
        }
    }

    pub(super) fn expr(&mut self) -> Result<Expr, FormanError> {
        let mut lhs = self.and()?;
        while self.eat_kw("OR") {
            let rhs = self.and()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, FormanError> {
        let mut lhs = self.not()?;
        while self.eat_kw("AND") {
            let rhs = self.not()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, FormanError> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, FormanError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<Expr, FormanError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, FormanError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, FormanError> {
        if self.peek() == &Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let mut e = self.primary()?;
        while self.eat_kw("SATISFIES") {
            let path = self.path_alt()?;
            e = Expr::Satisfies(Box::new(e), path);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, FormanError> {
        match self.peek().clone() {
            Tok::Kw("TRUE") => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Kw("FALSE") => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Ident(name) => {
                self.require_bound(&name)?;
                self.bump();
                Ok(Expr::Var(name))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBracket => Ok(Expr::List(Box::new(self.aggregate()?))),
            Tok::Kw("CARD") => {
                self.bump();
                Ok(Expr::Card(Box::new(self.aggregate()?)))
            }
            Tok::Kw("VALUE") => self.value_at(),
            Tok::Kw("SOURCE_TEXT") => {
                self.bump();
                self.expect(&Tok::LParen, "`(` after `SOURCE_TEXT`")?;
                let m = self.ident("a metavariable")?;
                self.require_bound(&m)?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Expr::SourceText(m))
            }
            Tok::Kw("EXISTS") | Tok::Kw("FOREACH") => self.quantified(),
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn value_at(&mut self) -> Result<Expr, FormanError> {
        self.expect_kw("VALUE")?;
        self.expect(&Tok::LParen, "`(` after `VALUE`")?;
        let cast_name = self.ident("a type (`int`, `bool` or `str`)")?;
        let cast = Cast::from_keyword(&cast_name).ok_or_else(|| self.error(format!("unknown type `{cast_name}`")))?;
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::LParen, "`(` before `AT`")?;
        self.expect_kw("AT")?;
        let metavar = self.ident("a metavariable after `AT`")?;
        self.require_bound(&metavar)?;
        let at = self.pos;
        let Tok::Raw(text) = self.bump() else {
            return Err(self.error("expected a probe expression"));
        };
        let expr = minic::parse_expr(&text).map_err(|e| {
            let t = &self.toks[at];
            FormanError {
                line: t.line + e.line.saturating_sub(1),
                column: if e.line <= 1 { t.column + e.column.saturating_sub(1) } else { e.column },
                message: format!("malformed probe expression: {}", e.message),
            }
        })?;
        self.expect(&Tok::RParen, "`)` closing the probe")?;
        let text = minic::expr_to_string(&expr);
        Ok(Expr::Value(ValueAt { cast, metavar, expr, text }))
    }

    fn metavar_prefix(&mut self) -> Result<Option<String>, FormanError> {
        if let (Tok::Ident(name), Tok::Colon) = (self.peek().clone(), self.peek_at(1)) {
            if EventKind::from_keyword(&name).is_some() || name == "execute_program" {
                return Err(self.error(format!("`{name}` is an event kind, not a metavariable")));
            }
            self.bump();
            self.bump();
            return Ok(Some(name));
        }
        Ok(None)
    }

    fn kind(&mut self) -> Result<EventKind, FormanError> {
        let name = self.ident("an event kind")?;
        EventKind::from_keyword(&name).ok_or_else(|| {
            self.pos -= 1;
            let e = self.error(format!("unknown event kind `{name}`"));
            self.pos += 1;
            e
        })
    }

    fn is_literal(&mut self) -> Result<Option<String>, FormanError> {
        if !self.eat_kw("IS") {
            return Ok(None);
        }
        match self.bump() {
            Tok::Str(s) | Tok::Ident(s) => Ok(Some(minic::normalize_ws(&s))),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a name or quoted text after `IS`"))
            }
        }
    }

    /// `[ALL] [M:] kind [IS lit] [& context] FROM scope`. The metavariable is
    /// left bound on return; the caller pops it.
    fn selection(&mut self) -> Result<Selection, FormanError> {
        let all = self.eat_kw("ALL");
        let metavar = self.metavar_prefix()?;
        let kind = self.kind()?;
        let is = self.is_literal()?;
        if let Some(m) = &metavar {
            self.bound.push(m.clone());
        }
        let context = if self.peek() == &Tok::Amp {
            self.bump();
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        // the scope is resolved outside the new binding
        if metavar.is_some() {
            self.bound.pop();
        }
        self.expect_kw("FROM")?;
        let from = match self.ident("`execute_program` or a metavariable after `FROM`")? {
            s if s == "execute_program" => Scope::Program,
            m => {
                self.pos -= 1;
                self.require_bound(&m)?;
                self.pos += 1;
                Scope::Metavar(m)
            }
        };
        if let Some(m) = &metavar {
            self.bound.push(m.clone());
        }
        Ok(Selection { all, metavar, pattern: Pattern { kind, is, context }, from })
    }

    fn aggregate(&mut self) -> Result<Aggregate, FormanError> {
        self.expect(&Tok::LBracket, "`[`")?;
        let selection = self.selection()?;
        let apply = if self.eat_kw("APPLY") { Some(self.expr()) } else { None };
        if selection.metavar.is_some() {
            self.bound.pop();
        }
        let apply = apply.transpose()?;
        self.expect(&Tok::RBracket, "`]` closing the list")?;
        Ok(Aggregate { selection, apply })
    }

    fn quantified(&mut self) -> Result<Expr, FormanError> {
        let quantifier = match self.bump() {
            Tok::Kw("EXISTS") => Quantifier::Exists,
            _ => Quantifier::Foreach,
        };
        let selection = self.selection()?;
        let body = if self.starts_expr() { Some(self.expr()) } else { None };
        if selection.metavar.is_some() {
            self.bound.pop();
        }
        Ok(Expr::Quant(Box::new(Quantified { quantifier, selection, body: body.transpose()? })))
    }

    fn starts_leaf(&self) -> bool {
        matches!(self.peek(), Tok::LParen | Tok::Ident(_))
    }

    fn path_alt(&mut self) -> Result<PathExpr, FormanError> {
        let mut alts = vec![self.path_seq()?];
        while self.peek() == &Tok::Pipe {
            self.bump();
            alts.push(self.path_seq()?);
        }
        Ok(if alts.len() == 1 { alts.pop().expect("one") } else { PathExpr::Alt(alts) })
    }

    fn path_seq(&mut self) -> Result<PathExpr, FormanError> {
        if !self.starts_leaf() {
            return Err(self.unexpected("an event pattern or `(`"));
        }
        let mut items = Vec::new();
        while self.starts_leaf() {
            items.push(self.path_postfix()?);
        }
        Ok(if items.len() == 1 { items.pop().expect("one") } else { PathExpr::Seq(items) })
    }

    fn path_postfix(&mut self) -> Result<PathExpr, FormanError> {
        let mut p = if self.peek() == &Tok::LParen {
            self.bump();
            let inner = self.path_alt()?;
            self.expect(&Tok::RParen, "`)` closing the path group")?;
            inner
        } else {
            self.path_leaf()?
        };
        loop {
            p = match self.peek() {
                Tok::Star => PathExpr::Star(Box::new(p)),
                Tok::Plus => PathExpr::Plus(Box::new(p)),
                Tok::Question => PathExpr::Opt(Box::new(p)),
                _ => return Ok(p),
            };
            self.bump();
        }
    }

    fn path_leaf(&mut self) -> Result<PathExpr, FormanError> {
        let metavar = self.metavar_prefix()?;
        let kind = self.kind()?;
        let is = self.is_literal()?;
        let context = if self.peek() == &Tok::Amp {
            self.bump();
            if let Some(m) = &metavar {
                self.bound.push(m.clone());
            }
            let c = self.primary();
            if metavar.is_some() {
                self.bound.pop();
            }
            Some(Box::new(c?))
        } else {
            None
        };
        Ok(PathExpr::Leaf(PathLeaf { metavar, pattern: Pattern { kind, is, context } }))
    }
}

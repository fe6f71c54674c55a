use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{normalize_ws, ParseError, Span};
use crate::value::Value;

pub(super) fn parse(name: &str, source: &str) -> Result<MiniProgram, ParseError> {
    let mut p = Parser::new(source)?;
    let mut globals = Vec::new();
    let mut functions = Vec::new();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Var => globals.push(p.global()?),
            Tok::Func => functions.push(p.function()?),
            other => {
                let msg = format!("expected `var` or `func`, found {}", other.describe());
                return Err(p.error_here(msg));
            }
        }
    }
    Ok(MiniProgram::new(name.to_string(), source.to_string(), globals, functions))
}

pub(super) fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Parser<'a>, ParseError> {
        Ok(Parser { src, toks: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span_here(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let s = self.span_here();
        ParseError::syntax(s.line, s.column, message)
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            let want = match &tok {
                Tok::Eof => "end of input".to_string(),
                t => t.describe(),
            };
            Err(self.error_here(format!("expected {want}, found {}", self.peek().describe())))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let t = self.bump();
                Ok((name, t.span))
            }
            other => Err(self.error_here(format!("expected identifier, found {}", other.describe()))),
        }
    }

    /// Span from `start` through the most recently consumed token.
    fn close(&self, start: Span) -> Span {
        let last = self.toks[self.pos.saturating_sub(1)].span;
        Span { end: last.end.max(start.end), ..start }
    }

    fn text(&self, span: Span) -> String {
        normalize_ws(&self.src[span.start..span.end])
    }

    fn mk_expr(&self, kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span, text: self.text(span) }
    }

    fn mk_stmt(&self, kind: StmtKind, span: Span) -> Stmt {
        Stmt { kind, span, text: self.text(span) }
    }

    fn global(&mut self) -> Result<Global, ParseError> {
        let start = self.expect(Tok::Var)?.span;
        let (name, _) = self.ident()?;
        let init = if self.eat(&Tok::Assign) { Some(self.literal()?) } else { None };
        self.expect(Tok::Semi)?;
        Ok(Global { name, init, span: self.close(start) })
    }

    /// Global initializers are constants.
    fn literal(&mut self) -> Result<Value, ParseError> {
        let negative = self.eat(&Tok::Minus);
        let value = match self.peek().clone() {
            Tok::Int(n) => Value::Int(if negative { -n } else { n }),
            Tok::Str(s) if !negative => Value::Str(s),
            Tok::True if !negative => Value::Bool(true),
            Tok::False if !negative => Value::Bool(false),
            other => {
                return Err(self.error_here(format!("global initializer must be a literal, found {}", other.describe())))
            }
        };
        self.bump();
        Ok(value)
    }

    fn function(&mut self) -> Result<FunctionDef, ParseError> {
        let start = self.expect(Tok::Func)?.span;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident()?.0);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let body = match self.block()?.kind {
            StmtKind::Block(stmts) => stmts,
            _ => unreachable!("block() returns a block"),
        };
        Ok(FunctionDef { name, params, body, span: self.close(start) })
    }

    fn block(&mut self) -> Result<Stmt, ParseError> {
        let start = self.expect(Tok::LBrace)?.span;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error_here("unclosed block"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(self.mk_stmt(StmtKind::Block(stmts), self.close(start)))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let start = self.span_here();
        let kind = match self.peek().clone() {
            Tok::LBrace => return self.block(),
            Tok::Var => {
                self.bump();
                let (name, _) = self.ident()?;
                let init = if self.eat(&Tok::Assign) { Some(self.expr()?) } else { None };
                self.expect(Tok::Semi)?;
                StmtKind::VarDecl(name, init)
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let then = Box::new(self.stmt()?);
                let other = if self.eat(&Tok::Else) { Some(Box::new(self.stmt()?)) } else { None };
                StmtKind::If(cond, then, other)
            }
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                StmtKind::While(cond, Box::new(self.stmt()?))
            }
            Tok::Return => {
                self.bump();
                let value = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi)?;
                StmtKind::Return(value)
            }
            Tok::Break => {
                self.bump();
                self.expect(Tok::Semi)?;
                StmtKind::Break
            }
            Tok::Ident(label) if *self.peek_at(1) == Tok::Colon => {
                self.bump();
                self.bump();
                let label_span = self.close(start);
                StmtKind::Labeled { label, label_span, body: Box::new(self.stmt()?) }
            }
            _ => {
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Expr(e)
            }
        };
        Ok(self.mk_stmt(kind, self.close(start)))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.assign()?;
        while self.eat(&Tok::Comma) {
            let rhs = self.assign()?;
            let span = self.close(lhs.span);
            lhs = self.mk_expr(ExprKind::Comma(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn assign(&mut self) -> Result<Expr, ParseError> {
        if let (Tok::Ident(name), Tok::Assign) = (self.peek().clone(), self.peek_at(1)) {
            let start = self.span_here();
            self.bump();
            self.bump();
            let value = self.assign()?;
            return Ok(self.mk_expr(ExprKind::Assign(name, Box::new(value)), self.close(start)));
        }
        self.ternary()
    }

    fn ternary(&mut self) -> Result<Expr, ParseError> {
        let cond = self.binary(0)?;
        if !self.eat(&Tok::Question) {
            return Ok(cond);
        }
        let then = self.assign()?;
        self.expect(Tok::Colon)?;
        let other = self.assign()?;
        let span = self.close(cond.span);
        Ok(self.mk_expr(ExprKind::Ternary(Box::new(cond), Box::new(then), Box::new(other)), span))
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ParseError> {
        const LEVELS: [&[(Tok, BinOp)]; 6] = [
            &[(Tok::OrOr, BinOp::Or)],
            &[(Tok::AndAnd, BinOp::And)],
            &[(Tok::EqEq, BinOp::Eq), (Tok::Ne, BinOp::Ne)],
            &[(Tok::Lt, BinOp::Lt), (Tok::Le, BinOp::Le), (Tok::Gt, BinOp::Gt), (Tok::Ge, BinOp::Ge)],
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
            &[(Tok::Star, BinOp::Mul), (Tok::Slash, BinOp::Div), (Tok::Percent, BinOp::Rem)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(&(_, op)) = LEVELS[level].iter().find(|(t, _)| t == self.peek()) {
            self.bump();
            let rhs = self.binary(level + 1)?;
            let span = self.close(lhs.span);
            lhs = self.mk_expr(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span_here();
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Bang => UnOp::Not,
            _ => return self.primary(),
        };
        self.bump();
        let operand = self.unary()?;
        Ok(self.mk_expr(ExprKind::Unary(op, Box::new(operand)), self.close(start)))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span_here();
        let kind = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Tok::True => {
                self.bump();
                ExprKind::Bool(true)
            }
            Tok::False => {
                self.bump();
                ExprKind::Bool(false)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.assign()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    ExprKind::Call(name, args)
                } else {
                    ExprKind::Var(name)
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                // parentheses belong to the node's source text
                return Ok(Expr { span: self.close(start), text: self.text(self.close(start)), ..inner });
            }
            other => return Err(self.error_here(format!("expected expression, found {}", other.describe()))),
        };
        Ok(self.mk_expr(kind, self.close(start)))
    }
}

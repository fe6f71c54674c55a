use super::FormanError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Upper-case reserved word such as `EXISTS` or `SAY`.
    Kw(&'static str),
    Int(i64),
    Str(String),
    /// Verbatim MiniC text of an `AT M <expr>` probe, up to the closing `)`.
    Raw(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Colon,
    Semi,
    Amp,
    Pipe,
    Question,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

pub const KEYWORDS: &[&str] = &[
    "WITHIN",
    "END",
    "TRUE",
    "FALSE",
    "SAY",
    "ONFAIL",
    "EXISTS",
    "FOREACH",
    "FROM",
    "ALL",
    "IS",
    "APPLY",
    "CARD",
    "VALUE",
    "AT",
    "SOURCE_TEXT",
    "SATISFIES",
    "AND",
    "OR",
    "NOT",
];

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Kw(k) => format!("`{k}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Raw(_) => "probe expression".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::Question => "?",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
}

impl Lexer {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while !matches!(self.peek(0), None | Some('\n')) {
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn error(&self, line: u32, column: u32, message: impl Into<String>) -> FormanError {
        FormanError { line, column, message: message.into() }
    }

    fn string(&mut self, line: u32, column: u32) -> Result<Tok, FormanError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error(line, column, "unterminated string literal")),
                Some('\'') => return Ok(Tok::Str(out)),
                Some('\\') => {
                    let c = match self.bump() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some('\\') => '\\',
                        Some('\'') => '\'',
                        Some(other) => {
                            return Err(self.error(self.line, self.column - 1, format!("unknown escape `\\{other}`")))
                        }
                        None => return Err(self.error(line, column, "unterminated string literal")),
                    };
                    out.push(c);
                }
                Some(c) => out.push(c),
            }
        }
    }

    // Everything up to the parenthesis closing the `(` that precedes `AT`,
    // skipping over parentheses inside MiniC string literals.
    fn raw(&mut self, line: u32, column: u32) -> Result<Tok, FormanError> {
        let mut depth = 0usize;
        let mut out = String::new();
        loop {
            match self.peek(0) {
                None => return Err(self.error(line, column, "unterminated probe expression")),
                Some(')') if depth == 0 => return Ok(Tok::Raw(out.trim().to_string())),
                Some(c) => {
                    self.bump();
                    out.push(c);
                    match c {
                        '(' => depth += 1,
                        ')' => depth -= 1,
                        '"' => loop {
                            match self.bump() {
                                None => return Err(self.error(line, column, "unterminated probe expression")),
                                Some('\\') => {
                                    out.push('\\');
                                    if let Some(e) = self.bump() {
                                        out.push(e);
                                    }
                                }
                                Some(q) => {
                                    out.push(q);
                                    if q == '"' {
                                        break;
                                    }
                                }
                            }
                        },
                        _ => {}
                    }
                }
            }
        }
    }
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, FormanError> {
    let mut lx = Lexer { chars: source.chars().collect(), pos: 0, line: 1, column: 1 };
    let mut out: Vec<Token> = Vec::new();
    loop {
        lx.skip_trivia();
        let (line, column) = (lx.line, lx.column);
        // after `AT M` the rest of the parenthesis is MiniC text
        if out.len() >= 2 && out[out.len() - 2].tok == Tok::Kw("AT") {
            if let Tok::Ident(_) = out[out.len() - 1].tok {
                let tok = lx.raw(line, column)?;
                out.push(Token { tok, line, column });
                continue;
            }
        }
        let Some(c) = lx.peek(0) else {
            out.push(Token { tok: Tok::Eof, line, column });
            return Ok(out);
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while let Some(c) = lx.peek(0).filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
                word.push(c);
                lx.bump();
            }
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() {
            let mut digits = String::new();
            while let Some(c) = lx.peek(0).filter(char::is_ascii_digit) {
                digits.push(c);
                lx.bump();
            }
            Tok::Int(digits.parse().map_err(|_| lx.error(line, column, format!("integer `{digits}` is too large")))?)
        } else if c == '\'' {
            lx.string(line, column)?
        } else {
            let two = match (c, lx.peek(1)) {
                ('=', Some('=')) => Some(Tok::EqEq),
                ('!', Some('=')) => Some(Tok::Ne),
                ('<', Some('=')) => Some(Tok::Le),
                ('>', Some('=')) => Some(Tok::Ge),
                _ => None,
            };
            if let Some(t) = two {
                lx.bump();
                lx.bump();
                t
            } else {
                let t = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    '&' => Tok::Amp,
                    '|' => Tok::Pipe,
                    '?' => Tok::Question,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '%' => Tok::Percent,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    other => return Err(lx.error(line, column, format!("unexpected character `{other}`"))),
                };
                lx.bump();
                t
            }
        };
        out.push(Token { tok, line, column });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn probe_text_is_captured_verbatim() {
        assert_eq!(
            toks("VALUE(int)(AT L strlen(buf) >10) SAY"),
            vec![
                Tok::Kw("VALUE"),
                Tok::LParen,
                Tok::Ident("int".into()),
                Tok::RParen,
                Tok::LParen,
                Tok::Kw("AT"),
                Tok::Ident("L".into()),
                Tok::Raw("strlen(buf) >10".into()),
                Tok::RParen,
                Tok::Kw("SAY"),
                Tok::Eof,
            ]
        );
        let t = toks(r#"(AT L print("a)b\"", 1))"#);
        assert_eq!(t[3], Tok::Raw(r#"print("a)b\"", 1)"#.into()));
    }

    #[test]
    fn strings_comments_and_positions() {
        let t = tokenize("// note\n  'it\\'s' == x").unwrap();
        assert_eq!(t[0].tok, Tok::Str("it's".into()));
        assert_eq!((t[0].line, t[0].column), (2, 3));
        assert_eq!(t[1].tok, Tok::EqEq);
        assert!(tokenize("'open").is_err());
        assert!(tokenize("a # b").is_err());
    }
}

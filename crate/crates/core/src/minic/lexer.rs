use super::{ParseError, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Func,
    Var,
    If,
    Else,
    While,
    Return,
    Break,
    True,
    False,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Question,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Func => "func",
            Tok::Var => "var",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::Return => "return",
            Tok::Break => "break",
            Tok::True => "true",
            Tok::False => "false",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Question => "?",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Ident(_) | Tok::Int(_) | Tok::Str(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    Lexer { src, bytes: src.as_bytes(), pos: 0, line: 1, line_start: 0 }.run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    line_start: usize,
}

impl Lexer<'_> {
    fn column(&self, pos: usize) -> u32 {
        (self.src[self.line_start..pos].chars().count() + 1) as u32
    }

    fn error(&self, pos: usize, message: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, self.column(pos), message)
    }

    fn peek(&self, ahead: usize) -> u8 {
        self.bytes.get(self.pos + ahead).copied().unwrap_or(0)
    }

    fn newline(&mut self) {
        self.line += 1;
        self.line_start = self.pos;
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek(0) {
                b'\n' => {
                    self.pos += 1;
                    self.newline();
                }
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'/' if self.peek(1) == b'/' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'/' if self.peek(1) == b'*' => {
                    let start = self.pos;
                    self.pos += 2;
                    loop {
                        if self.pos >= self.bytes.len() {
                            return Err(self.error(start, "unterminated block comment"));
                        }
                        if self.peek(0) == b'*' && self.peek(1) == b'/' {
                            self.pos += 2;
                            break;
                        }
                        self.pos += 1;
                        if self.bytes[self.pos - 1] == b'\n' {
                            self.newline();
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let start = self.pos;
            let line = self.line;
            let column = self.column(start);
            let Some(&c) = self.bytes.get(self.pos) else {
                out.push(Token { tok: Tok::Eof, span: Span { start, end: start, line, column } });
                return Ok(out);
            };
            let tok = if c.is_ascii_alphabetic() || c == b'_' {
                while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' {
                    self.pos += 1;
                }
                keyword_or_ident(&self.src[start..self.pos])
            } else if c.is_ascii_digit() {
                while self.peek(0).is_ascii_digit() {
                    self.pos += 1;
                }
                let text = &self.src[start..self.pos];
                let n = text
                    .parse::<i64>()
                    .map_err(|_| self.error(start, format!("integer literal `{text}` out of range")))?;
                Tok::Int(n)
            } else if c == b'"' {
                self.string(start)?
            } else {
                self.punct(start)?
            };
            out.push(Token { tok, span: Span { start, end: self.pos, line, column } });
        }
    }

    fn string(&mut self, start: usize) -> Result<Tok, ParseError> {
        self.pos += 1;
        let mut value = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(ch) = rest.chars().next() else {
                return Err(self.error(start, "unterminated string literal"));
            };
            self.pos += ch.len_utf8();
            match ch {
                '"' => return Ok(Tok::Str(value)),
                '\n' => return Err(self.error(start, "newline in string literal")),
                '\\' => {
                    let esc = self.peek(0);
                    self.pos += 1;
                    value.push(match esc {
                        b'n' => '\n',
                        b't' => '\t',
                        b'r' => '\r',
                        b'f' => '\u{c}',
                        b'0' => '\0',
                        b'\\' => '\\',
                        b'"' => '"',
                        b'\'' => '\'',
                        _ => return Err(self.error(self.pos - 2, "unknown escape sequence")),
                    });
                }
                other => value.push(other),
            }
        }
    }

    fn punct(&mut self, start: usize) -> Result<Tok, ParseError> {
        let two = [self.peek(0), self.peek(1)];
        let (tok, len) = match &two {
            b"<=" => (Tok::Le, 2),
            b">=" => (Tok::Ge, 2),
            b"==" => (Tok::EqEq, 2),
            b"!=" => (Tok::Ne, 2),
            b"&&" => (Tok::AndAnd, 2),
            b"||" => (Tok::OrOr, 2),
            _ => {
                let tok = match two[0] {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b',' => Tok::Comma,
                    b';' => Tok::Semi,
                    b':' => Tok::Colon,
                    b'?' => Tok::Question,
                    b'=' => Tok::Assign,
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'*' => Tok::Star,
                    b'/' => Tok::Slash,
                    b'%' => Tok::Percent,
                    b'<' => Tok::Lt,
                    b'>' => Tok::Gt,
                    b'!' => Tok::Bang,
                    _ => {
                        let ch = self.src[start..].chars().next().unwrap_or('?');
                        return Err(self.error(start, format!("unexpected character `{ch}`")));
                    }
                };
                (tok, 1)
            }
        };
        self.pos += len;
        Ok(tok)
    }
}

fn keyword_or_ident(word: &str) -> Tok {
    match word {
        "func" => Tok::Func,
        "var" => Tok::Var,
        "if" => Tok::If,
        "else" => Tok::Else,
        "while" => Tok::While,
        "return" => Tok::Return,
        "break" => Tok::Break,
        "true" => Tok::True,
        "false" => Tok::False,
        _ => Tok::Ident(word.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_keywords() {
        assert_eq!(
            toks("while (a <= 10 && !b) x = \"hi\\n\";"),
            vec![
                Tok::While,
                Tok::LParen,
                Tok::Ident("a".into()),
                Tok::Le,
                Tok::Int(10),
                Tok::AndAnd,
                Tok::Bang,
                Tok::Ident("b".into()),
                Tok::RParen,
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Str("hi\n".into()),
                Tok::Semi,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn positions_skip_comments() {
        let tokens = tokenize("// one\n/* two\n */  x").unwrap();
        assert_eq!(tokens[0].span.line, 3);
        assert_eq!(tokens[0].span.column, 6);
    }

    #[test]
    fn lexical_errors_carry_location() {
        let err = tokenize("x\n  @").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("99999999999999999999").is_err());
    }
}

use super::{ParseError, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Assign,
    AndAnd,
    Gt,
    Slash,
    /// The literal `|H|`.
    SizeH,
    Eof,
}

impl Tok {
    pub(crate) fn class(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::Str(_) => "string".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Slash => "`/`".into(),
            Tok::SizeH => "`|H|`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.text[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn mark(&self) -> (usize, usize, usize) {
        (self.pos, self.line, self.col)
    }

    fn span_from(&self, m: (usize, usize, usize)) -> SourceSpan {
        SourceSpan { line: m.1, column: m.2, start: m.0, end: self.pos }
    }
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut c = Cursor { text, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while let Some(ch) = c.peek() {
            if ch.is_whitespace() {
                c.bump();
            } else if ch == '/' && c.peek2() == Some('/') {
                while let Some(ch) = c.peek() {
                    if ch == '\n' {
                        break;
                    }
                    c.bump();
                }
            } else {
                break;
            }
        }
        let m = c.mark();
        let Some(ch) = c.bump() else {
            out.push(Token { tok: Tok::Eof, span: c.span_from(m) });
            return Ok(out);
        };
        let tok = match ch {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '>' => Tok::Gt,
            '/' => Tok::Slash,
            ':' => {
                if c.peek() == Some('=') {
                    c.bump();
                    Tok::Assign
                } else {
                    Tok::Colon
                }
            }
            '&' => {
                if c.peek() == Some('&') {
                    c.bump();
                    Tok::AndAnd
                } else {
                    return Err(lex_error(&c, m, "stray `&`; conjunction is written `&&`"));
                }
            }
            '|' => {
                if c.peek() == Some('H') {
                    c.bump();
                    if c.peek() == Some('|') {
                        c.bump();
                        Tok::SizeH
                    } else {
                        return Err(lex_error(&c, m, "expected `|H|`"));
                    }
                } else {
                    return Err(lex_error(&c, m, "expected `|H|`"));
                }
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match c.bump() {
                        None => return Err(lex_error(&c, m, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match c.bump() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            Some('n') => s.push('\n'),
                            _ => return Err(lex_error(&c, m, "bad escape in string")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            d if d.is_ascii_digit() => {
                let mut v: u64 = d.to_digit(10).unwrap() as u64;
                while let Some(d) = c.peek().and_then(|ch| ch.to_digit(10)) {
                    c.bump();
                    v = v
                        .checked_mul(10)
                        .and_then(|v| v.checked_add(d as u64))
                        .filter(|v| *v <= MAX_INT)
                        .ok_or_else(|| lex_error(&c, m, &format!("integer literal larger than {MAX_INT}")))?;
                }
                Tok::Int(v)
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut s = String::from(a);
                while let Some(ch) = c.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        s.push(ch);
                        c.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => return Err(lex_error(&c, m, &format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, span: c.span_from(m) });
    }
}

pub(crate) const MAX_INT: u64 = 1_000_000_000;

fn lex_error(c: &Cursor<'_>, m: (usize, usize, usize), msg: &str) -> ParseError {
    ParseError { span: c.span_from(m), message: msg.to_string(), expected: Vec::new() }
}

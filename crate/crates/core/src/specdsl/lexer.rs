use super::{Pos, SpecError, SpecErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    Pipe,
    OrOr,
    AndAnd,
    EqEq,
    NotEq,
    Gt,
    Ge,
    Lt,
    Le,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Pipe => "|",
            Tok::OrOr => "||",
            Tok::AndAnd => "&&",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            _ => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, SpecError> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        col: 1,
    };
    if source.starts_with("#!") {
        while let Some(c) = cur.bump() {
            if c == '\n' {
                break;
            }
        }
    }
    let lex_err = |pos: Pos, msg: String| SpecError::new(pos, SpecErrorKind::Lexical, msg);

    let mut out = Vec::new();
    loop {
        while cur.peek().is_some_and(char::is_whitespace) {
            cur.bump();
        }
        let pos = cur.pos();
        let Some(c) = cur.bump() else {
            out.push(Token { tok: Tok::Eof, pos });
            return Ok(out);
        };
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '/' if cur.peek() == Some('/') => {
                while let Some(c) = cur.bump() {
                    if c == '\n' {
                        break;
                    }
                }
                continue;
            }
            '|' if cur.peek() == Some('|') => {
                cur.bump();
                Tok::OrOr
            }
            '|' => Tok::Pipe,
            '&' if cur.peek() == Some('&') => {
                cur.bump();
                Tok::AndAnd
            }
            '=' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::EqEq
            }
            '!' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::NotEq
            }
            '>' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Ge
            }
            '>' => Tok::Gt,
            '<' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Le
            }
            '<' => Tok::Lt,
            '"' => {
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        None => return Err(lex_err(pos, "unterminated string literal".into())),
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(other) => {
                                return Err(lex_err(
                                    cur.pos(),
                                    format!("unknown escape sequence `\\{other}`"),
                                ))
                            }
                            None => return Err(lex_err(pos, "unterminated string literal".into())),
                        },
                        Some(c) => s.push(c),
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::from(c);
                while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    cur.bump();
                }
                let n = digits
                    .parse::<u64>()
                    .map_err(|_| lex_err(pos, format!("integer `{digits}` out of range")))?;
                Tok::Int(n)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut ident = String::from(c);
                while let Some(d) = cur.peek().filter(|d| d.is_alphanumeric() || *d == '_') {
                    ident.push(d);
                    cur.bump();
                }
                Tok::Ident(ident)
            }
            other => return Err(lex_err(pos, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, pos });
    }
}

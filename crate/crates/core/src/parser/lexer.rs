use crate::error::{Error, Result};
use crate::logic::Term;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Star,
    At,
    Bang,
    Minus,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Eq,
    Neq,
    Implies,
    Iff,
    /// The reserved word `v`.
    Or,
    Newline,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
            other => {
                let s = match other {
                    Tok::Star => "*",
                    Tok::At => "@",
                    Tok::Bang => "!",
                    Tok::Minus => "-",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::Comma => ",",
                    Tok::Colon => ":",
                    Tok::Eq => "=",
                    Tok::Neq => "!=",
                    Tok::Implies => "=>",
                    Tok::Iff => "<=>",
                    Tok::Or => "v",
                    _ => unreachable!(),
                };
                format!("`{s}`")
            }
        }
    }
}

pub(crate) struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let mut adv = 1;
        let tok = match c {
            '\n' => Some(Tok::Newline),
            ' ' | '\t' | '\r' => None,
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i + adv < chars.len() && chars[i + adv] != '\n' {
                    adv += 1;
                }
                None
            }
            '*' => Some(Tok::Star),
            '@' => Some(Tok::At),
            '-' => Some(Tok::Minus),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            '!' if chars.get(i + 1) == Some(&'=') => {
                adv = 2;
                Some(Tok::Neq)
            }
            '!' => Some(Tok::Bang),
            '=' if chars.get(i + 1) == Some(&'>') => {
                adv = 2;
                Some(Tok::Implies)
            }
            '=' => Some(Tok::Eq),
            '<' if chars.get(i + 1) == Some(&'=') && chars.get(i + 2) == Some(&'>') => {
                adv = 3;
                Some(Tok::Iff)
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match chars.get(i + adv) {
                        None | Some('\n') => {
                            return Err(Error::Syntax { line, col, msg: "unterminated string".into() });
                        }
                        Some('"') => {
                            adv += 1;
                            break;
                        }
                        Some('\\') if i + adv + 1 < chars.len() => {
                            s.push(chars[i + adv + 1]);
                            adv += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            adv += 1;
                        }
                    }
                }
                Some(Tok::Str(s))
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '.' || chars[j] == '_') {
                    // allow exponent sign
                    if (chars[j] == 'e' || chars[j] == 'E') && matches!(chars.get(j + 1), Some('-') | Some('+')) {
                        j += 1;
                    }
                    j += 1;
                }
                adv = j - i;
                Some(Tok::Number(chars[i..j].iter().collect()))
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                adv = j - i;
                let w: String = chars[i..j].iter().collect();
                Some(if w == "v" { Tok::Or } else { Tok::Ident(w) })
            }
            other => return Err(Error::Syntax { line, col, msg: format!("unexpected character `{other}`") }),
        };
        for k in 0..adv {
            if chars[i + k] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        i += adv;
        if let Some(t) = tok {
            out.push((t, start.0, start.1));
        }
    }
    out.push((Tok::Eof, line, col));
    Ok(out)
}

impl Lexer {
    pub(crate) fn new(text: &str) -> Result<Self> {
        Ok(Lexer { toks: tokenize(text)?, pos: 0 })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    pub(crate) fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    pub(crate) fn position(&self) -> (usize, usize) {
        let (_, l, c) = self.toks[self.pos];
        (l, c)
    }

    pub(crate) fn error(&self, msg: String) -> Error {
        let (line, col) = self.position();
        Error::Syntax { line, col, msg }
    }

    pub(crate) fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", t.describe(), self.peek().describe())))
        }
    }

    pub(crate) fn skip_newlines(&mut self) {
        while self.eat(&Tok::Newline) {}
    }

    pub(crate) fn end_of_line(&mut self) -> Result<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            Tok::Newline => {
                self.next();
                Ok(())
            }
            other => Err(self.error(format!("expected end of line, found {}", other.describe()))),
        }
    }

    pub(crate) fn ident(&mut self) -> Result<(String, (usize, usize))> {
        let p = self.position();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok((s, p))
            }
            other => Err(self.error(format!("expected identifier, found {}", other.describe()))),
        }
    }

    /// Identifier, number or quoted string, returned as written.
    pub(crate) fn any_name(&mut self) -> Result<(String, (usize, usize))> {
        let p = self.position();
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Number(s) | Tok::Str(s) => {
                self.next();
                Ok((s, p))
            }
            Tok::Or => {
                self.next();
                Ok(("v".into(), p))
            }
            other => Err(self.error(format!("expected a name, found {}", other.describe()))),
        }
    }

    pub(crate) fn constant(&mut self) -> Result<String> {
        self.any_name().map(|(s, _)| s)
    }

    /// Lowercase identifiers are variables; everything else is a constant.
    pub(crate) fn term(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Ident(s) if s.starts_with(|c: char| c.is_lowercase()) => {
                self.next();
                Ok(Term::Var(s))
            }
            Tok::Ident(s) | Tok::Number(s) | Tok::Str(s) => {
                self.next();
                Ok(Term::Const(s))
            }
            other => Err(self.error(format!("expected a term, found {}", other.describe()))),
        }
    }
}

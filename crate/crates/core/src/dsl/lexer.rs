use super::{DslError, Loc};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Colon,
    Newline,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    while i < chars.len() {
        let c = chars[i];
        let loc = Loc { line, col };
        match c {
            '\n' => {
                out.push(Token { tok: Tok::Newline, loc });
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {}
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            '+' => out.push(Token { tok: Tok::Plus, loc }),
            '-' => out.push(Token { tok: Tok::Minus, loc }),
            '*' => out.push(Token { tok: Tok::Star, loc }),
            '/' => out.push(Token { tok: Tok::Slash, loc }),
            '(' => out.push(Token { tok: Tok::LParen, loc }),
            ')' => out.push(Token { tok: Tok::RParen, loc }),
            ',' => out.push(Token { tok: Tok::Comma, loc }),
            ':' => out.push(Token { tok: Tok::Colon, loc }),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| DslError::Lex {
                    loc,
                    message: format!("malformed number `{text}`"),
                })?;
                if !value.is_finite() {
                    return Err(DslError::Lex { loc, message: format!("number `{text}` is out of range") });
                }
                col += i - start;
                out.push(Token { tok: Tok::Number(value), loc });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Token { tok: Tok::Ident(text), loc });
                continue;
            }
            other => {
                return Err(DslError::Lex { loc, message: format!("unexpected character `{other}`") });
            }
        }
        i += 1;
        col += 1;
    }
    out.push(Token { tok: Tok::Eof, loc: Loc { line, col } });
    Ok(out)
}

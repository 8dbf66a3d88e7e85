use super::ast::SourceSpan;
use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub enum Token {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    True,
    False,
    Dot,
    Comma,
    Colon,
    LParen,
    RParen,
    LBracket,
    RBracket,
    /// Any character outside the grammar; reported by the parser so the
    /// error can carry an expected-token set.
    Unknown(char),
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        match self {
            Token::Ident(name) => format!("identifier `{name}`"),
            Token::Int(v) => format!("integer `{v}`"),
            Token::Float(v) => format!("float `{v}`"),
            Token::Str(_) => "string literal".to_string(),
            Token::True => "`true`".to_string(),
            Token::False => "`false`".to_string(),
            Token::Dot => "`.`".to_string(),
            Token::Comma => "`,`".to_string(),
            Token::Colon => "`:`".to_string(),
            Token::LParen => "`(`".to_string(),
            Token::RParen => "`)`".to_string(),
            Token::LBracket => "`[`".to_string(),
            Token::RBracket => "`]`".to_string(),
            Token::Unknown(c) => format!("`{c}`"),
            Token::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Spanned {
    pub token: Token,
    pub span: SourceSpan,
}

pub fn tokenize(source: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut pos = 0;

    while pos < chars.len() {
        let c = chars[pos];
        let start = pos;
        if c.is_whitespace() {
            pos += 1;
            continue;
        }
        let token = match c {
            '.' if chars.get(pos + 1).is_some_and(|d| d.is_ascii_digit()) => {
                lex_number(&chars, &mut pos)?
            }
            '+' | '-' => {
                let next = chars.get(pos + 1).copied();
                let after = chars.get(pos + 2).copied();
                let starts_number = matches!(next, Some(d) if d.is_ascii_digit())
                    || (next == Some('.') && matches!(after, Some(d) if d.is_ascii_digit()));
                if starts_number {
                    lex_number(&chars, &mut pos)?
                } else {
                    pos += 1;
                    Token::Unknown(c)
                }
            }
            d if d.is_ascii_digit() => lex_number(&chars, &mut pos)?,
            '.' => single(&mut pos, Token::Dot),
            ',' => single(&mut pos, Token::Comma),
            ':' => single(&mut pos, Token::Colon),
            '(' => single(&mut pos, Token::LParen),
            ')' => single(&mut pos, Token::RParen),
            '[' => single(&mut pos, Token::LBracket),
            ']' => single(&mut pos, Token::RBracket),
            '"' => lex_string(&chars, &mut pos)?,
            a if a == '_' || a.is_ascii_alphabetic() => {
                while pos < chars.len() && (chars[pos] == '_' || chars[pos].is_ascii_alphanumeric())
                {
                    pos += 1;
                }
                let word: String = chars[start..pos].iter().collect();
                match word.as_str() {
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word),
                }
            }
            other => single(&mut pos, Token::Unknown(other)),
        };
        out.push(Spanned {
            token,
            span: SourceSpan::new(start, pos),
        });
    }

    out.push(Spanned {
        token: Token::Eof,
        span: SourceSpan::new(chars.len(), chars.len()),
    });
    Ok(out)
}

fn single(pos: &mut usize, token: Token) -> Token {
    *pos += 1;
    token
}

/// int   ::= (+|-)? [0-9]+
/// float ::= (+|-)? [0-9]* . [0-9]+
fn lex_number(chars: &[char], pos: &mut usize) -> Result<Token, SyntaxError> {
    let start = *pos;
    if matches!(chars[*pos], '+' | '-') {
        *pos += 1;
    }
    while *pos < chars.len() && chars[*pos].is_ascii_digit() {
        *pos += 1;
    }
    let is_float = *pos + 1 < chars.len()
        && chars[*pos] == '.'
        && chars[*pos + 1].is_ascii_digit();
    if is_float {
        *pos += 1;
        while *pos < chars.len() && chars[*pos].is_ascii_digit() {
            *pos += 1;
        }
    }
    let text: String = chars[start..*pos].iter().collect();
    let span = SourceSpan::new(start, *pos);
    if is_float {
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Token::Float)
            .ok_or_else(|| SyntaxError::new(format!("float literal `{text}` out of range"), span))
    } else {
        text.parse::<i64>()
            .map(Token::Int)
            .map_err(|_| SyntaxError::new(format!("integer literal `{text}` out of range"), span))
    }
}

fn lex_string(chars: &[char], pos: &mut usize) -> Result<Token, SyntaxError> {
    let start = *pos;
    *pos += 1;
    let mut text = String::new();
    loop {
        match chars.get(*pos) {
            None => {
                return Err(SyntaxError::new(
                    "unterminated string literal",
                    SourceSpan::new(start, *pos),
                )
                .expecting(["`\"`"]))
            }
            Some('"') => {
                *pos += 1;
                return Ok(Token::Str(text));
            }
            Some('\\') => match chars.get(*pos + 1) {
                Some(&c @ ('"' | '\\')) => {
                    text.push(c);
                    *pos += 2;
                }
                other => {
                    let end = (*pos + 1 + usize::from(other.is_some())).min(chars.len());
                    return Err(SyntaxError::new(
                        "unsupported escape sequence",
                        SourceSpan::new(*pos, end),
                    )
                    .expecting(["`\\\"`", "`\\\\`"]));
                }
            },
            Some(&c) => {
                text.push(c);
                *pos += 1;
            }
        }
    }
}

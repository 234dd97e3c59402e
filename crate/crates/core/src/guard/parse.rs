//! Recursive-descent parser for guard strings.
//!
//! ```text
//! expr    := conj (("or" | "||") conj)*
//! conj    := unary (("and" | "&&") unary)*
//! unary   := ("not" | "!") unary | atom
//! atom    := "true" | "false" | "(" expr ")"
//!          | "held_for" "(" expr "," INT ")"
//!          | "marked" "(" IDENT ["," INT] ")"
//!          | "timeout" "(" IDENT "," INT ")"
//!          | IDENT (">=" | "<=") NUMBER
//!          | IDENT ("=" | "==") ("0" | "1")
//!          | IDENT
//! ```

use crate::fixed::Fixed;

use super::expr::{CmpOp, GuardExpr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("guard parse error at offset {offset}: {message}")]
pub struct GuardParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Ge,
    Le,
    Eq,
    And,
    Or,
    Not,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, GuardParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    let err = |offset, message: &str| GuardParseError {
        offset,
        message: message.to_string(),
    };
    while i < chars.len() {
        let (pos, c) = chars[i];
        let next = chars.get(i + 1).map(|&(_, c)| c);
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push((pos, Tok::Comma));
                i += 1;
            }
            '>' | '<' if next == Some('=') => {
                out.push((pos, if c == '>' { Tok::Ge } else { Tok::Le }));
                i += 2;
            }
            '=' => {
                out.push((pos, Tok::Eq));
                i += if next == Some('=') { 2 } else { 1 };
            }
            '&' if next == Some('&') => {
                out.push((pos, Tok::And));
                i += 2;
            }
            '|' if next == Some('|') => {
                out.push((pos, Tok::Or));
                i += 2;
            }
            '!' | '¬' => {
                out.push((pos, Tok::Not));
                i += 1;
            }
            '∧' => {
                out.push((pos, Tok::And));
                i += 1;
            }
            '∨' => {
                out.push((pos, Tok::Or));
                i += 1;
            }
            c if c.is_ascii_digit()
                || c == '.'
                || (c == '-' && next.is_some_and(|n| n.is_ascii_digit() || n == '.')) =>
            {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                out.push((pos, Tok::Number(s)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].1.is_ascii_alphanumeric()
                        || chars[i].1 == '_'
                        || chars[i].1 == '.'
                        || chars[i].1 == '#')
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                let tok = match s.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(s),
                };
                out.push((pos, tok));
            }
            other => return Err(err(pos, &format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |&(o, _)| o)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, GuardParseError> {
        Err(GuardParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), GuardParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, GuardParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn integer(&mut self) -> Result<u64, GuardParseError> {
        match self.peek() {
            Some(Tok::Number(s)) => match s.parse::<u64>() {
                Ok(v) => {
                    self.pos += 1;
                    Ok(v)
                }
                Err(_) => self.error("expected non-negative integer"),
            },
            _ => self.error("expected non-negative integer"),
        }
    }

    fn expr(&mut self) -> Result<GuardExpr, GuardParseError> {
        let mut parts = vec![self.conj()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            GuardExpr::Or(parts)
        })
    }

    fn conj(&mut self) -> Result<GuardExpr, GuardParseError> {
        let mut parts = vec![self.unary()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            GuardExpr::And(parts)
        })
    }

    fn unary(&mut self) -> Result<GuardExpr, GuardParseError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(GuardExpr::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<GuardExpr, GuardParseError> {
        match self.bump() {
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "true" => Ok(GuardExpr::Const(true)),
                "false" => Ok(GuardExpr::Const(false)),
                "held_for" if self.peek() == Some(&Tok::LParen) => {
                    self.pos += 1;
                    let e = self.expr()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let d = self.integer()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(GuardExpr::held_for(e, d))
                }
                "marked" if self.peek() == Some(&Tok::LParen) => {
                    self.pos += 1;
                    let place = self.ident()?;
                    let count = if self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        let n = self.integer()?;
                        u32::try_from(n).or_else(|_| self.error("token count too large"))?
                    } else {
                        1
                    };
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(GuardExpr::Marked { place, count })
                }
                "timeout" if self.peek() == Some(&Tok::LParen) => {
                    self.pos += 1;
                    let place = self.ident()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let budget = self.integer()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(GuardExpr::timeout(place, budget))
                }
                _ => self.after_ident(name),
            },
            Some(_) => {
                self.pos -= 1;
                self.error("expected expression")
            }
            None => self.error("unexpected end of guard"),
        }
    }

    fn after_ident(&mut self, name: String) -> Result<GuardExpr, GuardParseError> {
        match self.peek() {
            Some(Tok::Ge) | Some(Tok::Le) => {
                let op = if self.bump() == Some(Tok::Ge) {
                    CmpOp::Ge
                } else {
                    CmpOp::Le
                };
                match self.peek() {
                    Some(Tok::Number(s)) => match s.parse::<Fixed>() {
                        Ok(v) => {
                            self.pos += 1;
                            Ok(GuardExpr::cmp(name, op, v))
                        }
                        Err(_) => self.error(format!("invalid number `{s}`")),
                    },
                    _ => self.error("expected number after comparison"),
                }
            }
            Some(Tok::Eq) => {
                self.pos += 1;
                match self.peek() {
                    Some(Tok::Number(s)) if s == "0" || s == "1" => {
                        let truthy = s == "1";
                        self.pos += 1;
                        let v = GuardExpr::Var(name);
                        Ok(if truthy { v } else { GuardExpr::not(v) })
                    }
                    _ => self.error("boolean equality must compare against 0 or 1"),
                }
            }
            _ => Ok(GuardExpr::Var(name)),
        }
    }
}

pub fn parse_guard(src: &str) -> Result<GuardExpr, GuardParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
    };
    if p.peek().is_none() {
        return p.error("empty guard");
    }
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

impl std::str::FromStr for GuardExpr {
    type Err = GuardParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_guard(s)
    }
}

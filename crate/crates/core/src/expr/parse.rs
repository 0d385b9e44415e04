//! Infix grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' int | '^' '(' '-'? int ')' | '^' '-' int)?
//! atom  := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `func` is one of `sin cos exp log`; the identifier `pi` is the constant.

use num_rational::Rational64;
use thiserror::Error;

use super::{Const, Expr};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at {start}..{end}: {message}")]
pub struct ParseError {
    pub message: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Const),
    Ident(String),
    Sym(char),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let b = src.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let c = b[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || (c == '.' && i + 1 < b.len() && (b[i + 1] as char).is_ascii_digit()) {
                let start = i;
                while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mut j = i + 1;
                    if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                        j += 1;
                    }
                    if j < b.len() && (b[j] as char).is_ascii_digit() {
                        while j < b.len() && (b[j] as char).is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let c = number(text).ok_or_else(|| ParseError {
                    message: format!("malformed number `{text}`"),
                    start,
                    end: i,
                })?;
                lx.toks.push((Tok::Num(c), start, i));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                lx.toks.push((Tok::Ident(src[start..i].to_string()), start, i));
            } else if "+-*/^(),".contains(c) {
                lx.toks.push((Tok::Sym(c), i, i + 1));
                i += 1;
            } else {
                return Err(ParseError {
                    message: format!("unexpected character `{c}`"),
                    start: i,
                    end: i + 1,
                });
            }
        }
        let _ = lx.src;
        Ok(lx.toks)
    }
}

/// Decimal literal as an exact rational when it fits, otherwise a float.
fn number(text: &str) -> Option<Const> {
    let value: f64 = text.parse().ok()?;
    let (mant, exp) = match text.find(['e', 'E']) {
        Some(k) => (&text[..k], text[k + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(k) => (&mant[..k], &mant[k + 1..]),
        None => (mant, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    let scale = exp - frac_part.len() as i32;
    let exact = (|| {
        let n: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        let p = 10i64.checked_pow(scale.unsigned_abs())?;
        if scale >= 0 {
            Some(Rational64::from_integer(n.checked_mul(p)?))
        } else {
            Some(Rational64::new(n, p))
        }
    })();
    Some(match exact {
        Some(r) if digits.len() <= 17 => Const::Rational(r),
        _ => Const::Float(value),
    })
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn span(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.1, t.2)).unwrap_or((self.len, self.len))
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (start, end) = self.span();
        Err(ParseError {
            message: message.into(),
            start,
            end,
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = lhs + self.term()?;
            } else if self.eat('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat('/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn int_exponent(&mut self) -> Result<i32, ParseError> {
        let neg = self.eat('-');
        match self.peek().cloned() {
            Some(Tok::Num(Const::Rational(r))) if r.is_integer() && r.numer().abs() <= i32::MAX as i64 => {
                self.pos += 1;
                let n = *r.numer() as i32;
                Ok(if neg { -n } else { n })
            }
            _ => self.err("exponent must be an integer"),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let n = if self.eat('(') {
            let n = self.int_exponent()?;
            self.expect(')')?;
            n
        } else {
            self.int_exponent()?
        };
        Ok(base.powi(n))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(c)) => {
                self.pos += 1;
                Ok(Expr::constant(c))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let f: Option<fn(&Expr) -> Expr> = match name.as_str() {
                    "sin" => Some(Expr::sin),
                    "cos" => Some(Expr::cos),
                    "exp" => Some(Expr::exp),
                    "log" => Some(Expr::log),
                    _ => None,
                };
                if let Some(f) = f {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(f(&arg))
                } else if name == "pi" {
                    Ok(Expr::float(std::f64::consts::PI))
                } else {
                    Ok(Expr::var(name))
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(_) => self.err("unexpected token"),
            None => self.err("unexpected end of input"),
        }
    }
}

/// Parse an expression from text.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::run(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        parse(s).unwrap().eval(&["x".to_string()], &[x]).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2*3", 0.0), 7.0);
        assert_eq!(ev("-x^2", 3.0), -9.0);
        assert_eq!(ev("x^-1", 4.0), 0.25);
        assert_eq!(ev("x^(-2)", 2.0), 0.25);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("1 - 2 - 3", 0.0), -4.0);
    }

    #[test]
    fn literals_are_exact() {
        assert_eq!(parse("0.5").unwrap().to_string(), "1/2");
        assert_eq!(parse("1/3").unwrap().to_string(), "1/3");
        assert_eq!(parse("2.5e-3").unwrap().to_string(), "1/400");
        assert!((ev("pi", 0.0) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn functions() {
        assert!((ev("exp(log(x))", 2.5) - 2.5).abs() < 1e-14);
        assert!((ev("sin(x)^2 + cos(x)^2", 1.3) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_spans() {
        let e = parse("x + * y").unwrap_err();
        assert_eq!((e.start, e.end), (4, 5));
        let e = parse("x^1.5").unwrap_err();
        assert!(e.message.contains("integer"));
        assert!(parse("sin x").is_err());
        assert!(parse("(x").is_err());
        assert!(parse("x $ y").is_err());
        assert!(parse("x y").is_err());
    }
}

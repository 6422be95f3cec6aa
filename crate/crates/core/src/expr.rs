//! Parser for polynomial expressions such as `1 - p5111` or `0.4*psi301*p5111^2`.

use crate::error::{Error, Result};
use crate::poly::{Indeterminate, Polynomial};
use crate::rational::parse_rational;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Tok::Num(chars[start..i].iter().collect()));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?} in {src:?}")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<Indeterminate>,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn err(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at token {} in {:?}", self.pos, self.src))
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == '+' { &acc + &rhs } else { &acc - &rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            if c == '*' {
                acc = &acc * &rhs;
            } else {
                let d = rhs.as_constant().ok_or_else(|| self.err("division by a non-constant"))?;
                if num_traits::Zero::is_zero(&d) {
                    return Err(self.err("division by zero"));
                }
                acc = acc.scale(&(<crate::rational::Rational as num_traits::One>::one() / d));
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Tok::Num(n)) => {
                    self.pos += 1;
                    let e: u32 = n.parse().map_err(|_| self.err("bad exponent"))?;
                    return Ok(base.pow(e));
                }
                _ => return Err(self.err("expected integer exponent")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Polynomial::constant(parse_rational(&n)?))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let x = (self.resolve)(&name)
                    .ok_or_else(|| Error::Parse(format!("unknown indeterminate {name:?} in {:?}", self.src)))?;
                Ok(Polynomial::var(x))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::Op(')')) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.err("expected ')'")),
                }
            }
            _ => Err(self.err("expected a number, name or '('")),
        }
    }
}

/// Parses `src`, mapping identifiers through `resolve`.
pub fn parse_polynomial(src: &str, resolve: &dyn Fn(&str) -> Option<Indeterminate>) -> Result<Polynomial> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, resolve, src };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(s: &str) -> Option<Indeterminate> {
        match s {
            "h" => Some(Indeterminate::Interaction),
            "k1" => Some(Indeterminate::Weight(1)),
            "x" => Some(Indeterminate::prob(1, 1, vec![])),
            _ => None,
        }
    }

    #[test]
    fn parses_arithmetic() {
        let p = parse_polynomial("0.2*(1-x) + x^2 - 3/4*h*k1", &names).unwrap();
        assert_eq!(p.to_string(), "0.2 - 0.2*p11 - 0.75*h*k1 + p11^2");
        assert!(parse_polynomial("y + 1", &names).is_err());
        assert!(parse_polynomial("(x", &names).is_err());
        assert!(parse_polynomial("x / x", &names).is_err());
        assert_eq!(parse_polynomial("-x", &names).unwrap().to_string(), "-p11");
    }
}

//! Canonical text form of elements.
//!
//! ```text
//! element := term (('+'|'-') term)*
//! term    := [coeff '*'] gen | coeff
//! gen     := 'L(' int ')' | 'G(' int ['/2'] ')' | 'C'
//! coeff   := rational | '(' complex ')' | 'i'
//! ```
//!
//! Printing orders terms by `(kind, index)`, drops zero terms and elides a
//! unit coefficient, so `parse(print(x)) == x`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::algebra::{AlgebraConfig, BasisSymbol, Element, Kind};
use crate::scalar::{parse_rational, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position} in `{text}`: {message}")]
    Syntax { text: String, position: usize, message: String },
    #[error("`{symbol}` does not belong to {config}")]
    GridMismatch { symbol: String, config: AlgebraConfig },
}

pub fn parse_element(cfg: &AlgebraConfig, text: &str) -> Result<Element, ParseError> {
    let e: Element = text.parse()?;
    for s in e.symbols() {
        if !cfg.is_valid(s) {
            return Err(ParseError::GridMismatch { symbol: s.to_string(), config: *cfg });
        }
    }
    Ok(e)
}

pub fn parse_symbol(text: &str) -> Result<BasisSymbol, ParseError> {
    let mut p = Parser::new(text);
    p.skip_ws();
    let s = p.gen()?;
    p.skip_ws();
    if !p.eof() {
        return Err(p.err("trailing input after symbol"));
    }
    Ok(s)
}

impl FromStr for Element {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        Parser::new(text).element()
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { text, bytes: text.as_bytes(), pos: 0 }
    }

    fn err(&self, message: &str) -> ParseError {
        ParseError::Syntax { text: self.text.to_string(), position: self.pos, message: message.to_string() }
    }

    fn eof(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn element(&mut self) -> Result<Element, ParseError> {
        let mut out = Element::zero();
        self.skip_ws();
        if self.eof() {
            return Err(self.err("empty element"));
        }
        let mut negate = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                true
            }
            Some(b'+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        loop {
            let (coeff, gen) = self.term()?;
            let coeff = if negate { -coeff } else { coeff };
            match gen {
                Some(s) => out.add_term(s, &coeff),
                None if coeff.is_zero() => {}
                None => return Err(self.err("nonzero coefficient without a generator")),
            }
            self.skip_ws();
            match self.peek() {
                None => break,
                Some(b'+') => negate = false,
                Some(b'-') => negate = true,
                Some(_) => return Err(self.err("expected `+` or `-` between terms")),
            }
            self.pos += 1;
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(Scalar, Option<BasisSymbol>), ParseError> {
        self.skip_ws();
        if matches!(self.peek(), Some(b'L' | b'G' | b'C')) {
            return Ok((Scalar::one(), Some(self.gen()?)));
        }
        let coeff = self.coeff()?;
        self.skip_ws();
        if self.peek() == Some(b'*') {
            self.pos += 1;
            self.skip_ws();
            Ok((coeff, Some(self.gen()?)))
        } else {
            Ok((coeff, None))
        }
    }

    fn coeff(&mut self) -> Result<Scalar, ParseError> {
        match self.peek() {
            Some(b'(') => {
                let start = self.pos;
                let close = self.text[start..].find(')').ok_or_else(|| self.err("unclosed `(`"))?;
                let body = &self.text[start..start + close + 1];
                let s = body.parse::<Scalar>().map_err(|_| self.err("malformed scalar in parentheses"))?;
                self.pos = start + close + 1;
                Ok(s)
            }
            Some(b'i') => {
                self.pos += 1;
                Ok(Scalar::i())
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'/') {
                    self.pos += 1;
                }
                parse_rational(&self.text[start..self.pos])
                    .map(Scalar::from)
                    .ok_or_else(|| self.err("malformed rational"))
            }
            _ => Err(self.err("expected coefficient or generator")),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some(b'-' | b'+')) {
            self.pos += 1;
        }
        let digits = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits {
            return Err(self.err("expected integer index"));
        }
        self.text[start..self.pos].trim_start_matches('+').parse().map_err(|_| self.err("index out of range"))
    }

    fn gen(&mut self) -> Result<BasisSymbol, ParseError> {
        let kind = match self.peek() {
            Some(b'L') => Kind::L,
            Some(b'G') => Kind::G,
            Some(b'C') => {
                self.pos += 1;
                return Ok(BasisSymbol::c());
            }
            _ => return Err(self.err("expected L(..), G(..) or C")),
        };
        self.pos += 1;
        self.expect(b'(')?;
        let n = self.int()?;
        self.skip_ws();
        let d = if self.peek() == Some(b'/') {
            self.pos += 1;
            self.skip_ws();
            if self.peek() != Some(b'2') || kind != Kind::G {
                return Err(self.err("only G indices may be halves, written n/2"));
            }
            self.pos += 1;
            if n % 2 == 0 {
                return Err(self.err("half index must be written in lowest terms"));
            }
            n
        } else {
            2 * n
        };
        self.expect(b')')?;
        Ok(BasisSymbol::new(kind, d))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (sym, c)) in self.terms().enumerate() {
            let negative = c.is_real() && c.re() < &num_rational::BigRational::from_integer(0.into());
            let mag = if negative { -c } else { c.clone() };
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if !mag.is_one() {
                write!(f, "{}*", mag.coefficient_text())?;
            }
            write!(f, "{}", sym)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Epsilon;

    const C0: AlgebraConfig = AlgebraConfig::new(Epsilon::Zero, true);
    const CH: AlgebraConfig = AlgebraConfig::new(Epsilon::Half, true);

    #[test]
    fn parse_examples() {
        let e = parse_element(&C0, "4*L(0) + (1/2)*C").unwrap();
        assert_eq!(e.coeff(&BasisSymbol::l(0)), Scalar::from_int(4));
        assert_eq!(e.coeff(&BasisSymbol::c()), Scalar::ratio(1, 2));
        assert_eq!(e.len(), 2);

        let e = parse_element(&CH, "G(-1/2)").unwrap();
        assert_eq!(e, BasisSymbol::g2(-1).elem());

        let err = parse_element(&C0, "G(1/2)").unwrap_err();
        assert!(matches!(err, ParseError::GridMismatch { .. }));
        assert!(err.to_string().contains("SVir[0]"));
    }

    #[test]
    fn printing_is_canonical() {
        let e: Element = "(1/2)*C + 4*L(0)".parse().unwrap();
        assert_eq!(e.to_string(), "4*L(0) + (1/2)*C");
        let e: Element = "-L(3) + (1+2i)*G(1) - 1/3*L(-1)".parse().unwrap();
        assert_eq!(e.to_string(), "-(1/3)*L(-1) - L(3) + (1+2i)*G(1)");
        let e: Element = "i*G(2) + (-1i)*G(3)".parse().unwrap();
        assert_eq!(e.to_string(), "(1i)*G(2) + (-1i)*G(3)");
        assert_eq!("L(1) - L(1)".parse::<Element>().unwrap().to_string(), "0");
        assert_eq!("0".parse::<Element>().unwrap(), Element::zero());
        assert_eq!(BasisSymbol::g2(3).elem().to_string(), "G(3/2)");
    }

    #[test]
    fn syntax_errors_carry_position() {
        for bad in ["", "L(", "L(1) +", "3", "2*X(1)", "G(2/2)", "L(1/2)", "L(1) L(2)", "(1+2i*L(0)"] {
            let err = bad.parse::<Element>().unwrap_err();
            assert!(matches!(err, ParseError::Syntax { .. }), "{bad}: {err}");
        }
        match "L(1) + ?".parse::<Element>() {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symbols() {
        assert_eq!(parse_symbol("G(-3/2)").unwrap(), BasisSymbol::g2(-3));
        assert_eq!(parse_symbol(" L(4) ").unwrap(), BasisSymbol::l(4));
        assert!(parse_symbol("L(4)+C").is_err());
    }
}

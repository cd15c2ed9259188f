//! Recursive-descent parser for the expression grammar.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{Affine, Direction, JetCoordinate, JetExpression, KernelAtom, Monomial};
use crate::rational::{as_u32, rational_power, render, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownSymbol(String),
    NonRationalLiteral(String),
    NotRepresentable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} at position {position}", describe(.kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::Syntax(s) => format!("syntax error: {s}"),
        ParseErrorKind::UnknownSymbol(s) => format!("unknown symbol `{s}`"),
        ParseErrorKind::NonRationalLiteral(s) => format!("non-rational literal `{s}`"),
        ParseErrorKind::NotRepresentable(s) => format!("not representable: {s}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sub(String),
    Op(char),
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().map(|(_, c)| c).collect();
            if i < chars.len() && (chars[i].1 == '.' || chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '.' || chars[j].1 == '-') {
                    j += 1;
                }
                let lit: String = chars[start..j].iter().map(|(_, c)| c).collect();
                return Err(ParseError { kind: ParseErrorKind::NonRationalLiteral(lit), position: pos });
            }
            let n: BigInt = digits.parse().expect("digits");
            out.push((Tok::Num(n), pos));
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().map(|(_, c)| c).collect()), pos));
        } else if c == '_' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i].1.is_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Sub(chars[start..i].iter().map(|(_, c)| c).collect()), pos));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), pos));
            i += 1;
        } else {
            return Err(ParseError { kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")), position: pos });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

/// Parses a derivative name such as `u_txx`, order-insensitive.
pub(crate) fn derivative_coordinate(name: &str) -> Option<JetCoordinate> {
    if name == "u" {
        return Some(JetCoordinate::u());
    }
    let rest = name.strip_prefix("u_")?;
    if rest.is_empty() {
        return None;
    }
    let mut t = 0u16;
    let mut x = 0u16;
    for c in rest.chars() {
        match c {
            't' => t += 1,
            'x' => x += 1,
            _ => return None,
        }
    }
    Some(JetCoordinate::deriv(t, x))
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    params: &'a BTreeMap<String, Rational>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn err<T>(&self, kind: ParseErrorKind) -> PResult<T> {
        Err(ParseError { kind, position: self.pos() })
    }

    fn err_at<T>(&self, pos: usize, kind: ParseErrorKind) -> PResult<T> {
        Err(ParseError { kind, position: pos })
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if *self.peek() == Tok::Op(c) {
            self.i += 1;
            Ok(())
        } else {
            self.err(ParseErrorKind::Syntax(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> PResult<JetExpression> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.i += 1;
                    acc += self.term()?;
                }
                Tok::Op('-') => {
                    self.i += 1;
                    acc -= self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> PResult<JetExpression> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.i += 1;
                    let r = self.unary()?;
                    acc = &acc * &r;
                }
                Tok::Op('/') => {
                    self.i += 1;
                    let pos = self.pos();
                    let r = self.unary()?;
                    let inv = self.invert(&r, pos)?;
                    acc = &acc * &inv;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> PResult<JetExpression> {
        match self.peek() {
            Tok::Op('-') => {
                self.i += 1;
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> PResult<JetExpression> {
        let base = self.postfix()?;
        if *self.peek() == Tok::Op('^') {
            self.i += 1;
            let pos = self.pos();
            let e = self.unary()?;
            let Some(r) = e.as_constant() else {
                return self.err_at(pos, ParseErrorKind::NotRepresentable("exponent must be a rational constant".into()));
            };
            return self.raise(&base, &r, pos);
        }
        Ok(base)
    }

    fn postfix(&mut self) -> PResult<JetExpression> {
        let mut e = self.primary()?;
        while let Tok::Sub(s) = self.peek().clone() {
            let pos = self.pos();
            if s.is_empty() || !s.chars().all(|c| c == 't' || c == 'x') {
                return self.err_at(pos, ParseErrorKind::Syntax(format!("bad derivative subscript `_{s}`")));
            }
            self.i += 1;
            for c in s.chars() {
                let dir = if c == 't' { Direction::T } else { Direction::X };
                e = crate::calculus::total_derivative(&e, dir);
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<JetExpression> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.i += 1;
                Ok(JetExpression::constant(Rational::from_integer(n)))
            }
            Tok::Op('(') => {
                self.i += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.i += 1;
                if *self.peek() == Tok::Op('(') && matches!(name.as_str(), "exp" | "sin" | "cos" | "pow") {
                    return self.function(&name, pos);
                }
                match name.as_str() {
                    "t" => Ok(JetExpression::coord(JetCoordinate::T)),
                    "x" => Ok(JetExpression::coord(JetCoordinate::X)),
                    _ => {
                        if let Some(c) = derivative_coordinate(&name) {
                            Ok(JetExpression::coord(c))
                        } else if let Some(q) = self.params.get(&name) {
                            Ok(JetExpression::constant(q.clone()))
                        } else {
                            self.err_at(pos, ParseErrorKind::UnknownSymbol(name))
                        }
                    }
                }
            }
            Tok::End => self.err(ParseErrorKind::Syntax("unexpected end of input".into())),
            Tok::Sub(s) => self.err(ParseErrorKind::Syntax(format!("unexpected `_{s}`"))),
            Tok::Op(c) => self.err(ParseErrorKind::Syntax(format!("unexpected `{c}`"))),
        }
    }

    fn function(&mut self, name: &str, pos: usize) -> PResult<JetExpression> {
        self.expect('(')?;
        let arg_pos = self.pos();
        let arg = self.expr()?;
        if name == "pow" {
            self.expect(',')?;
            let rpos = self.pos();
            let r = self.expr()?;
            self.expect(')')?;
            let Some(r) = r.as_constant() else {
                return self.err_at(rpos, ParseErrorKind::NotRepresentable("pow exponent must be a rational constant".into()));
            };
            return self.raise(&arg, &r, pos);
        }
        self.expect(')')?;
        let Some(a) = affine_in_u(&arg) else {
            return self.err_at(arg_pos, ParseErrorKind::NotRepresentable(format!("{name} of a non-affine argument `{arg}`")));
        };
        let atom = match name {
            "exp" => KernelAtom::Exp(a),
            "sin" => KernelAtom::Sin(a),
            _ => KernelAtom::Cos(a),
        };
        Ok(JetExpression::atom(atom))
    }

    /// `base^r` for rational `r`.
    fn raise(&self, base: &JetExpression, r: &Rational, pos: usize) -> PResult<JetExpression> {
        if let Some(k) = as_u32(r) {
            return Ok(base.pow(k));
        }
        if let Some(c) = base.as_constant() {
            return match rational_power(&c, r) {
                Some(v) => Ok(JetExpression::constant(v)),
                None => self.err_at(pos, ParseErrorKind::NotRepresentable(format!("({})^({}) is not rational", render(&c), render(r)))),
            };
        }
        if let Some(a) = affine_in_u(base) {
            // (a u + b)^r = a^r (u + b/a)^r
            let Some(scale) = rational_power(&a.slope, r) else {
                return self.err_at(pos, ParseErrorKind::NotRepresentable(format!("({base})^({}) needs an irrational factor", render(r))));
            };
            let center = -(&a.offset / &a.slope);
            return Ok(JetExpression::atom(KernelAtom::Pow { center, exponent: r.clone() }).scale(&scale));
        }
        if r.is_integer() {
            let inv = self.invert(base, pos)?;
            let k = as_u32(&-r.clone()).expect("negative integer exponent");
            return Ok(inv.pow(k));
        }
        self.err_at(pos, ParseErrorKind::NotRepresentable(format!("({base})^({})", render(r))))
    }

    fn invert(&self, e: &JetExpression, pos: usize) -> PResult<JetExpression> {
        if let Some(c) = e.as_constant() {
            if c.is_zero() {
                return self.err_at(pos, ParseErrorKind::NotRepresentable("division by zero".into()));
            }
            return Ok(JetExpression::constant(c.recip()));
        }
        if let Some(a) = affine_in_u(e) {
            let center = -(&a.offset / &a.slope);
            return Ok(JetExpression::atom(KernelAtom::Pow { center, exponent: -Rational::one() }).scale(&a.slope.recip()));
        }
        if e.len() == 1 {
            let (key, q) = e.terms().next().expect("one term");
            let u = JetCoordinate::u();
            if key.monomial.factors().iter().all(|(c, _)| *c == u) {
                let mut atoms = Vec::new();
                let k = key.monomial.degree(u);
                if k > 0 {
                    atoms.push((KernelAtom::Pow { center: Rational::zero(), exponent: -Rational::from_integer(k.into()) }, 1));
                }
                for (a, p) in &key.atoms {
                    let pk = Rational::from_integer((*p).into());
                    match a {
                        KernelAtom::Exp(af) => atoms.push((KernelAtom::Exp(af.scale(&-pk)), 1)),
                        KernelAtom::Pow { center, exponent } => {
                            atoms.push((KernelAtom::Pow { center: center.clone(), exponent: -(exponent * pk) }, 1))
                        }
                        _ => return self.err_at(pos, ParseErrorKind::NotRepresentable(format!("division by `{e}`"))),
                    }
                }
                return Ok(JetExpression::from_raw_term(q.recip(), Monomial::one(), atoms));
            }
        }
        self.err_at(pos, ParseErrorKind::NotRepresentable(format!("division by `{e}`")))
    }
}

/// `Some(a u + b)` when `e` is affine in `u` with no other coordinates and no atoms.
pub(crate) fn affine_in_u(e: &JetExpression) -> Option<Affine> {
    let u = JetCoordinate::u();
    let mut a = Affine::zero();
    for (key, q) in e.terms() {
        if !key.atoms.is_empty() {
            return None;
        }
        match key.monomial.factors() {
            [] => a.offset = q.clone(),
            [(c, 1)] if *c == u => a.slope = q.clone(),
            _ => return None,
        }
    }
    Some(a)
}

pub fn parse_expression(text: &str) -> Result<JetExpression, ParseError> {
    parse_expression_with(text, &BTreeMap::new())
}

/// Parses with named rational parameters.
pub fn parse_expression_with(text: &str, params: &BTreeMap<String, Rational>) -> Result<JetExpression, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, i: 0, params };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err(ParseErrorKind::Syntax("trailing input".into()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    #[test]
    fn grammar_examples() {
        let e = parse_expression("u_t + u^2*u_x + u_xxx").unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.terms().all(|(_, q)| q.is_one()));
        assert!(parse_expression("0").unwrap().is_zero());
        assert_eq!(parse_expression("u_tx").unwrap(), parse_expression("u_xt").unwrap());
    }

    #[test]
    fn errors_carry_kind_and_position() {
        let e = parse_expression("u + 1.5").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NonRationalLiteral("1.5".into()));
        assert_eq!(e.position, 4);
        let e = parse_expression("u + v").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownSymbol("v".into()));
        assert_eq!(e.position, 4);
        let e = parse_expression("u + (u").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        let e = parse_expression("sin(u_x)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::NotRepresentable(_)));
        let e = parse_expression("u_y").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnknownSymbol(_)));
    }

    #[test]
    fn powers_and_division() {
        let a = parse_expression("u^-2").unwrap();
        let b = parse_expression("pow(u, -2)").unwrap();
        let c = parse_expression("1/u^2").unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
        let d = parse_expression("(4*u - 4)^(1/2)").unwrap();
        assert_eq!(d, parse_expression("2*pow(u - 1, 1/2)").unwrap());
        assert_eq!(parse_expression("u/2").unwrap(), JetExpression::coord(JetCoordinate::u()).scale(&ratio(1, 2)));
        assert_eq!(parse_expression("exp(u)/exp(u)").unwrap(), JetExpression::one());
        assert!(parse_expression("1/u_x").is_err());
    }

    #[test]
    fn params_and_subscripts() {
        let mut params = BTreeMap::new();
        params.insert("n".to_string(), rat(2));
        let e = parse_expression_with("u^n*u_x", &params).unwrap();
        assert_eq!(e, parse_expression("u^2*u_x").unwrap());
        let w = parse_expression("pow(u,-2)*(pow(u,-2)*u_x)_x").unwrap();
        assert_eq!(w, parse_expression("pow(u,-4)*u_xx - 2*pow(u,-5)*u_x^2").unwrap());
    }
}

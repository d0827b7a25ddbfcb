//! Scalar expressions in one time variable.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' ['+' | '-'] INTEGER)?
//! atom  := NUMBER ['i'] | 'i' | 't' | '(' expr ')'
//! ```
//!
//! `NUMBER` is a decimal literal with optional exponent (`2`, `0.5`, `1e-3`).
//! A trailing `i` makes a literal imaginary, a bare `i` is the imaginary unit.
//! Any other token is rejected.

use std::fmt;

use thiserror::Error;

use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column} in `{source_text}`")]
pub struct ExprError {
    pub message: String,
    /// 1-based character column.
    pub column: usize,
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            chars: src.chars().collect(),
            pos: 0,
            src,
        };
        p.skip_ws();
        if p.peek().is_none() {
            return Err(p.error("empty expression"));
        }
        let e = p.expr()?;
        p.skip_ws();
        if let Some(c) = p.peek() {
            return Err(p.error(&format!("unexpected token `{c}`")));
        }
        Ok(e)
    }

    pub fn constant(z: C64) -> Expr {
        Expr::Const(z)
    }

    pub fn eval(&self, t: f64) -> C64 {
        match self {
            Expr::Const(z) => *z,
            Expr::Time => C64::new(t, 0.0),
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(a, k) => a.eval(t).powi(*k),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Time => false,
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Symbolic derivative with respect to `t`.
    pub fn derivative(&self) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(ZERO),
            Expr::Time => Expr::Const(ONE),
            Expr::Neg(a) => neg(a.derivative()),
            Expr::Add(a, b) => add(a.derivative(), b.derivative()),
            Expr::Sub(a, b) => sub(a.derivative(), b.derivative()),
            Expr::Mul(a, b) => add(
                mul(a.derivative(), (**b).clone()),
                mul((**a).clone(), b.derivative()),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative(), (**b).clone()),
                    mul((**a).clone(), b.derivative()),
                ),
                pow((**b).clone(), 2),
            ),
            Expr::Pow(a, k) => match *k {
                0 => Expr::Const(ZERO),
                k => mul(
                    mul(Expr::Const(C64::new(k as f64, 0.0)), pow((**a).clone(), k - 1)),
                    a.derivative(),
                ),
            },
        }
    }

    /// Every subexpression that appears as a denominator (including bases
    /// raised to negative powers).
    pub fn denominators(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out
    }

    fn collect_denominators<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Const(_) | Expr::Time => {}
            Expr::Neg(a) => a.collect_denominators(out),
            Expr::Pow(a, k) => {
                if *k < 0 {
                    out.push(a);
                }
                a.collect_denominators(out);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
            Expr::Div(a, b) => {
                out.push(b);
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
        }
    }
}

fn is_const(e: &Expr, z: C64) -> bool {
    matches!(e, Expr::Const(c) if *c == z)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(z) => Expr::Const(-z),
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_const(&a, ZERO) {
        b
    } else if is_const(&b, ZERO) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_const(&b, ZERO) {
        a
    } else if is_const(&a, ZERO) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_const(&a, ZERO) || is_const(&b, ZERO) {
        Expr::Const(ZERO)
    } else if is_const(&a, ONE) {
        b
    } else if is_const(&b, ONE) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_const(&a, ZERO) {
        Expr::Const(ZERO)
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => Expr::Const(ONE),
        1 => a,
        k => Expr::Pow(Box::new(a), k),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(z) if z.im == 0.0 => write!(f, "{:?}", z.re),
            Expr::Const(z) if z.re == 0.0 => write!(f, "{:?}i", z.im),
            Expr::Const(z) => write!(f, "({:?} + {:?}i)", z.re, z.im),
            Expr::Time => write!(f, "t"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ExprError {
        ExprError {
            message: msg.to_string(),
            column: self.pos + 1,
            source_text: self.src.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let negative = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("exponent must be an integer literal"));
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        let k: i32 = digits
            .parse()
            .map_err(|_| self.error("exponent out of range"))?;
        Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some('t') => {
                self.pos += 1;
                self.reject_identifier_tail()?;
                Ok(Expr::Time)
            }
            Some('i') => {
                self.pos += 1;
                self.reject_identifier_tail()?;
                Ok(Expr::Const(C64::new(0.0, 1.0)))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) => Err(self.error(&format!("unexpected token `{c}`"))),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn reject_identifier_tail(&self) -> Result<(), ExprError> {
        match self.peek() {
            Some(c) if c.is_alphanumeric() || c == '_' => {
                Err(self.error(&format!("unknown identifier character `{c}`")))
            }
            _ => Ok(()),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value: f64 = text.parse().map_err(|_| ExprError {
            message: format!("malformed number `{text}`"),
            column: start + 1,
            source_text: self.src.to_string(),
        })?;
        if self.peek() == Some('i') {
            self.pos += 1;
            self.reject_identifier_tail()?;
            return Ok(Expr::Const(C64::new(0.0, value)));
        }
        self.reject_identifier_tail()?;
        Ok(Expr::Const(C64::new(value, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, t: f64) -> C64 {
        Expr::parse(s).unwrap().eval(t)
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(ev("1 - 2/3*t", 0.5), C64::new(1.0 - 2.0 / 3.0 * 0.5, 0.0));
        assert_eq!(ev("-t^2", 3.0), C64::new(-9.0, 0.0));
        assert_eq!(ev("2^-1", 0.0), C64::new(0.5, 0.0));
        assert_eq!(ev("(1 + 2i) * i", 0.0), C64::new(-2.0, 1.0));
        assert_eq!(ev("1e-3 * t", 2.0), C64::new(2e-3, 0.0));
    }

    #[test]
    fn rejects_unknown_tokens() {
        for bad in ["exp(t)", "t + x", "2 ** t", "t^1.5", "", "(t", "sin t", "ti"] {
            assert!(Expr::parse(bad).is_err(), "accepted `{bad}`");
        }
        let err = Expr::parse("t + y").unwrap_err();
        assert_eq!(err.column, 5);
    }

    #[test]
    fn symbolic_derivative_of_rational() {
        let e = Expr::parse("-2*t/(1+t^2)").unwrap();
        let d = e.derivative();
        // d/dt [-2t/(1+t²)] = (2t² - 2)/(1+t²)²
        let t = 0.7_f64;
        let want = (2.0 * t * t - 2.0) / (1.0 + t * t).powi(2);
        assert!((d.eval(t).re - want).abs() < 1e-14);
    }

    #[test]
    fn denominators_are_collected() {
        let e = Expr::parse("1/(1+t^2) + t^-3").unwrap();
        assert_eq!(e.denominators().len(), 2);
    }
}

//! Closed-form complex expressions in one variable `z`.
//!
//! Jump matrices in problem files are given as strings rather than samples so
//! they can be re-evaluated anywhere, in particular at `1/conj(z)` for the
//! inversion-symmetry checks. The grammar (see `docs/expression-grammar.md`):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("+" | "-") unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number [ "i" ] | "i" | "z" | "pi" | func "(" expr ")" | "(" expr ")" ;
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-z^2` is
//! `-(z^2)` and `z^-1` is `1/z`. Integer powers use repeated multiplication.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Conj,
    Exp,
    Log,
    Sqrt,
    Abs,
    Re,
    Im,
    R,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "conj" => Func::Conj,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "re" => Func::Re,
            "im" => Func::Im,
            "r" => Func::R,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(C64),
    Z,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn uses_r(&self) -> bool {
        match self {
            Node::Const(_) | Node::Z => false,
            Node::Neg(a) => a.uses_r(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.uses_r() || b.uses_r(),
            Node::Call(f, a) => *f == Func::R || a.uses_r(),
        }
    }

    fn eval(&self, z: C64, r: Option<&Node>) -> std::result::Result<C64, String> {
        Ok(match self {
            Node::Const(c) => *c,
            Node::Z => z,
            Node::Neg(a) => -a.eval(z, r)?,
            Node::Add(a, b) => a.eval(z, r)? + b.eval(z, r)?,
            Node::Sub(a, b) => a.eval(z, r)? - b.eval(z, r)?,
            Node::Mul(a, b) => a.eval(z, r)? * b.eval(z, r)?,
            Node::Div(a, b) => {
                let den = b.eval(z, r)?;
                if den == C64::new(0.0, 0.0) {
                    return Err(format!("division by zero at z = {z}"));
                }
                a.eval(z, r)? / den
            }
            Node::Pow(a, b) => {
                let base = a.eval(z, r)?;
                let e = b.eval(z, r)?;
                if e.im == 0.0 && e.re.fract() == 0.0 && e.re.abs() <= i32::MAX as f64 {
                    let k = e.re as i32;
                    if k < 0 && base == C64::new(0.0, 0.0) {
                        return Err(format!("negative power of zero at z = {z}"));
                    }
                    base.powi(k)
                } else {
                    base.powc(e)
                }
            }
            Node::Call(f, a) => {
                let x = a.eval(z, r)?;
                match f {
                    Func::Conj => x.conj(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x == C64::new(0.0, 0.0) {
                            return Err(format!("log(0) at z = {z}"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => C64::new(x.norm(), 0.0),
                    Func::Re => C64::new(x.re, 0.0),
                    Func::Im => C64::new(x.im, 0.0),
                    Func::R => match r {
                        Some(body) => body.eval(x, None)?,
                        None => return Err("r(...) used but no r expression is defined".into()),
                    },
                }
            }
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat(b'^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            None => self.error("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return self.error("expected ')'");
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(c) => self.error(format!("unexpected character '{}'", c as char)),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E'))
            && matches!(self.src.get(self.pos + 1), Some(b'0'..=b'9' | b'+' | b'-'))
        {
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            digits(self);
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = match text.parse() {
            Ok(v) => v,
            Err(_) => {
                self.pos = start;
                return self.error(format!("malformed number '{text}'"));
            }
        };
        // imaginary literal: "2i", "0.5i" (but not the start of an identifier)
        if self.src.get(self.pos) == Some(&b'i')
            && !self
                .src
                .get(self.pos + 1)
                .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
            return Ok(Node::Const(C64::new(0.0, value)));
        }
        Ok(Node::Const(C64::new(value, 0.0)))
    }

    fn word(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "z" => return Ok(Node::Z),
            "i" => return Ok(Node::Const(C64::new(0.0, 1.0))),
            "pi" => return Ok(Node::Const(C64::new(std::f64::consts::PI, 0.0))),
            _ => {}
        }
        let Some(func) = Func::lookup(name) else {
            self.pos = start;
            return self.error(format!("unknown identifier '{name}'"));
        };
        if !self.eat(b'(') {
            return self.error(format!("expected '(' after '{name}'"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return self.error("expected ')'");
        }
        Ok(Node::Call(func, Box::new(arg)))
    }
}

/// A parsed expression, optionally bound to a definition of `r(.)`.
#[derive(Clone)]
pub struct Expression {
    source: String,
    node: Arc<Node>,
    r: Option<Arc<Node>>,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({:?})", self.source)
    }
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let node = p.expr()?;
        if p.peek().is_some() {
            return p.error("unexpected trailing input");
        }
        Ok(Expression {
            source: text.to_string(),
            node: Arc::new(node),
            r: None,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn uses_r(&self) -> bool {
        self.node.uses_r()
    }

    /// Binds `r(.)` to `r`, which must not refer to `r` itself.
    pub fn with_r(mut self, r: &Expression) -> Result<Self> {
        if r.uses_r() {
            return Err(Error::Input(format!(
                "r expression '{}' refers to r",
                r.source
            )));
        }
        self.r = Some(r.node.clone());
        Ok(self)
    }

    /// Evaluates at `z`; fails on division by zero, `log(0)` or a non-finite
    /// result.
    pub fn eval(&self, z: C64) -> Result<C64> {
        let v = self
            .node
            .eval(z, self.r.as_deref())
            .map_err(|e| Error::Eval(format!("'{}': {e}", self.source)))?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Eval(format!(
                "'{}' is not finite at z = {z}",
                self.source
            )));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, z: C64) -> C64 {
        Expression::parse(s).unwrap().eval(z).unwrap()
    }

    #[test]
    fn basic_values() {
        assert_eq!(ev("z^3", C64::new(2.0, 0.0)), C64::new(8.0, 0.0));
        assert_eq!(ev("conj(z)", C64::new(0.0, 1.0)), C64::new(0.0, -1.0));
        for k in 0..12 {
            let z = C64::from_polar(1.0, 0.5 * k as f64);
            assert!((ev("(1 - 0.09*z*conj(z))", z) - 0.91).norm() < 1e-15);
        }
    }

    #[test]
    fn precedence() {
        let z = C64::new(3.0, 0.0);
        assert_eq!(ev("-z^2", z), C64::new(-9.0, 0.0));
        assert_eq!(ev("2^3^2", z), C64::new(512.0, 0.0));
        assert_eq!(ev("z^-1", z), C64::new(1.0 / 3.0, 0.0));
        assert_eq!(ev("1 - 2 - 3", z), C64::new(-4.0, 0.0));
        assert_eq!(ev("8 / 4 / 2", z), C64::new(1.0, 0.0));
        assert_eq!(ev("2 + 3*z", z), C64::new(11.0, 0.0));
    }

    #[test]
    fn literals() {
        let z = C64::new(0.0, 0.0);
        assert_eq!(ev("2.5i", z), C64::new(0.0, 2.5));
        assert_eq!(ev("1e-2 + i", z), C64::new(0.01, 1.0));
        assert_eq!(ev("3 * i", z), C64::new(0.0, 3.0));
        assert!((ev("exp(i*pi)", z) + 1.0).norm() < 1e-15);
        assert_eq!(ev("abs(3+4i) + re(2-i) + im(2-i)", z), C64::new(6.0, 0.0));
    }

    #[test]
    fn named_r() {
        let r = Expression::parse("0.3*z").unwrap();
        let e = Expression::parse("z^-2 * r(z) * conj(r(1/conj(z)))")
            .unwrap()
            .with_r(&r)
            .unwrap();
        let z = C64::from_polar(1.0, 0.7);
        let expected = z.powi(-2) * 0.3 * z * (0.3 / z.conj()).conj();
        assert!((e.eval(z).unwrap() - expected).norm() < 1e-15);
        assert!(Expression::parse("r(z)").unwrap().eval(z).is_err());
        assert!(Expression::parse("1")
            .unwrap()
            .with_r(&Expression::parse("r(z)").unwrap())
            .is_err());
    }

    #[test]
    fn parse_errors_carry_positions() {
        for (text, at) in [
            ("z +", 3),
            ("(z", 2),
            ("foo(z)", 0),
            ("z $ 2", 2),
            ("exp z", 4),
            ("z z", 2),
        ] {
            match Expression::parse(text) {
                Err(Error::Parse { position, .. }) => assert_eq!(position, at, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn singular_evaluation() {
        let zero = C64::new(0.0, 0.0);
        assert!(matches!(
            Expression::parse("1/z").unwrap().eval(zero),
            Err(Error::Eval(_))
        ));
        assert!(matches!(
            Expression::parse("z^-2").unwrap().eval(zero),
            Err(Error::Eval(_))
        ));
        assert!(matches!(
            Expression::parse("log(z)").unwrap().eval(zero),
            Err(Error::Eval(_))
        ));
    }
}

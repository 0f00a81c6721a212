//! Univariate scalar expressions in `x`.
//!
//! Grammar (usual precedence, `^` binds tighter than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] integer)?
//! atom   := number | 'x' | '(' expr ')'
//! ```
//!
//! Evaluation carries the derivative along (forward-mode dual numbers), so
//! `d/dx` is exact up to round-off.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    X,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
}

/// A parsed expression together with the text it came from.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr { source: src.to_string(), root })
    }

    pub fn constant(c: f64) -> Self {
        Expr { source: format!("{c:?}"), root: Node::Const(c) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval(&self.root, x).0
    }

    /// Value and exact derivative at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        eval(&self.root, x)
    }

    /// `Some((slope, intercept))` when the expression is structurally affine in `x`.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        affine(&self.root)
    }
}

fn eval(n: &Node, x: f64) -> (f64, f64) {
    match n {
        Node::Const(c) => (*c, 0.0),
        Node::X => (x, 1.0),
        Node::Neg(a) => {
            let (v, d) = eval(a, x);
            (-v, -d)
        }
        Node::Add(a, b) => {
            let (u, du) = eval(a, x);
            let (v, dv) = eval(b, x);
            (u + v, du + dv)
        }
        Node::Sub(a, b) => {
            let (u, du) = eval(a, x);
            let (v, dv) = eval(b, x);
            (u - v, du - dv)
        }
        Node::Mul(a, b) => {
            let (u, du) = eval(a, x);
            let (v, dv) = eval(b, x);
            (u * v, du * v + u * dv)
        }
        Node::Div(a, b) => {
            let (u, du) = eval(a, x);
            let (v, dv) = eval(b, x);
            (u / v, (du * v - u * dv) / (v * v))
        }
        Node::Pow(a, k) => {
            let (u, du) = eval(a, x);
            match *k {
                0 => (1.0, 0.0),
                k => (u.powi(k), k as f64 * u.powi(k - 1) * du),
            }
        }
    }
}

fn affine(n: &Node) -> Option<(f64, f64)> {
    match n {
        Node::Const(c) => Some((0.0, *c)),
        Node::X => Some((1.0, 0.0)),
        Node::Neg(a) => affine(a).map(|(s, i)| (-s, -i)),
        Node::Add(a, b) => {
            let (s1, i1) = affine(a)?;
            let (s2, i2) = affine(b)?;
            Some((s1 + s2, i1 + i2))
        }
        Node::Sub(a, b) => {
            let (s1, i1) = affine(a)?;
            let (s2, i2) = affine(b)?;
            Some((s1 - s2, i1 - i2))
        }
        Node::Mul(a, b) => {
            let (s1, i1) = affine(a)?;
            let (s2, i2) = affine(b)?;
            if s1 == 0.0 {
                Some((i1 * s2, i1 * i2))
            } else if s2 == 0.0 {
                Some((s1 * i2, i1 * i2))
            } else {
                None
            }
        }
        Node::Div(a, b) => {
            let (s1, i1) = affine(a)?;
            let (s2, i2) = affine(b)?;
            (s2 == 0.0).then(|| (s1 / i2, i1 / i2))
        }
        Node::Pow(a, k) => {
            let (s, i) = affine(a)?;
            match *k {
                0 => Some((0.0, 1.0)),
                1 => Some((s, i)),
                k if s == 0.0 => Some((0.0, i.powi(k))),
                _ => None,
            }
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let negative = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        let k: i32 = digits.parse().map_err(|_| self.err("exponent out of range"))?;
        Ok(Node::Pow(Box::new(base), if negative { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'x') => {
                self.pos += 1;
                Ok(Node::X)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let s = self.s;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut q = self.pos + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if q < s.len() && s[q].is_ascii_digit() {
                while q < s.len() && s[q].is_ascii_digit() {
                    q += 1;
                }
                self.pos = q;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Node::Const)
            .map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{text}'") })
    }
}

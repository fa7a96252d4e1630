//! Small arithmetic expression language for user-supplied benefits, costs and
//! densities.
//!
//! Grammar: `+ - * / ^`, parentheses, numeric literals, the constants `pi` and
//! `e`, the functions `exp log sqrt pow(a, b)`, and coordinate references
//! `x1..xn`, `y1..yn`.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Log,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

/// Which coordinate families an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    X,
    Y,
    XY,
}

#[derive(Clone, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.src)
    }
}

impl Expr {
    pub fn parse(src: &str, dim: usize, scope: Scope) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            src,
            tokens,
            pos: 0,
            dim,
            scope,
        };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.err(format!("unexpected token {:?}", p.tokens[p.pos])));
        }
        Ok(Expr {
            src: src.to_string(),
            root: fold(root),
        })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Evaluate with `x` and `y` bound; unused slices may be empty.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        eval(&self.root, x, y)
    }
}

fn eval(n: &Node, x: &[f64], y: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X(i)) => x[*i],
        Node::Var(Var::Y(i)) => y[*i],
        Node::Neg(a) => -eval(a, x, y),
        Node::Call(f, a) => {
            let v = eval(a, x, y);
            match f {
                Func::Exp => v.exp(),
                Func::Log => v.ln(),
                Func::Sqrt => v.sqrt(),
            }
        }
        Node::Bin(op, a, b) => {
            let l = eval(a, x, y);
            let r = eval(b, x, y);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                BinOp::Pow => pow(l, r),
            }
        }
    }
}

// Small integer exponents go through powi so that x^2 is exactly x*x.
fn pow(l: f64, r: f64) -> f64 {
    if r.fract() == 0.0 && r.abs() <= 16.0 {
        l.powi(r as i32)
    } else {
        l.powf(r)
    }
}

fn fold(n: Node) -> Node {
    match n {
        Node::Neg(a) => match fold(*a) {
            Node::Num(v) => Node::Num(-v),
            a => Node::Neg(Box::new(a)),
        },
        Node::Call(f, a) => {
            let a = fold(*a);
            if let Node::Num(_) = a {
                Node::Num(eval(&Node::Call(f, Box::new(a)), &[], &[]))
            } else {
                Node::Call(f, Box::new(a))
            }
        }
        Node::Bin(op, a, b) => {
            let (a, b) = (fold(*a), fold(*b));
            match (&a, &b) {
                (Node::Num(_), Node::Num(_)) => Node::Num(eval(&Node::Bin(op, Box::new(a), Box::new(b)), &[], &[])),
                _ => Node::Bin(op, Box::new(a), Box::new(b)),
            }
        }
        n => n,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let err = |msg: String| Error::Expr {
        src: src.to_string(),
        msg,
    };
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
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    // `2e` followed by something else: not an exponent
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            let t = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => return Err(err(format!("unexpected character `{c}`"))),
            };
            out.push(t);
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Tok>,
    pos: usize,
    dim: usize,
    scope: Scope,
}

impl Parser<'_> {
    fn err(&self, msg: String) -> Error {
        Error::Expr {
            src: self.src.to_string(),
            msg,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(self.err(format!("expected {t:?}, found {got:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident(name),
            t => Err(self.err(format!("unexpected {t:?}"))),
        }
    }

    fn ident(&mut self, name: String) -> Result<Node> {
        let func = match name.as_str() {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "pow" => None,
            _ => return self.var(&name),
        };
        self.expect(Tok::LParen)?;
        let a = self.expr()?;
        let node = match func {
            Some(f) => Node::Call(f, Box::new(a)),
            None => {
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                Node::Bin(BinOp::Pow, Box::new(a), Box::new(b))
            }
        };
        self.expect(Tok::RParen)?;
        Ok(node)
    }

    fn var(&self, name: &str) -> Result<Node> {
        let (head, idx) = name.split_at(1);
        let idx: usize = idx
            .parse()
            .map_err(|_| self.err(format!("unknown identifier `{name}`")))?;
        if idx == 0 || idx > self.dim {
            return Err(self.err(format!("`{name}` out of range for dimension {}", self.dim)));
        }
        let v = match head {
            "x" if self.scope != Scope::Y => Var::X(idx - 1),
            "y" if self.scope != Scope::X => Var::Y(idx - 1),
            "x" | "y" => return Err(self.err(format!("`{name}` is not available in this expression"))),
            _ => return Err(self.err(format!("unknown identifier `{name}`"))),
        };
        Ok(Node::Var(v))
    }
}

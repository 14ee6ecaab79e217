//! Arithmetic expressions over (t, x, y), evaluated on floats or on second-order jets in (x, y).
//!
//! Grammar: sums and products of numbers, variables, `pi`, parenthesized terms, unary minus,
//! right-associative `^`, and calls to sin, cos, tan, tanh, exp, log, sqrt, abs, max, min.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{QmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func1 {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func2 {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    PowInt(i32),
    Neg,
    F1(Func1),
    F2(Func2),
}

/// A compiled expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    src: String,
    prog: Vec<Op>,
    uses_t: bool,
}

/// Scalars the evaluator can run on.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    /// phi applied with phi(v), phi'(v), phi''(v).
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self;
    fn powi(&self, k: i32) -> Self {
        let v = self.value();
        let kf = k as f64;
        let d1 = if k == 0 { 0.0 } else { kf * v.powi(k - 1) };
        let d2 = if k == 0 || k == 1 { 0.0 } else { kf * (kf - 1.0) * v.powi(k - 2) };
        self.chain(v.powi(k), d1, d2)
    }
    /// a^b as exp(b log a).
    fn pow(self, b: Self) -> Self {
        let la = apply1(Func1::Log, self);
        apply1(Func1::Exp, b * la)
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn chain(&self, f0: f64, _f1: f64, _f2: f64) -> Self {
        f0
    }
    fn powi(&self, k: i32) -> Self {
        f64::powi(*self, k)
    }
    fn pow(self, b: Self) -> Self {
        self.powf(b)
    }
}

/// Value, gradient and Hessian with respect to (x, y).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub gx: f64,
    pub gy: f64,
    pub hxx: f64,
    pub hxy: f64,
    pub hyy: f64,
}

impl Jet {
    pub fn var_x(x: f64) -> Jet {
        Jet { v: x, gx: 1.0, ..Default::default() }
    }
    pub fn var_y(y: f64) -> Jet {
        Jet { v: y, gy: 1.0, ..Default::default() }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, gx: self.gx + o.gx, gy: self.gy + o.gy, hxx: self.hxx + o.hxx, hxy: self.hxy + o.hxy, hyy: self.hyy + o.hyy }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { v: -self.v, gx: -self.gx, gy: -self.gy, hxx: -self.hxx, hxy: -self.hxy, hyy: -self.hyy }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            gx: self.v * o.gx + o.v * self.gx,
            gy: self.v * o.gy + o.v * self.gy,
            hxx: self.v * o.hxx + 2.0 * self.gx * o.gx + o.v * self.hxx,
            hxy: self.v * o.hxy + self.gx * o.gy + self.gy * o.gx + o.v * self.hxy,
            hyy: self.v * o.hyy + 2.0 * self.gy * o.gy + o.v * self.hyy,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let u = o.v;
        self * o.chain(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u))
    }
}

impl Scalar for Jet {
    fn constant(c: f64) -> Self {
        Jet { v: c, ..Default::default() }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        Jet {
            v: f0,
            gx: f1 * self.gx,
            gy: f1 * self.gy,
            hxx: f1 * self.hxx + f2 * self.gx * self.gx,
            hxy: f1 * self.hxy + f2 * self.gx * self.gy,
            hyy: f1 * self.hyy + f2 * self.gy * self.gy,
        }
    }
}

fn apply1<T: Scalar>(f: Func1, a: T) -> T {
    let v = a.value();
    match f {
        Func1::Sin => a.chain(v.sin(), v.cos(), -v.sin()),
        Func1::Cos => a.chain(v.cos(), -v.sin(), -v.cos()),
        Func1::Tan => {
            let t = v.tan();
            let s = 1.0 + t * t;
            a.chain(t, s, 2.0 * t * s)
        }
        Func1::Tanh => {
            let t = v.tanh();
            let s = 1.0 - t * t;
            a.chain(t, s, -2.0 * t * s)
        }
        Func1::Exp => {
            let e = v.exp();
            a.chain(e, e, e)
        }
        Func1::Log => a.chain(v.ln(), 1.0 / v, -1.0 / (v * v)),
        Func1::Sqrt => {
            let r = v.sqrt();
            a.chain(r, 0.5 / r, -0.25 / (r * v))
        }
        Func1::Abs => {
            let s = if v < 0.0 { -1.0 } else { 1.0 };
            a.chain(v.abs(), s, 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(s: &str) -> Result<Vec<Tok>> {
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = vec![];
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                i += 1;
            }
            if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                let mut j = i + 1;
                if j < cs.len() && (cs[j] == '+' || cs[j] == '-') {
                    j += 1;
                }
                if j < cs.len() && cs[j].is_ascii_digit() {
                    i = j;
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let t: String = cs[st..i].iter().collect();
            out.push(Tok::Num(t.parse().map_err(|_| QmError::Expr(format!("bad number '{t}'")))?));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(QmError::Expr(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    prog: Vec<Op>,
    uses_t: bool,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(QmError::Expr(format!("expected '{c}'")))
        }
    }

    fn sum(&mut self) -> Result<()> {
        self.product()?;
        loop {
            if self.eat('+') {
                self.product()?;
                self.prog.push(Op::Add);
            } else if self.eat('-') {
                self.product()?;
                self.prog.push(Op::Sub);
            } else {
                return Ok(());
            }
        }
    }

    fn product(&mut self) -> Result<()> {
        self.unary()?;
        loop {
            if self.eat('*') {
                self.unary()?;
                self.prog.push(Op::Mul);
            } else if self.eat('/') {
                self.unary()?;
                self.prog.push(Op::Div);
            } else {
                return Ok(());
            }
        }
    }

    fn unary(&mut self) -> Result<()> {
        if self.eat('-') {
            self.unary()?;
            self.prog.push(Op::Neg);
            Ok(())
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<()> {
        self.atom()?;
        if self.eat('^') {
            let start = self.prog.len();
            self.unary()?;
            let exp = &self.prog[start..];
            match exp {
                [Op::Const(c)] if c.fract() == 0.0 && c.abs() < 1e6 => {
                    let k = *c as i32;
                    self.prog.truncate(start);
                    self.prog.push(Op::PowInt(k));
                }
                _ => self.prog.push(Op::Pow),
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<()> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                self.prog.push(Op::Const(v));
                Ok(())
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                self.sum()?;
                self.expect(')')
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let f1 = match name.as_str() {
                        "sin" => Some(Func1::Sin),
                        "cos" => Some(Func1::Cos),
                        "tan" => Some(Func1::Tan),
                        "tanh" => Some(Func1::Tanh),
                        "exp" => Some(Func1::Exp),
                        "log" | "ln" => Some(Func1::Log),
                        "sqrt" => Some(Func1::Sqrt),
                        "abs" => Some(Func1::Abs),
                        _ => None,
                    };
                    if let Some(f) = f1 {
                        self.sum()?;
                        self.expect(')')?;
                        self.prog.push(Op::F1(f));
                        return Ok(());
                    }
                    let f2 = match name.as_str() {
                        "max" => Func2::Max,
                        "min" => Func2::Min,
                        _ => return Err(QmError::Expr(format!("unknown function '{name}'"))),
                    };
                    self.sum()?;
                    self.expect(',')?;
                    self.sum()?;
                    self.expect(')')?;
                    self.prog.push(Op::F2(f2));
                    return Ok(());
                }
                let op = match name.as_str() {
                    "t" => {
                        self.uses_t = true;
                        Op::Var(0)
                    }
                    "x" => Op::Var(1),
                    "y" => Op::Var(2),
                    "pi" => Op::Const(std::f64::consts::PI),
                    _ => return Err(QmError::Expr(format!("unknown variable '{name}'"))),
                };
                self.prog.push(op);
                Ok(())
            }
            other => Err(QmError::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = lex(src)?;
        if toks.is_empty() {
            return Err(QmError::Expr("empty expression".into()));
        }
        let mut p = Parser { toks, pos: 0, prog: vec![], uses_t: false };
        p.sum()?;
        if p.pos != p.toks.len() {
            return Err(QmError::Expr(format!("trailing input in '{src}'")));
        }
        Ok(Expr { src: src.to_string(), prog: p.prog, uses_t: p.uses_t })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Whether the expression depends on t.
    pub fn uses_t(&self) -> bool {
        self.uses_t
    }

    pub fn eval_with<T: Scalar>(&self, t: f64, x: T, y: T) -> T {
        let mut st: Vec<T> = Vec::with_capacity(16);
        for op in &self.prog {
            match *op {
                Op::Const(c) => st.push(T::constant(c)),
                Op::Var(0) => st.push(T::constant(t)),
                Op::Var(1) => st.push(x),
                Op::Var(_) => st.push(y),
                Op::Neg => {
                    let a = st.pop().expect("operand");
                    st.push(-a);
                }
                Op::PowInt(k) => {
                    let a = st.pop().expect("operand");
                    st.push(a.powi(k));
                }
                Op::F1(f) => {
                    let a = st.pop().expect("operand");
                    st.push(apply1(f, a));
                }
                _ => {
                    let b = st.pop().expect("operand");
                    let a = st.pop().expect("operand");
                    st.push(match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        Op::Pow => a.pow(b),
                        Op::F2(Func2::Max) => {
                            if a.value() >= b.value() {
                                a
                            } else {
                                b
                            }
                        }
                        Op::F2(Func2::Min) => {
                            if a.value() <= b.value() {
                                a
                            } else {
                                b
                            }
                        }
                        _ => unreachable!("binary op"),
                    });
                }
            }
        }
        st.pop().expect("expression result")
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        self.eval_with(t, x, y)
    }

    /// Value, gradient and Hessian in (x, y) at time t.
    pub fn jet(&self, t: f64, x: f64, y: f64) -> Jet {
        self.eval_with(t, Jet::var_x(x), Jet::var_y(y))
    }
}

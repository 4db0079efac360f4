//! Expression-tree scalar fields.
//!
//! A [`ScalarField`] is an immutable DAG of arithmetic nodes over chart
//! coordinates, named parameters and literals. Fields evaluate over any
//! [`Field`] scalar, differentiate symbolically (`partial`), and compile to
//! a flat [`Tape`] that evaluates many outputs with shared subexpressions.

use crate::error::{Error, Result};
use crate::numeric::Field;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Exp,
    Log,
    /// k-th derivative of psi(u) = exp(-1/u) for u > 0, 0 otherwise.
    Psi(u32),
}

#[derive(Debug, Clone)]
pub enum Node {
    Const(f64),
    Coord(usize),
    Param(Arc<str>, f64),
    Neg(ScalarField),
    Add(ScalarField, ScalarField),
    Sub(ScalarField, ScalarField),
    Mul(ScalarField, ScalarField),
    Div(ScalarField, ScalarField),
    Powi(ScalarField, i32),
    Powf(ScalarField, f64),
    Pow(ScalarField, ScalarField),
    Func(Func, ScalarField),
}

#[derive(Clone)]
pub struct ScalarField(Arc<Node>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({self})")
    }
}

/// Resolves identifiers while parsing.
pub trait Symbols {
    fn coord_index(&self, name: &str) -> Option<usize>;
    fn param_value(&self, name: &str) -> Option<f64>;
}

impl ScalarField {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn wrap(n: Node) -> Self {
        ScalarField(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Self::wrap(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn coord(i: usize) -> Self {
        Self::wrap(Node::Coord(i))
    }

    pub fn param(name: &str, value: f64) -> Self {
        Self::wrap(Node::Param(Arc::from(name), value))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// True when the field has no coordinate dependence.
    pub fn is_constant(&self) -> bool {
        match self.node() {
            Node::Const(_) | Node::Param(..) => true,
            Node::Coord(_) => false,
            Node::Neg(a) | Node::Powi(a, _) | Node::Powf(a, _) | Node::Func(_, a) => a.is_constant(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) | Node::Param(..) => None,
            Node::Coord(i) => Some(*i),
            Node::Neg(a) | Node::Powi(a, _) | Node::Powf(a, _) | Node::Func(_, a) => a.max_coord(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                match (a.max_coord(), b.max_coord()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    pub fn neg(&self) -> Self {
        match self.node() {
            Node::Const(c) => Self::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Self::wrap(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), o.as_const()) {
            return Self::constant(a + b);
        }
        Self::wrap(Node::Add(self.clone(), o.clone()))
    }

    pub fn sub(&self, o: &Self) -> Self {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.neg();
        }
        if let (Some(a), Some(b)) = (self.as_const(), o.as_const()) {
            return Self::constant(a - b);
        }
        Self::wrap(Node::Sub(self.clone(), o.clone()))
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        if self.is_one() {
            return o.clone();
        }
        if o.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), o.as_const()) {
            return Self::constant(a * b);
        }
        if self.as_const() == Some(-1.0) {
            return o.neg();
        }
        if o.as_const() == Some(-1.0) {
            return self.neg();
        }
        Self::wrap(Node::Mul(self.clone(), o.clone()))
    }

    pub fn div(&self, o: &Self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        if o.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), o.as_const()) {
            if b != 0.0 {
                return Self::constant(a / b);
            }
        }
        Self::wrap(Node::Div(self.clone(), o.clone()))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.mul(&Self::constant(c))
    }

    pub fn powi(&self, k: i32) -> Self {
        match k {
            0 => Self::one(),
            1 => self.clone(),
            _ => match self.as_const() {
                Some(c) => Self::constant(c.powi(k)),
                None => Self::wrap(Node::Powi(self.clone(), k)),
            },
        }
    }

    pub fn powf(&self, p: f64) -> Self {
        if p.fract() == 0.0 && p.abs() < 1e6 {
            return self.powi(p as i32);
        }
        Self::wrap(Node::Powf(self.clone(), p))
    }

    pub fn pow(&self, e: &Self) -> Self {
        if e.is_constant() {
            let v = e.eval::<f64>(&[]);
            return self.powf(v);
        }
        Self::wrap(Node::Pow(self.clone(), e.clone()))
    }

    pub fn func(f: Func, a: &Self) -> Self {
        if let Some(c) = a.as_const() {
            let v = apply_func(f, c);
            if v.is_finite() {
                return Self::constant(v);
            }
        }
        Self::wrap(Node::Func(f, a.clone()))
    }

    pub fn sin(&self) -> Self {
        Self::func(Func::Sin, self)
    }
    pub fn cos(&self) -> Self {
        Self::func(Func::Cos, self)
    }
    pub fn sqrt(&self) -> Self {
        Self::func(Func::Sqrt, self)
    }
    pub fn exp(&self) -> Self {
        Self::func(Func::Exp, self)
    }
    pub fn ln(&self) -> Self {
        Self::func(Func::Log, self)
    }
    pub fn psi(&self) -> Self {
        Self::func(Func::Psi(0), self)
    }

    /// Plateau bump: 1 for |x| ≤ 1/2, 0 for |x| ≥ 1, smooth in between.
    pub fn bump(&self) -> Self {
        let x2 = self.powi(2);
        let a = Self::one().sub(&x2).psi();
        let b = x2.sub(&Self::constant(0.25)).psi();
        a.div(&a.add(&b))
    }

    /// Evaluation by tree walk. Coordinates beyond `x.len()` panic.
    pub fn eval<T: Field>(&self, x: &[T]) -> T {
        match self.node() {
            Node::Const(c) => T::cst(*c),
            Node::Coord(i) => x[*i],
            Node::Param(_, v) => T::cst(*v),
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Powi(a, k) => a.eval(x).powi(*k),
            Node::Powf(a, p) => a.eval(x).powf(*p),
            Node::Pow(a, b) => (b.eval(x) * a.eval(x).ln()).exp(),
            Node::Func(f, a) => apply_field(*f, a.eval(x)),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut memo = HashMap::new();
        self.partial_memo(i, &mut memo)
    }

    fn partial_memo(&self, i: usize, memo: &mut HashMap<usize, ScalarField>) -> Self {
        let key = Arc::as_ptr(&self.0) as usize;
        if let Some(d) = memo.get(&key) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) | Node::Param(..) => Self::zero(),
            Node::Coord(j) => {
                if *j == i {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Node::Neg(a) => a.partial_memo(i, memo).neg(),
            Node::Add(a, b) => a.partial_memo(i, memo).add(&b.partial_memo(i, memo)),
            Node::Sub(a, b) => a.partial_memo(i, memo).sub(&b.partial_memo(i, memo)),
            Node::Mul(a, b) => {
                let da = a.partial_memo(i, memo);
                let db = b.partial_memo(i, memo);
                da.mul(b).add(&a.mul(&db))
            }
            Node::Div(a, b) => {
                let da = a.partial_memo(i, memo);
                let db = b.partial_memo(i, memo);
                if db.is_zero() {
                    da.div(b)
                } else {
                    da.div(b).sub(&a.mul(&db).div(&b.powi(2)))
                }
            }
            Node::Powi(a, k) => {
                let da = a.partial_memo(i, memo);
                Self::constant(*k as f64).mul(&a.powi(k - 1)).mul(&da)
            }
            Node::Powf(a, p) => {
                let da = a.partial_memo(i, memo);
                Self::constant(*p).mul(&a.powf(p - 1.0)).mul(&da)
            }
            Node::Pow(a, b) => {
                let da = a.partial_memo(i, memo);
                let db = b.partial_memo(i, memo);
                let inner = db.mul(&a.ln()).add(&b.mul(&da).div(a));
                self.mul(&inner)
            }
            Node::Func(f, a) => {
                let da = a.partial_memo(i, memo);
                if da.is_zero() {
                    Self::zero()
                } else {
                    let outer = match f {
                        Func::Sin => a.cos(),
                        Func::Cos => a.sin().neg(),
                        Func::Sqrt => Self::constant(0.5).div(self),
                        Func::Exp => self.clone(),
                        Func::Log => Self::one().div(a),
                        Func::Psi(k) => Self::func(Func::Psi(k + 1), a),
                    };
                    outer.mul(&da)
                }
            }
        };
        memo.insert(key, d.clone());
        d
    }

    /// Gradient trees for coordinates `0..dim`.
    pub fn gradient(&self, dim: usize) -> Vec<ScalarField> {
        (0..dim).map(|i| self.partial(i)).collect()
    }

    /// Replace every coordinate reference `i` with `subs[i]`.
    pub fn substitute(&self, subs: &[ScalarField]) -> Self {
        let mut memo = HashMap::new();
        self.subst_memo(subs, &mut memo)
    }

    fn subst_memo(&self, subs: &[ScalarField], memo: &mut HashMap<usize, ScalarField>) -> Self {
        let key = Arc::as_ptr(&self.0) as usize;
        if let Some(d) = memo.get(&key) {
            return d.clone();
        }
        let r = match self.node() {
            Node::Const(_) | Node::Param(..) => self.clone(),
            Node::Coord(i) => subs[*i].clone(),
            Node::Neg(a) => a.subst_memo(subs, memo).neg(),
            Node::Add(a, b) => a.subst_memo(subs, memo).add(&b.subst_memo(subs, memo)),
            Node::Sub(a, b) => a.subst_memo(subs, memo).sub(&b.subst_memo(subs, memo)),
            Node::Mul(a, b) => a.subst_memo(subs, memo).mul(&b.subst_memo(subs, memo)),
            Node::Div(a, b) => a.subst_memo(subs, memo).div(&b.subst_memo(subs, memo)),
            Node::Powi(a, k) => a.subst_memo(subs, memo).powi(*k),
            Node::Powf(a, p) => a.subst_memo(subs, memo).powf(*p),
            Node::Pow(a, b) => a.subst_memo(subs, memo).pow(&b.subst_memo(subs, memo)),
            Node::Func(f, a) => Self::func(*f, &a.subst_memo(subs, memo)),
        };
        memo.insert(key, r.clone());
        r
    }

    pub fn parse(src: &str, syms: &dyn Symbols) -> Result<Self> {
        Parser::new(src, syms).parse_all()
    }
}

fn apply_func(f: Func, x: f64) -> f64 {
    apply_field(f, x)
}

fn apply_field<T: Field>(f: Func, x: T) -> T {
    match f {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Sqrt => x.sqrt(),
        Func::Exp => x.exp(),
        Func::Log => x.ln(),
        Func::Psi(k) => x.psi(k),
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl std::ops::$tr<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, o: &ScalarField) -> ScalarField {
                ScalarField::$f(self, o)
            }
        }
        impl std::ops::$tr<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, o: ScalarField) -> ScalarField {
                ScalarField::$f(&self, &o)
            }
        }
        impl std::ops::$tr<f64> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, o: f64) -> ScalarField {
                ScalarField::$f(self, &ScalarField::constant(o))
            }
        }
        impl std::ops::$tr<f64> for ScalarField {
            type Output = ScalarField;
            fn $m(self, o: f64) -> ScalarField {
                ScalarField::$f(&self, &ScalarField::constant(o))
            }
        }
    };
}
binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl std::ops::Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField::neg(self)
    }
}

impl std::ops::Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField::neg(&self)
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        ScalarField::constant(c)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Coord(i) => write!(f, "x{i}"),
            Node::Param(n, _) => write!(f, "{n}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Powi(a, k) => write!(f, "({a}^{k})"),
            Node::Powf(a, p) => write!(f, "({a}^{p:?})"),
            Node::Pow(a, b) => write!(f, "({a}^{b})"),
            Node::Func(func, a) => {
                let name = match func {
                    Func::Sin => "sin".to_string(),
                    Func::Cos => "cos".to_string(),
                    Func::Sqrt => "sqrt".to_string(),
                    Func::Exp => "exp".to_string(),
                    Func::Log => "log".to_string(),
                    Func::Psi(0) => "psi".to_string(),
                    Func::Psi(k) => format!("psi_{k}"),
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tape

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Coord(usize),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Powi(u32, i32),
    Powf(u32, f64),
    Pow(u32, u32),
    Func(Func, u32),
}

/// Flat evaluation program for a list of fields sharing subexpressions.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<u32>,
}

impl Tape {
    pub fn new(fields: &[ScalarField]) -> Self {
        let mut t = Tape { ops: Vec::new(), outputs: Vec::new() };
        let mut memo: HashMap<usize, u32> = HashMap::new();
        let mut leaves: HashMap<(u8, u64), u32> = HashMap::new();
        for f in fields {
            let o = t.emit(f, &mut memo, &mut leaves);
            t.outputs.push(o);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    fn push(&mut self, op: Op) -> u32 {
        self.ops.push(op);
        (self.ops.len() - 1) as u32
    }

    fn emit(&mut self, f: &ScalarField, memo: &mut HashMap<usize, u32>, leaves: &mut HashMap<(u8, u64), u32>) -> u32 {
        let key = Arc::as_ptr(&f.0) as usize;
        if let Some(&i) = memo.get(&key) {
            return i;
        }
        let idx = match f.node() {
            Node::Const(c) => *leaves.entry((0, c.to_bits())).or_insert_with(|| {
                self.ops.push(Op::Const(*c));
                (self.ops.len() - 1) as u32
            }),
            Node::Param(_, c) => *leaves.entry((0, c.to_bits())).or_insert_with(|| {
                self.ops.push(Op::Const(*c));
                (self.ops.len() - 1) as u32
            }),
            Node::Coord(i) => *leaves.entry((1, *i as u64)).or_insert_with(|| {
                self.ops.push(Op::Coord(*i));
                (self.ops.len() - 1) as u32
            }),
            Node::Neg(a) => {
                let a = self.emit(a, memo, leaves);
                self.push(Op::Neg(a))
            }
            Node::Add(a, b) => {
                let (a, b) = (self.emit(a, memo, leaves), self.emit(b, memo, leaves));
                self.push(Op::Add(a, b))
            }
            Node::Sub(a, b) => {
                let (a, b) = (self.emit(a, memo, leaves), self.emit(b, memo, leaves));
                self.push(Op::Sub(a, b))
            }
            Node::Mul(a, b) => {
                let (a, b) = (self.emit(a, memo, leaves), self.emit(b, memo, leaves));
                self.push(Op::Mul(a, b))
            }
            Node::Div(a, b) => {
                let (a, b) = (self.emit(a, memo, leaves), self.emit(b, memo, leaves));
                self.push(Op::Div(a, b))
            }
            Node::Powi(a, k) => {
                let a = self.emit(a, memo, leaves);
                self.push(Op::Powi(a, *k))
            }
            Node::Powf(a, p) => {
                let a = self.emit(a, memo, leaves);
                self.push(Op::Powf(a, *p))
            }
            Node::Pow(a, b) => {
                let (a, b) = (self.emit(a, memo, leaves), self.emit(b, memo, leaves));
                self.push(Op::Pow(a, b))
            }
            Node::Func(func, a) => {
                let a = self.emit(a, memo, leaves);
                self.push(Op::Func(*func, a))
            }
        };
        memo.insert(key, idx);
        idx
    }

    /// Evaluates every output at `x`.
    pub fn eval<T: Field>(&self, x: &[T]) -> Vec<T> {
        let mut r: Vec<T> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => T::cst(c),
                Op::Coord(i) => x[i],
                Op::Neg(a) => -r[a as usize],
                Op::Add(a, b) => r[a as usize] + r[b as usize],
                Op::Sub(a, b) => r[a as usize] - r[b as usize],
                Op::Mul(a, b) => r[a as usize] * r[b as usize],
                Op::Div(a, b) => r[a as usize] / r[b as usize],
                Op::Powi(a, k) => r[a as usize].powi(k),
                Op::Powf(a, p) => r[a as usize].powf(p),
                Op::Pow(a, b) => (r[b as usize] * r[a as usize].ln()).exp(),
                Op::Func(f, a) => apply_field(f, r[a as usize]),
            };
            r.push(v);
        }
        self.outputs.iter().map(|&o| r[o as usize]).collect()
    }
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    syms: &'a dyn Symbols,
    lex_error: Option<Error>,
}

fn lex(src: &str) -> std::result::Result<Vec<(Tok, usize)>, Error> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit()) {
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
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Parse { column: col, message: format!("malformed number `{text}`") })?;
            out.push((Tok::Num(v), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else {
            return Err(Error::Parse { column: col, message: format!("unexpected character `{c}`") });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

impl<'a> Parser<'a> {
    fn new(src: &str, syms: &'a dyn Symbols) -> Self {
        match lex(src) {
            Ok(toks) => Parser { toks, pos: 0, syms, lex_error: None },
            Err(e) => Parser { toks: vec![(Tok::End, 1)], pos: 0, syms, lex_error: Some(e) },
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { column: self.col(), message: message.into() })
    }

    fn parse_all(mut self) -> Result<ScalarField> {
        if let Some(e) = self.lex_error.take() {
            return Err(e);
        }
        if *self.peek() == Tok::End {
            return self.err("empty expression");
        }
        let e = self.expr()?;
        match self.peek() {
            Tok::End => Ok(e),
            t => {
                let t = t.clone();
                self.err(format!("unexpected {}", describe(&t)))
            }
        }
    }

    fn expr(&mut self) -> Result<ScalarField> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarField> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    acc = acc.mul(&self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump();
                    acc = acc.div(&self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarField> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(self.unary()?.neg())
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<ScalarField> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let e = self.unary()?;
            return Ok(base.pow(&e));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<ScalarField> {
        let col = self.col();
        match self.bump() {
            Tok::Num(v) => Ok(ScalarField::constant(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if *self.peek() != Tok::Op(')') {
                    return self.err("expected `)`");
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Op('(') {
                    let f = match name.as_str() {
                        "sin" => Some(Func::Sin),
                        "cos" => Some(Func::Cos),
                        "sqrt" => Some(Func::Sqrt),
                        "exp" => Some(Func::Exp),
                        "log" | "ln" => Some(Func::Log),
                        "psi" => Some(Func::Psi(0)),
                        "bump" => None,
                        _ => {
                            return Err(Error::Parse { column: col, message: format!("unknown function `{name}`") })
                        }
                    };
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::Op(')') {
                        return self.err("expected `)`");
                    }
                    self.bump();
                    return Ok(match f {
                        Some(f) => ScalarField::func(f, &arg),
                        None => arg.bump(),
                    });
                }
                if let Some(i) = self.syms.coord_index(&name) {
                    return Ok(ScalarField::coord(i));
                }
                if let Some(v) = self.syms.param_value(&name) {
                    return Ok(ScalarField::param(&name, v));
                }
                if name == "pi" {
                    return Ok(ScalarField::constant(std::f64::consts::PI));
                }
                Err(Error::Parse { column: col, message: format!("unknown identifier `{name}`") })
            }
            Tok::End => Err(Error::Parse { column: col, message: "unexpected end of expression".into() }),
            Tok::Op(c) => Err(Error::Parse { column: col, message: format!("unexpected `{c}`") }),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of expression".into(),
    }
}

/// Symbol table from plain name lists; handy in tests and examples.
pub struct NameTable<'a> {
    pub coords: &'a [&'a str],
    pub params: &'a [(&'a str, f64)],
}

impl Symbols for NameTable<'_> {
    fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| *c == name)
    }
    fn param_value(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Dual;

    fn syms() -> NameTable<'static> {
        NameTable { coords: &["x", "y", "z"], params: &[("eps", 0.1)] }
    }

    #[test]
    fn precedence_and_unary_minus() {
        let s = syms();
        let f = ScalarField::parse("-x^2 + 2*y/4 - eps", &s).unwrap();
        let v = f.eval(&[3.0, 2.0, 0.0]);
        assert!((v - (-9.0 + 1.0 - 0.1)).abs() < 1e-15);
        let g = ScalarField::parse("2^3^2", &s).unwrap();
        assert_eq!(g.eval::<f64>(&[0.0; 3]), 512.0);
        let h = ScalarField::parse("x^-2", &s).unwrap();
        assert_eq!(h.eval(&[2.0, 0.0, 0.0]), 0.25);
    }

    #[test]
    fn parse_errors_carry_columns() {
        let s = syms();
        match ScalarField::parse("sin(", &s) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        match ScalarField::parse("x + w", &s) {
            Err(Error::Parse { column, message }) => {
                assert_eq!(column, 5);
                assert!(message.contains("`w`"));
            }
            other => panic!("{other:?}"),
        }
        assert!(ScalarField::parse("x $ y", &s).is_err());
        assert!(ScalarField::parse("(x", &s).is_err());
        assert!(ScalarField::parse("x y", &s).is_err());
    }

    #[test]
    fn symbolic_partial_matches_jets() {
        let s = syms();
        let f = ScalarField::parse("sin(x*y) + exp(z)/(1 + x^2) + sqrt(2 + y^2) * log(3 + z) + bump(x/2)", &s).unwrap();
        let p = [0.7, -0.3, 0.4];
        let jet = f.eval(&Dual::seed(&p));
        for i in 0..3 {
            let d = f.partial(i).eval(&p);
            assert!((d - jet.d[i]).abs() < 1e-13, "i={i} {d} {}", jet.d[i]);
        }
    }

    #[test]
    fn tape_matches_tree() {
        let s = syms();
        let f = ScalarField::parse("x*y + (x*y)^2 - cos(z)", &s).unwrap();
        let g = f.partial(0);
        let tape = Tape::new(&[f.clone(), g.clone()]);
        let p = [0.2, 1.5, -0.7];
        let out = tape.eval(&p);
        assert_eq!(out[0], f.eval(&p));
        assert_eq!(out[1], g.eval(&p));
    }

    #[test]
    fn bump_plateau_and_support() {
        let s = syms();
        let b = ScalarField::parse("bump(x)", &s).unwrap();
        assert_eq!(b.eval(&[0.3, 0.0, 0.0]), 1.0);
        assert_eq!(b.eval(&[0.5, 0.0, 0.0]), 1.0);
        assert_eq!(b.eval(&[1.2, 0.0, 0.0]), 0.0);
        let m = b.eval(&[0.75, 0.0, 0.0]);
        assert!(m > 0.0 && m < 1.0);
        let db = b.partial(0);
        assert!(db.eval(&[0.5, 0.0, 0.0]).is_finite());
        assert!(db.partial(0).eval(&[1.0, 0.0, 0.0]).is_finite());
    }
}

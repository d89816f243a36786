//! Closed-form symbols: scalar or `r×r` matrix-valued functions on the model
//! domain, each carrying analytic first derivatives.
//!
//! Trigonometric modes are `cos(2π(kx·x + ky·y))` and `sin(...)`, so they are
//! exactly periodic on the unit torus for integer wave numbers.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{cone, cx, czero, Cx, Real};

pub type Point<T> = [T; 2];

type ValueFn<T> = dyn Fn(Point<T>) -> Cx<T> + Send + Sync;
type GradFn<T> = dyn Fn(Point<T>) -> [Cx<T>; 2] + Send + Sync;

/// User-supplied closure symbol. Derivatives are optional; operations that
/// need them fail with [`Error::MissingDerivative`] when absent.
pub struct CustomFn<T: Real> {
    pub name: String,
    value: Box<ValueFn<T>>,
    grad: Option<Arc<GradFn<T>>>,
}

impl<T: Real> CustomFn<T> {
    pub fn new(name: impl Into<String>, value: impl Fn(Point<T>) -> Cx<T> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), value: Box::new(value), grad: None }
    }

    pub fn with_gradient(mut self, grad: impl Fn(Point<T>) -> [Cx<T>; 2] + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }
}

#[derive(Clone)]
pub enum Expr<T: Real> {
    Const(Cx<T>),
    X,
    Y,
    /// `cos(2π(kx x + ky y))`
    Cos { kx: i32, ky: i32 },
    /// `sin(2π(kx x + ky y))`
    Sin { kx: i32, ky: i32 },
    /// `exp(-c (x² + y²))`
    Gauss { c: T },
    Recip(Box<Expr<T>>),
    Conj(Box<Expr<T>>),
    Sum(Vec<Expr<T>>),
    Product(Vec<Expr<T>>),
    Custom(Arc<CustomFn<T>>),
}

impl<T: Real> fmt::Debug for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<T: Real> fmt::Display for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.im == T::zero() => write!(f, "{}", c.re),
            Expr::Const(c) => write!(f, "({}+{}i)", c.re, c.im),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Cos { kx, ky } => write!(f, "cos({kx},{ky})"),
            Expr::Sin { kx, ky } => write!(f, "sin({kx},{ky})"),
            Expr::Gauss { c } => write!(f, "gauss({c})"),
            Expr::Recip(e) => write!(f, "1/({e})"),
            Expr::Conj(e) => write!(f, "conj({e})"),
            Expr::Sum(v) => {
                write!(f, "(")?;
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Expr::Product(v) => {
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            Expr::Custom(c) => write!(f, "{}", c.name),
        }
    }
}

impl<T: Real> Expr<T> {
    pub fn constant(c: T) -> Self {
        Expr::Const(cx(c, T::zero()))
    }

    pub fn zero() -> Self {
        Expr::Const(czero())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.re == T::zero() && c.im == T::zero())
    }

    fn as_const(&self) -> Option<Cx<T>> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn sum(terms: Vec<Expr<T>>) -> Self {
        let mut flat = Vec::new();
        let mut konst = czero();
        for t in terms {
            match t {
                Expr::Sum(inner) => flat.extend(inner),
                Expr::Const(c) => konst += c,
                other => flat.push(other),
            }
        }
        if konst.re != T::zero() || konst.im != T::zero() {
            flat.push(Expr::Const(konst));
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().expect("one term"),
            _ => Expr::Sum(flat),
        }
    }

    pub fn product(factors: Vec<Expr<T>>) -> Self {
        let mut flat = Vec::new();
        let mut konst = cone();
        for fct in factors {
            match fct {
                Expr::Product(inner) => {
                    for g in inner {
                        match g.as_const() {
                            Some(c) => konst = konst * c,
                            None => flat.push(g),
                        }
                    }
                }
                Expr::Const(c) => konst = konst * c,
                other => flat.push(other),
            }
        }
        if konst.re == T::zero() && konst.im == T::zero() {
            return Expr::zero();
        }
        if konst != cone() {
            flat.insert(0, Expr::Const(konst));
        }
        match flat.len() {
            0 => Expr::Const(konst),
            1 => flat.pop().expect("one factor"),
            _ => Expr::Product(flat),
        }
    }

    pub fn scaled(self, c: Cx<T>) -> Self {
        Expr::product(vec![Expr::Const(c), self])
    }

    pub fn eval(&self, p: Point<T>) -> Cx<T> {
        let two_pi = T::PI() + T::PI();
        match self {
            Expr::Const(c) => *c,
            Expr::X => cx(p[0], T::zero()),
            Expr::Y => cx(p[1], T::zero()),
            Expr::Cos { kx, ky } => {
                let arg = two_pi * (T::lit(*kx as f64) * p[0] + T::lit(*ky as f64) * p[1]);
                cx(arg.cos(), T::zero())
            }
            Expr::Sin { kx, ky } => {
                let arg = two_pi * (T::lit(*kx as f64) * p[0] + T::lit(*ky as f64) * p[1]);
                cx(arg.sin(), T::zero())
            }
            Expr::Gauss { c } => cx((-*c * (p[0] * p[0] + p[1] * p[1])).exp(), T::zero()),
            Expr::Recip(e) => cone::<T>() / e.eval(p),
            Expr::Conj(e) => e.eval(p).conj(),
            Expr::Sum(v) => v.iter().fold(czero(), |acc, e| acc + e.eval(p)),
            Expr::Product(v) => v.iter().fold(cone(), |acc, e| acc * e.eval(p)),
            Expr::Custom(c) => (c.value)(p),
        }
    }

    /// Analytic partial derivative along `axis` (0 = x, 1 = y).
    pub fn derivative(&self, axis: usize) -> Result<Expr<T>> {
        let two_pi = T::PI() + T::PI();
        Ok(match self {
            Expr::Const(_) => Expr::zero(),
            Expr::X => Expr::constant(if axis == 0 { T::one() } else { T::zero() }),
            Expr::Y => Expr::constant(if axis == 1 { T::one() } else { T::zero() }),
            Expr::Cos { kx, ky } => {
                let k = if axis == 0 { *kx } else { *ky };
                if k == 0 {
                    Expr::zero()
                } else {
                    Expr::Sin { kx: *kx, ky: *ky }.scaled(cx(-two_pi * T::lit(k as f64), T::zero()))
                }
            }
            Expr::Sin { kx, ky } => {
                let k = if axis == 0 { *kx } else { *ky };
                if k == 0 {
                    Expr::zero()
                } else {
                    Expr::Cos { kx: *kx, ky: *ky }.scaled(cx(two_pi * T::lit(k as f64), T::zero()))
                }
            }
            Expr::Gauss { c } => {
                let coord = if axis == 0 { Expr::X } else { Expr::Y };
                Expr::product(vec![Expr::constant(-(*c + *c)), coord, self.clone()])
            }
            Expr::Recip(e) => {
                let de = e.derivative(axis)?;
                if de.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product(vec![Expr::constant(-T::one()), de, self.clone(), self.clone()])
                }
            }
            Expr::Conj(e) => {
                let de = e.derivative(axis)?;
                if de.is_zero() {
                    Expr::zero()
                } else {
                    Expr::Conj(Box::new(de))
                }
            }
            Expr::Sum(v) => Expr::sum(v.iter().map(|e| e.derivative(axis)).collect::<Result<Vec<_>>>()?),
            Expr::Product(v) => {
                let mut terms = Vec::with_capacity(v.len());
                for i in 0..v.len() {
                    let di = v[i].derivative(axis)?;
                    if di.is_zero() {
                        continue;
                    }
                    let mut factors = v.clone();
                    factors[i] = di;
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            Expr::Custom(c) => {
                let grad = c.grad.clone().ok_or_else(|| Error::MissingDerivative(c.name.clone()))?;
                let name = format!("d{}({})", if axis == 0 { "x" } else { "y" }, c.name);
                Expr::Custom(Arc::new(CustomFn::new(name, move |p| grad(p)[axis])))
            }
        })
    }

    /// Periodic on the unit torus (structural check).
    pub fn is_periodic(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Cos { .. } | Expr::Sin { .. } => true,
            Expr::X | Expr::Y | Expr::Gauss { .. } | Expr::Custom(_) => false,
            Expr::Recip(e) | Expr::Conj(e) => e.is_periodic(),
            Expr::Sum(v) | Expr::Product(v) => v.iter().all(Expr::is_periodic),
        }
    }
}

/// A scalar (`rank == 1`) or `rank × rank` matrix-valued symbol.
#[derive(Clone, Debug)]
pub struct Symbol<T: Real> {
    id: String,
    rank: usize,
    /// Row-major entries.
    entries: Vec<Expr<T>>,
}

impl<T: Real> Symbol<T> {
    pub fn scalar(expr: Expr<T>) -> Self {
        Self { id: expr.to_string(), rank: 1, entries: vec![expr] }
    }

    pub fn matrix(rank: usize, entries: Vec<Expr<T>>) -> Self {
        assert_eq!(entries.len(), rank * rank, "matrix symbol needs rank² entries");
        let id = format!("[{}]", entries.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";"));
        Self { id, rank, entries }
    }

    pub fn constant(c: T) -> Self {
        Self::scalar(Expr::constant(c))
    }

    /// `cos(2π(kx x + ky y))`
    pub fn cos_mode(kx: i32, ky: i32) -> Self {
        Self::scalar(Expr::Cos { kx, ky })
    }

    /// `sin(2π(kx x + ky y))`
    pub fn sin_mode(kx: i32, ky: i32) -> Self {
        Self::scalar(Expr::Sin { kx, ky })
    }

    pub fn coord_x() -> Self {
        Self::scalar(Expr::X)
    }

    pub fn coord_y() -> Self {
        Self::scalar(Expr::Y)
    }

    /// `z = x + iy`
    pub fn z() -> Self {
        Self::scalar(Expr::sum(vec![Expr::X, Expr::Y.scaled(cx(T::zero(), T::one()))]))
    }

    /// `z̄ = x - iy`
    pub fn zbar() -> Self {
        Self::scalar(Expr::sum(vec![Expr::X, Expr::Y.scaled(cx(T::zero(), -T::one()))]))
    }

    /// `|z|²`
    pub fn abs_z2() -> Self {
        Self::scalar(Expr::sum(vec![Expr::product(vec![Expr::X, Expr::X]), Expr::product(vec![Expr::Y, Expr::Y])]))
    }

    pub fn gauss(c: T) -> Self {
        Self::scalar(Expr::Gauss { c })
    }

    pub fn custom(f: CustomFn<T>) -> Self {
        Self::scalar(Expr::Custom(Arc::new(f)))
    }

    /// Pauli matrices `σ_x, σ_y, σ_z` and the 2×2 identity as constant symbols.
    pub fn pauli(which: char) -> Self {
        let (o, z, i) = (Expr::constant(T::one()), Expr::zero(), Expr::Const(cx(T::zero(), T::one())));
        let neg = |e: Expr<T>| e.scaled(cx(-T::one(), T::zero()));
        let entries = match which {
            'x' => vec![z.clone(), o.clone(), o, z],
            'y' => vec![z.clone(), neg(i.clone()), i, z],
            'z' => vec![o.clone(), z.clone(), z, neg(Expr::constant(T::one()))],
            _ => vec![o.clone(), z.clone(), z, o],
        };
        Self::matrix(2, entries)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_scalar(&self) -> bool {
        self.rank == 1
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr<T> {
        &self.entries[i * self.rank + j]
    }

    pub fn as_scalar(&self) -> Option<&Expr<T>> {
        self.is_scalar().then(|| &self.entries[0])
    }

    /// Row-major values at `p`.
    pub fn eval(&self, p: Point<T>) -> Vec<Cx<T>> {
        self.entries.iter().map(|e| e.eval(p)).collect()
    }

    pub fn eval_scalar(&self, p: Point<T>) -> Cx<T> {
        debug_assert!(self.is_scalar());
        self.entries[0].eval(p)
    }

    fn broadcast(&self, rank: usize) -> Symbol<T> {
        if self.rank == rank {
            return self.clone();
        }
        assert_eq!(self.rank, 1, "cannot broadcast rank {} to {}", self.rank, rank);
        let e = &self.entries[0];
        let entries = (0..rank * rank).map(|k| if k / rank == k % rank { e.clone() } else { Expr::zero() }).collect();
        Symbol { id: self.id.clone(), rank, entries }
    }

    /// Pointwise (matrix) product `self · other`; scalars broadcast.
    pub fn mul(&self, other: &Symbol<T>) -> Symbol<T> {
        let r = self.rank.max(other.rank);
        let (a, b) = (self.broadcast(r), other.broadcast(r));
        let mut entries = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                let terms = (0..r).map(|k| Expr::product(vec![a.entry(i, k).clone(), b.entry(k, j).clone()])).collect();
                entries.push(Expr::sum(terms));
            }
        }
        let mut s = if r == 1 { Symbol::scalar(entries.pop().expect("entry")) } else { Symbol::matrix(r, entries) };
        s.id = format!("{}*{}", self.id, other.id);
        s
    }

    pub fn add(&self, other: &Symbol<T>) -> Symbol<T> {
        let r = self.rank.max(other.rank);
        let (a, b) = (self.broadcast(r), other.broadcast(r));
        let entries: Vec<Expr<T>> =
            a.entries.iter().zip(&b.entries).map(|(x, y)| Expr::sum(vec![x.clone(), y.clone()])).collect();
        let mut s = if r == 1 { Symbol::scalar(entries[0].clone()) } else { Symbol::matrix(r, entries) };
        s.id = format!("{}+{}", self.id, other.id);
        s
    }

    pub fn scale(&self, c: Cx<T>) -> Symbol<T> {
        let entries: Vec<Expr<T>> = self.entries.iter().map(|e| e.clone().scaled(c)).collect();
        let mut s = if self.rank == 1 { Symbol::scalar(entries[0].clone()) } else { Symbol::matrix(self.rank, entries) };
        s.id = format!("({}+{}i)*{}", c.re, c.im, self.id);
        s
    }

    /// Pointwise adjoint (complex conjugate for scalars).
    pub fn adjoint(&self) -> Symbol<T> {
        let r = self.rank;
        let entries: Vec<Expr<T>> =
            (0..r * r).map(|k| Expr::Conj(Box::new(self.entries[(k % r) * r + k / r].clone()))).collect();
        let mut s = if r == 1 { Symbol::scalar(entries[0].clone()) } else { Symbol::matrix(r, entries) };
        s.id = format!("adj({})", self.id);
        s
    }

    pub fn derivative(&self, axis: usize) -> Result<Symbol<T>> {
        let entries = self.entries.iter().map(|e| e.derivative(axis)).collect::<Result<Vec<_>>>()?;
        let mut s = if self.rank == 1 { Symbol::scalar(entries[0].clone()) } else { Symbol::matrix(self.rank, entries) };
        s.id = format!("d{}({})", if axis == 0 { "x" } else { "y" }, self.id);
        Ok(s)
    }

    pub fn is_periodic(&self) -> bool {
        self.entries.iter().all(Expr::is_periodic)
    }

    /// Sampled `(sup |f|, sup |∇f|)` on an `m×m` grid of `[lo, hi]²`, with the
    /// matrix operator norm bounded by the Frobenius norm for matrix symbols.
    pub fn norm_estimate(&self, lo: T, hi: T, m: usize) -> Result<(T, T)> {
        let dx = self.derivative(0)?;
        let dy = self.derivative(1)?;
        let mut sup_f = T::zero();
        let mut sup_g = T::zero();
        let step = (hi - lo) / T::from_usize_lossy(m.max(1));
        for i in 0..m {
            for j in 0..m {
                let p = [lo + step * T::from_usize_lossy(i), lo + step * T::from_usize_lossy(j)];
                let fro = |v: Vec<Cx<T>>| v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
                sup_f = sup_f.max(fro(self.eval(p)));
                let gx = fro(dx.eval(p));
                let gy = fro(dy.eval(p));
                sup_g = sup_g.max((gx * gx + gy * gy).sqrt());
            }
        }
        Ok((sup_f, sup_g))
    }

    /// Pointwise Hermitian on a sample grid of the unit square.
    pub fn is_pointwise_hermitian(&self, tol: T) -> bool {
        let r = self.rank;
        let m = 9;
        (0..m * m).all(|k| {
            let p = [T::from_usize_lossy(k / m) / T::lit(m as f64), T::from_usize_lossy(k % m) / T::lit(m as f64)];
            let v = self.eval(p);
            (0..r).all(|i| (0..r).all(|j| (v[i * r + j] - v[j * r + i].conj()).norm() <= tol))
        })
    }
}

/// Parses the symbol mini-language used in run configurations:
///
/// ```text
/// expr   := term (('+' | '-') term)*
/// term   := factor ('*' factor)*
/// factor := number | x | y | z | zbar | absz2 | cos(kx,ky) | sin(kx,ky)
///         | gauss(c) | sx | sy | sz | id | '(' expr ')'
/// ```
///
/// Pauli factors make the symbol 2×2 matrix-valued; scalar terms broadcast.
pub fn parse_symbol<T: Real>(text: &str) -> Result<Symbol<T>> {
    let mut p = SymbolParser { s: text.as_bytes(), pos: 0 };
    let sym = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(sym.with_id(text.trim().to_string()))
}

struct SymbolParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl SymbolParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { line: 0, message: format!("symbol at column {}: {msg}", self.pos + 1) }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr<T: Real>(&mut self) -> Result<Symbol<T>> {
        let mut acc = self.term::<T>()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.add(&self.term::<T>()?.scale(cx(-T::one(), T::zero())));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term<T: Real>(&mut self) -> Result<Symbol<T>> {
        let mut acc = self.factor::<T>()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || b".eE+-".contains(&self.s[self.pos])) {
            // a sign is only part of the number right after an exponent or at the start
            if b"+-".contains(&self.s[self.pos]) && self.pos > start && !b"eE".contains(&self.s[self.pos - 1]) {
                break;
            }
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected number"))
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn wave_numbers(&mut self) -> Result<(i32, i32)> {
        self.expect(b'(')?;
        let kx = self.number()?;
        self.expect(b',')?;
        let ky = self.number()?;
        self.expect(b')')?;
        if kx.fract() != 0.0 || ky.fract() != 0.0 {
            return Err(self.err("wave numbers must be integers"));
        }
        Ok((kx as i32, ky as i32))
    }

    fn factor<T: Real>(&mut self) -> Result<Symbol<T>> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Symbol::constant(T::lit(self.number()?))),
            Some(b'-') => {
                self.pos += 1;
                Ok(self.factor::<T>()?.scale(cx(-T::one(), T::zero())))
            }
            Some(_) => {
                let name = self.ident();
                match name.as_str() {
                    "x" => Ok(Symbol::coord_x()),
                    "y" => Ok(Symbol::coord_y()),
                    "z" => Ok(Symbol::z()),
                    "zbar" => Ok(Symbol::zbar()),
                    "absz2" => Ok(Symbol::abs_z2()),
                    "sx" => Ok(Symbol::pauli('x')),
                    "sy" => Ok(Symbol::pauli('y')),
                    "sz" => Ok(Symbol::pauli('z')),
                    "id" => Ok(Symbol::pauli('1')),
                    "cos" => {
                        let (kx, ky) = self.wave_numbers()?;
                        Ok(Symbol::cos_mode(kx, ky))
                    }
                    "sin" => {
                        let (kx, ky) = self.wave_numbers()?;
                        Ok(Symbol::sin_mode(kx, ky))
                    }
                    "gauss" => {
                        self.expect(b'(')?;
                        let c = self.number()?;
                        self.expect(b')')?;
                        Ok(Symbol::gauss(T::lit(c)))
                    }
                    "" => Err(self.err("unexpected character")),
                    other => Err(self.err(&format!("unknown symbol `{other}`"))),
                }
            }
            None => Err(self.err("unexpected end of input")),
        }
    }
}

//! Exact scalar expressions over chart coordinates.
//!
//! Expressions are immutable DAGs behind `Arc`, so cloning is cheap and
//! subtrees produced by differentiation are shared rather than copied.
//! Constructors perform constant folding and 0/1 absorption only; no further
//! simplification is attempted. Identities are checked numerically with
//! [`approx_equal`].

mod check;
mod compile;
mod domain;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub};
use thiserror::Error;

pub use check::{approx_equal, approx_equal_at, Comparison, DEFAULT_SEED, ODE_TOL, SYMBOLIC_TOL};
pub use compile::{Compiled, Scratch};
pub use domain::Domain;
pub use parse::{parse, ParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: &'static str },
    #[error("inconclusive comparison: {failed} of {total} samples outside the domain of both sides")]
    Inconclusive { failed: usize, total: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Numeric literal: exact rational when possible, otherwise an IEEE double.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Const {
    Rational(Rational64),
    Float(f64),
}

impl Const {
    pub fn value(self) -> f64 {
        match self {
            Const::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Const::Float(f) => f,
        }
    }

    pub fn is_zero(self) -> bool {
        self.value() == 0.0
    }

    pub fn is_one(self) -> bool {
        match self {
            Const::Rational(r) => r == Rational64::from_integer(1),
            Const::Float(f) => f == 1.0,
        }
    }

    fn combine(
        self,
        other: Const,
        exact: impl Fn(Rational64, Rational64) -> Option<Rational64>,
        float: impl Fn(f64, f64) -> f64,
    ) -> Const {
        if let (Const::Rational(a), Const::Rational(b)) = (self, other) {
            if let Some(r) = exact(a, b) {
                return Const::Rational(r);
            }
        }
        Const::Float(float(self.value(), other.value()))
    }

    fn add(self, o: Const) -> Const {
        self.combine(o, |a, b| a.checked_add(&b), |a, b| a + b)
    }

    fn sub(self, o: Const) -> Const {
        self.combine(o, |a, b| a.checked_sub(&b), |a, b| a - b)
    }

    fn mul(self, o: Const) -> Const {
        self.combine(o, |a, b| a.checked_mul(&b), |a, b| a * b)
    }

    fn div(self, o: Const) -> Option<Const> {
        if o.is_zero() {
            return None;
        }
        Some(self.combine(o, |a, b| a.checked_div(&b), |a, b| a / b))
    }

    fn neg(self) -> Const {
        match self {
            Const::Rational(r) => Const::Rational(-r),
            Const::Float(f) => Const::Float(-f),
        }
    }

    fn powi(self, n: i32) -> Option<Const> {
        if n < 0 && self.is_zero() {
            return None;
        }
        if let Const::Rational(r) = self {
            let mut acc = Some(Rational64::from_integer(1));
            let base = if n < 0 { r.recip() } else { r };
            for _ in 0..n.unsigned_abs() {
                acc = acc.and_then(|a| a.checked_mul(&base));
            }
            if let Some(a) = acc {
                return Some(Const::Rational(a));
            }
        }
        Some(Const::Float(self.value().powi(n)))
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Rational(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Const::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Const::Float(x) => {
                let s = format!("{x:?}");
                // `{:?}` may emit `1e-5`, which the parser accepts.
                write!(f, "{s}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
pub enum Node {
    Const(Const),
    Var(String),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    Pow(Expr, i32),
}

/// A scalar expression. Cheap to clone.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn new(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn id(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    pub fn constant(c: Const) -> Expr {
        Expr::new(Node::Const(c))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(Const::Rational(Rational64::from_integer(n)))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        assert!(d != 0, "zero denominator");
        Expr::constant(Const::Rational(Rational64::new(n, d)))
    }

    pub fn float(x: f64) -> Expr {
        if x.fract() == 0.0 && x.abs() < 1e15 {
            return Expr::int(x as i64);
        }
        Expr::constant(Const::Float(x))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(Node::Var(name.into()))
    }

    pub fn as_const(&self) -> Option<Const> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Const::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(Const::is_one)
    }

    pub fn sin(&self) -> Expr {
        match self.as_const() {
            Some(c) if c.is_zero() => Expr::zero(),
            _ => Expr::new(Node::Unary(UnaryOp::Sin, self.clone())),
        }
    }

    pub fn cos(&self) -> Expr {
        match self.as_const() {
            Some(c) if c.is_zero() => Expr::one(),
            _ => Expr::new(Node::Unary(UnaryOp::Cos, self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.as_const() {
            Some(c) if c.is_zero() => Expr::one(),
            _ => Expr::new(Node::Unary(UnaryOp::Exp, self.clone())),
        }
    }

    pub fn log(&self) -> Expr {
        match self.as_const() {
            Some(c) if c.is_one() => Expr::zero(),
            _ => Expr::new(Node::Unary(UnaryOp::Log, self.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            if let Some(v) = c.powi(n) {
                return Expr::constant(v);
            }
        }
        Expr::new(Node::Pow(self.clone(), n))
    }

    fn add_impl(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x.add(y)),
            (Some(x), _) if x.is_zero() => b.clone(),
            (_, Some(y)) if y.is_zero() => a.clone(),
            _ => Expr::new(Node::Binary(BinaryOp::Add, a.clone(), b.clone())),
        }
    }

    fn sub_impl(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x.sub(y)),
            (Some(x), _) if x.is_zero() => Expr::neg_impl(b),
            (_, Some(y)) if y.is_zero() => a.clone(),
            _ if a.id() == b.id() => Expr::zero(),
            _ => Expr::new(Node::Binary(BinaryOp::Sub, a.clone(), b.clone())),
        }
    }

    fn mul_impl(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x.mul(y)),
            (Some(x), _) if x.is_zero() => Expr::zero(),
            (_, Some(y)) if y.is_zero() => Expr::zero(),
            (Some(x), _) if x.is_one() => b.clone(),
            (_, Some(y)) if y.is_one() => a.clone(),
            _ => Expr::new(Node::Binary(BinaryOp::Mul, a.clone(), b.clone())),
        }
    }

    fn div_impl(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => match x.div(y) {
                Some(c) => Expr::constant(c),
                None => Expr::new(Node::Binary(BinaryOp::Div, a.clone(), b.clone())),
            },
            (Some(x), _) if x.is_zero() => Expr::zero(),
            (_, Some(y)) if y.is_one() => a.clone(),
            _ => Expr::new(Node::Binary(BinaryOp::Div, a.clone(), b.clone())),
        }
    }

    fn neg_impl(a: &Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::constant(c.neg()),
            Node::Unary(UnaryOp::Neg, inner) => inner.clone(),
            _ => Expr::new(Node::Unary(UnaryOp::Neg, a.clone())),
        }
    }

    /// Free variables, sorted.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Var(v) => {
                    out.insert(v.clone());
                }
                Node::Unary(_, a) | Node::Pow(a, _) => stack.push(a.clone()),
                Node::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        out
    }

    pub fn depends_on(&self, var: &str) -> bool {
        self.variables().contains(var)
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Unary(_, a) | Node::Pow(a, _) => stack.push(a.clone()),
                Node::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        seen.len()
    }

    /// Symbolic partial derivative. Variables not present differentiate to 0.
    pub fn diff(&self, var: &str) -> Expr {
        let mut memo = HashMap::new();
        diff_rec(self, var, &mut memo)
    }

    /// Simultaneous substitution of variables by expressions.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        let mut memo = HashMap::new();
        subst_rec(self, map, &mut memo)
    }

    /// Evaluate with variable values supplied by `lookup`.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
        let mut memo = HashMap::new();
        eval_rec(self, lookup, &mut memo)
    }

    /// Evaluate at a point given as parallel name/value slices.
    pub fn eval(&self, names: &[String], values: &[f64]) -> Result<f64, ExprError> {
        self.eval_with(&|v: &str| names.iter().position(|n| n == v).map(|i| values[i]))
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Const(Const::Rational(r)) if *r.denom() != 1 || *r.numer() < 0 => 1,
            Node::Const(Const::Float(f)) if *f < 0.0 => 1,
            Node::Const(_) | Node::Var(_) => 5,
            Node::Unary(UnaryOp::Neg, _) => 3,
            Node::Unary(..) => 5,
            Node::Pow(..) => 4,
            Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        }
    }
}

fn diff_rec(e: &Expr, var: &str, memo: &mut HashMap<*const Node, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.id()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(v) => {
            if v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Unary(op, a) => {
            let da = diff_rec(a, var, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                match op {
                    UnaryOp::Neg => -&da,
                    UnaryOp::Sin => &a.cos() * &da,
                    UnaryOp::Cos => -&(&a.sin() * &da),
                    UnaryOp::Exp => e * &da,
                    UnaryOp::Log => &da / a,
                }
            }
        }
        Node::Binary(op, a, b) => {
            let da = diff_rec(a, var, memo);
            let db = diff_rec(b, var, memo);
            match op {
                BinaryOp::Add => &da + &db,
                BinaryOp::Sub => &da - &db,
                BinaryOp::Mul => &(&da * b) + &(a * &db),
                BinaryOp::Div => {
                    if db.is_zero() {
                        &da / b
                    } else {
                        &(&(&da * b) - &(a * &db)) / &b.powi(2)
                    }
                }
            }
        }
        Node::Pow(a, n) => {
            let da = diff_rec(a, var, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                &(&Expr::int(*n as i64) * &a.powi(n - 1)) * &da
            }
        }
    };
    memo.insert(e.id(), d.clone());
    d
}

fn subst_rec(e: &Expr, map: &HashMap<String, Expr>, memo: &mut HashMap<*const Node, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.id()) {
        return d.clone();
    }
    let out = match e.node() {
        Node::Const(_) => e.clone(),
        Node::Var(v) => map.get(v).cloned().unwrap_or_else(|| e.clone()),
        Node::Unary(op, a) => {
            let a2 = subst_rec(a, map, memo);
            match op {
                UnaryOp::Neg => -&a2,
                UnaryOp::Sin => a2.sin(),
                UnaryOp::Cos => a2.cos(),
                UnaryOp::Exp => a2.exp(),
                UnaryOp::Log => a2.log(),
            }
        }
        Node::Binary(op, a, b) => {
            let a2 = subst_rec(a, map, memo);
            let b2 = subst_rec(b, map, memo);
            match op {
                BinaryOp::Add => &a2 + &b2,
                BinaryOp::Sub => &a2 - &b2,
                BinaryOp::Mul => &a2 * &b2,
                BinaryOp::Div => &a2 / &b2,
            }
        }
        Node::Pow(a, n) => subst_rec(a, map, memo).powi(*n),
    };
    memo.insert(e.id(), out.clone());
    out
}

pub(crate) fn apply_unary(op: UnaryOp, x: f64, e: &Expr) -> Result<f64, ExprError> {
    Ok(match op {
        UnaryOp::Neg => -x,
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::Exp => x.exp(),
        UnaryOp::Log => {
            if x <= 0.0 {
                return Err(ExprError::Domain {
                    subexpr: e.to_string(),
                    reason: "log of non-positive value",
                });
            }
            x.ln()
        }
    })
}

pub(crate) fn apply_binary(op: BinaryOp, x: f64, y: f64, e: &Expr) -> Result<f64, ExprError> {
    Ok(match op {
        BinaryOp::Add => x + y,
        BinaryOp::Sub => x - y,
        BinaryOp::Mul => x * y,
        BinaryOp::Div => {
            if y == 0.0 {
                return Err(ExprError::Domain {
                    subexpr: e.to_string(),
                    reason: "division by zero",
                });
            }
            x / y
        }
    })
}

pub(crate) fn apply_pow(x: f64, n: i32, e: &Expr) -> Result<f64, ExprError> {
    if n < 0 && x == 0.0 {
        return Err(ExprError::Domain {
            subexpr: e.to_string(),
            reason: "division by zero",
        });
    }
    Ok(x.powi(n))
}

fn eval_rec(
    e: &Expr,
    lookup: &dyn Fn(&str) -> Option<f64>,
    memo: &mut HashMap<*const Node, f64>,
) -> Result<f64, ExprError> {
    if let Some(v) = memo.get(&e.id()) {
        return Ok(*v);
    }
    let v = match e.node() {
        Node::Const(c) => c.value(),
        Node::Var(name) => lookup(name).ok_or_else(|| ExprError::UnknownVariable(name.clone()))?,
        Node::Unary(op, a) => {
            let x = eval_rec(a, lookup, memo)?;
            apply_unary(*op, x, e)?
        }
        Node::Binary(op, a, b) => {
            let x = eval_rec(a, lookup, memo)?;
            let y = eval_rec(b, lookup, memo)?;
            apply_binary(*op, x, y, e)?
        }
        Node::Pow(a, n) => apply_pow(eval_rec(a, lookup, memo)?, *n, e)?,
    };
    memo.insert(e.id(), v);
    Ok(v)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paren = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                paren(f, a, 4)
            }
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Pow(a, n) => {
                paren(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinaryOp::Add => (" + ", 1),
                    BinaryOp::Sub => (" - ", 1),
                    BinaryOp::Mul => ("*", 2),
                    BinaryOp::Div => ("/", 2),
                };
                paren(f, a, prec)?;
                write!(f, "{sym}")?;
                // right operand of a non-commutative op binds tighter
                let rmin = match op {
                    BinaryOp::Sub | BinaryOp::Div => prec + 1,
                    _ => prec,
                };
                paren(f, b, rmin)
            }
        }
    }
}

macro_rules! impl_binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$imp(self, rhs)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$imp(&self, &rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$imp(&self, rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$imp(self, &rhs)
            }
        }
    };
}

impl_binop!(Add, add, add_impl);
impl_binop!(Sub, sub, sub_impl);
impl_binop!(Mul, mul, mul_impl);
impl_binop!(Div, div, div_impl);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_impl(self)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_impl(&self)
    }
}

/// Sum of an iterator of expressions.
pub fn sum<I: IntoIterator<Item = Expr>>(it: I) -> Expr {
    it.into_iter().fold(Expr::zero(), |acc, e| acc + e)
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<f64> for Expr {
    fn from(x: f64) -> Expr {
        Expr::float(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn power_rule() {
        let d = p("x^2").diff("x");
        let dom = Domain::boxed(&["x"], -2.0, 2.0);
        assert!(approx_equal(&d, &p("2*x"), &dom, 50, SYMBOLIC_TOL).unwrap().equal);
    }

    #[test]
    fn product_rule() {
        let d = p("sin(x)*y").diff("x");
        let dom = Domain::boxed(&["x", "y"], -2.0, 2.0);
        assert!(approx_equal(&d, &p("cos(x)*y"), &dom, 50, SYMBOLIC_TOL).unwrap().equal);
    }

    #[test]
    fn constant_rule() {
        assert!(p("3/4").diff("x").is_zero());
        assert!(p("y^3").diff("x").is_zero());
    }

    #[test]
    fn eval_basic() {
        let n = names(&["x", "y"]);
        assert_eq!(p("x+y").eval(&n, &[1.0, 2.0]).unwrap(), 3.0);
        assert_eq!(p("sin(x)").eval(&n, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_domain_errors() {
        let n = names(&["x"]);
        match p("1/x").eval(&n, &[0.0]) {
            Err(ExprError::Domain { subexpr, .. }) => assert_eq!(subexpr, "1/x"),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(matches!(p("log(x)").eval(&n, &[-1.0]), Err(ExprError::Domain { .. })));
        assert!(matches!(p("z").eval(&n, &[1.0]), Err(ExprError::UnknownVariable(_))));
    }

    #[test]
    fn folding_and_absorption() {
        assert_eq!(p("2*3 + 1/2").to_string(), "13/2");
        assert_eq!((p("x") * Expr::one()).to_string(), "x");
        assert!((p("x") * Expr::zero()).is_zero());
        assert_eq!((Expr::zero() - p("x")).to_string(), "-x");
    }

    #[test]
    fn display_round_trips() {
        for s in ["x - (y - z)", "x/(y*z)", "-x^2", "(-x)^3", "x^(-2)", "sin(x)^2 + cos(x)^2", "2.5*x"] {
            let e = p(s);
            let again = p(&e.to_string());
            let dom = Domain::boxed(&["x", "y", "z"], 0.5, 2.0);
            assert!(
                approx_equal(&e, &again, &dom, 20, SYMBOLIC_TOL).unwrap().equal,
                "{s} -> {e}"
            );
        }
    }

    #[test]
    fn substitution_is_simultaneous() {
        let mut m = HashMap::new();
        m.insert("x".to_string(), p("y"));
        m.insert("y".to_string(), p("x"));
        let e = p("x - 2*y").substitute(&m);
        let n = names(&["x", "y"]);
        assert_eq!(e.eval(&n, &[1.0, 5.0]).unwrap(), 5.0 - 2.0);
    }

    #[test]
    fn shared_subtrees_stay_small() {
        let mut e = p("sin(x)*y + x^3");
        for _ in 0..12 {
            e = &e * &e;
        }
        let d = e.diff("x");
        assert!(d.dag_size() < 500, "size {}", d.dag_size());
    }
}

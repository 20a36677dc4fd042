//! A small expression language for coefficient functions `a(x)`, `g(x)`
//! and nonlinearities `f(u)`.
//!
//! Precedence, tightest first:
//!
//! | level | operators | associativity |
//! |-------|-----------|---------------|
//! | 4 | `^` | right |
//! | 3 | unary `-` | prefix |
//! | 2 | `*` `/` | left |
//! | 1 | `+` `-` | left |
//!
//! So `-u^2` is `-(u^2)` and `2^-1` is `0.5`. Variables are `u` and
//! `x1 … x_{N-1}`; functions are `exp log sin cos abs sqrt` (one argument)
//! and `min max` (two arguments).

mod parse;
mod quad;

use std::fmt;

use thiserror::Error;

pub use parse::{parse, parse_with, VarScope};
pub use quad::{adaptive_simpson, antiderivative, Nonlinearity, Primitive, PrimitiveTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    U,
    /// One-based coordinate index.
    X(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::U => write!(f, "u"),
            Var::X(k) => write!(f, "x{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    pub(crate) fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values for the free variables of an expression.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bindings<'a> {
    pub u: Option<f64>,
    pub x: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub fn u(u: f64) -> Self {
        Bindings { u: Some(u), x: &[] }
    }

    pub fn x(x: &'a [f64]) -> Self {
        Bindings { u: None, x }
    }
}

fn domain(msg: impl Into<String>) -> ExprError {
    ExprError::Domain(msg.into())
}

fn finite(v: f64, what: &str) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!("{what} is not finite")))
    }
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 5,
        }
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64, ExprError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Var::U) => b.u.ok_or_else(|| ExprError::Unbound("u".into())),
            Expr::Var(Var::X(k)) => b
                .x
                .get(k - 1)
                .copied()
                .ok_or_else(|| ExprError::Unbound(format!("x{k}"))),
            Expr::Neg(e) => Ok(-e.eval(b)?),
            Expr::Bin(op, l, r) => {
                let (l, r) = (l.eval(b)?, r.eval(b)?);
                match op {
                    BinOp::Add => finite(l + r, "sum"),
                    BinOp::Sub => finite(l - r, "difference"),
                    BinOp::Mul => finite(l * r, "product"),
                    BinOp::Div => {
                        if r == 0.0 {
                            Err(domain(format!("division of {l} by zero")))
                        } else {
                            finite(l / r, "quotient")
                        }
                    }
                    BinOp::Pow => {
                        if l < 0.0 && r.fract() != 0.0 {
                            Err(domain(format!("{l}^{r} has no real value")))
                        } else if l == 0.0 && r < 0.0 {
                            Err(domain(format!("0^{r} is undefined")))
                        } else {
                            finite(l.powf(r), "power")
                        }
                    }
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(b)?;
                match func {
                    Func::Exp => finite(a.exp(), "exp"),
                    Func::Log => {
                        if a <= 0.0 {
                            Err(domain(format!("log({a})")))
                        } else {
                            Ok(a.ln())
                        }
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            Err(domain(format!("sqrt({a})")))
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Abs => Ok(a.abs()),
                    Func::Min => Ok(a.min(args[1].eval(b)?)),
                    Func::Max => Ok(a.max(args[1].eval(b)?)),
                }
            }
        }
    }

    /// Evaluates an expression in `u` alone.
    pub fn eval_u(&self, u: f64) -> Result<f64, ExprError> {
        self.eval(&Bindings::u(u))
    }

    /// Evaluates an expression in the coordinates `x1…`.
    pub fn eval_x(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.eval(&Bindings::x(x))
    }

    fn visit_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(e) => e.visit_vars(out),
            Expr::Bin(_, l, r) => {
                l.visit_vars(out);
                r.visit_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_vars(out)),
        }
    }

    /// Free variables, sorted and deduplicated.
    pub fn vars(&self) -> Vec<Var> {
        let mut v = Vec::new();
        self.visit_vars(&mut v);
        v.sort();
        v.dedup();
        v
    }

    pub fn is_constant(&self) -> bool {
        self.vars().is_empty()
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

/// Prints with the minimal parentheses that reparse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                self.fmt_child(f, e, e.precedence() < 3)
            }
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                let (lp, rp) = if *op == BinOp::Pow {
                    (l.precedence() <= p, r.precedence() < 3)
                } else {
                    (l.precedence() < p, r.precedence() <= p)
                };
                self.fmt_child(f, l, lp)?;
                write!(f, "{}", op.symbol())?;
                self.fmt_child(f, r, rp)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

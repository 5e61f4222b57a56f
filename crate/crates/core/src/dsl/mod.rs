//! A small expression language for scalar coefficient functions.
//!
//! Grammar, loosest to tightest binding:
//!
//! | level | operators            | assoc |
//! |-------|----------------------|-------|
//! | 1     | `+` `-`              | left  |
//! | 2     | `*` `/`              | left  |
//! | 3     | unary `-`            | prefix|
//! | 4     | `^`                  | right |
//!
//! Atoms are number literals, declared variables, parenthesized expressions and
//! calls of the fixed function table (`sin cos exp abs sign sqrt tanh` take one
//! argument, `min max heav_eps` two, `clamp` three). The right operand of `^`
//! must be a constant integer or half-integer.

mod eval;
mod parser;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use eval::{eval_slots, evaluate, EvalError, EvalErrorKind};

/// Slot evaluation with faults mapped to NaN, for hot loops whose callers
/// check finiteness.
#[inline]
pub fn eval_slots_infallible(expr: &Expr, slots: &[f64]) -> f64 {
    eval_slots(expr, slots).unwrap_or(f64::NAN)
}
pub use parser::parse;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Min,
    Max,
    Clamp,
    HeavEps,
    Sign,
    Sqrt,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Abs,
        Func::Min,
        Func::Max,
        Func::Clamp,
        Func::HeavEps,
        Func::Sign,
        Func::Sqrt,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Clamp => "clamp",
            Func::HeavEps => "heav_eps",
            Func::Sign => "sign",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Clamp => 3,
            Func::HeavEps | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn lookup(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Num(f64),
    /// `index` points into the declared-variable list the expression was parsed against.
    Var { name: String, index: usize },
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { func: Func, args: Vec<Expr> },
}

/// Expression node with the byte offset of its first token in the source text.
#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub offset: usize,
}

/// Structural equality: offsets are ignored, literals compare bitwise.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Num(a), ExprKind::Num(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::Var { name: a, .. }, ExprKind::Var { name: b, .. }) => a == b,
            (ExprKind::Neg(a), ExprKind::Neg(b)) => a == b,
            (
                ExprKind::Binary { op: o1, lhs: l1, rhs: r1 },
                ExprKind::Binary { op: o2, lhs: l2, rhs: r2 },
            ) => o1 == o2 && l1 == l2 && r1 == r2,
            (ExprKind::Call { func: f1, args: a1 }, ExprKind::Call { func: f2, args: a2 }) => {
                f1 == f2 && a1 == a2
            }
            _ => false,
        }
    }
}

impl Expr {
    pub fn num(value: f64) -> Expr {
        Expr { kind: ExprKind::Num(value), offset: 0 }
    }

    /// Names of every variable referenced by the expression.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            ExprKind::Num(_) => {}
            ExprKind::Var { name, .. } => {
                out.insert(name.clone());
            }
            ExprKind::Neg(e) => e.collect_vars(out),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Rewrites variable indices through `map` (old index -> new index).
    pub fn remap_vars(&mut self, map: &dyn Fn(&str) -> Option<usize>) -> Result<(), String> {
        match &mut self.kind {
            ExprKind::Num(_) => Ok(()),
            ExprKind::Var { name, index } => match map(name) {
                Some(i) => {
                    *index = i;
                    Ok(())
                }
                None => Err(name.clone()),
            },
            ExprKind::Neg(e) => e.remap_vars(map),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.remap_vars(map)?;
                rhs.remap_vars(map)
            }
            ExprKind::Call { args, .. } => args.iter_mut().try_for_each(|a| a.remap_vars(map)),
        }
    }
}

/// Fully parenthesized rendering; reparsing it gives a structurally equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v:?}"),
            ExprKind::Var { name, .. } => f.write_str(name),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            ExprKind::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    UnknownIdentifier(String),
    UnknownFunction(String),
    Arity { func: &'static str, expected: usize, found: usize },
    BadExponent,
    BadNumber(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub offset: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = self.offset;
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "syntax error at offset {at}: empty expression"),
            ParseErrorKind::UnexpectedChar(c) => {
                write!(f, "syntax error at offset {at}: unexpected character '{c}'")
            }
            ParseErrorKind::UnexpectedEnd => {
                write!(f, "syntax error at offset {at}: unexpected end of input")
            }
            ParseErrorKind::UnexpectedToken(t) => {
                write!(f, "syntax error at offset {at}: unexpected '{t}'")
            }
            ParseErrorKind::UnknownIdentifier(n) => {
                write!(f, "unknown identifier '{n}' at offset {at}")
            }
            ParseErrorKind::UnknownFunction(n) => write!(f, "unknown function '{n}' at offset {at}"),
            ParseErrorKind::Arity { func, expected, found } => write!(
                f,
                "arity mismatch at offset {at}: {func} takes {expected} argument(s), got {found}"
            ),
            ParseErrorKind::BadExponent => write!(
                f,
                "exponent at offset {at} must be a constant integer or half-integer"
            ),
            ParseErrorKind::BadNumber(s) => write!(f, "invalid number '{s}' at offset {at}"),
        }
    }
}

impl core::error::Error for ParseError {}

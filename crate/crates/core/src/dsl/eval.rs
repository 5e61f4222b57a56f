use super::{BinOp, Expr, ExprKind, Func};
use crate::feedback::heaviside_ramp;
use crate::math;
use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum EvalErrorKind {
    DivisionByZero,
    /// Function argument outside its real domain (negative sqrt, negative ε, ...).
    Domain(&'static str),
    MissingBinding(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    /// Byte offset of the failing node in the source text.
    pub offset: usize,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            EvalErrorKind::DivisionByZero => write!(f, "division by zero at offset {}", self.offset),
            EvalErrorKind::Domain(what) => {
                write!(f, "domain error in {what} at offset {}", self.offset)
            }
            EvalErrorKind::MissingBinding(n) => {
                write!(f, "no binding for '{n}' at offset {}", self.offset)
            }
        }
    }
}

impl core::error::Error for EvalError {}

/// Evaluates with named bindings.
pub fn evaluate(expr: &Expr, bindings: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    eval_with(expr, &|name: &str, _| bindings.get(name).copied())
}

/// Evaluates with values addressed by the variable index assigned at parse time.
pub fn eval_slots(expr: &Expr, slots: &[f64]) -> Result<f64, EvalError> {
    eval_with(expr, &|_, index| slots.get(index).copied())
}

fn eval_with(
    expr: &Expr,
    lookup: &dyn Fn(&str, usize) -> Option<f64>,
) -> Result<f64, EvalError> {
    let err = |kind| EvalError { kind, offset: expr.offset };
    match &expr.kind {
        ExprKind::Num(v) => Ok(*v),
        ExprKind::Var { name, index } => {
            lookup(name, *index).ok_or_else(|| err(EvalErrorKind::MissingBinding(name.clone())))
        }
        ExprKind::Neg(e) => Ok(-eval_with(e, lookup)?),
        ExprKind::Binary { op, lhs, rhs } => {
            let a = eval_with(lhs, lookup)?;
            let b = eval_with(rhs, lookup)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(err(EvalErrorKind::DivisionByZero))
                    } else {
                        Ok(a / b)
                    }
                }
                BinOp::Pow => pow(a, b).map_err(err),
            }
        }
        ExprKind::Call { func, args } => {
            let arg = |i: usize| eval_with(&args[i], lookup);
            match func {
                Func::Sin => Ok(math::sin(arg(0)?)),
                Func::Cos => Ok(math::cos(arg(0)?)),
                Func::Exp => Ok(math::exp(arg(0)?)),
                Func::Abs => Ok(math::abs(arg(0)?)),
                Func::Tanh => Ok(math::tanh(arg(0)?)),
                Func::Sign => {
                    let v = arg(0)?;
                    Ok(if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    })
                }
                Func::Sqrt => {
                    let v = arg(0)?;
                    if v < 0.0 {
                        Err(err(EvalErrorKind::Domain("sqrt")))
                    } else {
                        Ok(math::sqrt(v))
                    }
                }
                Func::Min => Ok(arg(0)?.min(arg(1)?)),
                Func::Max => Ok(arg(0)?.max(arg(1)?)),
                Func::Clamp => {
                    let (v, lo, hi) = (arg(0)?, arg(1)?, arg(2)?);
                    if lo > hi {
                        Err(err(EvalErrorKind::Domain("clamp")))
                    } else {
                        Ok(v.max(lo).min(hi))
                    }
                }
                Func::HeavEps => {
                    let (eta, eps) = (arg(0)?, arg(1)?);
                    if eps < 0.0 {
                        Err(err(EvalErrorKind::Domain("heav_eps")))
                    } else {
                        Ok(heaviside_ramp(eta, eps))
                    }
                }
            }
        }
    }
}

/// Integer or half-integer exponent (enforced by the parser).
fn pow(base: f64, exponent: f64) -> Result<f64, EvalErrorKind> {
    let whole = math::floor(exponent);
    let half = exponent - whole != 0.0;
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalErrorKind::DivisionByZero);
    }
    if half && base < 0.0 {
        return Err(EvalErrorKind::Domain("fractional power"));
    }
    let mut v = math::powi(base, whole as i32);
    if half {
        v *= math::sqrt(base);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use alloc::string::ToString;

    fn eval_str(src: &str, binds: &[(&str, f64)]) -> Result<f64, EvalError> {
        let names: alloc::vec::Vec<&str> = binds.iter().map(|b| b.0).collect();
        let e = parse(src, &names).unwrap();
        let map = binds.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        evaluate(&e, &map)
    }

    #[test]
    fn examples() {
        assert_eq!(eval_str("1 + 0.5*sin(x1)", &[("x1", 0.0)]).unwrap(), 1.0);
        assert_eq!(eval_str("clamp(-p1/2,0,1)", &[("p1", -4.0)]).unwrap(), 1.0);
        assert_eq!(eval_str("heav_eps(0, 0.5)", &[]).unwrap(), 0.5);
    }

    #[test]
    fn powers() {
        assert_eq!(eval_str("x^2", &[("x", -3.0)]).unwrap(), 9.0);
        assert_eq!(eval_str("x^-1", &[("x", 4.0)]).unwrap(), 0.25);
        assert_eq!(eval_str("x^1.5", &[("x", 4.0)]).unwrap(), 8.0);
        assert_eq!(eval_str("x^(1/2)", &[("x", 9.0)]).unwrap(), 3.0);
        assert_eq!(eval_str("2^3^2", &[]).unwrap(), 512.0);
    }

    #[test]
    fn faults_carry_node_offsets() {
        let e = eval_str("1 + x/0", &[("x", 1.0)]).unwrap_err();
        assert_eq!(e.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(e.offset, 4);
        let e = eval_str("2*sqrt(x)", &[("x", -1.0)]).unwrap_err();
        assert_eq!(e.kind, EvalErrorKind::Domain("sqrt"));
        assert_eq!(e.offset, 2);
        let e = eval_str("x^0.5", &[("x", -1.0)]).unwrap_err();
        assert_eq!(e.kind, EvalErrorKind::Domain("fractional power"));
    }

    #[test]
    fn missing_binding() {
        let e = parse("a + b", &["a", "b"]).unwrap();
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), 1.0);
        let err = evaluate(&e, &map).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::MissingBinding("b".into()));
        assert_eq!(err.offset, 4);
    }
}

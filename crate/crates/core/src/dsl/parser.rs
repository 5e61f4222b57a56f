//! Tokenizer and Pratt parser.

use super::{BinOp, Expr, ExprKind, Func, ParseError, ParseErrorKind};
use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => alloc::format!("{v}"),
        Tok::Ident(s) => s.clone(),
        Tok::Op(c) => c.to_string(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part: e, E with optional sign, only when followed by digits
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let s = &text[start..i];
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Num(v),
                    _ => {
                        return Err(ParseError {
                            kind: ParseErrorKind::BadNumber(s.into()),
                            offset: start,
                        })
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].into())
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError { kind: ParseErrorKind::UnexpectedChar(ch), offset: start });
            }
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token { tok: Tok::End, offset: text.len() });
    Ok(out)
}

// binding powers
const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(tok: &Token) -> ParseError {
        let kind = match tok.tok {
            Tok::End => ParseErrorKind::UnexpectedEnd,
            ref t => ParseErrorKind::UnexpectedToken(describe(t)),
        };
        ParseError { kind, offset: tok.offset }
    }

    fn expect(&mut self, want: Tok) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(Self::unexpected(&t))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek().tok {
                Tok::Op('+') => (BinOp::Add, BP_ADD, BP_ADD + 1),
                Tok::Op('-') => (BinOp::Sub, BP_ADD, BP_ADD + 1),
                Tok::Op('*') => (BinOp::Mul, BP_MUL, BP_MUL + 1),
                Tok::Op('/') => (BinOp::Div, BP_MUL, BP_MUL + 1),
                // right associative; the exponent may carry a unary minus
                Tok::Op('^') => (BinOp::Pow, BP_POW, BP_NEG),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            let op_tok = self.next();
            let rhs = self.expr(rbp)?;
            if op == BinOp::Pow && !is_admissible_exponent(&rhs) {
                return Err(ParseError { kind: ParseErrorKind::BadExponent, offset: rhs.offset });
            }
            let offset = lhs.offset.min(op_tok.offset);
            lhs = Expr {
                kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                offset,
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr { kind: ExprKind::Num(v), offset: t.offset }),
            Tok::Op('-') => {
                let inner = self.expr(BP_NEG)?;
                Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), offset: t.offset })
            }
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    self.call(name, t.offset)
                } else {
                    match self.vars.iter().position(|v| *v == name) {
                        Some(index) => {
                            Ok(Expr { kind: ExprKind::Var { name, index }, offset: t.offset })
                        }
                        None => Err(ParseError {
                            kind: ParseErrorKind::UnknownIdentifier(name),
                            offset: t.offset,
                        }),
                    }
                }
            }
            _ => Err(Self::unexpected(&t)),
        }
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        let func = Func::lookup(&name)
            .ok_or(ParseError { kind: ParseErrorKind::UnknownFunction(name), offset })?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                args.push(self.expr(0)?);
                if self.peek().tok == Tok::Comma {
                    self.next();
                    continue;
                }
                break;
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != func.arity() {
            return Err(ParseError {
                kind: ParseErrorKind::Arity {
                    func: func.name(),
                    expected: func.arity(),
                    found: args.len(),
                },
                offset,
            });
        }
        Ok(Expr { kind: ExprKind::Call { func, args }, offset })
    }
}

fn is_admissible_exponent(e: &Expr) -> bool {
    if !e.free_vars().is_empty() {
        return false;
    }
    let Ok(v) = super::eval::eval_slots(e, &[]) else {
        return false;
    };
    let twice = 2.0 * v;
    twice == crate::math::round(twice) && crate::math::abs(twice) <= 2.0 * i32::MAX as f64
}

/// Parses `text` against the declared variable names.
pub fn parse(text: &str, declared_vars: &[&str]) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError { kind: ParseErrorKind::Empty, offset: 0 });
    }
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, vars: declared_vars };
    let e = p.expr(0)?;
    let t = p.next();
    if t.tok != Tok::End {
        return Err(Parser::unexpected(&t));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARS: &[&str] = &["t", "x1", "p1"];

    fn var(name: &str, index: usize) -> Expr {
        Expr { kind: ExprKind::Var { name: name.into(), index }, offset: 0 }
    }

    fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr { kind: ExprKind::Binary { op, lhs: Box::new(l), rhs: Box::new(r) }, offset: 0 }
    }

    fn call(func: Func, args: Vec<Expr>) -> Expr {
        Expr { kind: ExprKind::Call { func, args }, offset: 0 }
    }

    fn neg(e: Expr) -> Expr {
        Expr { kind: ExprKind::Neg(Box::new(e)), offset: 0 }
    }

    #[test]
    fn parses_sum_of_scaled_sine() {
        let e = parse("1 + 0.5*sin(x1)", VARS).unwrap();
        let want = bin(
            BinOp::Add,
            Expr::num(1.0),
            bin(BinOp::Mul, Expr::num(0.5), call(Func::Sin, alloc::vec![var("x1", 1)])),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn parses_case1_feedback_as_clamp() {
        let e = parse("clamp(-p1/2, 0, 1)", VARS).unwrap();
        let want = call(
            Func::Clamp,
            alloc::vec![
                bin(BinOp::Div, neg(var("p1", 2)), Expr::num(2.0)),
                Expr::num(0.0),
                Expr::num(1.0)
            ],
        );
        assert_eq!(e, want);
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ binds tighter than unary minus, and is right associative
        assert_eq!(
            parse("-x1^2", VARS).unwrap(),
            neg(bin(BinOp::Pow, var("x1", 1), Expr::num(2.0)))
        );
        assert_eq!(
            parse("x1^2^3", VARS).unwrap(),
            bin(BinOp::Pow, var("x1", 1), bin(BinOp::Pow, Expr::num(2.0), Expr::num(3.0)))
        );
        assert_eq!(
            parse("t - x1 - 1", VARS).unwrap(),
            bin(BinOp::Sub, bin(BinOp::Sub, var("t", 0), var("x1", 1)), Expr::num(1.0))
        );
        assert_eq!(
            parse("t + x1 * 2", VARS).unwrap(),
            bin(BinOp::Add, var("t", 0), bin(BinOp::Mul, var("x1", 1), Expr::num(2.0)))
        );
    }

    #[test]
    fn dangling_operator_reports_end_offset() {
        let err = parse("x1 + ", VARS).unwrap_err();
        assert_eq!(err.offset, 5);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);
    }

    #[test]
    fn rejects_undeclared_and_bad_arity() {
        let err = parse("x1 + u2", VARS).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("u2".into()));
        assert_eq!(err.offset, 5);
        let err = parse("min(x1)", VARS).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Arity { expected: 2, found: 1, .. }));
        let err = parse("x1^t", VARS).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::BadExponent);
        assert_eq!(err.offset, 3);
        assert!(parse("x1^1.5", VARS).is_ok());
        assert!(parse("x1^0.3", VARS).is_err());
    }
}

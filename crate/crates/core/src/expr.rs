//! Expression language shared by charts and implementation programs.
//!
//! Charts reference variables by name (`Expr<String>`); implementation
//! programs reference record fields, constants and parameters
//! (`Expr<ir::Ref>`). Evaluation follows C conventions: comparisons and
//! connectives produce `0`/`1`, any nonzero value is true, integer
//! arithmetic saturates and mixed arithmetic promotes to binary64.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lexer::{Cursor, Diagnostic, Tok};

/// Numeric sort of a variable or record field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    /// Signed 64-bit integer.
    Int,
    /// IEEE binary64.
    Float,
    /// Unsigned byte, used for the activity and substate fields of generated code.
    Byte,
}

impl Sort {
    pub fn keyword(self) -> &'static str {
        match self {
            Sort::Int => "int",
            Sort::Float => "float",
            Sort::Byte => "byte",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Sort> {
        match s {
            "int" => Some(Sort::Int),
            "float" => Some(Sort::Float),
            "byte" => Some(Sort::Byte),
            _ => None,
        }
    }

    pub fn zero(self) -> Value {
        match self {
            Sort::Float => Value::Float(0.0),
            _ => Value::Int(0),
        }
    }

    /// Converts a value into this sort, the way an assignment does.
    pub fn coerce(self, v: Value) -> Value {
        match (self, v) {
            (Sort::Float, Value::Int(i)) => Value::Float(i as f64),
            (Sort::Float, f @ Value::Float(_)) => f,
            (Sort::Int, i @ Value::Int(_)) => i,
            (Sort::Int, Value::Float(f)) => Value::Int(f as i64),
            (Sort::Byte, v) => Value::Int(v.as_i64().clamp(0, 255)),
        }
    }
}

/// A runtime value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn truthy(self) -> bool {
        match self {
            Value::Int(i) => i != 0,
            Value::Float(f) => f != 0.0,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Value::Int(i) => i,
            Value::Float(f) => f as i64,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Float(f) => f,
        }
    }

    fn from_bool(b: bool) -> Value {
        Value::Int(b as i64)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => fmt_float(*x, f),
        }
    }
}

fn fmt_float(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        write!(f, "{x:.1}")
    } else {
        write!(f, "{x:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    /// Comparison with its operands exchanged: `a < b` iff `b > a`.
    pub fn mirrored(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }

    /// Logical complement of a comparison.
    pub fn negated(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr<V> {
    Int(i64),
    Float(f64),
    Var(V),
    Unary(UnOp, Box<Expr<V>>),
    Binary(BinOp, Box<Expr<V>>, Box<Expr<V>>),
}

impl<V> Expr<V> {
    pub fn bin(op: BinOp, l: Expr<V>, r: Expr<V>) -> Expr<V> {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr<V>) -> Expr<V> {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn neg(e: Expr<V>) -> Expr<V> {
        Expr::Unary(UnOp::Neg, Box::new(e))
    }

    /// True when the expression always yields `0` or `1`.
    pub fn is_boolean(&self) -> bool {
        match self {
            Expr::Unary(UnOp::Not, _) => true,
            Expr::Binary(op, _, _) => op.is_comparison() || matches!(op, BinOp::And | BinOp::Or),
            _ => false,
        }
    }

    pub fn map_vars<W, E>(&self, f: &mut impl FnMut(&V) -> Result<Expr<W>, E>) -> Result<Expr<W>, E> {
        Ok(match self {
            Expr::Int(i) => Expr::Int(*i),
            Expr::Float(x) => Expr::Float(*x),
            Expr::Var(v) => f(v)?,
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.map_vars(f)?)),
            Expr::Binary(op, l, r) => {
                Expr::Binary(*op, Box::new(l.map_vars(f)?), Box::new(r.map_vars(f)?))
            }
        })
    }

    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a V)) {
        match self {
            Expr::Var(v) => f(v),
            Expr::Unary(_, e) => e.visit_vars(f),
            Expr::Binary(_, l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
            Expr::Int(_) | Expr::Float(_) => {}
        }
    }

    pub fn eval<E>(&self, lookup: &mut impl FnMut(&V) -> Result<Value, E>) -> Result<Value, E> {
        Ok(match self {
            Expr::Int(i) => Value::Int(*i),
            Expr::Float(x) => Value::Float(*x),
            Expr::Var(v) => lookup(v)?,
            Expr::Unary(op, e) => unary(*op, e.eval(lookup)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval(lookup)?;
                let b = r.eval(lookup)?;
                binary(*op, a, b)
            }
        })
    }
}

pub fn unary(op: UnOp, v: Value) -> Value {
    match (op, v) {
        (UnOp::Neg, Value::Int(i)) => Value::Int(i.saturating_neg()),
        (UnOp::Neg, Value::Float(f)) => Value::Float(-f),
        (UnOp::Not, v) => Value::from_bool(!v.truthy()),
    }
}

pub fn binary(op: BinOp, a: Value, b: Value) -> Value {
    use BinOp::*;
    match op {
        And => return Value::from_bool(a.truthy() && b.truthy()),
        Or => return Value::from_bool(a.truthy() || b.truthy()),
        _ => {}
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => match op {
            Add => Value::Int(x.saturating_add(y)),
            Sub => Value::Int(x.saturating_sub(y)),
            Mul => Value::Int(x.saturating_mul(y)),
            Eq => Value::from_bool(x == y),
            Ne => Value::from_bool(x != y),
            Lt => Value::from_bool(x < y),
            Le => Value::from_bool(x <= y),
            Gt => Value::from_bool(x > y),
            Ge => Value::from_bool(x >= y),
            And | Or => unreachable!(),
        },
        _ => {
            let (x, y) = (a.as_f64(), b.as_f64());
            match op {
                Add => Value::Float(x + y),
                Sub => Value::Float(x - y),
                Mul => Value::Float(x * y),
                Eq => Value::from_bool(x == y),
                Ne => Value::from_bool(x != y),
                Lt => Value::from_bool(x < y),
                Le => Value::from_bool(x <= y),
                Gt => Value::from_bool(x > y),
                Ge => Value::from_bool(x >= y),
                And | Or => unreachable!(),
            }
        }
    }
}

impl<V: fmt::Display> Expr<V> {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        match self {
            Expr::Int(i) => {
                if *i < 0 && ctx > 0 {
                    write!(f, "({i})")
                } else {
                    write!(f, "{i}")
                }
            }
            Expr::Float(x) => {
                if *x < 0.0 && ctx > 0 {
                    f.write_str("(")?;
                    fmt_float(*x, f)?;
                    f.write_str(")")
                } else {
                    fmt_float(*x, f)
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                })?;
                match (op, &**e) {
                    (UnOp::Neg, Expr::Int(i)) if *i >= 0 => write!(f, "({i})"),
                    (UnOp::Neg, Expr::Float(x)) if *x >= 0.0 => {
                        f.write_str("(")?;
                        fmt_float(*x, f)?;
                        f.write_str(")")
                    }
                    _ => e.fmt_prec(f, 7),
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if p < ctx {
                    f.write_str("(")?;
                }
                // comparisons never chain without parentheses
                let (lc, rc) = if op.is_comparison() { (5, 5) } else { (p, p + 1) };
                l.fmt_prec(f, lc)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, rc)?;
                if p < ctx {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl<V: fmt::Display> fmt::Display for Expr<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

fn binop_of(tok: &Tok) -> Option<BinOp> {
    let Tok::Punct(p) = tok else { return None };
    Some(match *p {
        "||" => BinOp::Or,
        "&&" => BinOp::And,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        _ => return None,
    })
}

/// Precedence-climbing parser shared by the frontends. Literals, unary
/// operators and parentheses are handled here; `atom` is called whenever an
/// identifier starts a primary expression.
pub fn parse_expr<V>(
    cur: &mut Cursor,
    atom: &mut dyn FnMut(&mut Cursor) -> Result<Expr<V>, Diagnostic>,
) -> Result<Expr<V>, Diagnostic> {
    parse_binary(cur, atom, 1)
}

fn parse_binary<V>(
    cur: &mut Cursor,
    atom: &mut dyn FnMut(&mut Cursor) -> Result<Expr<V>, Diagnostic>,
    min_prec: u8,
) -> Result<Expr<V>, Diagnostic> {
    let mut lhs = parse_unary(cur, atom)?;
    while let Some(op) = binop_of(cur.peek()) {
        let p = op.precedence();
        if p < min_prec {
            break;
        }
        cur.bump();
        let rhs = parse_binary(cur, atom, p + 1)?;
        lhs = Expr::bin(op, lhs, rhs);
    }
    Ok(lhs)
}

fn parse_unary<V>(
    cur: &mut Cursor,
    atom: &mut dyn FnMut(&mut Cursor) -> Result<Expr<V>, Diagnostic>,
) -> Result<Expr<V>, Diagnostic> {
    if cur.eat_punct("-") {
        // a minus directly before a literal is part of the literal
        return Ok(match *cur.peek() {
            Tok::Int(i) => {
                cur.bump();
                Expr::Int(i.saturating_neg())
            }
            Tok::Float(x) => {
                cur.bump();
                Expr::Float(-x)
            }
            _ => Expr::neg(parse_unary(cur, atom)?),
        });
    }
    if cur.eat_punct("!") {
        return Ok(Expr::not(parse_unary(cur, atom)?));
    }
    match *cur.peek() {
        Tok::Int(i) => {
            cur.bump();
            Ok(Expr::Int(i))
        }
        Tok::Float(x) => {
            cur.bump();
            Ok(Expr::Float(x))
        }
        Tok::Punct("(") => {
            cur.bump();
            let e = parse_binary(cur, atom, 1)?;
            cur.expect_punct(")")?;
            Ok(e)
        }
        Tok::Ident(_) => atom(cur),
        _ => Err(cur.unexpected("expression")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;

    fn e(s: &str) -> Expr<String> {
        Expr::Var(s.to_string())
    }

    #[test]
    fn c_style_booleans() {
        let x = Expr::bin(BinOp::Ge, e("u"), Expr::Int(0));
        let mut env = |_: &String| Ok::<_, ()>(Value::Int(-2));
        assert_eq!(x.eval(&mut env), Ok(Value::Int(0)));
        let y = Expr::bin(BinOp::Ne, x, Expr::Int(0));
        assert_eq!(y.eval(&mut env), Ok(Value::Int(0)));
    }

    #[test]
    fn integer_arithmetic_saturates() {
        assert_eq!(binary(BinOp::Add, Value::Int(i64::MAX), Value::Int(1)), Value::Int(i64::MAX));
        assert_eq!(unary(UnOp::Neg, Value::Int(i64::MIN)), Value::Int(i64::MAX));
        assert_eq!(binary(BinOp::Mul, Value::Int(2), Value::Float(1.5)), Value::Float(3.0));
    }

    #[test]
    fn printing_respects_precedence() {
        let x = Expr::bin(BinOp::Mul, Expr::bin(BinOp::Add, e("a"), e("b")), Expr::neg(e("c")));
        assert_eq!(x.to_string(), "(a + b) * -c");
        let y = Expr::bin(BinOp::Sub, e("a"), Expr::bin(BinOp::Sub, e("b"), e("c")));
        assert_eq!(y.to_string(), "a - (b - c)");
        assert_eq!(Expr::<String>::Float(2.0).to_string(), "2.0");
    }

    fn parse(s: &str) -> Expr<String> {
        let mut cur = Cursor::new(tokenize(s).unwrap());
        parse_expr(&mut cur, &mut |c: &mut Cursor| Ok(Expr::Var(c.expect_ident()?.0))).unwrap()
    }

    #[test]
    fn parse_then_print_is_stable() {
        for src in ["a + b * c", "(a + b) * c", "a - (b - c)", "!(u >= 0) && x != -1", "-u", "-(a + b)", "-(3)", "-(-3)", "a * -2.5"] {
            let x = parse(src);
            assert_eq!(parse(&x.to_string()), x, "{src}");
        }
        assert_eq!(parse("a - b - c").to_string(), "a - b - c");
        assert_eq!(parse("-3"), Expr::Int(-3));
    }

    #[test]
    fn byte_coercion_clamps() {
        assert_eq!(Sort::Byte.coerce(Value::Int(300)), Value::Int(255));
        assert_eq!(Sort::Int.coerce(Value::Float(-2.7)), Value::Int(-2));
    }
}

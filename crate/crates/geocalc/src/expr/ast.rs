//! Expression trees and their precedence-aware text form.

use std::fmt;

/// Unary functions available in expression text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Parsed expression tree. Coordinates are 1-based, matching the surface
/// syntax `x1`, `x2`, ...
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    /// 1-based coordinate index.
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Largest coordinate index appearing in the tree (0 if none).
    pub fn max_coord(&self) -> usize {
        match self {
            Expr::Number(_) => 0,
            Expr::Coord(k) => *k,
            Expr::Neg(e) | Expr::Call(_, e) => e.max_coord(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.max_coord().max(b.max_coord()),
        }
    }

    /// Recognizes exponents that denote integer powers, drilling through
    /// unary minus, so `x1^2`, `x1^-2`, and `x1^(-(2))` all take the
    /// repeated-multiplication path.
    pub fn as_integer_constant(&self) -> Option<i32> {
        match self {
            Expr::Number(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                Some(*v as i32)
            }
            Expr::Neg(inner) => inner.as_integer_constant().and_then(i32::checked_neg),
            _ => None,
        }
    }

    /// Binding strength used when rendering: addition level 1, negation
    /// level 3 (between product and power), atoms level 5.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Number(_) | Expr::Coord(_) | Expr::Call(..) => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < min;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Number(v) => write_number(f, *v)?,
            Expr::Coord(k) => write!(f, "x{k}")?,
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 3)?;
            }
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Pow(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Call(func, arg) => {
                write!(f, "{}({})", func.name(), arg)?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Renders a literal so it reparses to the same value: integers without a
/// trailing `.0`, everything else through the shortest round-trip decimal
/// form of `f64`.
fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Expr {
    /// Inverse of parsing: the rendered text reparses to a structurally
    /// identical tree whenever every `Number` in the tree is non-negative
    /// (the parser itself never produces negative literals).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

//! Evaluation of expression trees: plain values and second-order jets.
//!
//! `eval_jet2` performs, slot by slot, the same floating-point operations
//! on values that `eval` performs, so the two agree bit for bit wherever
//! both succeed. Integer powers (including through unary minus on the
//! exponent) go through repeated multiplication; every other exponent
//! requires a positive base and goes through `powf`.

use crate::error::{Error, Result};
use crate::expr::ast::{Expr, Func};
use crate::expr::jet::{powi_value, Jet2};

/// Value of `func` at `u`, with domain checks.
pub(crate) fn func_value(func: Func, u: f64, node: &Expr) -> Result<f64> {
    Ok(match func {
        Func::Sin => u.sin(),
        Func::Cos => u.cos(),
        Func::Tan => u.tan(),
        Func::Exp => u.exp(),
        Func::Log => {
            check_domain(u > 0.0, node, "logarithm of non-positive value")?;
            u.ln()
        }
        Func::Sqrt => {
            check_domain(u >= 0.0, node, "square root of negative value")?;
            u.sqrt()
        }
        Func::Sinh => u.sinh(),
        Func::Cosh => u.cosh(),
        Func::Tanh => u.tanh(),
        Func::Atan => u.atan(),
    })
}

/// Value and first two derivatives of `func` at `u`. The value is computed
/// by exactly the same call as [`func_value`].
pub(crate) fn func_derivs(func: Func, u: f64, node: &Expr) -> Result<(f64, f64, f64)> {
    let value = func_value(func, u, node)?;
    Ok(match func {
        Func::Sin => (value, u.cos(), -value),
        Func::Cos => (value, -u.sin(), -value),
        Func::Tan => {
            let d = 1.0 + value * value;
            (value, d, 2.0 * value * d)
        }
        Func::Exp => (value, value, value),
        Func::Log => (value, 1.0 / u, -1.0 / (u * u)),
        // The derivative slots at u = 0 follow IEEE arithmetic to infinity.
        Func::Sqrt => (value, 0.5 / value, -0.25 / (value * value * value)),
        Func::Sinh => (value, u.cosh(), value),
        Func::Cosh => (value, u.sinh(), value),
        Func::Tanh => {
            let d = 1.0 - value * value;
            (value, d, -2.0 * value * d)
        }
        Func::Atan => {
            let d = 1.0 + u * u;
            (value, 1.0 / d, -2.0 * u / (d * d))
        }
    })
}

fn check_domain(ok: bool, node: &Expr, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            node: node.to_string(),
            message: message.to_string(),
        })
    }
}

fn coord_value(k: usize, point: &[f64]) -> Result<f64> {
    if k == 0 || k > point.len() {
        return Err(Error::InvalidArgument(format!(
            "coordinate x{k} exceeds point dimension {}",
            point.len()
        )));
    }
    Ok(point[k - 1])
}

/// Evaluates `expr` at `point`.
pub fn eval(expr: &Expr, point: &[f64]) -> Result<f64> {
    Ok(match expr {
        Expr::Number(v) => *v,
        Expr::Coord(k) => coord_value(*k, point)?,
        Expr::Neg(e) => -eval(e, point)?,
        Expr::Add(a, b) => eval(a, point)? + eval(b, point)?,
        Expr::Sub(a, b) => eval(a, point)? - eval(b, point)?,
        Expr::Mul(a, b) => eval(a, point)? * eval(b, point)?,
        Expr::Div(a, b) => {
            let num = eval(a, point)?;
            let den = eval(b, point)?;
            if den == 0.0 {
                return Err(Error::Domain {
                    node: expr.to_string(),
                    message: String::from("division by zero"),
                });
            }
            num / den
        }
        Expr::Pow(base, exponent) => {
            let b = eval(base, point)?;
            if let Some(k) = exponent.as_integer_constant() {
                powi_value(b, k).map_err(|_| Error::Domain {
                    node: expr.to_string(),
                    message: String::from("zero raised to a negative power"),
                })?
            } else {
                let e = eval(exponent, point)?;
                if b <= 0.0 {
                    return Err(Error::Domain {
                        node: expr.to_string(),
                        message: format!("non-integer power of non-positive base {b}"),
                    });
                }
                b.powf(e)
            }
        }
        Expr::Call(func, arg) => func_value(*func, eval(arg, point)?, expr)?,
    })
}

/// Evaluates `expr` and its first and second derivatives at `point`.
pub fn eval_jet2(expr: &Expr, point: &[f64]) -> Result<Jet2> {
    let dim = point.len();
    Ok(match expr {
        Expr::Number(v) => Jet2::constant(dim, *v),
        Expr::Coord(k) => Jet2::coordinate(dim, *k - 1, coord_value(*k, point)?),
        Expr::Neg(e) => eval_jet2(e, point)?.neg(),
        Expr::Add(a, b) => eval_jet2(a, point)?.add(&eval_jet2(b, point)?),
        Expr::Sub(a, b) => eval_jet2(a, point)?.sub(&eval_jet2(b, point)?),
        Expr::Mul(a, b) => eval_jet2(a, point)?.mul(&eval_jet2(b, point)?),
        Expr::Div(a, b) => {
            let num = eval_jet2(a, point)?;
            let den = eval_jet2(b, point)?;
            num.div(&den).map_err(|_| Error::Domain {
                node: expr.to_string(),
                message: String::from("division by zero"),
            })?
        }
        Expr::Pow(base, exponent) => {
            let b = eval_jet2(base, point)?;
            if let Some(k) = exponent.as_integer_constant() {
                b.powi(k).map_err(|_| Error::Domain {
                    node: expr.to_string(),
                    message: String::from("zero raised to a negative power"),
                })?
            } else {
                let e = eval_jet2(exponent, point)?;
                b.pow_general(&e).map_err(|_| Error::Domain {
                    node: expr.to_string(),
                    message: format!(
                        "non-integer power of non-positive base {}",
                        b.value()
                    ),
                })?
            }
        }
        Expr::Call(func, arg) => {
            let u = eval_jet2(arg, point)?;
            let (f0, f1, f2) = func_derivs(*func, u.value(), expr)?;
            u.apply(f0, f1, f2)
        }
    })
}

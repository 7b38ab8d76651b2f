//! Expression language over chart coordinates `x1..xn`.
//!
//! The module provides the parsed tree ([`Expr`]), the parser ([`parse`]),
//! plain evaluation ([`eval`]), and second-order jet evaluation
//! ([`eval_jet2`]) whose value slot is bit-identical to [`eval`]. There is
//! no simplifier: trees evaluate exactly as written.

mod ast;
mod eval;
mod jet;
mod parser;

pub use ast::{Expr, Func};
pub use eval::{eval, eval_jet2};
pub use jet::Jet2;
pub use parser::parse;

pub(crate) use jet::hess_len;

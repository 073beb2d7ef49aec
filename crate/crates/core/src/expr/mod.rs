//! A small expression language for task losses, with exact gradients by
//! forward-mode differentiation. See `docs/expressions.md` for the grammar.

mod ast;
mod eval;
mod parser;

pub use ast::{BinaryOp, Expr, UnaryOp};
pub use eval::{eval, eval_dual, grad, DualValue};
pub use parser::parse;

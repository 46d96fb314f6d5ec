//! User-facing expression language for regression functions `g(V; θ)` and
//! restriction functions `h(θ)`.
//!
//! Grammar (usual precedence, `^` right associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | mean
//! ident   := [a-zA-Z][a-zA-Z0-9_]*
//! ```
//!
//! Every identifier must be a declared parameter or covariate. `mean(e)`
//! averages `e` over the rows of the bound covariate data.

mod ast;
mod parser;
mod tape;

pub use ast::{Degree, ExprAst, Node};
pub use parser::parse_expression;
pub use tape::{Tape, TapeScratch};

use crate::error::{Error, Result};

/// Values bound to the symbols of an expression.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a> {
    /// Parameter values, in declaration order.
    pub params: &'a [f64],
    /// Covariate values of the current row, in declaration order.
    pub row: Option<&'a [f64]>,
    /// Row-major covariate data (`n × k`) that `mean(·)` averages over.
    pub data: Option<&'a [f64]>,
}

impl<'a> Bindings<'a> {
    pub fn new(params: &'a [f64]) -> Self {
        Self { params, row: None, data: None }
    }

    pub fn with_row(mut self, row: &'a [f64]) -> Self {
        self.row = Some(row);
        self
    }

    pub fn with_data(mut self, data: &'a [f64]) -> Self {
        self.data = Some(data);
        self
    }
}

/// Evaluates `expr` under `b`.
pub fn eval(expr: &ExprAst, b: &Bindings<'_>) -> Result<f64> {
    let tape = Tape::compile(expr);
    let mut scratch = TapeScratch::default();
    tape.eval_scalar(b, &mut scratch)
}

/// Forward-mode gradient of `expr` with respect to the named parameters.
pub fn grad(expr: &ExprAst, b: &Bindings<'_>, wrt: &[&str]) -> Result<Vec<f64>> {
    let dirs: Vec<usize> = wrt
        .iter()
        .map(|name| {
            expr.params()
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| Error::UndeclaredSymbol((*name).to_string()))
        })
        .collect::<Result<_>>()?;
    let tape = Tape::compile(expr);
    let mut scratch = TapeScratch::default();
    let (_, g) = tape.eval_scalar_grad(b, &dirs, &mut scratch)?;
    Ok(g)
}

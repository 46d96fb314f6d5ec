use std::fmt;

/// Expression tree node. Parameter and covariate leaves index into the
/// declaration lists of the owning [`ExprAst`].
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Param(usize),
    Covariate(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Log(Box<Node>),
    Mean(Box<Node>),
}

/// Polynomial degree of a node in the parameters, coarsened to what the
/// linear-programming reformulation needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Degree {
    Constant,
    Affine,
    Nonlinear,
}

impl Node {
    pub fn degree(&self) -> Degree {
        use Degree::*;
        match self {
            Node::Const(_) | Node::Covariate(_) => Constant,
            Node::Param(_) => Affine,
            Node::Neg(a) | Node::Mean(a) => a.degree(),
            Node::Add(a, b) | Node::Sub(a, b) => a.degree().max(b.degree()),
            Node::Mul(a, b) => match (a.degree(), b.degree()) {
                (Constant, d) | (d, Constant) => d,
                _ => Nonlinear,
            },
            Node::Div(a, b) => match b.degree() {
                Constant => a.degree(),
                _ => Nonlinear,
            },
            Node::Pow(a, b) => match (a.degree(), b.degree()) {
                (Constant, Constant) => Constant,
                (Affine, Constant) if matches!(**b, Node::Const(e) if e == 1.0) => Affine,
                _ => Nonlinear,
            },
            Node::Exp(a) | Node::Log(a) => match a.degree() {
                Constant => Constant,
                _ => Nonlinear,
            },
        }
    }

    pub(crate) fn uses_row_covariates(&self) -> bool {
        match self {
            Node::Covariate(_) => true,
            Node::Const(_) | Node::Param(_) | Node::Mean(_) => false,
            Node::Neg(a) | Node::Exp(a) | Node::Log(a) => a.uses_row_covariates(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.uses_row_covariates() || b.uses_row_covariates()
            }
        }
    }
}

/// A parsed expression together with its symbol declarations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    pub(crate) root: Node,
    pub(crate) params: Vec<String>,
    pub(crate) covariates: Vec<String>,
}

impl ExprAst {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn degree(&self) -> Degree {
        self.root.degree()
    }

    /// True when the expression is affine (or constant) in the parameters.
    pub fn is_affine(&self) -> bool {
        self.degree() <= Degree::Affine
    }

    /// True when some covariate appears outside every `mean(·)`, i.e. the
    /// expression needs a row binding.
    pub fn is_row_dependent(&self) -> bool {
        self.root.uses_row_covariates()
    }

    fn fmt_node(&self, node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bin = |f: &mut fmt::Formatter<'_>, a: &Node, op: &str, b: &Node| -> fmt::Result {
            write!(f, "(")?;
            self.fmt_node(a, f)?;
            write!(f, " {op} ")?;
            self.fmt_node(b, f)?;
            write!(f, ")")
        };
        let call = |f: &mut fmt::Formatter<'_>, name: &str, a: &Node| -> fmt::Result {
            write!(f, "{name}(")?;
            self.fmt_node(a, f)?;
            write!(f, ")")
        };
        match node {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Param(i) => write!(f, "{}", self.params[*i]),
            Node::Covariate(i) => write!(f, "{}", self.covariates[*i]),
            Node::Neg(a) => {
                write!(f, "(-")?;
                self.fmt_node(a, f)?;
                write!(f, ")")
            }
            Node::Add(a, b) => bin(f, a, "+", b),
            Node::Sub(a, b) => bin(f, a, "-", b),
            Node::Mul(a, b) => bin(f, a, "*", b),
            Node::Div(a, b) => bin(f, a, "/", b),
            Node::Pow(a, b) => bin(f, a, "^", b),
            Node::Exp(a) => call(f, "exp", a),
            Node::Log(a) => call(f, "log", a),
            Node::Mean(a) => call(f, "mean", a),
        }
    }
}

/// Fully parenthesized rendering that parses back to an equivalent tree.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(&self.root, f)
    }
}

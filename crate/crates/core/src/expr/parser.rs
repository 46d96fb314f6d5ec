use std::collections::HashSet;

use super::ast::{ExprAst, Node};
use crate::error::{Error, Result};

const FUNCTIONS: [&str; 3] = ["exp", "log", "mean"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(Error::Syntax { pos: start, msg: format!("unexpected character `{c}`") });
                }
            };
            out.push((tok, start));
            i += c.len_utf8();
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    params: &'a [String],
    covariates: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(Error::Syntax { pos: self.pos(), msg: format!("expected {what}") })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    let pos = self.pos();
                    self.bump();
                    let rhs = self.unary()?;
                    if matches!(rhs, Node::Const(c) if c == 0.0) {
                        return Err(Error::Domain(format!("division by the constant zero at position {pos}")));
                    }
                    lhs = Node::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen && FUNCTIONS.contains(&name.as_str()) {
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)` closing the function call")?;
                    return Ok(match name.as_str() {
                        "exp" => Node::Exp(Box::new(arg)),
                        "log" => {
                            if matches!(arg, Node::Const(c) if c <= 0.0) {
                                return Err(Error::Domain(format!(
                                    "log of a non-positive constant at position {pos}"
                                )));
                            }
                            Node::Log(Box::new(arg))
                        }
                        _ => Node::Mean(Box::new(arg)),
                    });
                }
                if let Some(i) = self.params.iter().position(|p| *p == name) {
                    Ok(Node::Param(i))
                } else if let Some(i) = self.covariates.iter().position(|c| *c == name) {
                    Ok(Node::Covariate(i))
                } else if FUNCTIONS.contains(&name.as_str()) {
                    Err(Error::Syntax { pos, msg: format!("function `{name}` requires an argument") })
                } else {
                    Err(Error::UndeclaredSymbol(name))
                }
            }
            Tok::End => Err(Error::Syntax { pos, msg: "unexpected end of input".into() }),
            t => Err(Error::Syntax { pos, msg: format!("unexpected token {t:?}") }),
        }
    }
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses `text` against the declared parameter and covariate names.
pub fn parse_expression<S: AsRef<str>>(text: &str, params: &[S], covariates: &[S]) -> Result<ExprAst> {
    let params: Vec<String> = params.iter().map(|s| s.as_ref().to_string()).collect();
    let covariates: Vec<String> = covariates.iter().map(|s| s.as_ref().to_string()).collect();
    let mut seen = HashSet::new();
    for name in params.iter().chain(&covariates) {
        if !valid_identifier(name) || FUNCTIONS.contains(&name.as_str()) {
            return Err(Error::InvalidArgument(format!("`{name}` is not a valid symbol name")));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateSymbol(name.clone()));
        }
    }
    if text.trim().is_empty() {
        return Err(Error::Syntax { pos: 0, msg: "empty expression".into() });
    }
    let mut p = Parser { toks: tokenize(text)?, at: 0, params: &params, covariates: &covariates };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax { pos: p.pos(), msg: "trailing input".into() });
    }
    Ok(ExprAst { root, params, covariates })
}

//! Compiled form of an [`ExprAst`]: a post-order instruction list evaluated
//! with forward-mode tangents (one tangent slot per requested parameter
//! direction), i.e. vector dual numbers without per-node allocation.

use super::ast::{ExprAst, Node};
use super::Bindings;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Param(usize),
    Cov(usize),
    Mean(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    PowConst(usize, f64),
    Pow(usize, usize),
    Exp(usize),
    Log(usize),
}

/// Immutable compiled expression; evaluation is reentrant.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    means: Vec<Tape>,
    params: Vec<String>,
    covariates: Vec<String>,
}

/// Reusable evaluation buffers.
#[derive(Debug, Default, Clone)]
pub struct TapeScratch {
    val: Vec<f64>,
    tan: Vec<f64>,
}

const NO_DIR: usize = usize::MAX;

impl Tape {
    pub fn compile(expr: &ExprAst) -> Tape {
        Self::compile_node(&expr.root, &expr.params, &expr.covariates)
    }

    fn compile_node(root: &Node, params: &[String], covariates: &[String]) -> Tape {
        let mut tape = Tape { ops: Vec::new(), means: Vec::new(), params: params.to_vec(), covariates: covariates.to_vec() };
        tape.emit(root);
        tape
    }

    fn emit(&mut self, node: &Node) -> usize {
        let op = match node {
            Node::Const(c) => Op::Const(*c),
            Node::Param(i) => Op::Param(*i),
            Node::Covariate(i) => Op::Cov(*i),
            Node::Mean(inner) => {
                let sub = Self::compile_node(inner, &self.params, &self.covariates);
                self.means.push(sub);
                Op::Mean(self.means.len() - 1)
            }
            Node::Neg(a) => Op::Neg(self.emit(a)),
            Node::Add(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                Op::Add(a, b)
            }
            Node::Sub(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                Op::Sub(a, b)
            }
            Node::Mul(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                Op::Mul(a, b)
            }
            Node::Div(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                Op::Div(a, b)
            }
            Node::Pow(a, b) => {
                let a = self.emit(a);
                match **b {
                    Node::Const(c) => Op::PowConst(a, c),
                    ref b => {
                        let b = self.emit(b);
                        Op::Pow(a, b)
                    }
                }
            }
            Node::Exp(a) => Op::Exp(self.emit(a)),
            Node::Log(a) => Op::Log(self.emit(a)),
        };
        self.ops.push(op);
        self.ops.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    /// Value at a single binding (no tangents).
    pub fn eval_scalar(&self, b: &Bindings<'_>, scratch: &mut TapeScratch) -> Result<f64> {
        self.check_params(b.params)?;
        let (mv, mt) = self.eval_means(b.params, b.data, &[], 0)?;
        self.run(b.params, b.row, &[], 0, &mv, &mt, scratch)?;
        Ok(scratch.val[self.ops.len() - 1])
    }

    /// Value and gradient with respect to the parameters listed in `wrt`
    /// (parameter indices).
    pub fn eval_scalar_grad(
        &self,
        b: &Bindings<'_>,
        wrt: &[usize],
        scratch: &mut TapeScratch,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(b.params)?;
        let dir_of = self.dir_map(wrt);
        let nd = wrt.len();
        let (mv, mt) = self.eval_means(b.params, b.data, &dir_of, nd)?;
        self.run(b.params, b.row, &dir_of, nd, &mv, &mt, scratch)?;
        let root = self.ops.len() - 1;
        Ok((scratch.val[root], scratch.tan[root * nd..(root + 1) * nd].to_vec()))
    }

    /// Values for every row of `data` (row-major `n × k`).
    pub fn eval_rows(&self, params: &[f64], data: &[f64], out: &mut [f64], scratch: &mut TapeScratch) -> Result<()> {
        self.check_params(params)?;
        let k = self.covariates.len().max(1);
        let (mv, mt) = self.eval_means(params, Some(data), &[], 0)?;
        let root = self.ops.len() - 1;
        for (row, o) in data.chunks_exact(k).zip(out.iter_mut()) {
            self.run(params, Some(row), &[], 0, &mv, &mt, scratch)?;
            *o = scratch.val[root];
        }
        Ok(())
    }

    /// Values and full Jacobian (row-major `n × p`) for every row of `data`.
    pub fn eval_rows_jacobian(
        &self,
        params: &[f64],
        data: &[f64],
        values: &mut [f64],
        jac: &mut [f64],
        scratch: &mut TapeScratch,
    ) -> Result<()> {
        self.check_params(params)?;
        let p = params.len();
        let dir_of: Vec<usize> = (0..p).collect();
        let k = self.covariates.len().max(1);
        let (mv, mt) = self.eval_means(params, Some(data), &dir_of, p)?;
        let root = self.ops.len() - 1;
        for (i, row) in data.chunks_exact(k).enumerate() {
            self.run(params, Some(row), &dir_of, p, &mv, &mt, scratch)?;
            values[i] = scratch.val[root];
            jac[i * p..(i + 1) * p].copy_from_slice(&scratch.tan[root * p..(root + 1) * p]);
        }
        Ok(())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "expression declares {} parameters, {} bound",
                self.params.len(),
                params.len()
            )));
        }
        Ok(())
    }

    fn dir_map(&self, wrt: &[usize]) -> Vec<usize> {
        let mut dir_of = vec![NO_DIR; self.params.len()];
        for (d, &pi) in wrt.iter().enumerate() {
            dir_of[pi] = d;
        }
        dir_of
    }

    /// Values and tangents (`means.len() × nd`) of every `mean(·)` node.
    fn eval_means(&self, params: &[f64], data: Option<&[f64]>, dir_of: &[usize], nd: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut vals = Vec::with_capacity(self.means.len());
        let mut tans = vec![0.0; self.means.len() * nd];
        if self.means.is_empty() {
            return Ok((vals, tans));
        }
        let mut scratch = TapeScratch::default();
        for (m, sub) in self.means.iter().enumerate() {
            let (smv, smt) = sub.eval_means(params, data, dir_of, nd)?;
            let root = sub.ops.len() - 1;
            let tan = &mut tans[m * nd..(m + 1) * nd];
            if self.covariates.is_empty() {
                sub.run(params, None, dir_of, nd, &smv, &smt, &mut scratch)?;
                vals.push(scratch.val[root]);
                tan.copy_from_slice(&scratch.tan[root * nd..(root + 1) * nd]);
                continue;
            }
            let data = data.ok_or_else(|| Error::Unbound("covariate data for mean(·)".into()))?;
            let k = self.covariates.len();
            let n = data.len() / k;
            if n == 0 || data.len() % k != 0 {
                return Err(Error::Dimension(format!("covariate data of length {} is not n × {k}", data.len())));
            }
            let mut acc = 0.0;
            for row in data.chunks_exact(k) {
                sub.run(params, Some(row), dir_of, nd, &smv, &smt, &mut scratch)?;
                acc += scratch.val[root];
                for (t, s) in tan.iter_mut().zip(&scratch.tan[root * nd..(root + 1) * nd]) {
                    *t += s;
                }
            }
            vals.push(acc / n as f64);
            tan.iter_mut().for_each(|t| *t /= n as f64);
        }
        Ok((vals, tans))
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        params: &[f64],
        row: Option<&[f64]>,
        dir_of: &[usize],
        nd: usize,
        mean_vals: &[f64],
        mean_tans: &[f64],
        s: &mut TapeScratch,
    ) -> Result<()> {
        let len = self.ops.len();
        s.val.clear();
        s.val.resize(len, 0.0);
        s.tan.clear();
        s.tan.resize(len * nd, 0.0);
        let TapeScratch { val, tan } = s;

        for (k, op) in self.ops.iter().enumerate() {
            let (before, rest) = tan.split_at_mut(k * nd);
            let out = &mut rest[..nd];
            let t = |i: usize| &before[i * nd..(i + 1) * nd];
            let v = match *op {
                Op::Const(c) => c,
                Op::Param(i) => {
                    if nd > 0 && dir_of[i] != NO_DIR {
                        out[dir_of[i]] = 1.0;
                    }
                    params[i]
                }
                Op::Cov(i) => match row {
                    Some(r) => r[i],
                    None => return Err(Error::Unbound(self.covariates[i].clone())),
                },
                Op::Mean(m) => {
                    out.copy_from_slice(&mean_tans[m * nd..(m + 1) * nd]);
                    mean_vals[m]
                }
                Op::Neg(a) => {
                    for (o, x) in out.iter_mut().zip(t(a)) {
                        *o = -x;
                    }
                    -val[a]
                }
                Op::Add(a, b) => {
                    for ((o, x), y) in out.iter_mut().zip(t(a)).zip(t(b)) {
                        *o = x + y;
                    }
                    val[a] + val[b]
                }
                Op::Sub(a, b) => {
                    for ((o, x), y) in out.iter_mut().zip(t(a)).zip(t(b)) {
                        *o = x - y;
                    }
                    val[a] - val[b]
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (val[a], val[b]);
                    for ((o, x), y) in out.iter_mut().zip(t(a)).zip(t(b)) {
                        *o = x * vb + va * y;
                    }
                    va * vb
                }
                Op::Div(a, b) => {
                    let (va, vb) = (val[a], val[b]);
                    if vb == 0.0 {
                        return Err(Error::Domain("division by zero".into()));
                    }
                    let inv = 1.0 / vb;
                    let q = va * inv;
                    for ((o, x), y) in out.iter_mut().zip(t(a)).zip(t(b)) {
                        *o = (x - q * y) * inv;
                    }
                    q
                }
                Op::PowConst(a, c) => {
                    let va = val[a];
                    let v = pow_value(va, c)?;
                    if nd > 0 {
                        let ta = t(a);
                        if ta.iter().any(|x| *x != 0.0) {
                            let d = if c == 0.0 {
                                0.0
                            } else if va == 0.0 {
                                if c < 1.0 {
                                    return Err(Error::NonDifferentiable(format!("0^{c}")));
                                }
                                if c == 1.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            } else {
                                c * pow_value(va, c - 1.0)?
                            };
                            for (o, x) in out.iter_mut().zip(ta) {
                                *o = d * x;
                            }
                        }
                    }
                    v
                }
                Op::Pow(a, b) => {
                    let (va, vb) = (val[a], val[b]);
                    let v = pow_value(va, vb)?;
                    if nd > 0 {
                        let (ta, tb) = (t(a), t(b));
                        let exponent_varies = tb.iter().any(|x| *x != 0.0);
                        if va > 0.0 {
                            let ln = va.ln();
                            for ((o, x), y) in out.iter_mut().zip(ta).zip(tb) {
                                *o = v * (y * ln + vb * x / va);
                            }
                        } else if exponent_varies {
                            return Err(Error::NonDifferentiable(format!("{va}^x with varying exponent")));
                        } else if ta.iter().any(|x| *x != 0.0) {
                            let d = if vb == 0.0 {
                                0.0
                            } else if va == 0.0 {
                                if vb < 1.0 {
                                    return Err(Error::NonDifferentiable(format!("0^{vb}")));
                                }
                                if vb == 1.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            } else {
                                vb * pow_value(va, vb - 1.0)?
                            };
                            for (o, x) in out.iter_mut().zip(ta) {
                                *o = d * x;
                            }
                        }
                    }
                    v
                }
                Op::Exp(a) => {
                    let v = val[a].exp();
                    if !v.is_finite() {
                        return Err(Error::Domain(format!("exp({}) overflows", val[a])));
                    }
                    for (o, x) in out.iter_mut().zip(t(a)) {
                        *o = v * x;
                    }
                    v
                }
                Op::Log(a) => {
                    let va = val[a];
                    if va <= 0.0 {
                        return Err(Error::Domain(format!("log of non-positive value {va}")));
                    }
                    for (o, x) in out.iter_mut().zip(t(a)) {
                        *o = x / va;
                    }
                    va.ln()
                }
            };
            if !v.is_finite() {
                return Err(Error::Domain("evaluation produced a non-finite value".into()));
            }
            val[k] = v;
        }
        Ok(())
    }
}

fn pow_value(a: f64, b: f64) -> Result<f64> {
    if a == 0.0 && b < 0.0 {
        return Err(Error::Domain(format!("0 raised to negative power {b}")));
    }
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        return Ok(a.powi(b as i32));
    }
    if a < 0.0 {
        return Err(Error::Domain(format!("negative base {a} with non-integer exponent {b}")));
    }
    Ok(a.powf(b))
}

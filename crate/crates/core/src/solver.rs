//! Slack-minimization program.
//!
//! For fixed `θ` the smallest feasible slack is `max(0, Ψ_q(θ) − r)`, so the
//! program reduces to minimizing `Ψ_q` over the restricted parameter set and
//! reading off `μ̂`. Three backends solve the reduced problem:
//!
//! * `lp`: exact linear program when `g` and every `h_k` are affine and
//!   `q ∈ {1, ∞}`;
//! * `sqp`: trust-region sequential quadratic programming on an ℓ1
//!   exact-penalty merit with a quasi-Newton Hessian, for nonlinear problems
//!   with `q ∈ {1, 2, ∞}`;
//! * `penalty`: exterior quadratic penalty with Nelder–Mead, for any `q`.
//!
//! The local backends run from several seeded starting points.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::expr::{parse_expression, Bindings, ExprAst, Tape, TapeScratch};
use crate::lp::{Cmp, GeneralOutcome, LinearProgram, LpOptions, PivotRule};
use crate::norms::{lq_norm, InstrumentMatrix, NormOrder};
use crate::rng::{domain, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// `lp` when exact, otherwise `sqp` for `q ∈ {1, 2, ∞}`, otherwise `penalty`.
    #[default]
    Auto,
    Lp,
    Sqp,
    Penalty,
}

/// Curvature model of the `sqp` backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// Damped BFGS on the Lagrangian.
    #[default]
    Bfgs,
    /// Forward differences of the Lagrangian gradient, clipped to be
    /// positive semidefinite. Costs `p` extra Jacobians per accepted step.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub backend: Backend,
    /// Number of starting points, including `hints`.
    pub starts: usize,
    pub seed: u64,
    /// Box that random starting points are drawn from.
    pub start_box: [f64; 2],
    /// Hard lower bounds on `θ` (`None` = unbounded).
    pub lower_bounds: Option<Vec<f64>>,
    /// Hard upper bounds on `θ` (`None` = unbounded).
    pub upper_bounds: Option<Vec<f64>>,
    /// User-supplied starting points, tried first.
    pub hints: Vec<Vec<f64>>,
    /// Constraint residual tolerance; defaults to 1e-8 for `lp`, 1e-6 otherwise.
    pub feasibility_tol: Option<f64>,
    pub max_iterations: usize,
    /// Stop once a feasible point with zero slack is found. The program
    /// only determines `θ̂` up to that set, so this loses nothing.
    pub early_stop: bool,
    /// Starts evaluated together before each early-stop check.
    pub start_batch: usize,
    pub trust_radius: f64,
    pub hessian: HessianMode,
    pub pivot_rule: PivotRule,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            starts: 16,
            seed: 0,
            start_box: [-10.0, 10.0],
            lower_bounds: None,
            upper_bounds: None,
            hints: Vec::new(),
            feasibility_tol: None,
            max_iterations: 500,
            early_stop: true,
            start_batch: 4,
            trust_radius: 1.0,
            hessian: HessianMode::Bfgs,
            pivot_rule: PivotRule::Dantzig,
            execution: Execution::Parallel,
        }
    }
}

/// Regression function `g(V; θ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// Expression over declared parameters and covariates.
    Expr(ExprAst),
    /// `g(V_i; θ) = D_i θ` with design `D` (`n × p`).
    Linear { design: Array2<f64>, names: Vec<String> },
}

impl Model {
    pub fn parse<S: AsRef<str>>(text: &str, params: &[S], covariates: &[S]) -> Result<Self> {
        Ok(Model::Expr(parse_expression(text, params, covariates)?))
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            Model::Expr(ast) => ast.params().to_vec(),
            Model::Linear { names, .. } => names.clone(),
        }
    }

    pub fn is_affine(&self) -> bool {
        match self {
            Model::Expr(ast) => ast.is_affine(),
            Model::Linear { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintFn {
    /// Expression over the parameters; covariates may appear only inside `mean(·)`.
    Expr(ExprAst),
    /// `coeffs · θ + offset`.
    Linear { coeffs: Vec<f64>, offset: f64 },
}

/// `lower ≤ h(θ) ≤ upper`; an equality has `lower == upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub function: ConstraintFn,
    pub lower: f64,
    pub upper: f64,
}

impl Constraint {
    pub fn is_affine(&self) -> bool {
        match &self.function {
            ConstraintFn::Expr(ast) => ast.is_affine(),
            ConstraintFn::Linear { .. } => true,
        }
    }

    /// Amount by which `value` leaves `[lower, upper]`.
    pub fn violation(&self, value: f64) -> f64 {
        (self.lower - value).max(value - self.upper).max(0.0)
    }
}

/// The restriction `h(θ) ∈ Ω` as a list of interval constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HypothesisSpec {
    pub constraints: Vec<Constraint>,
}

impl HypothesisSpec {
    pub fn new(constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(Error::InvalidArgument(format!(
                    "constraint `{}` has an empty interval [{}, {}]",
                    c.label, c.lower, c.upper
                )));
            }
        }
        Ok(Self { constraints })
    }

    /// Parses `(expression, lower, upper)` triples.
    pub fn parse<S: AsRef<str>>(items: &[(&str, f64, f64)], params: &[S], covariates: &[S]) -> Result<Self> {
        let constraints = items
            .iter()
            .map(|(text, lower, upper)| {
                Ok(Constraint {
                    label: text.to_string(),
                    function: ConstraintFn::Expr(parse_expression(text, params, covariates)?),
                    lower: *lower,
                    upper: *upper,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(constraints)
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_affine(&self) -> bool {
        self.constraints.iter().all(Constraint::is_affine)
    }
}

/// Inputs of the slack program.
#[derive(Debug, Clone)]
pub struct SlackProblem {
    pub model: Model,
    /// Covariates `V` (`n × k`, `k` may be 0).
    pub covariates: Array2<f64>,
    pub y: Vec<f64>,
    pub x: InstrumentMatrix,
    pub q: NormOrder,
    pub r: f64,
    pub hypothesis: HypothesisSpec,
    pub options: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackSolution {
    pub theta: Vec<f64>,
    pub mu: f64,
    pub psi: f64,
    pub backend: Backend,
    pub starts_run: usize,
    pub starts_failed: usize,
    /// Spread (max − min) of the local optima over the starts that ended feasible.
    pub dispersion: f64,
    /// Per-constraint violation at `θ̂`.
    pub constraint_residuals: Vec<f64>,
    pub iterations: usize,
    pub early_stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSlackSolution {
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu_norm: f64,
    pub q_tilde: NormOrder,
    /// `Ψ_q(θ̂)`; `θ̂` is feasible for the scalar program with slack `‖μ̂‖_q`.
    pub psi: f64,
    pub backend: Backend,
    pub constraint_residuals: Vec<f64>,
}

impl SlackProblem {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_params(&self) -> usize {
        match &self.model {
            Model::Expr(ast) => ast.params().len(),
            Model::Linear { design, .. } => design.ncols(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        if self.x.n() != n {
            return Err(Error::Dimension(format!("X has {} rows, Y has {n}", self.x.n())));
        }
        if self.covariates.nrows() != n {
            return Err(Error::Dimension(format!("V has {} rows, Y has {n}", self.covariates.nrows())));
        }
        if self.y.iter().chain(self.covariates.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data must be finite".into()));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {}", self.r)));
        }
        let names = self.model.param_names();
        let p = names.len();
        match &self.model {
            Model::Expr(ast) => {
                if ast.covariates().len() != self.covariates.ncols() {
                    return Err(Error::Dimension(format!(
                        "model declares {} covariates, V has {} columns",
                        ast.covariates().len(),
                        self.covariates.ncols()
                    )));
                }
            }
            Model::Linear { design, names } => {
                if design.nrows() != n || names.len() != design.ncols() {
                    return Err(Error::Dimension("linear design does not match data or names".into()));
                }
            }
        }
        for c in &self.hypothesis.constraints {
            match &c.function {
                ConstraintFn::Expr(ast) => {
                    if ast.params() != names.as_slice() {
                        return Err(Error::InvalidArgument(format!(
                            "constraint `{}` must declare the model parameters in model order",
                            c.label
                        )));
                    }
                    if ast.is_row_dependent() {
                        return Err(Error::InvalidArgument(format!(
                            "constraint `{}` uses covariates outside mean(·)",
                            c.label
                        )));
                    }
                    if !ast.covariates().is_empty() && ast.covariates().len() != self.covariates.ncols() {
                        return Err(Error::InvalidArgument(format!(
                            "constraint `{}` must declare no covariates or the model covariates",
                            c.label
                        )));
                    }
                }
                ConstraintFn::Linear { coeffs, offset } => {
                    if coeffs.len() != p || !offset.is_finite() {
                        return Err(Error::Dimension(format!(
                            "constraint `{}` has {} coefficients for {p} parameters",
                            c.label,
                            coeffs.len()
                        )));
                    }
                }
            }
        }
        let o = &self.options;
        for b in [&o.lower_bounds, &o.upper_bounds].into_iter().flatten() {
            if b.len() != p {
                return Err(Error::Dimension(format!("bounds have length {}, expected {p}", b.len())));
            }
        }
        if let (Some(lo), Some(hi)) = (&o.lower_bounds, &o.upper_bounds) {
            if lo.iter().zip(hi).any(|(l, h)| l > h) {
                return Err(Error::InfeasibleConstraints("lower bound exceeds upper bound".into()));
            }
        }
        if o.hints.iter().any(|h| h.len() != p) {
            return Err(Error::Dimension(format!("every hint must have {p} entries")));
        }
        if !(o.start_box[0] < o.start_box[1]) {
            return Err(Error::InvalidArgument("start box must satisfy lo < hi".into()));
        }
        Ok(())
    }

    /// `(1/n) Xᵀ (Y − g(θ))`.
    pub fn moments(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let ev = Evaluator::new(self)?;
        ev.moments(theta, &mut TapeScratch::default())
    }

    /// `Ψ_q(θ)`.
    pub fn psi(&self, theta: &[f64]) -> Result<f64> {
        Ok(lq_norm(&self.moments(theta)?, self.q))
    }

    /// `g(V_i; θ)` for every row.
    pub fn fitted(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let ev = Evaluator::new(self)?;
        ev.fitted(theta, &mut TapeScratch::default())
    }

    pub fn constraint_values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let ev = Evaluator::new(self)?;
        ev.constraints(theta, &mut TapeScratch::default())
    }

    fn feasibility_tol(&self, backend: Backend) -> f64 {
        self.options
            .feasibility_tol
            .unwrap_or(if backend == Backend::Lp { 1e-8 } else { 1e-6 })
    }
}

enum ModelEval<'a> {
    Tape(Tape),
    Linear(&'a Array2<f64>),
}

enum ConsEval {
    Tape(Tape),
    Linear(Vec<f64>, f64),
}

struct Evaluator<'a> {
    prob: &'a SlackProblem,
    model: ModelEval<'a>,
    cons: Vec<ConsEval>,
    data: Vec<f64>,
    n: usize,
    p: usize,
    l: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(prob: &'a SlackProblem) -> Result<Self> {
        prob.validate()?;
        let p = prob.n_params();
        let model = match &prob.model {
            Model::Expr(ast) => ModelEval::Tape(Tape::compile(ast)),
            Model::Linear { design, .. } => ModelEval::Linear(design),
        };
        let cons = prob
            .hypothesis
            .constraints
            .iter()
            .map(|c| match &c.function {
                ConstraintFn::Expr(ast) => ConsEval::Tape(Tape::compile(ast)),
                ConstraintFn::Linear { coeffs, offset } => ConsEval::Linear(coeffs.clone(), *offset),
            })
            .collect();
        let lower = prob.options.lower_bounds.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; p]);
        let upper = prob.options.upper_bounds.clone().unwrap_or_else(|| vec![f64::INFINITY; p]);
        Ok(Self {
            prob,
            model,
            cons,
            data: prob.covariates.iter().copied().collect(),
            n: prob.n(),
            p,
            l: prob.x.l(),
            lower,
            upper,
        })
    }

    fn m(&self) -> usize {
        self.cons.len()
    }

    fn fitted(&self, theta: &[f64], scratch: &mut TapeScratch) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n];
        match &self.model {
            ModelEval::Linear(d) => {
                for (gi, row) in g.iter_mut().zip(d.rows()) {
                    *gi = row.iter().zip(theta).map(|(a, b)| a * b).sum();
                }
            }
            ModelEval::Tape(t) if t.n_covariates() == 0 => {
                let v = t.eval_scalar(&Bindings::new(theta), scratch)?;
                g.iter_mut().for_each(|gi| *gi = v);
            }
            ModelEval::Tape(t) => t.eval_rows(theta, &self.data, &mut g, scratch)?,
        }
        Ok(g)
    }

    /// Fitted values and Jacobian (`n × p`).
    fn fitted_jac(&self, theta: &[f64], scratch: &mut TapeScratch) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, p) = (self.n, self.p);
        let mut g = vec![0.0; n];
        let mut jac = vec![0.0; n * p];
        match &self.model {
            ModelEval::Linear(d) => {
                for (i, row) in d.rows().into_iter().enumerate() {
                    g[i] = row.iter().zip(theta).map(|(a, b)| a * b).sum();
                    for (j, v) in row.iter().enumerate() {
                        jac[i * p + j] = *v;
                    }
                }
            }
            ModelEval::Tape(t) if t.n_covariates() == 0 => {
                let dirs: Vec<usize> = (0..p).collect();
                let (v, grad) = t.eval_scalar_grad(&Bindings::new(theta), &dirs, scratch)?;
                for i in 0..n {
                    g[i] = v;
                    jac[i * p..(i + 1) * p].copy_from_slice(&grad);
                }
            }
            ModelEval::Tape(t) => t.eval_rows_jacobian(theta, &self.data, &mut g, &mut jac, scratch)?,
        }
        Ok((g, jac))
    }

    fn moments(&self, theta: &[f64], scratch: &mut TapeScratch) -> Result<Vec<f64>> {
        let g = self.fitted(theta, scratch)?;
        let resid: Vec<f64> = self.prob.y.iter().zip(&g).map(|(y, g)| y - g).collect();
        let mut c = vec![0.0; self.l];
        self.prob.x.moments(&resid, &mut c);
        Ok(c)
    }

    /// Moments and their Jacobian (`L × p`).
    fn moments_jac(&self, theta: &[f64], scratch: &mut TapeScratch) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, p, l) = (self.n, self.p, self.l);
        let (g, jac) = self.fitted_jac(theta, scratch)?;
        let resid: Vec<f64> = self.prob.y.iter().zip(&g).map(|(y, g)| y - g).collect();
        let mut c = vec![0.0; l];
        self.prob.x.moments(&resid, &mut c);
        let mut mj = vec![0.0; l * p];
        let xs = self.prob.x.as_slice();
        for i in 0..n {
            let xrow = &xs[i * l..(i + 1) * l];
            let jrow = &jac[i * p..(i + 1) * p];
            for (j, xv) in xrow.iter().enumerate() {
                if *xv != 0.0 {
                    for (o, jv) in mj[j * p..(j + 1) * p].iter_mut().zip(jrow) {
                        *o -= xv * jv;
                    }
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        mj.iter_mut().for_each(|v| *v *= inv_n);
        Ok((c, mj))
    }

    fn constraints(&self, theta: &[f64], scratch: &mut TapeScratch) -> Result<Vec<f64>> {
        self.cons
            .iter()
            .map(|c| match c {
                ConsEval::Tape(t) => {
                    let b = Bindings::new(theta).with_data(&self.data);
                    t.eval_scalar(&b, scratch)
                }
                ConsEval::Linear(a, o) => Ok(a.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + o),
            })
            .collect()
    }

    /// Constraint values and Jacobian (`m × p`).
    fn constraints_jac(&self, theta: &[f64], scratch: &mut TapeScratch) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.p;
        let dirs: Vec<usize> = (0..p).collect();
        let mut h = Vec::with_capacity(self.m());
        let mut jac = Vec::with_capacity(self.m() * p);
        for c in &self.cons {
            match c {
                ConsEval::Tape(t) => {
                    let b = Bindings::new(theta).with_data(&self.data);
                    let (v, g) = t.eval_scalar_grad(&b, &dirs, scratch)?;
                    h.push(v);
                    jac.extend_from_slice(&g);
                }
                ConsEval::Linear(a, o) => {
                    h.push(a.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + o);
                    jac.extend_from_slice(a);
                }
            }
        }
        Ok((h, jac))
    }

    fn violations(&self, h: &[f64]) -> Vec<f64> {
        self.prob.hypothesis.constraints.iter().zip(h).map(|(c, v)| c.violation(*v)).collect()
    }

    fn clamp(&self, theta: &mut [f64]) {
        for ((t, lo), hi) in theta.iter_mut().zip(&self.lower).zip(&self.upper) {
            *t = t.clamp(*lo, *hi);
        }
    }
}

/// What is minimized over `θ`, as a function of the moment vector `c(θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Objective {
    /// `‖c‖_q`.
    Norm(NormOrder),
    /// `‖soft(c, r)‖_{q̃}` with coordinate-wise soft-thresholding at `r`.
    Excess { r: f64, q_tilde: NormOrder },
    /// `max(0, ‖c‖_q − r)` for `q̃ = q`.
    Shrink { r: f64, q: NormOrder },
}

/// Polyhedral form `Σ_t t` with rows `±c_j − shift ≤ t_{j or 0}`, `t ≥ 0`.
#[derive(Debug, Clone, Copy)]
struct LpForm {
    per_coordinate: bool,
    shift: f64,
}

impl Objective {
    fn eval(&self, c: &[f64]) -> f64 {
        match *self {
            Objective::Norm(q) => lq_norm(c, q),
            Objective::Excess { r, q_tilde } => lq_norm(&soft_threshold(c, r), q_tilde),
            Objective::Shrink { r, q } => (lq_norm(c, q) - r).max(0.0),
        }
    }

    fn lp_form(&self) -> Option<LpForm> {
        match *self {
            Objective::Norm(NormOrder::Inf) => Some(LpForm { per_coordinate: false, shift: 0.0 }),
            Objective::Norm(NormOrder::One) => Some(LpForm { per_coordinate: true, shift: 0.0 }),
            Objective::Excess { r, q_tilde: NormOrder::One } => Some(LpForm { per_coordinate: true, shift: r }),
            Objective::Excess { r, q_tilde: NormOrder::Inf } | Objective::Shrink { r, q: NormOrder::Inf } => {
                Some(LpForm { per_coordinate: false, shift: r })
            }
            _ => None,
        }
    }

    /// Objective value at or below which the slack is zero.
    fn zero_slack_level(&self, r: f64) -> f64 {
        match self {
            Objective::Norm(_) => r,
            _ => 0.0,
        }
    }
}

/// `Ψ = r` counts as a rejection, so a point only ends the search when it is
/// strictly below the level (or the slack objective is exactly zero).
fn zero_slack(value: f64, level: f64) -> bool {
    value < level || value <= 0.0
}

fn soft_threshold(c: &[f64], r: f64) -> Vec<f64> {
    c.iter().map(|v| v.signum() * (v.abs() - r).max(0.0)).collect()
}

/// Optimal slack vector of the alternative formulation at a fixed moment
/// vector `c`: coordinate-wise soft-thresholding for `q = ∞`, radial
/// shrinkage toward `c` when `q̃ = q`.
pub fn inner_slack(c: &[f64], r: f64, q: NormOrder, q_tilde: NormOrder) -> Result<Vec<f64>> {
    if q.is_inf() {
        return Ok(soft_threshold(c, r));
    }
    if q == q_tilde {
        let norm = lq_norm(c, q);
        let f = if norm > r { 1.0 - r / norm } else { 0.0 };
        return Ok(c.iter().map(|v| v * f).collect());
    }
    Err(Error::Unsupported(format!(
        "vector slack needs q = inf or q_tilde = q, got q = {q}, q_tilde = {q_tilde}"
    )))
}

#[derive(Debug, Clone)]
struct StartResult {
    theta: Vec<f64>,
    value: f64,
    max_violation: f64,
    iterations: usize,
    error: Option<Error>,
}

impl StartResult {
    fn failed(theta: Vec<f64>, e: Error) -> Self {
        Self { theta, value: f64::INFINITY, max_violation: f64::INFINITY, iterations: 0, error: Some(e) }
    }
}

fn resolve_backend(prob: &SlackProblem, obj: &Objective) -> Result<Backend> {
    let polyhedral = obj.lp_form().is_some();
    let affine = prob.model.is_affine() && prob.hypothesis.is_affine();
    match prob.options.backend {
        Backend::Auto => Ok(if affine && polyhedral {
            Backend::Lp
        } else if sqp_form(obj).is_some() {
            Backend::Sqp
        } else {
            Backend::Penalty
        }),
        Backend::Lp if !(affine && polyhedral) => Err(Error::Unsupported(
            "the lp backend needs affine g and h and q in {1, inf}".into(),
        )),
        Backend::Sqp if sqp_form(obj).is_none() => {
            Err(Error::Unsupported("the sqp backend needs q in {1, 2, inf} without a Euclidean outer norm".into()))
        }
        b => Ok(b),
    }
}

/// Solves the scalar-slack program.
pub fn minimize_slack(prob: &SlackProblem) -> Result<SlackSolution> {
    let obj = Objective::Norm(prob.q);
    let (best, backend, stats) = solve(prob, obj)?;
    let psi = best.value;
    Ok(SlackSolution {
        mu: (psi - prob.r).max(0.0),
        psi,
        theta: best.theta,
        backend,
        starts_run: stats.starts_run,
        starts_failed: stats.starts_failed,
        dispersion: stats.dispersion,
        constraint_residuals: stats.residuals,
        iterations: stats.iterations,
        early_stopped: stats.early_stopped,
    })
}

/// Solves the vector-slack formulation with inner norm `q̃`.
pub fn minimize_slack_vector(prob: &SlackProblem, q_tilde: NormOrder) -> Result<VectorSlackSolution> {
    let obj = if prob.q.is_inf() {
        Objective::Excess { r: prob.r, q_tilde }
    } else if prob.q == q_tilde {
        Objective::Shrink { r: prob.r, q: prob.q }
    } else {
        return Err(Error::Unsupported(format!(
            "vector slack needs q = inf or q_tilde = q, got q = {}, q_tilde = {q_tilde}",
            prob.q
        )));
    };
    let (best, backend, stats) = solve(prob, obj)?;
    let c = prob.moments(&best.theta)?;
    let mu = inner_slack(&c, prob.r, prob.q, q_tilde)?;
    Ok(VectorSlackSolution {
        mu_norm: lq_norm(&mu, q_tilde),
        mu,
        q_tilde,
        psi: lq_norm(&c, prob.q),
        theta: best.theta,
        backend,
        constraint_residuals: stats.residuals,
    })
}

struct SolveStats {
    starts_run: usize,
    starts_failed: usize,
    dispersion: f64,
    residuals: Vec<f64>,
    iterations: usize,
    early_stopped: bool,
}

fn solve(prob: &SlackProblem, obj: Objective) -> Result<(StartResult, Backend, SolveStats)> {
    let ev = Evaluator::new(prob)?;
    let backend = resolve_backend(prob, &obj)?;
    let tol = prob.feasibility_tol(backend);
    let stop = prob.options.early_stop.then(|| obj.zero_slack_level(prob.r));

    let (best, starts_run, starts_failed, dispersion, iterations, early_stopped) = if backend == Backend::Lp {
        let res = solve_affine_lp(&ev, &obj, tol, &prob.options)?;
        let it = res.iterations;
        (res, 1, 0, 0.0, it, false)
    } else {
        let starts = starting_points(&ev, &prob.options);
        let run = |theta0: &[f64]| -> StartResult {
            match backend {
                Backend::Sqp => sqp(&ev, &obj, theta0, tol, stop, &prob.options),
                _ => penalty(&ev, &obj, theta0, tol, stop, &prob.options),
            }
        };
        let mut results: Vec<StartResult> = Vec::with_capacity(starts.len());
        let mut early = false;
        for batch in starts.chunks(prob.options.start_batch.max(1)) {
            let mut out = map_indexed(prob.options.execution, batch.len(), |i| run(&batch[i]));
            results.append(&mut out);
            if let Some(s) = stop {
                if results.iter().any(|r| r.error.is_none() && r.max_violation <= tol && zero_slack(r.value, s)) {
                    early = results.len() < starts.len();
                    break;
                }
            }
        }
        let failed = results.iter().filter(|r| r.error.is_some()).count();
        let feasible: Vec<&StartResult> =
            results.iter().filter(|r| r.error.is_none() && r.max_violation <= tol).collect();
        if feasible.is_empty() {
            let closest = results
                .iter()
                .filter(|r| r.error.is_none())
                .min_by(|a, b| a.max_violation.total_cmp(&b.max_violation));
            return Err(match closest {
                Some(c) => Error::InfeasibleConstraints(format!(
                    "no start reached constraint residual {tol:e}; smallest residual {:.3e}",
                    c.max_violation
                )),
                None => {
                    let e = results.iter().find_map(|r| r.error.clone());
                    Error::NonConvergence {
                        iterations: results.iter().map(|r| r.iterations).sum(),
                        best_objective: f64::INFINITY,
                        best_theta: results.first().map(|r| r.theta.clone()).unwrap_or_default(),
                    }
                    .with_cause(e)
                }
            });
        }
        let mut best = feasible[0];
        for r in &feasible[1..] {
            if r.value < best.value {
                best = r;
            }
        }
        let hi = feasible.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        let lo = best.value;
        let iterations = results.iter().map(|r| r.iterations).sum();
        (best.clone(), results.len(), failed, hi - lo, iterations, early)
    };

    // Report the statistic from a fresh evaluation at θ̂.
    let mut scratch = TapeScratch::default();
    let c = ev.moments(&best.theta, &mut scratch)?;
    let h = ev.constraints(&best.theta, &mut scratch)?;
    let residuals = ev.violations(&h);
    let best = StartResult { value: obj.eval(&c), ..best };
    Ok((
        best,
        backend,
        SolveStats { starts_run, starts_failed, dispersion, residuals, iterations, early_stopped },
    ))
}

impl Error {
    fn with_cause(self, cause: Option<Error>) -> Error {
        match (self, cause) {
            (Error::NonConvergence { iterations, best_theta, .. }, Some(Error::Domain(m))) if iterations == 0 => {
                Error::Domain(format!("every start failed; first failure: {m} (at {best_theta:?})"))
            }
            (e, _) => e,
        }
    }
}

fn starting_points(ev: &Evaluator<'_>, opts: &SolverOptions) -> Vec<Vec<f64>> {
    let total = opts.starts.max(1).max(opts.hints.len());
    let mut starts: Vec<Vec<f64>> = opts.hints.clone();
    let [blo, bhi] = opts.start_box;
    for k in 0..total - starts.len() {
        let mut rng = stream(opts.seed, domain::MULTISTART, k as u64);
        let mut theta: Vec<f64> = (0..ev.p)
            .map(|j| {
                let lo = if ev.lower[j].is_finite() { ev.lower[j].max(blo) } else { blo };
                let hi = if ev.upper[j].is_finite() { ev.upper[j].min(bhi) } else { bhi };
                if lo < hi {
                    rng.random_range(lo..hi)
                } else {
                    lo.min(ev.upper[j]).max(ev.lower[j])
                }
            })
            .collect();
        ev.clamp(&mut theta);
        starts.push(theta);
    }
    starts
}

/// Adds `t` variables and the rows `±(c_j + M_j d) − shift ≤ t` to `lp`.
/// Variables `0..p` of `lp` are the step `d`; returns the index of the first `t`.
fn push_objective_rows(lp: &mut LinearProgram, form: LpForm, c: &[f64], mjac: &[f64], p: usize, t0: usize) {
    let l = c.len();
    for j in 0..l {
        let ti = if form.per_coordinate { t0 + j } else { t0 };
        let mut plus = vec![0.0; lp.n_vars()];
        plus[..p].copy_from_slice(&mjac[j * p..(j + 1) * p]);
        plus[ti] = -1.0;
        let minus: Vec<f64> = plus
            .iter()
            .enumerate()
            .map(|(k, v)| if k == ti { -1.0 } else { -v })
            .collect();
        lp.add_row(plus, Cmp::Le, form.shift - c[j]);
        lp.add_row(minus, Cmp::Le, form.shift + c[j]);
    }
}

fn n_objective_vars(form: LpForm, l: usize) -> usize {
    if form.per_coordinate {
        l
    } else {
        1
    }
}

fn solve_affine_lp(ev: &Evaluator<'_>, obj: &Objective, tol: f64, opts: &SolverOptions) -> Result<StartResult> {
    let form = obj.lp_form().expect("lp backend requires a polyhedral objective");
    let (p, l) = (ev.p, ev.l);
    let mut scratch = TapeScratch::default();
    let origin = vec![0.0; p];
    let (c0, mjac) = ev.moments_jac(&origin, &mut scratch)?;
    let (h0, hjac) = ev.constraints_jac(&origin, &mut scratch)?;
    let nt = n_objective_vars(form, l);
    let mut lp = LinearProgram::new(p + nt);
    for j in 0..p {
        lp.lower[j] = ev.lower[j];
        lp.upper[j] = ev.upper[j];
    }
    for k in p..p + nt {
        lp.objective[k] = 1.0;
    }
    push_objective_rows(&mut lp, form, &c0, &mjac, p, p);
    for (k, c) in ev.prob.hypothesis.constraints.iter().enumerate() {
        let mut row = vec![0.0; p + nt];
        row[..p].copy_from_slice(&hjac[k * p..(k + 1) * p]);
        if c.lower == c.upper {
            lp.add_row(row, Cmp::Eq, c.lower - h0[k]);
        } else {
            if c.lower.is_finite() {
                lp.add_row(row.clone(), Cmp::Ge, c.lower - h0[k]);
            }
            if c.upper.is_finite() {
                lp.add_row(row, Cmp::Le, c.upper - h0[k]);
            }
        }
    }
    let lp_opts = LpOptions { pivot_rule: opts.pivot_rule, feasibility_tol: tol, ..Default::default() };
    match lp.solve(&lp_opts)? {
        GeneralOutcome::Optimal { x, .. } => {
            let theta = x[..p].to_vec();
            let c = ev.moments(&theta, &mut scratch)?;
            let h = ev.constraints(&theta, &mut scratch)?;
            let max_violation = ev.violations(&h).into_iter().fold(0.0, f64::max);
            Ok(StartResult { value: obj.eval(&c), theta, max_violation, iterations: 1, error: None })
        }
        GeneralOutcome::Infeasible => Err(Error::InfeasibleConstraints(
            "the linear restrictions admit no parameter value".into(),
        )),
        GeneralOutcome::Unbounded => Err(Error::Numerical("slack LP reported an unbounded objective".into())),
    }
}

struct Point {
    theta: Vec<f64>,
    value: f64,
    h: Vec<f64>,
    viol_sum: f64,
    viol_max: f64,
}

fn evaluate(ev: &Evaluator<'_>, obj: &Objective, theta: Vec<f64>, scratch: &mut TapeScratch) -> Result<Point> {
    let c = ev.moments(&theta, scratch)?;
    let h = ev.constraints(&theta, scratch)?;
    let v = ev.violations(&h);
    let value = obj.eval(&c);
    if !value.is_finite() {
        return Err(Error::Domain("objective is not finite".into()));
    }
    Ok(Point { theta, value, viol_sum: v.iter().sum(), viol_max: v.iter().cloned().fold(0.0, f64::max), h })
}

/// Convex subproblem `min ½ dᵀB d + qᵀx` over `x = (d, aux)` with
/// `eq · x = b_eq`, `ineq · x ≤ b_ineq` and optional second-order cone rows
/// `b_soc − soc · x ∈ SOC`.
struct Subproblem {
    n: usize,
    p: usize,
    hessian: Vec<f64>,
    q: Vec<f64>,
    ineq: Vec<(Vec<(usize, f64)>, f64)>,
    soc: Vec<(Vec<(usize, f64)>, f64)>,
}

struct SubSolution {
    x: Vec<f64>,
    z_ineq: Vec<f64>,
    value: f64,
}

fn solve_subproblem(sp: &Subproblem) -> Result<SubSolution> {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus};

    let (mut pi, mut pj, mut pv) = (vec![], vec![], vec![]);
    for i in 0..sp.p {
        for j in i..sp.p {
            let v = sp.hessian[i * sp.p + j];
            if v != 0.0 {
                pi.push(i);
                pj.push(j);
                pv.push(v);
            }
        }
    }
    let pmat = CscMatrix::new_from_triplets(sp.n, sp.n, pi, pj, pv);
    let rows = sp.ineq.len() + sp.soc.len();
    let (mut ai, mut aj, mut av) = (vec![], vec![], vec![]);
    let mut b = Vec::with_capacity(rows);
    for (r, (coeffs, rhs)) in sp.ineq.iter().chain(&sp.soc).enumerate() {
        for &(j, v) in coeffs {
            if v != 0.0 {
                ai.push(r);
                aj.push(j);
                av.push(v);
            }
        }
        b.push(*rhs);
    }
    let amat = CscMatrix::new_from_triplets(rows, sp.n, ai, aj, av);
    let mut cones = vec![NonnegativeConeT(sp.ineq.len())];
    if !sp.soc.is_empty() {
        cones.push(SecondOrderConeT(sp.soc.len()));
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .iterative_refinement_enable(false)
        .build()
        .map_err(|e| Error::Numerical(format!("subproblem settings: {e}")))?;
    let mut solver = DefaultSolver::new(&pmat, &sp.q, &amat, &b, &cones, settings)
        .map_err(|e| Error::Numerical(format!("subproblem setup: {e}")))?;
    solver.solve();
    let sol = &solver.solution;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(SubSolution {
            x: sol.x.clone(),
            z_ineq: sol.z[..sp.ineq.len()].to_vec(),
            value: sol.obj_val,
        }),
        s => Err(Error::Numerical(format!("subproblem ended with status {s:?}"))),
    }
}

/// Damped BFGS update of the dense `p × p` matrix `b`.
fn bfgs_update(b: &mut [f64], p: usize, s: &[f64], y: &[f64], initialized: &mut bool) {
    let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
    if !*initialized {
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let scale = if sy > 1e-300 && yy > 0.0 { yy / sy } else { 1e-6 };
        b.iter_mut().for_each(|v| *v = 0.0);
        (0..p).for_each(|i| b[i * p + i] = scale);
        *initialized = true;
    }
    let bs: Vec<f64> = (0..p).map(|i| (0..p).map(|j| b[i * p + j] * s[j]).sum()).collect();
    let sbs: f64 = s.iter().zip(&bs).map(|(a, b)| a * b).sum();
    if !(sbs > 1e-300) {
        return;
    }
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r: Vec<f64> = y.iter().zip(&bs).map(|(y, b)| theta * y + (1.0 - theta) * b).collect();
    let sr: f64 = s.iter().zip(&r).map(|(a, b)| a * b).sum();
    if !(sr > 1e-300) {
        return;
    }
    for i in 0..p {
        for j in 0..p {
            b[i * p + j] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
        }
    }
}

/// `Σ_j w_j ∇c_j + Σ_k u_k ∇h_k` from row-major Jacobians.
fn weighted_gradient(mjac: &[f64], w: &[f64], hjac: &[f64], u: &[f64], p: usize) -> Vec<f64> {
    let mut g = vec![0.0; p];
    for (rows, weights) in [(mjac, w), (hjac, u)] {
        for (row, wv) in rows.chunks_exact(p).zip(weights) {
            if *wv != 0.0 {
                g.iter_mut().zip(row).for_each(|(gi, r)| *gi += wv * r);
            }
        }
    }
    g
}

/// How the SQP subproblem models the objective.
#[derive(Debug, Clone, Copy)]
enum SqpForm {
    Polyhedral(LpForm),
    /// `‖c + M d‖₂ ≤ t`.
    Euclidean,
}

fn sqp_form(obj: &Objective) -> Option<SqpForm> {
    match (obj.lp_form(), obj) {
        (Some(f), _) => Some(SqpForm::Polyhedral(f)),
        (None, Objective::Norm(NormOrder::Two)) => Some(SqpForm::Euclidean),
        _ => None,
    }
}

/// Rows of the Sℓ1QP subproblem that depend on the iterate.
struct SqpLayout<'a> {
    form: SqpForm,
    p: usize,
    l: usize,
    nt: usize,
    constraints: &'a [Constraint],
    /// One elastic per finite constraint side: (constraint, is upper side).
    sides: Vec<(usize, bool)>,
}

impl SqpLayout<'_> {
    fn nx(&self) -> usize {
        self.p + self.nt + self.sides.len()
    }

    fn n_obj_rows(&self) -> usize {
        match self.form {
            SqpForm::Polyhedral(_) => 2 * self.l,
            SqpForm::Euclidean => 0,
        }
    }

    /// Subproblem for the model `c + M d`, `h + H d`, with the step box
    /// `lo ≤ d ≤ hi` and elastic weight `nu`.
    #[allow(clippy::too_many_arguments)]
    fn build(&self, c: &[f64], mjac: &[f64], h: &[f64], hjac: &[f64], lo: &[f64], hi: &[f64], hess: &[f64], nu: f64) -> Subproblem {
        let (p, l, nt) = (self.p, self.l, self.nt);
        let nx = self.nx();
        let mut q = vec![0.0; nx];
        q[p..p + nt].iter_mut().for_each(|v| *v = 1.0);
        q[p + nt..].iter_mut().for_each(|v| *v = nu);
        let mut ineq: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let mut soc: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        match self.form {
            SqpForm::Polyhedral(f) => {
                for j in 0..l {
                    let ti = p + if f.per_coordinate { j } else { 0 };
                    let row = &mjac[j * p..(j + 1) * p];
                    let mut plus: Vec<(usize, f64)> = row.iter().cloned().enumerate().collect();
                    plus.push((ti, -1.0));
                    let mut minus: Vec<(usize, f64)> = row.iter().map(|v| -v).enumerate().collect();
                    minus.push((ti, -1.0));
                    ineq.push((plus, f.shift - c[j]));
                    ineq.push((minus, f.shift + c[j]));
                }
            }
            SqpForm::Euclidean => {
                soc.push((vec![(p, -1.0)], 0.0));
                for j in 0..l {
                    let row: Vec<(usize, f64)> = mjac[j * p..(j + 1) * p].iter().map(|v| -v).enumerate().collect();
                    soc.push((row, c[j]));
                }
            }
        }
        for t in p..p + nt {
            ineq.push((vec![(t, -1.0)], 0.0));
        }
        for (si, &(k, upper)) in self.sides.iter().enumerate() {
            let s = p + nt + si;
            let row = &hjac[k * p..(k + 1) * p];
            let mut r: Vec<(usize, f64)> =
                row.iter().map(|v| if upper { *v } else { -v }).enumerate().collect();
            r.push((s, -1.0));
            let rhs = if upper { self.constraints[k].upper - h[k] } else { h[k] - self.constraints[k].lower };
            ineq.push((r, rhs));
            ineq.push((vec![(s, -1.0)], 0.0));
        }
        for j in 0..p {
            ineq.push((vec![(j, 1.0)], hi[j]));
            ineq.push((vec![(j, -1.0)], -lo[j]));
        }
        Subproblem { n: nx, p, hessian: hess.to_vec(), q, ineq, soc }
    }

    /// Gradient of `Σ_j w_j c_j + Σ_k u_k h_k` with weights from the duals of `sol`.
    fn lagrangian_weights(&self, sol: &SubSolution, c: &[f64], mjac: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (p, l) = (self.p, self.l);
        let z = &sol.z_ineq;
        let d = &sol.x[..p];
        let w: Vec<f64> = match self.form {
            SqpForm::Polyhedral(_) => (0..l).map(|j| z[2 * j] - z[2 * j + 1]).collect(),
            SqpForm::Euclidean => {
                let t = sol.x[p];
                if t > 1e-14 {
                    (0..l)
                        .map(|j| (c[j] + mjac[j * p..(j + 1) * p].iter().zip(d).map(|(a, b)| a * b).sum::<f64>()) / t)
                        .collect()
                } else {
                    vec![0.0; l]
                }
            }
        };
        let mut u = vec![0.0; self.constraints.len()];
        let base = self.n_obj_rows() + self.nt;
        for (si, &(k, upper)) in self.sides.iter().enumerate() {
            let zk = z[base + 2 * si];
            u[k] += if upper { zk } else { -zk };
        }
        (w, u)
    }
}

/// Trust-region Sℓ1QP on `φ(θ) = f(θ) + ν Σ_k viol_k(θ)` with a damped BFGS
/// approximation of the Lagrangian Hessian and second-order corrections.
fn sqp(ev: &Evaluator<'_>, obj: &Objective, theta0: &[f64], tol: f64, stop: Option<f64>, opts: &SolverOptions) -> StartResult {
    const NU_MAX: f64 = 1e8;
    const STALL: usize = 5;
    let form = sqp_form(obj).expect("sqp backend requires a conic objective");
    let (p, l) = (ev.p, ev.l);
    let nt = match form {
        SqpForm::Polyhedral(f) => n_objective_vars(f, l),
        SqpForm::Euclidean => 1,
    };
    let constraints = &ev.prob.hypothesis.constraints;
    let sides = constraints
        .iter()
        .enumerate()
        .flat_map(|(k, c)| {
            let lo = c.lower.is_finite().then_some((k, false));
            let hi = c.upper.is_finite().then_some((k, true));
            lo.into_iter().chain(hi)
        })
        .collect();
    let layout = SqpLayout { form, p, l, nt, constraints, sides };

    let mut scratch = TapeScratch::default();
    let mut theta = theta0.to_vec();
    ev.clamp(&mut theta);
    let mut cur = match evaluate(ev, obj, theta.clone(), &mut scratch) {
        Ok(pt) => pt,
        Err(e) => return StartResult::failed(theta, e),
    };
    let mut jac = match jacobians(ev, &cur.theta, &mut scratch) {
        Ok(j) => j,
        Err(e) => return StartResult::failed(cur.theta, e),
    };
    let mut hess = vec![0.0; p * p];
    let mut hess_ready = false;
    let mut nu = 10.0;
    let mut radius = opts.trust_radius;
    let mut iterations = 0;
    let mut history: Vec<f64> = Vec::new();

    while iterations < opts.max_iterations {
        if let Some(s) = stop {
            if cur.viol_max <= tol && zero_slack(cur.value, s) {
                break;
            }
        }
        iterations += 1;
        let (c, mjac, hjac) = (&jac.0, &jac.1, &jac.2);
        let lo: Vec<f64> = (0..p).map(|j| (-radius).max(ev.lower[j] - cur.theta[j])).collect();
        let hi: Vec<f64> = (0..p).map(|j| radius.min(ev.upper[j] - cur.theta[j])).collect();
        let sol = match solve_subproblem(&layout.build(c, mjac, &cur.h, hjac, &lo, &hi, &hess, nu)) {
            Ok(s) => s,
            Err(e) => {
                if radius > 1e-8 {
                    radius *= 0.25;
                    continue;
                }
                return StartResult::failed(cur.theta, e);
            }
        };
        let d = &sol.x[..p];
        let phi = cur.value + nu * cur.viol_sum;
        let pred = phi - sol.value;
        let step = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let theta_scale = 1.0 + cur.theta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if pred <= 1e-9 * (1.0 + phi.abs()) || step <= 1e-9 * theta_scale {
            if cur.viol_max > tol && nu < NU_MAX {
                nu *= 10.0;
                continue;
            }
            break;
        }
        let merit = |pt: &Point| pt.value + nu * pt.viol_sum;
        let mut trial: Vec<f64> = cur.theta.iter().zip(d).map(|(t, d)| t + d).collect();
        ev.clamp(&mut trial);
        let mut next = evaluate(ev, obj, trial, &mut scratch).ok();
        let mut rho = next.as_ref().map_or(f64::NEG_INFINITY, |pt| (phi - merit(pt)) / pred);
        if rho < 0.75 {
            // Second-order correction: keep the Jacobians, shift the model
            // values by the curvature observed at the trial point.
            if let Some(pt) = next.as_ref() {
                let lin = |rows: &[f64], now: &[f64]| -> Vec<f64> {
                    now.iter()
                        .zip(rows.chunks_exact(p))
                        .map(|(n, r)| n - r.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
                        .collect()
                };
                let corrected = ev.moments(&pt.theta, &mut scratch).ok().and_then(|c_new| {
                    let c2 = lin(mjac, &c_new);
                    let h2 = lin(hjac, &pt.h);
                    solve_subproblem(&layout.build(&c2, mjac, &h2, hjac, &lo, &hi, &hess, nu)).ok()
                });
                if let Some(sol2) = corrected {
                    let mut t2: Vec<f64> = cur.theta.iter().zip(&sol2.x[..p]).map(|(t, d)| t + d).collect();
                    ev.clamp(&mut t2);
                    if let Ok(pt2) = evaluate(ev, obj, t2, &mut scratch) {
                        let rho2 = (phi - merit(&pt2)) / pred;
                        if rho2 > rho {
                            rho = rho2;
                            next = Some(pt2);
                        }
                    }
                }
            }
        }
        if rho < 0.1 {
            radius = 0.25 * step;
        } else if rho > 0.75 && step >= 0.99 * radius {
            radius = (2.0 * radius).min(1e6);
        }
        if rho >= 0.1 {
            let pt = next.expect("finite ratio implies an evaluated trial point");
            let new_jac = match jacobians(ev, &pt.theta, &mut scratch) {
                Ok(j) => j,
                Err(e) => return StartResult::failed(pt.theta, e),
            };
            let (w, u) = layout.lagrangian_weights(&sol, c, mjac);
            let g_old = weighted_gradient(mjac, &w, hjac, &u, p);
            let g_new = weighted_gradient(&new_jac.1, &w, &new_jac.2, &u, p);
            let s: Vec<f64> = pt.theta.iter().zip(&cur.theta).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g_old).map(|(a, b)| a - b).collect();
            if opts.hessian == HessianMode::FiniteDifference {
                match fd_hessian(ev, &pt.theta, &w, &u, &g_new, &mut scratch) {
                    Ok(h) => hess = h,
                    Err(e) => return StartResult::failed(pt.theta, e),
                }
            } else {
                bfgs_update(&mut hess, p, &s, &y, &mut hess_ready);
            }
            cur = pt;
            jac = new_jac;
            history.push(merit(&cur));
            if history.len() > STALL {
                let old = history[history.len() - 1 - STALL];
                let now = *history.last().unwrap();
                if old - now <= 1e-7 * (1.0 + now.abs()) && cur.viol_max <= tol {
                    break;
                }
            }
        }
        // The subproblem solver resolves steps to about 1e-8.
        if radius < 1e-8 * theta_scale {
            if cur.viol_max > tol && nu < NU_MAX {
                nu *= 10.0;
                radius = opts.trust_radius * 1e-3;
                continue;
            }
            break;
        }
    }
    StartResult { value: cur.value, max_violation: cur.viol_max, theta: cur.theta, iterations, error: None }
}

/// Forward-difference Hessian of `Σ_j w_j c_j + Σ_k u_k h_k` at `theta`,
/// symmetrized and projected onto the positive semidefinite cone.
fn fd_hessian(
    ev: &Evaluator<'_>,
    theta: &[f64],
    w: &[f64],
    u: &[f64],
    g0: &[f64],
    scratch: &mut TapeScratch,
) -> Result<Vec<f64>> {
    let p = theta.len();
    let mut h = nalgebra::DMatrix::<f64>::zeros(p, p);
    let mut shifted = theta.to_vec();
    for i in 0..p {
        let eps = 1e-6 * (1.0 + theta[i].abs());
        shifted[i] = theta[i] + eps;
        let (_, mjac, hjac) = jacobians(ev, &shifted, scratch)?;
        shifted[i] = theta[i];
        let g = weighted_gradient(&mjac, w, &hjac, u, p);
        for j in 0..p {
            h[(j, i)] = (g[j] - g0[j]) / eps;
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-8 * top;
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let psd = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok((0..p * p).map(|k| psd[(k / p, k % p)]).collect())
}

/// Moments, moment Jacobian and constraint Jacobian.
fn jacobians(ev: &Evaluator<'_>, theta: &[f64], scratch: &mut TapeScratch) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (c, mjac) = ev.moments_jac(theta, scratch)?;
    let (_, hjac) = ev.constraints_jac(theta, scratch)?;
    Ok((c, mjac, hjac))
}

/// Exterior quadratic penalty with Nelder–Mead inner solves.
fn penalty(ev: &Evaluator<'_>, obj: &Objective, theta0: &[f64], tol: f64, stop: Option<f64>, opts: &SolverOptions) -> StartResult {
    let mut theta = theta0.to_vec();
    ev.clamp(&mut theta);
    let mut scratch = TapeScratch::default();
    if let Err(e) = evaluate(ev, obj, theta.clone(), &mut scratch) {
        return StartResult::failed(theta, e);
    }
    let mut iterations = 0;
    let mut last = None;
    let mut weight = 1e2;
    while weight <= 1e12 {
        let f = |t: &[f64], scratch: &mut TapeScratch| -> f64 {
            let mut tc = t.to_vec();
            ev.clamp(&mut tc);
            let outside: f64 = tc.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            match evaluate(ev, obj, tc, scratch) {
                Ok(pt) => {
                    let v2: f64 = ev.violations(&pt.h).iter().map(|v| v * v).sum();
                    pt.value + weight * (v2 + outside)
                }
                Err(_) => f64::INFINITY,
            }
        };
        let (t, evals) = nelder_mead_restarts(&f, &theta, opts.max_iterations * 20, &mut scratch);
        iterations += evals;
        theta = t;
        ev.clamp(&mut theta);
        let pt = match evaluate(ev, obj, theta.clone(), &mut scratch) {
            Ok(pt) => pt,
            Err(e) => return StartResult::failed(theta, e),
        };
        let done = pt.viol_max <= tol;
        last = Some(pt);
        if done {
            break;
        }
        if let (Some(s), Some(pt)) = (stop, &last) {
            if pt.viol_max <= tol && zero_slack(pt.value, s) {
                break;
            }
        }
        weight *= 100.0;
    }
    let pt = last.expect("at least one penalty stage runs");
    StartResult { value: pt.value, max_violation: pt.viol_max, theta: pt.theta, iterations, error: None }
}

fn nelder_mead_restarts<F>(f: &F, x0: &[f64], max_evals: usize, scratch: &mut TapeScratch) -> (Vec<f64>, usize)
where
    F: Fn(&[f64], &mut TapeScratch) -> f64,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x, scratch);
    let mut evals = 1;
    let mut step = 0.1;
    for _ in 0..12 {
        let (xn, fxn, e) = nelder_mead(f, &x, step, max_evals, scratch);
        evals += e;
        let improved = fx - fxn > 1e-15 * (1.0 + fx.abs());
        if fxn <= fx {
            x = xn;
            fx = fxn;
        }
        if !improved {
            if step < 1e-6 {
                break;
            }
            step *= 0.1;
        }
    }
    (x, evals)
}

/// Adaptive-coefficient Nelder–Mead from `x0` with initial edge
/// `step · max(1, |x0_j|)`.
fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, max_evals: usize, scratch: &mut TapeScratch) -> (Vec<f64>, f64, usize)
where
    F: Fn(&[f64], &mut TapeScratch) -> f64,
{
    let p = x0.len();
    if p == 0 {
        return (vec![], f(&[], scratch), 1);
    }
    let pf = p as f64;
    let (alpha, gamma, rho, sigma) = if p >= 2 {
        (1.0, 1.0 + 2.0 / pf, 0.75 - 1.0 / (2.0 * pf), 1.0 - 1.0 / pf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for j in 0..p {
        let mut v = x0.to_vec();
        v[j] += step * x0[j].abs().max(1.0);
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| f(v, scratch)).collect();
    let mut evals = p + 1;
    let mut order: Vec<usize> = (0..=p).collect();
    while evals < max_evals {
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]).then(a.cmp(&b)));
        let (best, worst, second) = (order[0], order[p], order[p - 1]);
        let spread = fv[worst] - fv[best];
        let diam = simplex
            .iter()
            .map(|v| v.iter().zip(&simplex[best]).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())))
            .fold(0.0f64, f64::max);
        let xs = simplex[best].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if (spread.is_finite() && spread <= 1e-14 * (1.0 + fv[best].abs())) && diam <= 1e-11 * (1.0 + xs) {
            break;
        }
        let mut centroid = vec![0.0; p];
        for &i in &order[..p] {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v / pf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = f(&xr, scratch);
        evals += 1;
        if fr < fv[best] {
            let xe = along(alpha * gamma);
            let fe = f(&xe, scratch);
            evals += 1;
            if fe < fr {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if fr < fv[second] {
            simplex[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[worst] {
            let xc = along(alpha * rho);
            let fc = f(&xc, scratch);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = f(&xc, scratch);
            (xc, fc)
        };
        evals += 1;
        if fc < fv[worst].min(fr) {
            simplex[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        let xb = simplex[best].clone();
        for &i in &order[1..] {
            for (v, b) in simplex[i].iter_mut().zip(&xb) {
                *v = b + sigma * (*v - b);
            }
            fv[i] = f(&simplex[i], scratch);
        }
        evals += p;
    }
    let best = (0..=p).min_by(|&a, &b| fv[a].total_cmp(&fv[b]).then(a.cmp(&b))).unwrap();
    (simplex[best].clone(), fv[best], evals)
}

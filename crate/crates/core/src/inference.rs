//! Hypothesis test, confidence regions, bounded-response test and
//! dimension diagnostics.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::expr::{parse_expression, Tape, TapeScratch};
use crate::norms::{normalize_columns, ColumnScaling, InstrumentMatrix, NormOrder};
use crate::solver::{
    minimize_slack, minimize_slack_vector, HypothesisSpec, Model, SlackProblem, SlackSolution, SolverOptions,
};
use crate::thresholds::{
    concentration_threshold, min_threshold, rademacher_threshold, sigma_upper_bound, union_bound_threshold,
    AlphaSplit, ExpectationSource, NoiseModel, SigmaBound, Threshold, ThresholdMethod, DEFAULT_DRAWS,
};

/// Statistics at or below this are an exact fit. Only matters when `r = 0`
/// (noiseless data), where `Ψ̂ ≥ r` would otherwise always hold.
pub const NUMERICAL_ZERO: f64 = 1e-10;

/// How the instrument matrix `X = f(V)` is built from the covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstrumentSpec {
    /// Covariates used as they are.
    Covariates,
    /// `v_j, v_j², …, v_j^max_power` for every covariate `j`, grouped by covariate.
    Powers { max_power: u32 },
    /// One expression over the covariates per column.
    Expressions { columns: Vec<String> },
}

/// Builds and normalizes the instrument matrix.
pub fn build_instruments(
    spec: &InstrumentSpec,
    v: &Array2<f64>,
    covariate_names: &[String],
    scaling: ColumnScaling,
) -> Result<InstrumentMatrix> {
    let (n, k) = v.dim();
    if covariate_names.len() != k {
        return Err(Error::Dimension(format!("{} covariate names for {k} columns", covariate_names.len())));
    }
    let (x, names) = match spec {
        InstrumentSpec::Covariates => (v.clone(), covariate_names.to_vec()),
        InstrumentSpec::Powers { max_power } => {
            let d = *max_power as usize;
            if d == 0 {
                return Err(Error::InvalidArgument("max_power must be at least 1".into()));
            }
            let mut x = Array2::zeros((n, k * d));
            let mut names = Vec::with_capacity(k * d);
            for j in 0..k {
                for e in 1..=d {
                    names.push(if e == 1 { covariate_names[j].clone() } else { format!("{}^{e}", covariate_names[j]) });
                    for i in 0..n {
                        x[[i, j * d + e - 1]] = v[[i, j]].powi(e as i32);
                    }
                }
            }
            (x, names)
        }
        InstrumentSpec::Expressions { columns } => {
            if columns.is_empty() {
                return Err(Error::InvalidArgument("at least one instrument expression is required".into()));
            }
            let data: Vec<f64> = v.iter().copied().collect();
            let mut x = Array2::zeros((n, columns.len()));
            let mut scratch = TapeScratch::default();
            let mut col = vec![0.0; n];
            for (c, text) in columns.iter().enumerate() {
                let ast = parse_expression(text, &[] as &[String], covariate_names)?;
                let tape = Tape::compile(&ast);
                if k == 0 {
                    return Err(Error::InvalidArgument("instrument expressions need covariates".into()));
                }
                tape.eval_rows(&[], &data, &mut col, &mut scratch)?;
                x.column_mut(c).iter_mut().zip(&col).for_each(|(o, v)| *o = *v);
            }
            (x, columns.clone())
        }
    };
    normalize_columns(&InstrumentMatrix::with_names(x, names)?, scaling)
}

/// Noise assumption for the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    /// Gaussian with `σ` replaced by an upper confidence bound holding with
    /// probability `1 − κ`; the overall level becomes `α + κ`.
    UnknownGaussian { kappa: f64 },
    LogConcave { phi: f64 },
    Bounded { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestOptions {
    pub q: NormOrder,
    pub noise: NoiseSpec,
    pub split: AlphaSplit,
    /// `concentration`, `union_bound` or `min_of_both`; defaults to
    /// `min_of_both` for `q = ∞` with Gaussian noise, `concentration` otherwise.
    pub method: Option<ThresholdMethod>,
    pub draws: usize,
    pub seed: u64,
    /// Expectation term for non-Gaussian noise, estimated from `draws` samples.
    pub expectation: Option<f64>,
    pub solver: SolverOptions,
    pub execution: Execution,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            q: NormOrder::Inf,
            noise: NoiseSpec::Gaussian { sigma: 1.0 },
            split: AlphaSplit { alpha1: 0.049, alpha2: 0.001, alpha3: None },
            method: None,
            draws: DEFAULT_DRAWS,
            seed: 0,
            expectation: None,
            solver: SolverOptions::default(),
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Reject,
    FailToReject,
    /// `{θ : h(θ) ∈ Ω}` is empty, so there is nothing to test.
    HypothesisInfeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDiagnostics {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub q: NormOrder,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub verdict: Verdict,
    pub reject: bool,
    pub threshold: Threshold,
    /// Overall level, including `κ` when `σ` was bounded from the data.
    pub alpha: f64,
    pub split: AlphaSplit,
    pub q: NormOrder,
    pub method: ThresholdMethod,
    pub param_names: Vec<String>,
    pub solution: Option<SlackSolution>,
    pub sigma_bound: Option<SigmaBound>,
    pub infeasibility: Option<String>,
    pub diagnostics: PowerDiagnostics,
}

impl TestReport {
    pub fn psi(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.psi)
    }

    pub fn mu(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.mu)
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.solution.as_ref().map(|s| s.theta.as_slice())
    }

    pub fn r(&self) -> f64 {
        self.threshold.value
    }
}

/// Data and hypothesis shared by every test variant.
#[derive(Debug, Clone, Copy)]
pub struct TestInputs<'a> {
    pub model: &'a Model,
    pub covariates: &'a Array2<f64>,
    pub y: &'a [f64],
    pub instruments: &'a InstrumentMatrix,
    pub hypothesis: &'a HypothesisSpec,
}

impl TestInputs<'_> {
    fn slack_problem(&self, q: NormOrder, r: f64, solver: &SolverOptions) -> SlackProblem {
        SlackProblem {
            model: self.model.clone(),
            covariates: self.covariates.clone(),
            y: self.y.to_vec(),
            x: self.instruments.clone(),
            q,
            r,
            hypothesis: self.hypothesis.clone(),
            options: solver.clone(),
        }
    }

    fn diagnostics(&self, q: NormOrder) -> PowerDiagnostics {
        power_feasibility_check(
            self.model.param_names().len(),
            self.y.len(),
            self.hypothesis.m(),
            self.instruments.l(),
            q,
        )
    }
}

fn resolve_method(opts: &TestOptions) -> Result<ThresholdMethod> {
    let gaussian = matches!(opts.noise, NoiseSpec::Gaussian { .. } | NoiseSpec::UnknownGaussian { .. });
    let method = opts.method.unwrap_or(if opts.q.is_inf() && gaussian {
        ThresholdMethod::MinOfBoth
    } else {
        ThresholdMethod::Concentration
    });
    match method {
        ThresholdMethod::Concentration => Ok(method),
        ThresholdMethod::UnionBound | ThresholdMethod::MinOfBoth => {
            if !opts.q.is_inf() {
                Err(Error::Unsupported(format!("method {method:?} requires q = inf, got q = {}", opts.q)))
            } else if !gaussian {
                Err(Error::Unsupported(format!("method {method:?} requires Gaussian noise")))
            } else {
                Ok(method)
            }
        }
        _ => Err(Error::InvalidArgument(format!("method {method:?} is not available for run_test"))),
    }
}

/// The threshold `r` that `run_test` would use, plus the `σ` bound when one was needed.
pub fn test_threshold(x: &InstrumentMatrix, y: &[f64], opts: &TestOptions) -> Result<(Threshold, Option<SigmaBound>)> {
    let method = resolve_method(opts)?;
    opts.split.validate()?;
    let (noise, sigma_bound) = match opts.noise {
        NoiseSpec::Gaussian { sigma } => (NoiseModel::Gaussian { sigma }, None),
        NoiseSpec::UnknownGaussian { kappa } => {
            let b = sigma_upper_bound(y, kappa)?;
            (NoiseModel::Gaussian { sigma: b.bound }, Some(b))
        }
        NoiseSpec::LogConcave { phi } => (NoiseModel::LogConcave { phi }, None),
        NoiseSpec::Bounded { a, b } => (NoiseModel::Bounded { a, b }, None),
    };
    let source = match opts.expectation {
        Some(mean) => ExpectationSource::Supplied { mean, draws: opts.draws },
        None => ExpectationSource::MonteCarlo { draws: opts.draws, seed: opts.seed },
    };
    let alpha = opts.split.alpha1 + opts.split.alpha2;
    let sigma = match noise {
        NoiseModel::Gaussian { sigma } => sigma,
        _ => f64::NAN,
    };
    let split = AlphaSplit { alpha3: None, ..opts.split };
    let t = match method {
        ThresholdMethod::Concentration => concentration_threshold(x, opts.q, &noise, source, &split, opts.execution)?,
        ThresholdMethod::UnionBound => union_bound_threshold(x, opts.q, sigma, alpha)?,
        _ => min_threshold(
            concentration_threshold(x, opts.q, &noise, source, &split, opts.execution)?,
            union_bound_threshold(x, opts.q, sigma, alpha)?,
        ),
    };
    Ok((t, sigma_bound))
}

/// Runs the test at level `α = α1 + α2` (plus `κ` for unknown `σ`).
pub fn run_test(inputs: &TestInputs<'_>, opts: &TestOptions) -> Result<TestReport> {
    let (threshold, sigma_bound) = test_threshold(inputs.instruments, inputs.y, opts)?;
    let split = AlphaSplit { alpha3: None, ..opts.split };
    let mut report = run_test_with_threshold(inputs, opts.q, threshold, &split, &opts.solver)?;
    if let Some(b) = &sigma_bound {
        report.alpha += b.kappa;
    }
    report.sigma_bound = sigma_bound;
    Ok(report)
}

/// Decision step with a precomputed threshold, for repeated tests on a fixed design.
pub fn run_test_with_threshold(
    inputs: &TestInputs<'_>,
    q: NormOrder,
    threshold: Threshold,
    split: &AlphaSplit,
    solver: &SolverOptions,
) -> Result<TestReport> {
    let r = threshold.value;
    let prob = inputs.slack_problem(q, r, solver);
    let (verdict, solution, infeasibility) = match minimize_slack(&prob) {
        Ok(s) => {
            let v = if s.psi >= r && s.psi > NUMERICAL_ZERO { Verdict::Reject } else { Verdict::FailToReject };
            (v, Some(s), None)
        }
        Err(Error::InfeasibleConstraints(msg)) => (Verdict::HypothesisInfeasible, None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(TestReport {
        reject: verdict == Verdict::Reject,
        verdict,
        method: threshold.method,
        threshold,
        alpha: split.total(),
        split: *split,
        q,
        param_names: inputs.model.param_names(),
        solution,
        sigma_bound: None,
        infeasibility,
        diagnostics: inputs.diagnostics(q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub lower: f64,
    pub upper: f64,
    pub length: f64,
    pub level: f64,
}

/// `[μ̂, 2r + μ̂]` for the instrumented discrepancy between `θ*` and `θ̂`.
/// `None` when the hypothesis was infeasible.
pub fn confidence_region(report: &TestReport) -> Option<ConfidenceRegion> {
    let mu = report.mu()?;
    let r = report.r();
    Some(ConfidenceRegion { lower: mu, upper: 2.0 * r + mu, length: 2.0 * r, level: 1.0 - report.alpha })
}

/// Region for the vector-slack formulation: the discrepancy vector lies in
/// the `q`-ball of radius `2r` around `μ̂`, and its `q̃`-norm is at least `‖μ̂‖_{q̃}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorConfidenceRegion {
    pub center: Vec<f64>,
    pub radius: f64,
    pub q: NormOrder,
    pub q_tilde: NormOrder,
    pub lower_bound: f64,
    pub theta: Vec<f64>,
    pub level: f64,
}

pub fn vector_confidence_region(
    inputs: &TestInputs<'_>,
    threshold: &Threshold,
    q: NormOrder,
    q_tilde: NormOrder,
    level: f64,
    solver: &SolverOptions,
) -> Result<VectorConfidenceRegion> {
    let prob = inputs.slack_problem(q, threshold.value, solver);
    let s = minimize_slack_vector(&prob, q_tilde)?;
    Ok(VectorConfidenceRegion {
        center: s.mu,
        radius: 2.0 * threshold.value,
        q,
        q_tilde,
        lower_bound: s.mu_norm,
        theta: s.theta,
        level,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundedTestOptions {
    pub q: NormOrder,
    pub split: AlphaSplit,
    pub draws: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    pub execution: Execution,
}

impl Default for BoundedTestOptions {
    fn default() -> Self {
        Self {
            q: NormOrder::Inf,
            split: AlphaSplit { alpha1: 0.03, alpha2: 0.01, alpha3: Some(0.01) },
            draws: DEFAULT_DRAWS,
            seed: 0,
            solver: SolverOptions::default(),
            execution: Execution::Parallel,
        }
    }
}

/// Test for responses in `[0, 1]` with the symmetrized threshold.
pub fn bounded_response_test(
    inputs: &TestInputs<'_>,
    opts: &BoundedTestOptions,
) -> Result<(TestReport, Option<ConfidenceRegion>)> {
    let threshold =
        rademacher_threshold(inputs.instruments, inputs.y, opts.q, opts.draws, &opts.split, opts.seed, opts.execution)?;
    let report = run_test_with_threshold(inputs, opts.q, threshold, &opts.split, &opts.solver)?;
    let ci = confidence_region(&report);
    Ok((report, ci))
}

/// Dimension conditions under which the separation needed for power is
/// likely unattainable.
pub fn power_feasibility_check(p: usize, n: usize, m: usize, l: usize, q: NormOrder) -> PowerDiagnostics {
    let mut warnings = Vec::new();
    if p > n {
        let gap = p - n;
        if m <= gap {
            warnings.push(format!(
                "separation likely unattainable: m = {m} <= p - n = {gap}, so the restrictions leave free directions in θ"
            ));
        } else if q.is_inf() && m < p && l + m <= p {
            warnings.push(format!(
                "separation likely unattainable: L + m = {} <= p = {p} with p - n < m < p",
                l + m
            ));
        }
    }
    PowerDiagnostics { p, n, m, l, q, warnings }
}

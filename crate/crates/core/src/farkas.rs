//! Feasibility of `{θ ≥ 0 : Aθ = b}`, exactly through Farkas certificates and
//! under Gaussian noise in part of `b` through the slack test.

use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{run_test, NoiseSpec, TestInputs, TestOptions, TestReport, Verdict};
use crate::lp::{lp_solve_with, LpOptions, LpOutcome, StandardLp};
use crate::norms::{normalize_columns, ColumnScaling, InstrumentMatrix};
use crate::solver::{Constraint, ConstraintFn, HypothesisSpec, Model};
use crate::thresholds::Threshold;

/// Singular values below this (relative to the largest) count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FarkasResult {
    /// `Aθ = b`, `θ ≥ 0`.
    Feasible { theta: Vec<f64> },
    /// `πᵀA ≥ 0`, `πᵀb < 0`.
    Infeasible { pi: Vec<f64> },
}

fn row_major(a: &Array2<f64>) -> Vec<f64> {
    a.rows().into_iter().flat_map(|r| r.to_vec()).collect()
}

pub fn farkas_certificate(a: &Array2<f64>, b: &[f64]) -> Result<FarkasResult> {
    farkas_certificate_with(a, b, &LpOptions::default())
}

pub fn farkas_certificate_with(a: &Array2<f64>, b: &[f64], opts: &LpOptions) -> Result<FarkasResult> {
    let (d, p) = a.dim();
    let lp = StandardLp::feasibility(row_major(a), d, p, b.to_vec())?;
    match lp_solve_with(&lp, opts)? {
        LpOutcome::Optimal { x, .. } => {
            let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let res = lp.residual(&x);
            if res > 1e-8 * scale {
                return Err(Error::Numerical(format!("feasible point has residual {res:.3e}")));
            }
            Ok(FarkasResult::Feasible { theta: x })
        }
        LpOutcome::Infeasible { certificate } => {
            let (ya, yb) = lp.dual_products(&certificate);
            if ya.iter().any(|v| *v < -1e-8) || yb >= 0.0 {
                return Err(Error::Numerical(format!(
                    "certificate check failed: min πᵀA = {:.3e}, πᵀb = {yb:.3e}",
                    ya.iter().cloned().fold(f64::INFINITY, f64::min)
                )));
            }
            Ok(FarkasResult::Infeasible { pi: certificate })
        }
        LpOutcome::Unbounded { .. } => Err(Error::Numerical("feasibility LP reported unbounded".into())),
    }
}

/// `Aθ = b` where only `Y_i = b_i + W_i` is observed for the first `n` rows
/// and the remaining rows are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyLp {
    /// `d × p`, noisy rows first.
    pub a: Array2<f64>,
    /// Observed targets of the first `n` rows.
    pub y: Vec<f64>,
    /// Exact targets of rows `n..d`.
    pub exact_b: Vec<f64>,
    pub sigma: f64,
    /// Instruments for the noisy rows (`n × L`); defaults to the rows of `A`.
    pub instruments: Option<Array2<f64>>,
}

impl NoisyLp {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, p) = self.a.dim();
        if self.n() == 0 {
            return Err(Error::InvalidArgument("at least one noisy row is required".into()));
        }
        if self.n() + self.exact_b.len() != d {
            return Err(Error::Dimension(format!(
                "{} noisy + {} exact targets for {d} rows",
                self.n(),
                self.exact_b.len()
            )));
        }
        if p == 0 {
            return Err(Error::Dimension("A has no columns".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(x) = &self.instruments {
            if x.nrows() != self.n() {
                return Err(Error::Dimension(format!("instruments have {} rows, expected {}", x.nrows(), self.n())));
            }
        }
        Ok(())
    }

    fn noisy_rows(&self) -> Array2<f64> {
        self.a.slice(ndarray::s![..self.n(), ..]).to_owned()
    }

    fn exact_rows(&self) -> Array2<f64> {
        self.a.slice(ndarray::s![self.n().., ..]).to_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityDecision {
    FeasibleNotRejected,
    InfeasibleRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub decision: FeasibilityDecision,
    pub psi: Option<f64>,
    pub threshold: Option<Threshold>,
    pub confidence: f64,
    /// `θ̂ ≥ 0` satisfying the exact rows.
    pub witness: Option<Vec<f64>>,
    /// Certificate for the exact subsystem when it alone is infeasible.
    pub exact_certificate: Option<Vec<f64>>,
    pub report: Option<TestReport>,
    pub warnings: Vec<String>,
}

fn rank(a: &Array2<f64>) -> usize {
    let (d, p) = a.dim();
    if d == 0 || p == 0 {
        return 0;
    }
    let m = DMatrix::from_row_slice(d, p, &row_major(a));
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0f64, f64::max);
    sv.iter().filter(|s| **s > RANK_TOL * top.max(f64::MIN_POSITIVE)).count()
}

/// Keeps the columns of `x` that are not identically zero.
fn drop_zero_columns(x: &Array2<f64>) -> Array2<f64> {
    let keep: Vec<usize> = (0..x.ncols()).filter(|&j| x.column(j).iter().any(|v| *v != 0.0)).collect();
    x.select(ndarray::Axis(1), &keep)
}

/// Tests `H0: {θ ≥ 0 : Aθ = b}` is nonempty. The threshold uses Gaussian
/// noise with the system's `σ`; every other setting comes from `opts`.
pub fn noisy_feasibility_test(nlp: &NoisyLp, opts: &TestOptions) -> Result<FeasibilityVerdict> {
    nlp.validate()?;
    let (d, p) = nlp.a.dim();
    let n = nlp.n();
    let mut warnings = Vec::new();
    if d > p {
        warnings.push(format!("A has more rows than columns (d = {d} > p = {p})"));
    }
    let rk = rank(&nlp.a);
    if rk < d {
        warnings.push(format!("rows of A are linearly dependent (rank {rk} < d = {d})"));
    }
    let confidence = 1.0 - (opts.split.alpha1 + opts.split.alpha2);

    let exact = nlp.exact_rows();
    if exact.nrows() > 0 {
        if let FarkasResult::Infeasible { pi } = farkas_certificate(&exact, &nlp.exact_b)? {
            return Ok(FeasibilityVerdict {
                decision: FeasibilityDecision::InfeasibleRejected,
                psi: None,
                threshold: None,
                confidence: 1.0,
                witness: None,
                exact_certificate: Some(pi),
                report: None,
                warnings,
            });
        }
    }

    let names: Vec<String> = (1..=p).map(|j| format!("theta{j}")).collect();
    let design = nlp.noisy_rows();
    let model = Model::Linear { design: design.clone(), names };
    let constraints = exact
        .rows()
        .into_iter()
        .zip(&nlp.exact_b)
        .enumerate()
        .map(|(k, (row, b))| Constraint {
            label: format!("exact_row_{}", n + k + 1),
            function: ConstraintFn::Linear { coeffs: row.to_vec(), offset: 0.0 },
            lower: *b,
            upper: *b,
        })
        .collect();
    let hypothesis = HypothesisSpec::new(constraints)?;
    let raw = drop_zero_columns(nlp.instruments.as_ref().unwrap_or(&design));
    if raw.ncols() == 0 {
        return Err(Error::ZeroColumn("every instrument column is zero".into()));
    }
    let x = normalize_columns(&InstrumentMatrix::new(raw)?, ColumnScaling::MeanSquare)?;
    let covariates = Array2::zeros((n, 0));
    let mut opts = opts.clone();
    opts.noise = NoiseSpec::Gaussian { sigma: nlp.sigma };
    opts.solver.lower_bounds = Some(vec![0.0; p]);
    if opts.solver.upper_bounds.as_ref().is_some_and(|u| u.len() != p) {
        opts.solver.upper_bounds = None;
    }
    let inputs = TestInputs { model: &model, covariates: &covariates, y: &nlp.y, instruments: &x, hypothesis: &hypothesis };
    let report = run_test(&inputs, &opts)?;
    let decision = match report.verdict {
        Verdict::FailToReject => FeasibilityDecision::FeasibleNotRejected,
        Verdict::Reject | Verdict::HypothesisInfeasible => FeasibilityDecision::InfeasibleRejected,
    };
    Ok(FeasibilityVerdict {
        decision,
        psi: report.psi(),
        threshold: Some(report.threshold.clone()),
        confidence,
        witness: report.theta().map(<[f64]>::to_vec),
        exact_certificate: None,
        report: Some(report),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn trivial_examples() {
        let a = array![[1.0, 1.0]];
        match farkas_certificate(&a, &[1.0]).unwrap() {
            FarkasResult::Feasible { theta } => {
                assert!((theta[0] + theta[1] - 1.0).abs() < 1e-12);
                assert!(theta.iter().all(|t| *t >= 0.0));
            }
            r => panic!("{r:?}"),
        }
        match farkas_certificate(&a, &[-1.0]).unwrap() {
            FarkasResult::Infeasible { pi } => {
                assert_eq!(pi.len(), 1);
                assert!(pi[0] > 0.0);
            }
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn rank_detects_dependence() {
        assert_eq!(rank(&array![[1.0, 2.0], [2.0, 4.0]]), 1);
        assert_eq!(rank(&array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), 2);
    }

    #[test]
    fn exact_subsystem_infeasible_short_circuits() {
        let nlp = NoisyLp {
            a: array![[1.0, 0.0], [1.0, 1.0]],
            y: vec![1.0],
            exact_b: vec![-2.0],
            sigma: 0.1,
            instruments: None,
        };
        let v = noisy_feasibility_test(&nlp, &TestOptions { draws: 100, ..Default::default() }).unwrap();
        assert_eq!(v.decision, FeasibilityDecision::InfeasibleRejected);
        assert!(v.exact_certificate.is_some());
    }

    #[test]
    fn nearly_noiseless_feasible_system() {
        let nlp = NoisyLp {
            a: array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            y: vec![1.0, 1.0],
            exact_b: vec![0.5],
            sigma: 1e-9,
            instruments: None,
        };
        let v = noisy_feasibility_test(&nlp, &TestOptions { draws: 100, ..Default::default() }).unwrap();
        assert_eq!(v.decision, FeasibilityDecision::FeasibleNotRejected);
        let w = v.witness.unwrap();
        assert!((w[2] - 0.5).abs() < 1e-8);
    }
}

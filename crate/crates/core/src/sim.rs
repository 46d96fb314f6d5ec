//! Monte-Carlo study of the test on the exponential-index regression
//! `Y_i = Σ_l v_il α_l + γ exp(Σ_l v_il τ_l) + W_i` with hypotheses on the
//! average partial effects.

use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, mean_and_std_error, Execution};
use crate::inference::{
    build_instruments, run_test_with_threshold, test_threshold, InstrumentSpec, NoiseSpec, NUMERICAL_ZERO, TestInputs, TestOptions,
    Verdict,
};
use crate::norms::{lq_norm, ColumnScaling, InstrumentMatrix, NormOrder};
use crate::rng::{derive_seed, domain, stream};
use crate::solver::{HypothesisSpec, Model, SolverOptions};
use crate::thresholds::{mc_gaussian_expectation, separation_delta, AlphaSplit, NoiseModel, ThresholdMethod};

/// Seed of the frozen covariate design.
pub const DESIGN_SEED: u64 = 20_240_601;

/// `n × k` matrix of i.i.d. `N(0, Σ)` rows with `Σ_jj = 1`, `Σ_jj' = ρ`.
pub fn generate_design(n: usize, k: usize, rho: f64, seed: u64) -> Result<Array2<f64>> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("design needs n >= 1 and k >= 1".into()));
    }
    let sigma = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho });
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("equicorrelation matrix with rho = {rho} is not positive definite")))?;
    let lower = chol.l();
    let mut v = Array2::zeros((n, k));
    for i in 0..n {
        let mut rng = stream(seed, domain::DESIGN, i as u64);
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        for j in 0..k {
            v[[i, j]] = (0..=j).map(|m| lower[(j, m)] * z[m]).sum();
        }
    }
    Ok(v)
}

/// Coefficients `(α, γ, τ)` of the exponential-index model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub tau: Vec<f64>,
}

impl Coefficients {
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// Parameter vector in model order `(α_1..α_k, γ, τ_1..τ_k)`.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.alpha.clone();
        t.push(self.gamma);
        t.extend_from_slice(&self.tau);
        t
    }

    pub fn mean(&self, v: &Array2<f64>) -> Vec<f64> {
        v.rows()
            .into_iter()
            .map(|row| {
                let lin: f64 = row.iter().zip(&self.alpha).map(|(v, a)| v * a).sum();
                let idx: f64 = row.iter().zip(&self.tau).map(|(v, t)| v * t).sum();
                lin + self.gamma * idx.exp()
            })
            .collect()
    }
}

/// Average partial effect of covariate `l` (0-based).
pub fn ape(coef: &Coefficients, v: &Array2<f64>, l: usize) -> Result<f64> {
    if l >= coef.k() || v.ncols() != coef.k() || coef.tau.len() != coef.k() {
        return Err(Error::Dimension(format!("covariate {l} out of range for k = {}", coef.k())));
    }
    let n = v.nrows() as f64;
    let m: f64 = v
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&coef.tau).map(|(v, t)| v * t).sum::<f64>().exp())
        .sum::<f64>()
        / n;
    Ok(coef.alpha[l] + coef.gamma * coef.tau[l] * m)
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|l| format!("{prefix}{l}")).collect()
}

fn index_text(k: usize) -> String {
    (1..=k).map(|l| format!("t{l}*v{l}")).collect::<Vec<_>>().join(" + ")
}

/// Model expression, parameter names and covariate names for `k` covariates.
pub fn model_spec(k: usize) -> (String, Vec<String>, Vec<String>) {
    let lin = (1..=k).map(|l| format!("a{l}*v{l}")).collect::<Vec<_>>().join(" + ");
    let text = format!("{lin} + g*exp({})", index_text(k));
    let mut params = names("a", k);
    params.push("g".into());
    params.extend(names("t", k));
    (text, params, names("v", k))
}

/// APE constraint expression for covariate `l` (1-based).
pub fn ape_expression(k: usize, l: usize) -> String {
    format!("a{l} + g*t{l}*mean(exp({}))", index_text(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub name: String,
    pub n: usize,
    pub coefficients: Coefficients,
    pub sigma: f64,
    pub rho: f64,
    /// Constrained covariates, 1-based.
    pub constrained: Vec<usize>,
    pub interval: [f64; 2],
    /// Instruments are `v_j, …, v_j^max_power` for every covariate.
    pub max_power: u32,
    pub scaling: ColumnScaling,
    pub reps: usize,
    pub draws: usize,
    pub split: AlphaSplit,
    pub beta: AlphaSplit,
    pub design_seed: u64,
    pub seed: u64,
    pub solver: SolverOptions,
    pub execution: Execution,
    /// Wall-clock budget. Reps not started when it runs out are skipped,
    /// which makes the result depend on timing.
    pub time_limit_secs: Option<f64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            n: 30,
            coefficients: Coefficients { alpha: vec![0.657], gamma: 1.0, tau: vec![0.657] },
            sigma: 0.5,
            rho: 0.5,
            constrained: vec![1],
            interval: [0.0, 0.8],
            max_power: 4,
            scaling: ColumnScaling::UnitLength,
            reps: 100,
            draws: 10_000,
            split: AlphaSplit { alpha1: 0.049, alpha2: 0.001, alpha3: None },
            beta: AlphaSplit { alpha1: 0.001, alpha2: 0.049, alpha3: None },
            design_seed: DESIGN_SEED,
            seed: 1,
            solver: SolverOptions { starts: 16, start_box: [-1.0, 1.0], start_batch: 1, ..SolverOptions::default() },
            execution: Execution::Parallel,
            time_limit_secs: None,
        }
    }
}

impl StudyConfig {
    /// Low-dimensional design: `k = 1`, `M = {1}`, `L ∈ {3, 4}`.
    pub fn table1(n: usize, l: usize) -> Self {
        let c = if n == 30 { 0.657 } else { 0.533 };
        Self {
            name: format!("table1_n{n}_L{l}"),
            n,
            coefficients: Coefficients { alpha: vec![c], gamma: 1.0, tau: vec![c] },
            max_power: l as u32,
            ..Self::default()
        }
    }

    /// High-dimensional design: `k = 15`, `p = 31`, `M = {1..15}`, `L ∈ {45, 60}`.
    pub fn table2(n: usize, l: usize) -> Self {
        let c = if n == 30 { 0.194 } else { 0.172 };
        Self {
            name: format!("table2_n{n}_L{l}"),
            n,
            coefficients: Coefficients { alpha: vec![c; 15], gamma: 1.0, tau: vec![c; 15] },
            constrained: (1..=15).collect(),
            max_power: (l / 15) as u32,
            ..Self::default()
        }
    }

    pub fn k(&self) -> usize {
        self.coefficients.k()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.coefficients.tau.len() != k {
            return Err(Error::InvalidArgument("alpha and tau must have the same nonzero length".into()));
        }
        if self.n < 2 || self.reps == 0 || self.draws == 0 || self.max_power == 0 {
            return Err(Error::InvalidArgument("n >= 2, reps >= 1, draws >= 1 and max_power >= 1 are required".into()));
        }
        if self.constrained.is_empty() || self.constrained.iter().any(|&l| l == 0 || l > k) {
            return Err(Error::InvalidArgument(format!("constrained indices must lie in 1..={k}")));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if !(self.interval[0] <= self.interval[1]) {
            return Err(Error::InvalidArgument("interval must satisfy lower <= upper".into()));
        }
        self.split.validate()?;
        self.beta.validate()
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub verdict: Option<Verdict>,
    pub psi: Option<f64>,
    pub mu: Option<f64>,
    pub r: f64,
    /// `‖(1/n) Σ_i X_i [g(V_i; θ*) − g(V_i; θ̂)]‖_∞`.
    pub separation: Option<f64>,
    pub covered: Option<bool>,
    pub starts_run: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub p: usize,
    pub l: usize,
    /// Metric i: true APE for each constrained covariate.
    pub ape: Vec<f64>,
    pub null_true: bool,
    /// Metric ii: mean separation over completed reps.
    pub mean_separation: f64,
    /// Metric iii: mean `2r`.
    pub mean_two_r: f64,
    /// Metric iv.
    pub coverage: f64,
    /// Metric v.
    pub rejection: f64,
    pub rejection_std_error: f64,
    pub completed: usize,
    pub failed: usize,
    /// Reps skipped because the time limit ran out.
    pub skipped: usize,
    /// Separation `δ` needed for power `1 − β` at the design.
    pub delta: f64,
    pub records: Vec<RepRecord>,
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub l: usize,
    pub ape: f64,
    pub separation: f64,
    pub two_r: f64,
    pub coverage: f64,
    pub rejection: f64,
    pub reps: usize,
    pub failed: usize,
}

impl StudyResult {
    pub fn table_row(&self) -> TableRow {
        TableRow {
            name: self.config.name.clone(),
            n: self.config.n,
            p: self.p,
            l: self.l,
            ape: self.ape.first().copied().unwrap_or(f64::NAN),
            separation: self.mean_separation,
            two_r: self.mean_two_r,
            coverage: self.coverage,
            rejection: self.rejection,
            reps: self.config.reps,
            failed: self.failed,
        }
    }
}

struct Fixture {
    v: Array2<f64>,
    x: InstrumentMatrix,
    model: Model,
    hypothesis: HypothesisSpec,
    mean: Vec<f64>,
}

fn fixture(cfg: &StudyConfig) -> Result<Fixture> {
    let k = cfg.k();
    let v = generate_design(cfg.n, k, cfg.rho, cfg.design_seed)?;
    let (text, params, covs) = model_spec(k);
    let model = Model::parse(&text, &params, &covs)?;
    let items: Vec<(String, f64, f64)> = cfg
        .constrained
        .iter()
        .map(|&l| (ape_expression(k, l), cfg.interval[0], cfg.interval[1]))
        .collect();
    let items_ref: Vec<(&str, f64, f64)> = items.iter().map(|(s, a, b)| (s.as_str(), *a, *b)).collect();
    let hypothesis = HypothesisSpec::parse(&items_ref, &params, &covs)?;
    let x = build_instruments(&InstrumentSpec::Powers { max_power: cfg.max_power }, &v, &covs, cfg.scaling)?;
    let mean = cfg.coefficients.mean(&v);
    Ok(Fixture { v, x, model, hypothesis, mean })
}

fn separation(x: &InstrumentMatrix, mean: &[f64], fitted: &[f64]) -> f64 {
    let d: Vec<f64> = mean.iter().zip(fitted).map(|(a, b)| a - b).collect();
    let mut m = vec![0.0; x.l()];
    x.moments(&d, &mut m);
    lq_norm(&m, NormOrder::Inf)
}

fn run_rep(cfg: &StudyConfig, fx: &Fixture, rep: usize, inner: Execution) -> RepRecord {
    let mut rng = stream(cfg.seed, domain::NOISE, rep as u64);
    let y: Vec<f64> = fx.mean.iter().map(|m| m + cfg.sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let inputs = TestInputs { model: &fx.model, covariates: &fx.v, y: &y, instruments: &fx.x, hypothesis: &fx.hypothesis };
    let opts = TestOptions {
        q: NormOrder::Inf,
        noise: NoiseSpec::Gaussian { sigma: cfg.sigma },
        split: cfg.split,
        method: Some(ThresholdMethod::MinOfBoth),
        draws: cfg.draws,
        seed: derive_seed(cfg.seed, domain::GAUSSIAN_MC, rep as u64),
        expectation: None,
        solver: SolverOptions {
            seed: derive_seed(cfg.seed, domain::MULTISTART, rep as u64),
            execution: inner,
            ..cfg.solver.clone()
        },
        execution: inner,
    };
    let mut record = RepRecord {
        rep,
        verdict: None,
        psi: None,
        mu: None,
        r: f64::NAN,
        separation: None,
        covered: None,
        starts_run: 0,
        error: None,
    };
    let threshold = match test_threshold(&fx.x, &y, &opts) {
        Ok((t, _)) => t,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.r = threshold.value;
    let report = match run_test_with_threshold(&inputs, opts.q, threshold, &opts.split, &opts.solver) {
        Ok(rep) => rep,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.verdict = Some(report.verdict);
    if let Some(s) = &report.solution {
        record.psi = Some(s.psi);
        record.mu = Some(s.mu);
        record.starts_run = s.starts_run;
        let fitted = crate::solver::SlackProblem {
            model: fx.model.clone(),
            covariates: fx.v.clone(),
            y: y.clone(),
            x: fx.x.clone(),
            q: NormOrder::Inf,
            r: record.r,
            hypothesis: fx.hypothesis.clone(),
            options: SolverOptions::default(),
        }
        .fitted(&s.theta);
        match fitted {
            Ok(f) => {
                let sep = separation(&fx.x, &fx.mean, &f);
                record.separation = Some(sep);
                record.covered = Some(s.mu - NUMERICAL_ZERO <= sep && sep <= 2.0 * record.r + s.mu + NUMERICAL_ZERO);
            }
            Err(e) => record.error = Some(e.to_string()),
        }
    }
    record
}

pub fn simulate_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let fx = fixture(cfg)?;
    let k = cfg.k();
    let apes = cfg
        .constrained
        .iter()
        .map(|&l| ape(&cfg.coefficients, &fx.v, l - 1))
        .collect::<Result<Vec<_>>>()?;
    let null_true = apes.iter().all(|a| *a >= cfg.interval[0] && *a <= cfg.interval[1]);

    let inner = if cfg.execution.is_parallel() { Execution::Sequential } else { cfg.execution };
    let start = Instant::now();
    let records = map_indexed(cfg.execution, cfg.reps, |rep| {
        if cfg.time_limit_secs.is_some_and(|t| start.elapsed().as_secs_f64() > t) {
            return None;
        }
        Some(run_rep(cfg, &fx, rep, inner))
    });
    let skipped = records.iter().filter(|r| r.is_none()).count();
    let records: Vec<RepRecord> = records.into_iter().flatten().collect();

    let done: Vec<&RepRecord> = records.iter().filter(|r| r.verdict.is_some() && r.error.is_none()).collect();
    let failed = records.len() - done.len();
    let frac = |f: &dyn Fn(&RepRecord) -> bool| {
        if done.is_empty() {
            f64::NAN
        } else {
            done.iter().filter(|r| f(r)).count() as f64 / done.len() as f64
        }
    };
    let rejects: Vec<f64> = done.iter().map(|r| if r.verdict == Some(Verdict::Reject) { 1.0 } else { 0.0 }).collect();
    let (rejection, rejection_std_error) = mean_and_std_error(&rejects);
    let seps: Vec<f64> = done.iter().filter_map(|r| r.separation).collect();
    let two_r: Vec<f64> = records.iter().filter(|r| r.r.is_finite()).map(|r| 2.0 * r.r).collect();

    let noise = NoiseModel::Gaussian { sigma: cfg.sigma };
    let est = mc_gaussian_expectation(&fx.x, NormOrder::Inf, cfg.sigma, cfg.draws, cfg.seed, cfg.execution)?;
    let delta = separation_delta(&fx.x, NormOrder::Inf, &noise, cfg.draws, &cfg.split, &cfg.beta, est.mean)?.value;

    Ok(StudyResult {
        p: 2 * k + 1,
        l: fx.x.l(),
        ape: apes,
        null_true,
        mean_separation: mean_and_std_error(&seps).0,
        mean_two_r: mean_and_std_error(&two_r).0,
        coverage: frac(&|r| r.covered == Some(true)),
        rejection: if done.is_empty() { f64::NAN } else { rejection },
        rejection_std_error,
        completed: done.len(),
        failed,
        skipped,
        delta,
        records,
        config: cfg.clone(),
    })
}

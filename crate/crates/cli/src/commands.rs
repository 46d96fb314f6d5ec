use std::path::{Path, PathBuf};

use anyhow::Result;
use feastest_core::exec::Execution;
use feastest_core::farkas::{farkas_certificate, noisy_feasibility_test, FarkasResult, FeasibilityVerdict, NoisyLp};
use feastest_core::inference::{
    bounded_response_test, build_instruments, confidence_region, power_feasibility_check, run_test, test_threshold,
    vector_confidence_region, ConfidenceRegion, NoiseSpec, PowerDiagnostics, TestInputs, TestReport,
    VectorConfidenceRegion,
};
use feastest_core::norms::{normalize_columns, ColumnScaling, InstrumentMatrix, NormOrder};
use feastest_core::sim::{generate_design, simulate_study, StudyConfig, TableRow};
use feastest_core::solver::{HypothesisSpec, Model};
use feastest_core::thresholds::{
    gaussian_max_bounds, mc_gaussian_expectation, separation_delta, McEstimate, NoiseModel, SeparationBound,
    Threshold, ThresholdMethod,
};
use ndarray::{Array2, Axis};
use serde::Serialize;

use crate::config::{
    base_dir, load, preset, resolve, seed_override, BoundedConfig, DataConfig, DesignSource, DiagnoseConfig,
    FarkasConfig, ProblemConfig, TestConfig, ThresholdConfig,
};
use crate::data::{read_table, Table};
use crate::failure::{fail, Classify, CoreResult, Kind};
use crate::report::{ensure_dir, write_json, Envelope};

struct Loaded {
    path: PathBuf,
    table: Table,
    v: Array2<f64>,
    y: Vec<f64>,
}

fn load_data(data: &DataConfig, base: &Path) -> Result<Loaded> {
    let path = resolve(base, &data.path);
    let table = read_table(&path)?;
    let v = table.select(&data.covariates, &path)?;
    let y = table.column(&data.response, &path)?;
    Ok(Loaded { path, table, v, y })
}

struct Problem {
    data: Loaded,
    model: Model,
    x: InstrumentMatrix,
    hypothesis: HypothesisSpec,
}

impl Problem {
    fn build<O>(cfg: &ProblemConfig<O>, base: &Path) -> Result<Self> {
        let data = load_data(&cfg.data, base)?;
        let model = Model::parse(&cfg.model, &cfg.params, &cfg.data.covariates).core()?;
        if cfg.hypothesis.is_empty() {
            return Err(fail(Kind::Config, "hypothesis needs at least one constraint"));
        }
        let items: Vec<(&str, f64, f64)> = cfg
            .hypothesis
            .iter()
            .map(|c| (c.expr.as_str(), c.lower.unwrap_or(f64::NEG_INFINITY), c.upper.unwrap_or(f64::INFINITY)))
            .collect();
        let hypothesis = HypothesisSpec::parse(&items, &cfg.params, &cfg.data.covariates).core()?;
        let x = build_instruments(&cfg.instruments, &data.v, &cfg.data.covariates, cfg.scaling).core()?;
        Ok(Self { data, model, x, hypothesis })
    }

    fn inputs(&self) -> TestInputs<'_> {
        TestInputs {
            model: &self.model,
            covariates: &self.data.v,
            y: &self.data.y,
            instruments: &self.x,
            hypothesis: &self.hypothesis,
        }
    }
}

fn print_report(report: &TestReport, ci: Option<&ConfidenceRegion>) {
    println!("verdict: {}", verdict_text(report));
    if let (Some(psi), Some(mu)) = (report.psi(), report.mu()) {
        println!("statistic: {psi:.6}");
        println!("threshold r: {:.6} ({:?})", report.r(), report.method);
        println!("slack mu: {mu:.6}");
    }
    if let Some(msg) = &report.infeasibility {
        println!("hypothesis set is empty: {msg}");
    }
    if let Some(ci) = ci {
        println!("confidence interval ({:.3}): [{:.6}, {:.6}]", ci.level, ci.lower, ci.upper);
    }
    for w in &report.diagnostics.warnings {
        println!("warning: {w}");
    }
}

fn verdict_text(report: &TestReport) -> &'static str {
    match report.verdict {
        feastest_core::inference::Verdict::Reject => "reject",
        feastest_core::inference::Verdict::FailToReject => "fail-to-reject",
        feastest_core::inference::Verdict::HypothesisInfeasible => "hypothesis-infeasible",
    }
}

fn written(path: &Path) {
    println!("wrote {}", path.display());
}

#[derive(Serialize)]
struct TestOutput {
    decision: &'static str,
    report: TestReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence_region: Option<ConfidenceRegion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vector_region: Option<VectorConfidenceRegion>,
}

/// `test` and `ci`: the latter adds the confidence regions.
pub fn test(command: &str, config_path: &Path, out: &Path) -> Result<()> {
    let mut cfg: TestConfig = load(config_path)?;
    if let Some(seed) = seed_override()? {
        cfg.options.seed = seed;
    }
    let with_ci = command == "ci";
    if cfg.q_tilde.is_some() && !with_ci {
        return Err(fail(Kind::Config, "q_tilde is only used by the ci command"));
    }
    let problem = Problem::build(&cfg, &base_dir(config_path))?;
    let report = run_test(&problem.inputs(), &cfg.options).core()?;
    let ci = if with_ci { confidence_region(&report) } else { None };
    let vector_region = match (with_ci, cfg.q_tilde) {
        (true, Some(q_tilde)) if report.solution.is_some() => Some(
            vector_confidence_region(
                &problem.inputs(),
                &report.threshold,
                cfg.options.q,
                q_tilde,
                1.0 - report.alpha,
                &cfg.options.solver,
            )
            .core()?,
        ),
        _ => None,
    };
    print_report(&report, ci.as_ref());
    if let Some(v) = &vector_region {
        println!("vector slack lower bound ({}): {:.6}, radius {:.6}", v.q_tilde, v.lower_bound, v.radius);
    }
    let output = TestOutput { decision: verdict_text(&report), report, confidence_region: ci, vector_region };
    ensure_dir(out)?;
    let env = Envelope::new(command, &cfg, &output)?
        .seed("threshold", cfg.options.seed)
        .seed("multistart", cfg.options.solver.seed)
        .input(&problem.data.path, &problem.data.table.sha256);
    written(&write_json(out, "report.json", &env)?);
    Ok(())
}

pub fn bounded_test(config_path: &Path, out: &Path) -> Result<()> {
    let mut cfg: BoundedConfig = load(config_path)?;
    if let Some(seed) = seed_override()? {
        cfg.options.seed = seed;
    }
    if cfg.q_tilde.is_some() {
        return Err(fail(Kind::Config, "q_tilde is only used by the ci command"));
    }
    let problem = Problem::build(&cfg, &base_dir(config_path))?;
    if let Some(y) = problem.data.y.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(fail(Kind::Data, format!("responses must lie in [0, 1] for bounded-test, found {y}")));
    }
    let (report, ci) = bounded_response_test(&problem.inputs(), &cfg.options).core()?;
    print_report(&report, ci.as_ref());
    let output = TestOutput { decision: verdict_text(&report), report, confidence_region: ci, vector_region: None };
    ensure_dir(out)?;
    let env = Envelope::new("bounded-test", &cfg, &output)?
        .seed("threshold", cfg.options.seed)
        .seed("multistart", cfg.options.solver.seed)
        .input(&problem.data.path, &problem.data.table.sha256);
    written(&write_json(out, "report.json", &env)?);
    Ok(())
}

#[derive(Serialize)]
struct ThresholdOutput {
    threshold: Threshold,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_bound: Option<feastest_core::thresholds::SigmaBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    separation: Option<SeparationBound>,
}

pub fn threshold(config_path: &Path, out: &Path) -> Result<()> {
    let mut cfg: ThresholdConfig = load(config_path)?;
    if let Some(seed) = seed_override()? {
        cfg.options.seed = seed;
    }
    let data = load_data(&cfg.data, &base_dir(config_path))?;
    let x = build_instruments(&cfg.instruments, &data.v, &cfg.data.covariates, cfg.scaling).core()?;
    let (t, sigma_bound) = test_threshold(&x, &data.y, &cfg.options).core()?;
    let separation = match &cfg.beta {
        None => None,
        Some(beta) => {
            let noise = match cfg.options.noise {
                NoiseSpec::Gaussian { sigma } => NoiseModel::Gaussian { sigma },
                NoiseSpec::UnknownGaussian { .. } => {
                    NoiseModel::Gaussian { sigma: sigma_bound.as_ref().map_or(f64::NAN, |b| b.bound) }
                }
                NoiseSpec::LogConcave { phi } => NoiseModel::LogConcave { phi },
                NoiseSpec::Bounded { a, b } => NoiseModel::Bounded { a, b },
            };
            let mc_mean = std::iter::once(&t)
                .chain(&t.components)
                .find(|c| c.method == ThresholdMethod::Concentration)
                .map(|c| c.mc_mean)
                .ok_or_else(|| fail(Kind::Config, "beta needs a concentration threshold (method concentration or min_of_both)"))?;
            Some(separation_delta(&x, cfg.options.q, &noise, cfg.options.draws, &cfg.options.split, beta, mc_mean, ).core()?)
        }
    };
    println!("threshold r: {:.6} ({:?})", t.value, t.method);
    for c in std::iter::once(&t).chain(&t.components) {
        if c.method == ThresholdMethod::Concentration {
            println!("  mc mean: {:.6} (std error {:.2e}, {} draws)", c.mc_mean, c.mc_std_error, c.draws);
        }
        for term in &c.tau_terms {
            println!("  {:?} {}: {:.6} x {:.6}", c.method, term.name, term.weight, term.tau);
        }
    }
    if let Some(s) = &separation {
        println!("separation delta: {:.6}", s.value);
    }
    let output = ThresholdOutput { threshold: t, sigma_bound, separation };
    ensure_dir(out)?;
    let env = Envelope::new("threshold", &cfg, &output)?
        .seed("threshold", cfg.options.seed)
        .input(&data.path, &data.table.sha256);
    written(&write_json(out, "threshold.json", &env)?);
    Ok(())
}

/// Flags that stand in for, or override, a farkas config file.
#[derive(Debug, Default)]
pub struct FarkasFlags {
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub noisy_rows: Option<usize>,
    pub sigma: Option<f64>,
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum FarkasOutput {
    Exact {
        certificate: FarkasResult,
    },
    Noisy {
        /// Original (0-based) index of each row after moving the noisy rows first.
        row_order: Vec<usize>,
        verdict: FeasibilityVerdict,
        /// Exact certificate treating the observed targets as exact.
        plug_in_certificate: FarkasResult,
    },
}

pub fn farkas(config_path: Option<&Path>, flags: FarkasFlags, out: &Path) -> Result<()> {
    let (mut cfg, base) = match config_path {
        Some(p) => (load::<FarkasConfig>(p)?, base_dir(p)),
        None => {
            let (Some(a), Some(b)) = (flags.a.clone(), flags.b.clone()) else {
                return Err(fail(Kind::Config, "farkas needs --config or both --A and --b"));
            };
            (FarkasConfig { a, b, noisy_rows: None, sigma: None, options: Default::default() }, PathBuf::new())
        }
    };
    if config_path.is_some() {
        if let Some(a) = flags.a {
            cfg.a = a;
        }
        if let Some(b) = flags.b {
            cfg.b = b;
        }
    }
    cfg.noisy_rows = flags.noisy_rows.or(cfg.noisy_rows);
    cfg.sigma = flags.sigma.or(cfg.sigma);
    if let Some(seed) = seed_override()? {
        cfg.options.seed = seed;
    }

    let a_path = resolve(&base, &cfg.a);
    let b_path = resolve(&base, &cfg.b);
    let a_table = read_table(&a_path)?;
    let b_table = read_table(&b_path)?;
    let a = a_table.rows.clone();
    let b = b_table.column("b", &b_path)?;
    let d = a.nrows();
    if b.len() != d {
        return Err(fail(Kind::Data, format!("A has {d} rows but b has {}", b.len())));
    }
    let noisy: Vec<bool> = match cfg.noisy_rows {
        Some(n) if n > d => return Err(fail(Kind::Config, format!("noisy_rows = {n} exceeds the {d} rows of A"))),
        Some(n) => (0..d).map(|i| i < n).collect(),
        None => match b_table.headers.iter().any(|h| h == "noisy") {
            true => {
                let col = b_table.column("noisy", &b_path)?;
                if col.iter().any(|v| *v != 0.0 && *v != 1.0) {
                    return Err(fail(Kind::Data, format!("{}: column `noisy` must be 0 or 1", b_path.display())));
                }
                col.iter().map(|v| *v == 1.0).collect()
            }
            false => vec![false; d],
        },
    };

    let any_noisy = noisy.iter().any(|x| *x);
    let output = match (cfg.sigma, any_noisy) {
        (Some(sigma), true) => {
            let row_order: Vec<usize> = (0..d).filter(|&i| noisy[i]).chain((0..d).filter(|&i| !noisy[i])).collect();
            let a_ord = a.select(Axis(0), &row_order);
            let n = noisy.iter().filter(|x| **x).count();
            let y: Vec<f64> = row_order[..n].iter().map(|&i| b[i]).collect();
            let exact_b: Vec<f64> = row_order[n..].iter().map(|&i| b[i]).collect();
            let nlp = NoisyLp { a: a_ord, y, exact_b, sigma, instruments: None };
            let verdict = noisy_feasibility_test(&nlp, &cfg.options).core()?;
            let plug_in_certificate = farkas_certificate(&a, &b).core()?;
            println!("decision: {}", decision_text(&verdict));
            if let (Some(psi), Some(t)) = (verdict.psi, &verdict.threshold) {
                println!("statistic: {psi:.6}");
                println!("threshold r: {:.6}", t.value);
            }
            println!("confidence: {:.3}", verdict.confidence);
            for w in &verdict.warnings {
                println!("warning: {w}");
            }
            FarkasOutput::Noisy { row_order, verdict, plug_in_certificate }
        }
        (None, true) => return Err(fail(Kind::Config, "noisy rows were marked but sigma is missing")),
        _ => {
            let certificate = farkas_certificate(&a, &b).core()?;
            match &certificate {
                FarkasResult::Feasible { theta } => println!("feasible: theta = {theta:?}"),
                FarkasResult::Infeasible { pi } => println!("infeasible: certificate pi = {pi:?}"),
            }
            FarkasOutput::Exact { certificate }
        }
    };
    ensure_dir(out)?;
    let env = Envelope::new("farkas", &cfg, &output)?
        .seed("threshold", cfg.options.seed)
        .seed("multistart", cfg.options.solver.seed)
        .input(&a_path, &a_table.sha256)
        .input(&b_path, &b_table.sha256);
    written(&write_json(out, "verdict.json", &env)?);
    Ok(())
}

fn decision_text(v: &FeasibilityVerdict) -> &'static str {
    match v.decision {
        feastest_core::farkas::FeasibilityDecision::FeasibleNotRejected => "feasible-not-rejected",
        feastest_core::farkas::FeasibilityDecision::InfeasibleRejected => "infeasible-rejected",
    }
}

pub fn simulate(config_path: Option<&Path>, preset_name: Option<&str>, reps: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg: StudyConfig = match (config_path, preset_name) {
        (Some(p), None) => load(p)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(fail(Kind::Config, "simulate needs --config or --preset")),
        (Some(_), Some(_)) => return Err(fail(Kind::Config, "--config and --preset are mutually exclusive")),
    };
    if let Some(r) = reps {
        cfg.reps = r;
    }
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    let result = simulate_study(&cfg).core()?;
    let row = result.table_row();
    println!(
        "{}: ape {:.3}, separation {:.3}, 2r {:.3}, coverage {:.2}, rejection {:.2} ({} reps, {} failed, {} skipped)",
        row.name, row.ape, row.separation, row.two_r, row.coverage, row.rejection, row.reps, row.failed, result.skipped
    );
    ensure_dir(out)?;
    let csv_path = out.join("table.csv");
    write_table(&csv_path, &row)?;
    written(&csv_path);
    let env = Envelope::new("simulate", &cfg, &result)?
        .seed("noise", cfg.seed)
        .seed("design", cfg.design_seed);
    written(&write_json(out, "study_report.json", &env)?);
    Ok(())
}

fn write_table(path: &Path, row: &TableRow) -> Result<()> {
    let mut w = csv::Writer::from_path(path).kind_with(Kind::Io, || format!("writing {}", path.display()))?;
    w.serialize(row).kind_with(Kind::Io, || format!("writing {}", path.display()))?;
    w.flush().kind_with(Kind::Io, || format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Bracket {
    n: usize,
    l: usize,
    lower: Option<f64>,
    upper: f64,
    estimate: McEstimate,
    contains_estimate: bool,
}

#[derive(Serialize)]
struct DiagnoseOutput {
    diagnostics: PowerDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    bracket: Option<Bracket>,
}

pub fn diagnose(config_path: &Path, out: &Path) -> Result<()> {
    let mut cfg: DiagnoseConfig = load(config_path)?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    let diagnostics = power_feasibility_check(cfg.p, cfg.n, cfg.m, cfg.l, cfg.q);
    if diagnostics.warnings.is_empty() {
        println!("no warnings");
    }
    for w in &diagnostics.warnings {
        println!("warning: {w}");
    }
    let mut inputs = Vec::new();
    let raw = match &cfg.design {
        None => None,
        Some(DesignSource::Csv { path }) => {
            let path = resolve(&base_dir(config_path), path);
            let t = read_table(&path)?;
            inputs.push((path, t.sha256.clone()));
            Some(t.rows)
        }
        Some(DesignSource::Random { seed }) => Some(generate_design(cfg.n, cfg.l, 0.0, *seed).core()?),
    };
    let bracket = match raw {
        None => None,
        Some(raw) => {
            let x = normalize_columns(&InstrumentMatrix::new(raw).core()?, ColumnScaling::MeanSquare).core()?;
            let b = gaussian_max_bounds(&x).core()?;
            let estimate =
                mc_gaussian_expectation(&x, NormOrder::Inf, 1.0, cfg.draws, cfg.seed, Execution::Parallel).core()?;
            let slack = 3.0 * estimate.std_error;
            let contains_estimate =
                b.lower.is_none_or(|lo| estimate.mean + slack >= lo) && estimate.mean - slack <= b.upper;
            match b.lower {
                Some(lo) => println!("expectation bracket: [{lo:.6}, {:.6}]", b.upper),
                None => println!("expectation bracket: (lower bound needs L >= 20), upper {:.6}", b.upper),
            }
            println!("monte-carlo estimate: {:.6} (std error {:.2e})", estimate.mean, estimate.std_error);
            println!("bracket contains estimate: {contains_estimate}");
            Some(Bracket { n: x.n(), l: x.l(), lower: b.lower, upper: b.upper, estimate, contains_estimate })
        }
    };
    let output = DiagnoseOutput { diagnostics, bracket };
    ensure_dir(out)?;
    let mut env = Envelope::new("diagnose", &cfg, &output)?.seed("monte_carlo", cfg.seed);
    for (p, h) in &inputs {
        env = env.input(p, h);
    }
    written(&write_json(out, "diagnostics.json", &env)?);
    Ok(())
}

//! Acceptance run: one PASS/FAIL line per criterion, at the stated tolerances.
//!
//! Not part of `cargo test`; run with
//! `cargo test --release -p feastest-cli --test acceptance [-- 3 4 ...]`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use feastest_core::exec::{mean_and_std_error, Execution};
use feastest_core::farkas::{farkas_certificate, FarkasResult};
use feastest_core::inference::{
    build_instruments, bounded_response_test, run_test_with_threshold, test_threshold, BoundedTestOptions,
    InstrumentSpec, NoiseSpec, TestInputs, TestOptions,
};
use feastest_core::norms::{column_norm_functional, lq_norm, normalize_columns, ColumnScaling, InstrumentMatrix, NormOrder};
use feastest_core::rng::stream;
use feastest_core::sim::{generate_design, simulate_study, Coefficients, StudyConfig};
use feastest_core::solver::{minimize_slack, Backend, HypothesisSpec, Model, SolverOptions};
use feastest_core::thresholds::{
    concentration_threshold, gaussian_max_bounds, mc_gaussian_expectation, tau, union_bound_threshold, AlphaSplit,
    ExpectationSource, NoiseModel,
};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

const ALPHA: f64 = 0.05;
const QS: [NormOrder; 3] = [NormOrder::One, NormOrder::Two, NormOrder::Inf];

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: impl Into<String>) -> Outcome {
    Outcome { pass, summary: summary.into() }
}

fn detail(line: impl AsRef<str>) {
    println!("    {}", line.as_ref());
}

fn split() -> AlphaSplit {
    AlphaSplit::new(0.049, 0.001).unwrap()
}

/// `(config, target rejection, target mean 2r)` for each table row, run at
/// 500 reps within a shared wall-clock budget.
fn reproduce(rows: Vec<(StudyConfig, f64, f64)>, budget_secs: f64) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut worst = Vec::new();
    for (cfg, rej_target, two_r_target) in rows {
        let remaining = (budget_secs - start.elapsed().as_secs_f64()).max(0.0);
        let cfg = StudyConfig { reps: 500, time_limit_secs: Some(remaining), ..cfg };
        let t = Instant::now();
        let res = simulate_study(&cfg).unwrap();
        let coverage_ok = res.coverage >= 0.97;
        let rej_ok = (res.rejection - rej_target).abs() <= 0.08;
        let two_r_ok = (res.mean_two_r / two_r_target - 1.0).abs() <= 0.15;
        let complete = res.skipped == 0;
        detail(format!(
            "{}: {} of 500 reps in {:.1} s ({} skipped, {} failed); coverage {:.3} [>= 0.97 {}]; rejection {:.3} vs {:.2} [±0.08 {}]; 2r {:.4} vs {:.3} [±15% {}]; separation {:.4}, delta {:.4}",
            cfg.name,
            res.completed,
            t.elapsed().as_secs_f64(),
            res.skipped,
            res.failed,
            res.coverage,
            pf(coverage_ok),
            res.rejection,
            rej_target,
            pf(rej_ok),
            res.mean_two_r,
            two_r_target,
            pf(two_r_ok),
            res.mean_separation,
            res.delta,
        ));
        if !(coverage_ok && rej_ok && two_r_ok && complete) {
            ok = false;
            worst.push(cfg.name.clone());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let time_ok = elapsed <= budget_secs;
    let summary = format!(
        "{:.0} s of {:.0} s budget{}",
        elapsed,
        budget_secs,
        if worst.is_empty() { String::new() } else { format!("; rows out of tolerance: {}", worst.join(", ")) }
    );
    outcome(ok && time_ok, summary)
}

fn pf(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISS"
    }
}

fn table1() -> Outcome {
    reproduce(
        vec![
            (StudyConfig::table1(30, 4), 0.93, 0.106),
            (StudyConfig::table1(30, 3), 0.64, 0.103),
            (StudyConfig::table1(90, 4), 0.93, 0.035),
            (StudyConfig::table1(90, 3), 0.96, 0.034),
        ],
        600.0,
    )
}

fn table2() -> Outcome {
    reproduce(
        vec![
            (StudyConfig::table2(30, 60), 1.00, 0.132),
            (StudyConfig::table2(30, 45), 0.95, 0.129),
            (StudyConfig::table2(90, 60), 0.99, 0.044),
            (StudyConfig::table2(90, 45), 0.94, 0.043),
        ],
        1800.0,
    )
}

/// Rejection rate of a fixed-design Gaussian test over `reps` noise draws.
fn null_rejection(
    model: &Model,
    v: &Array2<f64>,
    x: &InstrumentMatrix,
    hypothesis: &HypothesisSpec,
    mean: &[f64],
    sigma: f64,
    reps: u64,
    seed: u64,
) -> f64 {
    let opts = TestOptions {
        noise: NoiseSpec::Gaussian { sigma },
        split: split(),
        seed,
        execution: Execution::Sequential,
        solver: SolverOptions { execution: Execution::Sequential, ..Default::default() },
        ..Default::default()
    };
    let (threshold, _) = test_threshold(x, mean, &opts).unwrap();
    let mut rejects = 0;
    for rep in 0..reps {
        let mut rng = stream(seed, 0xacce, rep);
        let y: Vec<f64> = mean.iter().map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let inputs = TestInputs { model, covariates: v, y: &y, instruments: x, hypothesis };
        let report = run_test_with_threshold(&inputs, opts.q, threshold.clone(), &opts.split, &opts.solver).unwrap();
        rejects += usize::from(report.reject);
    }
    rejects as f64 / reps as f64
}

fn type_one() -> Outcome {
    let reps = 1000;
    let mut rates = Vec::new();

    // Affine, n = 30, p = 3.
    let mut rng = stream(41, 1, 0);
    let v = Array2::from_shape_fn((30, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let names = vec!["v1".to_string(), "v2".to_string()];
    let x = build_instruments(&InstrumentSpec::Powers { max_power: 2 }, &v, &names, ColumnScaling::MeanSquare).unwrap();
    let model = Model::parse("a + b*v1 + c*v2", &["a", "b", "c"], &["v1", "v2"]).unwrap();
    let hyp = HypothesisSpec::parse(&[("b", 0.0, 1.0)], &["a", "b", "c"], &["v1", "v2"]).unwrap();
    let mean: Vec<f64> = v.rows().into_iter().map(|r| 0.2 + 0.5 * r[0] - 0.3 * r[1]).collect();
    let rate = null_rejection(&model, &v, &x, &hyp, &mean, 1.0, reps, 43);
    detail(format!("affine n=30 p=3, b* = 0.5 in [0, 1]: rejection {rate:.3}"));
    rates.push(rate);

    // Exponential-index model of the simulation study with the APE inside [0, 0.8].
    let cfg = StudyConfig {
        name: "nonlinear_null".into(),
        reps: reps as usize,
        coefficients: Coefficients { alpha: vec![0.2], gamma: 1.0, tau: vec![0.2] },
        seed: 47,
        ..StudyConfig::table1(30, 4)
    };
    let res = simulate_study(&cfg).unwrap();
    detail(format!(
        "exponential-index n=30 p=3 L=4, APE {:.3} in [0, 0.8]: rejection {:.3} ({} failed)",
        res.ape[0], res.rejection, res.failed
    ));
    rates.push(res.rejection);

    // Non-sparse θ* with p = 31 > n = 30, 15 interval restrictions.
    let k = 30;
    let v = generate_design(30, k, 0.5, 53).unwrap();
    let covs: Vec<String> = (1..=k).map(|j| format!("v{j}")).collect();
    let mut params = vec!["a".to_string()];
    params.extend((1..=k).map(|j| format!("b{j}")));
    let text = std::iter::once("a".to_string())
        .chain((1..=k).map(|j| format!("b{j}*v{j}")))
        .collect::<Vec<_>>()
        .join(" + ");
    let param_refs: Vec<&str> = params.iter().map(String::as_str).collect();
    let cov_refs: Vec<&str> = covs.iter().map(String::as_str).collect();
    let model = Model::parse(&text, &param_refs, &cov_refs).unwrap();
    let b_star: Vec<f64> = (1..=k).map(|j| 0.1 * if j % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + j as f64 / 30.0)).collect();
    let items: Vec<(String, f64, f64)> = (1..=15).map(|j| (format!("b{j}"), b_star[j - 1] - 0.1, b_star[j - 1] + 0.1)).collect();
    let items: Vec<(&str, f64, f64)> = items.iter().map(|(s, a, b)| (s.as_str(), *a, *b)).collect();
    let hyp = HypothesisSpec::parse(&items, &param_refs, &cov_refs).unwrap();
    let x = build_instruments(&InstrumentSpec::Powers { max_power: 2 }, &v, &covs, ColumnScaling::MeanSquare).unwrap();
    let mean: Vec<f64> =
        v.rows().into_iter().map(|r| 0.3 + r.iter().zip(&b_star).map(|(a, b)| a * b).sum::<f64>()).collect();
    let rate = null_rejection(&model, &v, &x, &hyp, &mean, 0.5, reps, 59);
    detail(format!("affine non-sparse n=30 p=31 m=15 L=60: rejection {rate:.3}"));
    rates.push(rate);

    let worst = rates.iter().cloned().fold(0.0, f64::max);
    outcome(worst <= ALPHA + 0.02, format!("max rejection {worst:.3} over 3 designs x {reps} reps (limit {:.2})", ALPHA + 0.02))
}

fn concentration() -> Outcome {
    let n = 20;
    let raw = generate_design(n, 5, 0.3, 61).unwrap();
    let x = normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::MeanSquare).unwrap();
    let draws = 20_000;
    let mut ok = true;
    let mut worst_excess = f64::NEG_INFINITY;
    for q in QS {
        let e = mc_gaussian_expectation(&x, q, 1.0, 100_000, 67, Execution::Parallel).unwrap().mean;
        let norms: Vec<f64> = (0..draws)
            .map(|i| {
                let mut rng = stream(71, 0xc0c, i);
                let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let mut m = vec![0.0; x.l()];
                x.moments(&w, &mut m);
                lq_norm(&m, q)
            })
            .collect();
        for a in [0.05, 0.1] {
            let t = tau(&NoiseModel::Gaussian { sigma: 1.0 }, column_norm_functional(&x, q), n, a).unwrap();
            let freq = norms.iter().filter(|v| **v >= e + t).count() as f64 / draws as f64;
            detail(format!("q = {q}, alpha = {a}: exceedance {freq:.4} (E_MC {e:.4}, tau {t:.4})"));
            ok &= freq <= a + 0.01;
            worst_excess = worst_excess.max(freq - a);
        }
    }
    outcome(ok, format!("max exceedance minus alpha {worst_excess:+.4} (limit +0.01), 6 cases x {draws} draws"))
}

fn identical_columns() -> Outcome {
    let n = 30;
    let mut rng = stream(73, 1, 0);
    let col: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for l in [8, 16, 32] {
        let raw = Array2::from_shape_fn((n, l), |(i, _)| col[i]);
        let x = normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::MeanSquare).unwrap();
        let source = ExpectationSource::MonteCarlo { draws: 10_000, seed: 79 };
        let conc = concentration_threshold(
            &x,
            NormOrder::Inf,
            &NoiseModel::Gaussian { sigma: 1.0 },
            source,
            &split(),
            Execution::Parallel,
        )
        .unwrap();
        let union = union_bound_threshold(&x, NormOrder::Inf, 1.0, ALPHA).unwrap().value;
        let target = (2.0 / std::f64::consts::PI).sqrt() / (n as f64).sqrt();
        let z = (conc.mc_mean - target).abs() / conc.mc_std_error;
        detail(format!(
            "L = {l}: concentration {:.4} < union {union:.4}: {}; MC mean {:.5} vs {target:.5} ({z:.2} std errors)",
            conc.value,
            conc.value < union,
            conc.mc_mean
        ));
        ok &= conc.value < union && z <= 3.0;
        parts.push(format!("L={l} {:.3}<{union:.3}", conc.value));
    }
    outcome(ok, parts.join(", "))
}

fn gaussian_max() -> Outcome {
    let n = 50;
    let mut inside = 0;
    let mut rng = stream(83, 1, 0);
    for k in 0..50u64 {
        let l = rng.random_range(20..=60);
        let raw = generate_design(n, l, 0.0, 1000 + k).unwrap();
        let x = normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::MeanSquare).unwrap();
        let b = gaussian_max_bounds(&x).unwrap();
        let est = mc_gaussian_expectation(&x, NormOrder::Inf, 1.0, 50_000, 89 + k, Execution::Parallel).unwrap();
        let lower = b.lower.unwrap();
        let ok = lower <= est.mean && est.mean <= b.upper;
        if !ok || k < 3 {
            detail(format!("design {k} (L = {l}): [{lower:.4}, {:.4}] vs MC {:.4}", b.upper, est.mean));
        }
        inside += usize::from(ok);
    }
    outcome(inside == 50, format!("{inside} of 50 designs inside the bracket"))
}

fn solver_oracle() -> Outcome {
    let mut max_err = 0.0f64;
    let mut positive = 0;
    for k in 0..50 {
        let inst = common::nonlinear_instance(k);
        let sol = minimize_slack(&inst.prob).unwrap();
        let oracle = (common::grid_min(&inst) - inst.prob.r).max(0.0);
        positive += usize::from(oracle > 0.0);
        max_err = max_err.max((sol.mu - oracle).abs());
    }
    let mut max_gap = 0.0f64;
    for k in 0..30 {
        let prob = common::affine_instance(k);
        let mut lp = prob.clone();
        lp.options.backend = Backend::Lp;
        let mut pen = prob.clone();
        pen.options.backend = Backend::Penalty;
        pen.options.early_stop = false;
        let a = minimize_slack(&lp).unwrap();
        let b = minimize_slack(&pen).unwrap();
        max_gap = max_gap.max((a.mu - b.mu).abs());
    }
    detail(format!("{positive} of 50 grid instances have positive slack"));
    outcome(
        max_err <= 1e-3 && max_gap <= 1e-4,
        format!("max |mu - grid| {max_err:.2e} (limit 1e-3); max |lp - penalty| {max_gap:.2e} (limit 1e-4)"),
    )
}

fn farkas() -> Outcome {
    let (mut agree, mut certs_ok, mut infeasible) = (0, 0, 0);
    for k in 0..200 {
        let (a, b) = common::random_lp_instance(k);
        let expected = common::basis_oracle(&a, &b);
        match farkas_certificate(&a, &b).unwrap() {
            FarkasResult::Feasible { .. } => agree += usize::from(expected),
            FarkasResult::Infeasible { pi } => {
                agree += usize::from(!expected);
                infeasible += 1;
                let cols_ok =
                    (0..common::P).all(|c| (0..common::D).map(|r| pi[r] * a[[r, c]]).sum::<f64>() >= -1e-8);
                let pb: f64 = pi.iter().zip(&b).map(|(p, b)| p * b).sum();
                certs_ok += usize::from(cols_ok && pb < 0.0);
            }
        }
    }
    outcome(
        agree == 200 && certs_ok == infeasible,
        format!("{agree} of 200 verdicts match the basis oracle; {certs_ok} of {infeasible} certificates valid"),
    )
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn bounded_response() -> Outcome {
    // Sandwich on n = 10, L = 2 with binary responses.
    let n = 10;
    let v: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let raw = Array2::from_shape_fn((n, 2), |(i, j)| v[i].powi(j as i32 + 1));
    let x = normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::MeanSquare).unwrap();
    let p: Vec<f64> = v.iter().map(|t| logistic(0.2 + 0.8 * t)).collect();
    let draws = 100_000;
    let mut sandwich_ok = true;
    for q in QS {
        let mut s = Vec::with_capacity(draws);
        let mut lo = Vec::with_capacity(draws);
        let mut up = Vec::with_capacity(draws);
        let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut m = vec![0.0; 2];
        for r in 0..draws as u64 {
            let mut rng = stream(97, 0x5a4d, r);
            for i in 0..n {
                let y = if rng.random::<f64>() < p[i] { 1.0 } else { 0.0 };
                let e = if rng.random::<bool>() { 1.0 } else { -1.0 };
                a[i] = y - p[i];
                b[i] = 0.5 * e * (y - p[i]);
                c[i] = 2.0 * e * y;
            }
            x.moments(&a, &mut m);
            s.push(lq_norm(&m, q));
            x.moments(&b, &mut m);
            lo.push(lq_norm(&m, q));
            x.moments(&c, &mut m);
            up.push(lq_norm(&m, q));
        }
        let (s, s_se) = mean_and_std_error(&s);
        let (lo, lo_se) = mean_and_std_error(&lo);
        let (up, up_se) = mean_and_std_error(&up);
        let ok_lo = lo <= s + 3.0 * lo_se.hypot(s_se);
        let ok_up = s <= up + 3.0 * up_se.hypot(s_se);
        detail(format!("sandwich q = {q}: {lo:.4} <= {s:.4} <= {up:.4}: {}", ok_lo && ok_up));
        sandwich_ok &= ok_lo && ok_up;
    }

    // Logistic Type I, n = 200, p = 2.
    let n = 200;
    let mut rng = stream(101, 1, 0);
    let v = Array2::from_shape_fn((n, 1), |_| rng.sample::<f64, _>(StandardNormal));
    let names = vec!["v".to_string()];
    let x = build_instruments(&InstrumentSpec::Powers { max_power: 2 }, &v, &names, ColumnScaling::MeanSquare).unwrap();
    let model = Model::parse("1/(1 + exp(-(a + b*v)))", &["a", "b"], &["v"]).unwrap();
    let hyp = HypothesisSpec::parse(&[("b", 0.0, 1.0)], &["a", "b"], &["v"]).unwrap();
    let p: Vec<f64> = v.column(0).iter().map(|t| logistic(0.3 + 0.8 * t)).collect();
    let reps = 300;
    let mut rejects = 0;
    for rep in 0..reps {
        let mut rng = stream(103, 2, rep);
        let y: Vec<f64> = p.iter().map(|pi| if rng.random::<f64>() < *pi { 1.0 } else { 0.0 }).collect();
        let inputs = TestInputs { model: &model, covariates: &v, y: &y, instruments: &x, hypothesis: &hyp };
        let opts = BoundedTestOptions { seed: rep, ..Default::default() };
        rejects += usize::from(bounded_response_test(&inputs, &opts).unwrap().0.reject);
    }
    let rate = rejects as f64 / reps as f64;
    detail(format!("logistic n=200 p=2: rejection {rate:.3} over {reps} reps"));
    outcome(
        sandwich_ok && rate <= ALPHA + 0.02,
        format!("sandwich holds for q in {{1, 2, inf}}: {sandwich_ok}; logistic Type I {rate:.3} (limit 0.07)"),
    )
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_cli(args: &[&str], out: &Path) -> (Vec<u8>, Vec<(String, Vec<u8>)>) {
    let o = Command::new(env!("CARGO_BIN_EXE_feastest"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FEASTEST_SEED")
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    // stdout names the output directory, which differs between runs.
    let stdout = String::from_utf8(o.stdout).unwrap().replace(out.to_str().unwrap(), "<out>");
    (stdout.into_bytes(), files)
}

fn determinism() -> Outcome {
    let f = |n: &str| fixture(n).to_str().unwrap().to_string();
    let commands: Vec<Vec<String>> = vec![
        vec!["test".into(), "--config".into(), f("h0_true.json")],
        vec!["ci".into(), "--config".into(), f("h1_ci.json")],
        vec!["bounded-test".into(), "--config".into(), f("bounded.json")],
        vec!["threshold".into(), "--config".into(), f("threshold.json")],
        vec!["farkas".into(), "--config".into(), f("farkas_noisy.json")],
        vec!["farkas".into(), "--A".into(), f("A_infeasible.csv"), "--b".into(), f("b_infeasible.csv")],
        vec!["diagnose".into(), "--config".into(), f("diagnose_table2.json")],
        vec!["simulate".into(), "--config".into(), f("smoke_study.json")],
    ];
    let mut identical = 0;
    for args in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let same = run_cli(&args, a.path()) == run_cli(&args, b.path());
        if !same {
            detail(format!("{} differs between runs", args[0]));
        }
        identical += usize::from(same);
    }
    let cfg = StudyConfig { reps: 8, draws: 2000, ..StudyConfig::table1(30, 4) };
    let seq_cfg = StudyConfig { execution: Execution::Sequential, ..cfg.clone() };
    let payload = |cfg: &StudyConfig| {
        let mut v = serde_json::to_value(simulate_study(cfg).unwrap()).unwrap();
        v["config"]["execution"] = serde_json::Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    let modes_agree = payload(&cfg) == payload(&seq_cfg);
    detail(format!("parallel and sequential study payloads identical: {modes_agree}"));
    outcome(
        identical == commands.len() && modes_agree,
        format!("{identical} of {} commands byte-identical on rerun; execution modes agree: {modes_agree}", commands.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "Table 1 reproduction", table1),
        (2, "Table 2 reproduction", table2),
        (3, "Type I control", type_one),
        (4, "Concentration inequality", concentration),
        (5, "Identical-columns phenomenon", identical_columns),
        (6, "Gaussian-max bracket", gaussian_max),
        (7, "Solver oracle equivalence", solver_oracle),
        (8, "Farkas correctness", farkas),
        (9, "Bounded-response sandwich and Type I", bounded_response),
        (10, "Determinism", determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut passed = 0;
    let mut run = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        println!("criterion {id}: {name}");
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id} {name} ({:.1} s): {}", start.elapsed().as_secs_f64(), result.summary);
        passed += usize::from(result.pass);
        run += 1;
    }
    println!("acceptance: {passed} of {run} criteria passed");
    if passed == run {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

mod common;

use common::{affine_instance, grid_min, nonlinear_instance};
use feastest_core::norms::NormOrder;
use feastest_core::solver::{inner_slack, minimize_slack, minimize_slack_vector, Backend};

#[test]
fn slack_matches_grid_oracle_on_fifty_instances() {
    let mut positive = 0;
    for k in 0..50 {
        let inst = nonlinear_instance(k);
        let sol = minimize_slack(&inst.prob).unwrap();
        let oracle = (grid_min(&inst) - inst.prob.r).max(0.0);
        let err = (sol.mu - oracle).abs();
        positive += usize::from(oracle > 0.0);
        assert!(err <= 1e-3, "instance {k}: solver mu {} vs grid {oracle}", sol.mu);
        assert!(sol.psi >= sol.mu);
        assert!(sol.psi - sol.mu <= inst.prob.r + 1e-9);
    }
    eprintln!("{positive} of 50 instances have positive slack");
    assert!(positive >= 15, "only {positive} instances exercise a positive slack");
}

#[test]
fn lp_and_penalty_agree_on_affine_instances() {
    for k in 0..30 {
        let prob = affine_instance(k);
        let mut lp = prob.clone();
        lp.options.backend = Backend::Lp;
        let mut pen = prob.clone();
        pen.options.backend = Backend::Penalty;
        pen.options.early_stop = false;
        let a = minimize_slack(&lp).unwrap();
        let b = minimize_slack(&pen).unwrap();
        assert_eq!(a.backend, Backend::Lp);
        assert!((a.mu - b.mu).abs() <= 1e-4, "instance {k}: lp {} vs penalty {}", a.mu, b.mu);
        assert!((a.psi - b.psi).abs() <= 1e-4, "instance {k}: lp psi {} vs penalty psi {}", a.psi, b.psi);
    }
}

#[test]
fn auto_backend_picks_lp_for_affine_problems() {
    let prob = affine_instance(0);
    assert_eq!(minimize_slack(&prob).unwrap().backend, Backend::Lp);
    assert_eq!(minimize_slack(&nonlinear_instance(0).prob).unwrap().backend, Backend::Sqp);
}

#[test]
fn sqp_agrees_with_lp_on_affine_instances() {
    for k in 0..20 {
        let prob = affine_instance(k);
        let mut sqp = prob.clone();
        sqp.options.backend = Backend::Sqp;
        sqp.options.early_stop = false;
        let a = minimize_slack(&prob).unwrap();
        let b = minimize_slack(&sqp).unwrap();
        assert!((a.psi - b.psi).abs() <= 1e-5, "instance {k}: lp {} vs sqp {}", a.psi, b.psi);
    }
}

#[test]
fn euclidean_objective_matches_penalty() {
    for k in 0..10 {
        let mut prob = affine_instance(k);
        prob.q = NormOrder::Two;
        let mut sqp = prob.clone();
        sqp.options.backend = Backend::Sqp;
        sqp.options.early_stop = false;
        let mut pen = prob.clone();
        pen.options.backend = Backend::Penalty;
        pen.options.early_stop = false;
        let a = minimize_slack(&sqp).unwrap();
        let b = minimize_slack(&pen).unwrap();
        assert!((a.psi - b.psi).abs() <= 1e-4, "instance {k}: sqp {} vs penalty {}", a.psi, b.psi);
    }
}

/// 2-D grid oracle for the inner problem at step 1e-3.
#[test]
fn vector_slack_inner_solution_matches_grid() {
    let c = [0.3, -0.8];
    let r = 0.5;
    let mu = inner_slack(&c, r, NormOrder::Inf, NormOrder::One).unwrap();
    let mut best = f64::INFINITY;
    for i in -1000..=1000 {
        for j in -1000..=1000 {
            let m = [i as f64 * 1e-3, j as f64 * 1e-3];
            let feasible = (c[0] - m[0]).abs().max((c[1] - m[1]).abs()) <= r + 1e-12;
            if feasible {
                best = best.min(m[0].abs() + m[1].abs());
            }
        }
    }
    assert!((mu[0].abs() + mu[1].abs() - best).abs() < 1e-9);
    assert_eq!(mu[0], 0.0);
    assert!((mu[1] + 0.3).abs() < 1e-12);
}

#[test]
fn vector_slack_program_is_feasible_for_scalar_program() {
    for k in 0..5 {
        let mut prob = affine_instance(k);
        prob.r = 0.01;
        for q_tilde in [NormOrder::One, NormOrder::Two, NormOrder::Inf] {
            let sol = minimize_slack_vector(&prob, q_tilde).unwrap();
            let c = prob.moments(&sol.theta).unwrap();
            let shifted: Vec<f64> = c.iter().zip(&sol.mu).map(|(a, b)| a - b).collect();
            let inner = shifted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(inner <= prob.r + 1e-8, "‖c − μ‖ = {inner} exceeds r");
            let mu_inf = sol.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(sol.psi <= prob.r + mu_inf + 1e-8);
        }
    }
}

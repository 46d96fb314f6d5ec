//! Random instances and brute-force oracles shared by the oracle suites and
//! the acceptance run.
#![allow(dead_code)]

use feastest_core::exec::Execution;
use feastest_core::norms::{normalize_columns, ColumnScaling, InstrumentMatrix, NormOrder};
use feastest_core::rng::stream;
use feastest_core::solver::{HypothesisSpec, Model, SlackProblem, SolverOptions};
use nalgebra::{Matrix3, Vector3};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub const GRID_STEP: f64 = 1e-3;

pub struct Instance {
    pub prob: SlackProblem,
    pub v: Vec<f64>,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

/// `g = a·v + exp(b·v)` on a box, with instruments `(v, v², v³)`.
pub fn nonlinear_instance(k: u64) -> Instance {
    let mut rng = stream(7, 91, k);
    let n = 20;
    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).clamp(-2.0, 2.0)).collect();
    let a_true: f64 = rng.random_range(-1.0..1.0);
    let b_true: f64 = rng.random_range(-0.8..0.8);
    let y: Vec<f64> =
        v.iter().map(|&x| a_true * x + (b_true * x).exp() + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let lo = [rng.random_range(-1.0..0.0), rng.random_range(-0.8..0.0)];
    let hi = [lo[0] + 0.5 + rng.random::<f64>() * 0.5, lo[1] + 0.5 + rng.random::<f64>() * 0.5];
    let raw = Array2::from_shape_fn((n, 3), |(i, j)| v[i].powi(j as i32 + 1));
    let x = normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::UnitLength).unwrap();
    let covariates = Array2::from_shape_vec((n, 1), v.clone()).unwrap();
    let model = Model::parse("a*v + exp(b*v)", &["a", "b"], &["v"]).unwrap();
    let hypothesis = HypothesisSpec::parse(&[("a", lo[0], hi[0]), ("b", lo[1], hi[1])], &["a", "b"], &["v"]).unwrap();
    let r = rng.random_range(0.0..0.06);
    let prob = SlackProblem {
        model,
        covariates,
        y,
        x,
        q: NormOrder::Inf,
        r,
        hypothesis,
        options: SolverOptions {
            start_box: [-1.0, 1.0],
            lower_bounds: Some(lo.to_vec()),
            upper_bounds: Some(hi.to_vec()),
            early_stop: false,
            execution: Execution::Sequential,
            ..Default::default()
        },
    };
    Instance { prob, v, lo, hi }
}

/// `min Ψ` over the grid, using `c(a, b) = c0 − a·m1 − e(b)`.
pub fn grid_min(inst: &Instance) -> f64 {
    let x = &inst.prob.x;
    let l = x.l();
    let mut c0 = vec![0.0; l];
    x.moments(&inst.prob.y, &mut c0);
    let mut m1 = vec![0.0; l];
    x.moments(&inst.v, &mut m1);
    let steps = |lo: f64, hi: f64| ((hi - lo) / GRID_STEP).floor() as usize + 1;
    let (na, nb) = (steps(inst.lo[0], inst.hi[0]), steps(inst.lo[1], inst.hi[1]));
    let mut best = f64::INFINITY;
    let mut e = vec![0.0; l];
    let mut ev = vec![0.0; inst.v.len()];
    for ib in 0..nb {
        let b = (inst.lo[1] + ib as f64 * GRID_STEP).min(inst.hi[1]);
        ev.iter_mut().zip(&inst.v).for_each(|(o, v)| *o = (b * v).exp());
        x.moments(&ev, &mut e);
        for ia in 0..na {
            let a = (inst.lo[0] + ia as f64 * GRID_STEP).min(inst.hi[0]);
            let psi = (0..l).map(|j| (c0[j] - a * m1[j] - e[j]).abs()).fold(0.0, f64::max);
            best = best.min(psi);
        }
    }
    best
}

pub fn affine_instance(k: u64) -> SlackProblem {
    let mut rng = stream(11, 92, k);
    let n = 15;
    let v = Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..n)
        .map(|i| 0.8 * v[[i, 0]] - 0.5 * v[[i, 1]] + 0.4 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let raw = Array2::from_shape_fn((n, 4), |(i, j)| match j {
        0 => v[[i, 0]],
        1 => v[[i, 1]],
        2 => v[[i, 0]] * v[[i, 1]],
        _ => 1.0,
    });
    let x = normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::MeanSquare).unwrap();
    let model = Model::parse("a*v1 + b*v2", &["a", "b"], &["v1", "v2"]).unwrap();
    let s: f64 = rng.random_range(-0.5..0.5);
    let hypothesis = HypothesisSpec::parse(
        &[("a + b", s - 0.2, s + 0.2), ("a - 2*b", -1.0, rng.random_range(-0.5..1.5))],
        &["a", "b"],
        &["v1", "v2"],
    )
    .unwrap();
    SlackProblem {
        model,
        covariates: v,
        y,
        x,
        q: NormOrder::Inf,
        r: rng.random_range(0.0..0.2),
        hypothesis,
        options: SolverOptions { start_box: [-2.0, 2.0], execution: Execution::Sequential, ..Default::default() },
    }
}

pub const D: usize = 3;
pub const P: usize = 6;

/// Feasible iff some basis `B` gives `B⁻¹b ≥ 0` (A has full row rank).
pub fn basis_oracle(a: &Array2<f64>, b: &[f64]) -> bool {
    let rhs = Vector3::from_column_slice(b);
    for i in 0..P {
        for j in i + 1..P {
            for k in j + 1..P {
                let m = Matrix3::from_fn(|r, c| a[[r, [i, j, k][c]]]);
                if m.determinant().abs() < 1e-10 {
                    continue;
                }
                if let Some(x) = m.lu().solve(&rhs) {
                    if x.iter().all(|v| *v >= -1e-9) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

pub fn random_lp_instance(k: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = stream(3, 93, k);
    let a = Array2::from_shape_fn((D, P), |_| rng.sample::<f64, _>(StandardNormal));
    let b: Vec<f64> = if k % 2 == 0 {
        let x0: Vec<f64> = (0..P).map(|_| rng.random::<f64>() * if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        (0..D).map(|r| (0..P).map(|c| a[[r, c]] * x0[c]).sum()).collect()
    } else {
        (0..D).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    (a, b)
}

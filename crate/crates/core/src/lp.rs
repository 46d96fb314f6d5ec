//! Dense tableau simplex.
//!
//! Two entry points share one tableau engine:
//!
//! * [`lp_solve`] for standard-form programs `{A x = b, x ≥ 0}` (optionally
//!   minimizing `cᵀx`). Phase one uses artificial variables; when it ends with
//!   a positive objective the phase-one duals give a Farkas certificate
//!   `y` with `yᵀA ≥ 0` and `yᵀb < 0`.
//! * [`LinearProgram`] for general bounded variables and `≤ / ≥ / =` rows,
//!   used by the slack solver. Violated `≤` rows are repaired by a single
//!   auxiliary column, so phase one usually needs few pivots.
//!
//! Bland's rule is the default pricing and never cycles. Dantzig pricing is
//! available for speed; it falls back to Bland's rule permanently after a run
//! of degenerate pivots, which keeps the anti-cycling guarantee.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pricing rule for the entering variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    #[default]
    Bland,
    /// Most negative reduced cost, switching to Bland after stalling.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub pivot_rule: PivotRule,
    /// Residual tolerance for feasibility and certificate checks.
    pub feasibility_tol: f64,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { pivot_rule: PivotRule::Bland, feasibility_tol: 1e-8, max_pivots: 100_000 }
    }
}

const PIVOT_TOL: f64 = 1e-10;
const OPT_TOL: f64 = 1e-10;
const STALL_LIMIT: usize = 64;

/// `{A x = b, x ≥ 0}` with an optional objective `min cᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    /// Row-major `d × p`.
    pub a: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub b: Vec<f64>,
    /// `None` asks only for feasibility.
    pub objective: Option<Vec<f64>>,
}

impl StandardLp {
    pub fn feasibility(a: Vec<f64>, rows: usize, cols: usize, b: Vec<f64>) -> Result<Self> {
        let lp = Self { a, rows, cols, b, objective: None };
        lp.check()?;
        Ok(lp)
    }

    pub fn minimize(a: Vec<f64>, rows: usize, cols: usize, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let lp = Self { a, rows, cols, b, objective: Some(c) };
        lp.check()?;
        Ok(lp)
    }

    fn check(&self) -> Result<()> {
        if self.a.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!("A has {} entries, expected {}×{}", self.a.len(), self.rows, self.cols)));
        }
        if self.b.len() != self.rows {
            return Err(Error::Dimension(format!("b has length {}, A has {} rows", self.b.len(), self.rows)));
        }
        if let Some(c) = &self.objective {
            if c.len() != self.cols {
                return Err(Error::Dimension(format!("c has length {}, A has {} columns", c.len(), self.cols)));
            }
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("LP data must be finite".into()));
        }
        Ok(())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    /// `max_i |A_i x − b_i|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| (dot(self.row(i), x) - self.b[i]).abs())
            .fold(0.0, f64::max)
    }

    /// `(yᵀA, yᵀb)`.
    pub fn dual_products(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let mut ya = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in ya.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        (ya, dot(y, &self.b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, duals: Vec<f64>, objective: f64 },
    /// `certificate` satisfies `yᵀA ≥ 0`, `yᵀb < 0`.
    Infeasible { certificate: Vec<f64> },
    /// `x + s·ray` is feasible for all `s ≥ 0` and the objective decreases along `ray`.
    Unbounded { x: Vec<f64>, ray: Vec<f64> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Tableau {
    m: usize,
    /// Number of columns excluding the right-hand side.
    n: usize,
    /// Row-major `m × (n + 1)`; last column is the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs (`n`) followed by minus the objective value.
    obj: Vec<f64>,
    pivots: usize,
}

enum Status {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn w(&self) -> usize {
        self.n + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.w() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.w() + self.n]
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.w();
        self.obj.clear();
        self.obj.extend_from_slice(costs);
        self.obj.push(0.0);
        for i in 0..self.m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..(i + 1) * w];
                for (o, v) in self.obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.w();
        let p = self.t[r * w + c];
        let inv = 1.0 / p;
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v *= inv;
        }
        self.t[r * w + c] = 1.0;
        let (head, tail) = self.t.split_at_mut(r * w);
        let (prow, rest) = tail.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        };
        for row in head.chunks_exact_mut(w) {
            eliminate(row);
        }
        for row in rest.chunks_exact_mut(w) {
            eliminate(row);
        }
        if !self.obj.is_empty() {
            eliminate(&mut self.obj);
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn optimize(&mut self, allowed: &[bool], opts: &LpOptions) -> Result<Status> {
        let mut bland = opts.pivot_rule == PivotRule::Bland;
        let mut stall = 0;
        loop {
            if self.pivots >= opts.max_pivots {
                return Err(Error::Numerical(format!(
                    "simplex exceeded {} pivots ({}×{} tableau)",
                    opts.max_pivots, self.m, self.n
                )));
            }
            let mut enter = None;
            let mut best = -OPT_TOL;
            for j in 0..self.n {
                if !allowed[j] {
                    continue;
                }
                let rc = self.obj[j];
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(c) = enter else { return Ok(Status::Optimal) };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                    match leave {
                        None => {
                            leave = Some(i);
                            best_ratio = ratio;
                        }
                        Some(l) if ratio < best_ratio && !tie => {
                            let _ = l;
                            leave = Some(i);
                            best_ratio = ratio;
                        }
                        Some(l) if tie && self.basis[i] < self.basis[l] => {
                            leave = Some(i);
                            best_ratio = best_ratio.min(ratio);
                        }
                        _ => {}
                    }
                }
            }
            let Some(r) = leave else { return Ok(Status::Unbounded(c)) };
            let before = self.obj[self.n];
            self.pivot(r, c);
            if !bland {
                if (self.obj[self.n] - before).abs() <= 1e-12 * (1.0 + before.abs()) {
                    stall += 1;
                    if stall > STALL_LIMIT {
                        bland = true;
                    }
                } else {
                    stall = 0;
                }
            }
        }
    }

    /// Pivots basic columns flagged in `artificial` out of the basis where a
    /// non-artificial pivot exists. Rows where none exists are redundant and
    /// keep their artificial at level zero.
    fn expel(&mut self, artificial: &[bool]) {
        for r in 0..self.m {
            if !artificial[self.basis[r]] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if artificial[j] {
                    continue;
                }
                let v = self.at(r, j).abs();
                if v > 1e-9 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.pivot(r, j);
            }
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for i in 0..self.m {
            x[self.basis[i]] = self.rhs(i);
        }
        x
    }
}

/// Solves `B z = rhs` (or `Bᵀ z = rhs`) for a small dense square `B`
/// given row-major.
fn dense_solve(b: &[f64], m: usize, rhs: &[f64], transpose: bool) -> Option<Vec<f64>> {
    let mat = nalgebra::DMatrix::from_row_slice(m, m, b);
    let mat = if transpose { mat.transpose() } else { mat };
    let lu = mat.lu();
    let z = lu.solve(&nalgebra::DVector::from_column_slice(rhs))?;
    z.iter().all(|v| v.is_finite()).then(|| z.iter().copied().collect())
}

/// Solves a standard-form program with default options.
pub fn lp_solve(lp: &StandardLp) -> Result<LpOutcome> {
    lp_solve_with(lp, &LpOptions::default())
}

pub fn lp_solve_with(lp: &StandardLp, opts: &LpOptions) -> Result<LpOutcome> {
    lp.check()?;
    let (m, p) = (lp.rows, lp.cols);
    if m == 0 {
        let c = lp.objective.clone().unwrap_or_else(|| vec![0.0; p]);
        if let Some(j) = c.iter().position(|v| *v < 0.0) {
            let mut ray = vec![0.0; p];
            ray[j] = 1.0;
            return Ok(LpOutcome::Unbounded { x: vec![0.0; p], ray });
        }
        return Ok(LpOutcome::Optimal { x: vec![0.0; p], duals: vec![], objective: 0.0 });
    }
    let sign: Vec<f64> = lp.b.iter().map(|b| if *b < 0.0 { -1.0 } else { 1.0 }).collect();

    // Structural columns, then one artificial per row.
    let n = p + m;
    let w = n + 1;
    let mut t = vec![0.0; m * w];
    for i in 0..m {
        for (j, a) in lp.row(i).iter().enumerate() {
            t[i * w + j] = sign[i] * a;
        }
        t[i * w + p + i] = 1.0;
        t[i * w + n] = sign[i] * lp.b[i];
    }
    let mut tab = Tableau { m, n, t, basis: (p..p + m).collect(), obj: Vec::new(), pivots: 0 };
    let artificial: Vec<bool> = (0..n).map(|j| j >= p).collect();
    let structural: Vec<bool> = artificial.iter().map(|a| !a).collect();

    let scale = 1.0 + lp.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let phase1: Vec<f64> = (0..n).map(|j| if j >= p { 1.0 } else { 0.0 }).collect();
    tab.set_costs(&phase1);
    tab.optimize(&structural, opts)?;
    let infeasibility = -tab.obj[n];

    if infeasibility > opts.feasibility_tol * scale {
        // y solves Bᵀ y = c_B for the phase-one costs; the certificate is -S y.
        let bmat = basis_matrix(lp, &sign, &tab.basis);
        let cb: Vec<f64> = tab.basis.iter().map(|&j| phase1[j]).collect();
        let y = dense_solve(&bmat, m, &cb, true)
            .unwrap_or_else(|| tableau_duals(&tab, p, &cb));
        let certificate: Vec<f64> = y.iter().zip(&sign).map(|(y, s)| -y * s).collect();
        let certificate = normalize_certificate(lp, certificate, opts)?;
        return Ok(LpOutcome::Infeasible { certificate });
    }

    tab.expel(&artificial);
    let costs: Vec<f64> = match &lp.objective {
        Some(c) => c.iter().cloned().chain(std::iter::repeat_n(0.0, m)).collect(),
        None => vec![0.0; n],
    };
    tab.set_costs(&costs);
    let status = tab.optimize(&structural, opts)?;

    let mut x = refined_primal(lp, &sign, &tab);
    x.truncate(p);
    match status {
        Status::Unbounded(c) => {
            let mut ray = vec![0.0; p];
            ray[c] = 1.0;
            for i in 0..m {
                let bj = tab.basis[i];
                if bj < p {
                    ray[bj] = -tab.at(i, c);
                }
            }
            Ok(LpOutcome::Unbounded { x, ray })
        }
        Status::Optimal => {
            let residual = lp.residual(&x);
            if residual > opts.feasibility_tol * scale || x.iter().any(|v| *v < -opts.feasibility_tol * scale) {
                return Err(Error::Numerical(format!(
                    "simplex solution violates Ax = b by {residual:.3e} after {} pivots",
                    tab.pivots
                )));
            }
            let cb: Vec<f64> = tab.basis.iter().map(|&j| costs[j]).collect();
            let bmat = basis_matrix(lp, &sign, &tab.basis);
            let y = dense_solve(&bmat, m, &cb, true).unwrap_or_else(|| tableau_duals(&tab, p, &cb));
            let duals = y.iter().zip(&sign).map(|(y, s)| y * s).collect();
            let objective = match &lp.objective {
                Some(c) => dot(c, &x),
                None => 0.0,
            };
            Ok(LpOutcome::Optimal { x, duals, objective })
        }
    }
}

/// Basis matrix of the sign-adjusted system, row-major `m × m`.
fn basis_matrix(lp: &StandardLp, sign: &[f64], basis: &[usize]) -> Vec<f64> {
    let (m, p) = (lp.rows, lp.cols);
    let mut b = vec![0.0; m * m];
    for (k, &j) in basis.iter().enumerate() {
        for i in 0..m {
            b[i * m + k] = if j < p { sign[i] * lp.a[i * p + j] } else if j - p == i { 1.0 } else { 0.0 };
        }
    }
    b
}

/// Fallback duals read from the artificial columns (which hold `B⁻¹`).
fn tableau_duals(tab: &Tableau, p: usize, cb: &[f64]) -> Vec<f64> {
    (0..tab.m)
        .map(|k| (0..tab.m).map(|i| cb[i] * tab.at(i, p + k)).sum())
        .collect()
}

/// Re-solves `B x_B = b` from the original data to remove tableau drift.
fn refined_primal(lp: &StandardLp, sign: &[f64], tab: &Tableau) -> Vec<f64> {
    let m = lp.rows;
    let bmat = basis_matrix(lp, sign, &tab.basis);
    let rhs: Vec<f64> = lp.b.iter().zip(sign).map(|(b, s)| b * s).collect();
    let mut x = vec![0.0; tab.n];
    match dense_solve(&bmat, m, &rhs, false) {
        Some(xb) => {
            for (i, v) in xb.into_iter().enumerate() {
                x[tab.basis[i]] = v.max(0.0);
            }
        }
        None => x = tab.primal().into_iter().map(|v| v.max(0.0)).collect(),
    }
    x
}

fn normalize_certificate(lp: &StandardLp, y: Vec<f64>, opts: &LpOptions) -> Result<Vec<f64>> {
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Numerical("phase one produced an empty certificate".into()));
    }
    let mut y: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let (ya, yb) = lp.dual_products(&y);
    // Clean round-off so the certificate satisfies yᵀA ≥ 0 within tolerance.
    let worst = ya.iter().cloned().fold(0.0f64, f64::min);
    if worst < -opts.feasibility_tol || yb >= 0.0 {
        return Err(Error::Numerical(format!(
            "Farkas certificate failed verification (min yᵀA = {worst:.3e}, yᵀb = {yb:.3e})"
        )));
    }
    y.iter_mut().for_each(|v| {
        if v.abs() < 1e-15 {
            *v = 0.0
        }
    });
    Ok(y)
}

/// Row sense in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// General-form program `min cᵀx` over `lower ≤ x ≤ upper` and linear rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneralOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

enum VarMap {
    /// x = lower + y
    Shift(usize, f64),
    /// x = upper − y
    Flip(usize, f64),
    /// x = y⁺ − y⁻
    Split(usize, usize),
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars());
        self.rows.push((coeffs, cmp, rhs));
    }

    pub fn solve(&self, opts: &LpOptions) -> Result<GeneralOutcome> {
        let nv = self.n_vars();
        if self.lower.len() != nv || self.upper.len() != nv {
            return Err(Error::Dimension("bound vectors do not match the variable count".into()));
        }
        // Map variables to nonnegative columns.
        let mut maps = Vec::with_capacity(nv);
        let mut ny = 0;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..nv {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo > hi {
                return Ok(GeneralOutcome::Infeasible);
            }
            if lo.is_finite() {
                maps.push(VarMap::Shift(ny, lo));
                if hi.is_finite() {
                    bound_rows.push((ny, hi - lo));
                }
                ny += 1;
            } else if hi.is_finite() {
                maps.push(VarMap::Flip(ny, hi));
                ny += 1;
            } else {
                maps.push(VarMap::Split(ny, ny + 1));
                ny += 2;
            }
        }

        // Rows in y-space: Le rows (with slack) and Eq rows (with artificial).
        let mut le: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
        let to_y = |coeffs: &[f64], rhs: f64| -> (Vec<f64>, f64) {
            let mut a = vec![0.0; ny];
            let mut r = rhs;
            for (c, map) in coeffs.iter().zip(&maps) {
                match *map {
                    VarMap::Shift(k, lo) => {
                        a[k] += c;
                        r -= c * lo;
                    }
                    VarMap::Flip(k, hi) => {
                        a[k] -= c;
                        r -= c * hi;
                    }
                    VarMap::Split(kp, km) => {
                        a[kp] += c;
                        a[km] -= c;
                    }
                }
            }
            (a, r)
        };
        for (coeffs, cmp, rhs) in &self.rows {
            let (a, r) = to_y(coeffs, *rhs);
            match cmp {
                Cmp::Le => le.push((a, r)),
                Cmp::Ge => le.push((a.iter().map(|v| -v).collect(), -r)),
                Cmp::Eq => eq.push((a, r)),
            }
        }
        for (k, width) in bound_rows {
            let mut a = vec![0.0; ny];
            a[k] = 1.0;
            le.push((a, width));
        }
        let mut c_y = vec![0.0; ny];
        let mut c0 = 0.0;
        for (c, map) in self.objective.iter().zip(&maps) {
            match *map {
                VarMap::Shift(k, lo) => {
                    c_y[k] += c;
                    c0 += c * lo;
                }
                VarMap::Flip(k, hi) => {
                    c_y[k] -= c;
                    c0 += c * hi;
                }
                VarMap::Split(kp, km) => {
                    c_y[kp] += c;
                    c_y[km] -= c;
                }
            }
        }

        // Columns: y | slacks (le) | aux x0 | artificials (eq).
        let (nl, ne) = (le.len(), eq.len());
        let m = nl + ne;
        let slack0 = ny;
        let aux = ny + nl;
        let art0 = aux + 1;
        let n = art0 + ne;
        let w = n + 1;
        let mut t = vec![0.0; m * w];
        let mut basis = Vec::with_capacity(m);
        let mut worst: Option<(usize, f64)> = None;
        for (i, (a, r)) in le.iter().enumerate() {
            t[i * w..i * w + ny].copy_from_slice(a);
            t[i * w + slack0 + i] = 1.0;
            t[i * w + n] = *r;
            if *r < 0.0 {
                t[i * w + aux] = -1.0;
                if worst.is_none_or(|(_, v)| *r < v) {
                    worst = Some((i, *r));
                }
            }
            basis.push(slack0 + i);
        }
        for (k, (a, r)) in eq.iter().enumerate() {
            let i = nl + k;
            let s = if *r < 0.0 { -1.0 } else { 1.0 };
            for (dst, v) in t[i * w..i * w + ny].iter_mut().zip(a) {
                *dst = s * v;
            }
            t[i * w + art0 + k] = 1.0;
            t[i * w + n] = s * r;
            basis.push(art0 + k);
        }
        let mut tab = Tableau { m, n, t, basis, obj: Vec::new(), pivots: 0 };
        if let Some((r, _)) = worst {
            tab.pivot(r, aux);
        }

        let is_artificial: Vec<bool> = (0..n).map(|j| j >= aux).collect();
        let needs_phase1 = worst.is_some() || ne > 0;
        if needs_phase1 {
            let phase1: Vec<f64> = (0..n).map(|j| if j >= aux { 1.0 } else { 0.0 }).collect();
            tab.set_costs(&phase1);
            let allowed: Vec<bool> = (0..n).map(|j| j < aux).collect();
            tab.optimize(&allowed, opts)?;
            let scale = 1.0 + le.iter().chain(&eq).fold(0.0f64, |a, (_, r)| a.max(r.abs()));
            if -tab.obj[n] > opts.feasibility_tol * scale {
                return Ok(GeneralOutcome::Infeasible);
            }
            tab.expel(&is_artificial);
        }
        let mut costs = c_y.clone();
        costs.resize(n, 0.0);
        tab.set_costs(&costs);
        let allowed: Vec<bool> = is_artificial.iter().map(|a| !a).collect();
        match tab.optimize(&allowed, opts)? {
            Status::Unbounded(_) => Ok(GeneralOutcome::Unbounded),
            Status::Optimal => {
                let y = tab.primal();
                let x: Vec<f64> = maps
                    .iter()
                    .map(|map| match *map {
                        VarMap::Shift(k, lo) => lo + y[k].max(0.0),
                        VarMap::Flip(k, hi) => hi - y[k].max(0.0),
                        VarMap::Split(kp, km) => y[kp].max(0.0) - y[km].max(0.0),
                    })
                    .collect();
                let x: Vec<f64> = x
                    .iter()
                    .zip(self.lower.iter().zip(&self.upper))
                    .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                    .collect();
                let objective = dot(&self.objective, &x);
                let _ = c0;
                Ok(GeneralOutcome::Optimal { x, objective })
            }
        }
    }
}

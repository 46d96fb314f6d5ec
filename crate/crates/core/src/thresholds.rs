//! Critical values, deviation terms, separation bounds and expectation
//! diagnostics.
//!
//! Every deviation term has the form
//! `τ = s · ‖√((1/n)Σ_i X_i²)‖_q · √((2/n)·ln(1/level))` where the noise scale
//! `s` is `σ` (Gaussian), `1/√φ` (strongly log-concave) or `b − a` (bounded).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, mean_and_std_error, Execution};
use crate::norms::{column_norm_functional, lq_norm, InstrumentMatrix, NormOrder, SublinearFunctional};
use crate::rng::{domain, stream};
use crate::special::{ln_gamma, normal_quantile};

/// Default number of Monte-Carlo draws.
pub const DEFAULT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    LogConcave { phi: f64 },
    Bounded { a: f64, b: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            NoiseModel::LogConcave { phi } => phi.is_finite() && phi > 0.0,
            NoiseModel::Bounded { a, b } => a.is_finite() && b.is_finite() && b > a,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid noise model {self:?}")))
        }
    }

    /// Scale `s` multiplying every deviation term.
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            NoiseModel::LogConcave { phi } => 1.0 / phi.sqrt(),
            NoiseModel::Bounded { a, b } => b - a,
        }
    }
}

/// Split of the overall level across deviation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSplit {
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha3: Option<f64>,
}

impl AlphaSplit {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        let s = Self { alpha1, alpha2, alpha3: None };
        s.validate()?;
        Ok(s)
    }

    pub fn three(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        let s = Self { alpha1, alpha2, alpha3: Some(alpha3) };
        s.validate()?;
        Ok(s)
    }

    /// `α1 = 0.98α`, `α2 = 0.02α`, which gives 0.049 / 0.001 at α = 0.05.
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(0.98 * alpha, 0.02 * alpha)
    }

    pub fn total(&self) -> f64 {
        self.alpha1 + self.alpha2 + self.alpha3.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [Some(self.alpha1), Some(self.alpha2), self.alpha3];
        if parts.iter().flatten().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidArgument(format!("split components must be positive: {self:?}")));
        }
        let t = self.total();
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("split must sum to a level in (0, 1), got {t}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    Concentration,
    UnionBound,
    MinOfBoth,
    Ideal,
    Rademacher,
}

/// One named deviation term entering a threshold as `weight · tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauTerm {
    pub name: String,
    pub tau: f64,
    pub weight: f64,
}

/// A critical value together with the parts it was assembled from.
///
/// For every method except `MinOfBoth`, `value = mc_mean + Σ weight·tau`;
/// `MinOfBoth` takes the smaller of its `components`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub method: ThresholdMethod,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    pub tau_terms: Vec<TauTerm>,
    pub draws: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<Threshold>,
}

impl Threshold {
    fn assemble(method: ThresholdMethod, mc_mean: f64, mc_std_error: f64, tau_terms: Vec<TauTerm>, draws: usize, seed: u64) -> Self {
        let mut t = Self { value: 0.0, method, mc_mean, mc_std_error, tau_terms, draws, seed, components: vec![] };
        t.value = t.recompute();
        t
    }

    /// Re-evaluates the documented combination of the recorded parts.
    pub fn recompute(&self) -> f64 {
        match self.method {
            ThresholdMethod::MinOfBoth => self
                .components
                .iter()
                .map(Threshold::recompute)
                .fold(f64::INFINITY, f64::min),
            _ => self.mc_mean + self.tau_terms.iter().map(|t| t.weight * t.tau).sum::<f64>(),
        }
    }

    pub fn term(&self, name: &str) -> Option<&TauTerm> {
        self.tau_terms.iter().find(|t| t.name == name)
    }

    /// The component actually selected by a `MinOfBoth` threshold.
    pub fn selected(&self) -> &Threshold {
        self.components
            .iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap_or(self)
    }
}

/// Where the expectation term of the concentration threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpectationSource {
    /// Gaussian Monte Carlo with `draws` standard-normal vectors.
    MonteCarlo { draws: usize, seed: u64 },
    /// Caller-supplied estimate, required for non-Gaussian noise. `draws`
    /// is the sample size behind the estimate and sets the `√(1/R)` weight.
    Supplied { mean: f64, draws: usize },
}

/// Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Deviation term `τ`. `level = 1` gives 0.
pub fn tau(noise: &NoiseModel, colnorm: f64, n: usize, level: f64) -> Result<f64> {
    noise.validate()?;
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1], got {level}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(colnorm.is_finite() && colnorm >= 0.0) {
        return Err(Error::InvalidArgument(format!("column norm must be nonnegative, got {colnorm}")));
    }
    Ok(noise.scale() * colnorm * ((2.0 / n as f64) * (1.0 / level).ln()).sqrt())
}

fn standard_normal_vector(seed: u64, dom: u64, index: u64, out: &mut [f64]) {
    let mut rng = stream(seed, dom, index);
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
}

/// `(σ/R) Σ_r ζ((1/n) Xᵀ Z_r)` with `Z_r` standard normal.
pub fn mc_expectation_with(
    x: &InstrumentMatrix,
    zeta: &dyn SublinearFunctional,
    sigma: f64,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    if draws == 0 {
        return Err(Error::InvalidArgument("the number of Monte-Carlo draws must be at least 1".into()));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let (n, l) = (x.n(), x.l());
    let values = map_indexed(exec, draws, |r| {
        let mut z = vec![0.0; n];
        let mut m = vec![0.0; l];
        standard_normal_vector(seed, domain::GAUSSIAN_MC, r as u64, &mut z);
        x.moments(&z, &mut m);
        zeta.eval(&m)
    });
    let (mean, se) = mean_and_std_error(&values);
    Ok(McEstimate { mean: sigma * mean, std_error: sigma * se, draws })
}

/// Monte-Carlo estimate of `E‖(1/n)XᵀW‖_q` for `W ~ N(0, σ²I)`.
pub fn mc_gaussian_expectation(
    x: &InstrumentMatrix,
    q: NormOrder,
    sigma: f64,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    mc_expectation_with(x, &q, sigma, draws, seed, exec)
}

fn expectation(
    x: &InstrumentMatrix,
    zeta: &dyn SublinearFunctional,
    noise: &NoiseModel,
    source: ExpectationSource,
    exec: Execution,
) -> Result<(McEstimate, u64)> {
    match source {
        ExpectationSource::MonteCarlo { draws, seed } => match noise {
            NoiseModel::Gaussian { sigma } => Ok((mc_expectation_with(x, zeta, *sigma, draws, seed, exec)?, seed)),
            _ => Err(Error::Unsupported(
                "the Monte-Carlo expectation is only defined for Gaussian noise; supply the expectation".into(),
            )),
        },
        ExpectationSource::Supplied { mean, draws } => {
            if !(mean.is_finite() && mean >= 0.0) || draws == 0 {
                return Err(Error::InvalidArgument(format!(
                    "supplied expectation must be finite and nonnegative with draws >= 1, got {mean} ({draws} draws)"
                )));
            }
            Ok((McEstimate { mean, std_error: f64::NAN, draws }, 0))
        }
    }
}

/// Practical threshold `E_MC + τ_{α1} + √(1/R)·τ_{α2}`.
pub fn concentration_threshold(
    x: &InstrumentMatrix,
    q: NormOrder,
    noise: &NoiseModel,
    source: ExpectationSource,
    split: &AlphaSplit,
    exec: Execution,
) -> Result<Threshold> {
    concentration_threshold_with(x, &q, q, noise, source, split, exec)
}

/// As [`concentration_threshold`] with the ℓ_q norm inside the expectation
/// replaced by a validated functional `ζ` dominated by it. Deviation terms
/// still use the ℓ_q column norm.
pub fn concentration_threshold_with(
    x: &InstrumentMatrix,
    zeta: &dyn SublinearFunctional,
    q: NormOrder,
    noise: &NoiseModel,
    source: ExpectationSource,
    split: &AlphaSplit,
    exec: Execution,
) -> Result<Threshold> {
    split.validate()?;
    noise.validate()?;
    let (est, seed) = expectation(x, zeta, noise, source, exec)?;
    let colnorm = column_norm_functional(x, q);
    let n = x.n();
    let t1 = tau(noise, colnorm, n, split.alpha1)?;
    let t2 = tau(noise, colnorm, n, split.alpha2)?;
    let terms = vec![
        TauTerm { name: "tau_alpha1".into(), tau: t1, weight: 1.0 },
        TauTerm { name: "tau_alpha2".into(), tau: t2, weight: (1.0 / est.draws as f64).sqrt() },
    ];
    Ok(Threshold::assemble(ThresholdMethod::Concentration, est.mean, est.std_error, terms, est.draws, seed))
}

/// Ideal threshold `E + τ_α` for a known expectation.
pub fn ideal_threshold(x: &InstrumentMatrix, q: NormOrder, noise: &NoiseModel, expectation: f64, alpha: f64) -> Result<Threshold> {
    let t = tau(noise, column_norm_functional(x, q), x.n(), alpha)?;
    let terms = vec![TauTerm { name: "tau_alpha".into(), tau: t, weight: 1.0 }];
    Ok(Threshold::assemble(ThresholdMethod::Ideal, expectation, 0.0, terms, 0, 0))
}

/// Union-bound threshold `√(max_j (2σ²/n)Σ_i X_ij²)·√((1/n)·ln(2L/α))`, for `q = ∞` only.
pub fn union_bound_threshold(x: &InstrumentMatrix, q: NormOrder, sigma: f64, alpha: f64) -> Result<Threshold> {
    if !q.is_inf() {
        return Err(Error::Unsupported(format!("the union-bound threshold requires q = inf, got q = {q}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let n = x.n() as f64;
    let max_ss = x.column_sums_of_squares().into_iter().fold(0.0, f64::max);
    let scale = (2.0 * sigma * sigma / n * max_ss).sqrt();
    let tail = ((2.0 * x.l() as f64 / alpha).ln() / n).sqrt();
    let terms = vec![TauTerm { name: "union_bound".into(), tau: scale * tail, weight: 1.0 }];
    Ok(Threshold::assemble(ThresholdMethod::UnionBound, 0.0, 0.0, terms, 0, 0))
}

/// The smaller of two thresholds, keeping both as components.
pub fn min_threshold(a: Threshold, b: Threshold) -> Threshold {
    let mut t = Threshold {
        value: 0.0,
        method: ThresholdMethod::MinOfBoth,
        mc_mean: a.mc_mean.max(b.mc_mean),
        mc_std_error: if a.mc_mean >= b.mc_mean { a.mc_std_error } else { b.mc_std_error },
        tau_terms: vec![],
        draws: a.draws.max(b.draws),
        seed: if a.draws > 0 { a.seed } else { b.seed },
        components: vec![a, b],
    };
    t.value = t.recompute();
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMethod {
    Concentration,
    UnionBound,
}

/// Minimal separation `δ_{α,β,q}` for Type II control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationBound {
    /// Smaller of the available forms.
    pub value: f64,
    pub method: SeparationMethod,
    pub concentration: f64,
    /// `r_α + r_β` by the union bound; `q = ∞` and Gaussian noise only.
    pub union_bound: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
}

/// `2E + τ_{α1} + √(1/R)τ_{α2} + √(1/R)τ_{β1} + τ_{β2}`, and the union form
/// when available.
pub fn separation_delta(
    x: &InstrumentMatrix,
    q: NormOrder,
    noise: &NoiseModel,
    draws: usize,
    alpha: &AlphaSplit,
    beta: &AlphaSplit,
    mc_mean_estimate: f64,
) -> Result<SeparationBound> {
    alpha.validate()?;
    beta.validate()?;
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be at least 1".into()));
    }
    let colnorm = column_norm_functional(x, q);
    let n = x.n();
    let w = (1.0 / draws as f64).sqrt();
    let concentration = 2.0 * mc_mean_estimate
        + tau(noise, colnorm, n, alpha.alpha1)?
        + w * tau(noise, colnorm, n, alpha.alpha2)?
        + w * tau(noise, colnorm, n, beta.alpha1)?
        + tau(noise, colnorm, n, beta.alpha2)?;
    let union_bound = match noise {
        NoiseModel::Gaussian { sigma } if q.is_inf() => Some(
            union_bound_threshold(x, q, *sigma, alpha.total())?.value
                + union_bound_threshold(x, q, *sigma, beta.total())?.value,
        ),
        _ => None,
    };
    let (value, method) = match union_bound {
        Some(u) if u < concentration => (u, SeparationMethod::UnionBound),
        _ => (concentration, SeparationMethod::Concentration),
    };
    Ok(SeparationBound { value, method, concentration, union_bound, beta1: beta.alpha1, beta2: beta.alpha2 })
}

/// Draws the `R × n` Rademacher sign matrix used by [`rademacher_threshold`]
/// and the sandwich diagnostics; row `r` is a pure function of `(seed, r)`.
pub fn rademacher_signs(seed: u64, r: usize, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, domain::RADEMACHER_MC, r as u64);
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Monte-Carlo mean of `‖(1/n) Σ_i ε_i v_i X_i‖_q` over Rademacher signs.
pub fn mc_rademacher_expectation(
    x: &InstrumentMatrix,
    v: &[f64],
    q: NormOrder,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be at least 1".into()));
    }
    if v.len() != x.n() {
        return Err(Error::Dimension(format!("vector has length {}, X has {} rows", v.len(), x.n())));
    }
    let (n, l) = (x.n(), x.l());
    let values = map_indexed(exec, draws, |r| {
        let eps = rademacher_signs(seed, r, n);
        let z: Vec<f64> = eps.iter().zip(v).map(|(e, y)| e * y).collect();
        let mut m = vec![0.0; l];
        x.moments(&z, &mut m);
        lq_norm(&m, q)
    });
    let (mean, std_error) = mean_and_std_error(&values);
    Ok(McEstimate { mean, std_error, draws })
}

/// Bounded-response threshold
/// `(2/R)Σ_r‖(1/n)Σ_i ε_ir Y_i X_i‖_q + τ_{α1} + 2τ_{α2} + (4/√R)τ_{α3}`
/// for responses in `[0, 1]`.
pub fn rademacher_threshold(
    x: &InstrumentMatrix,
    y: &[f64],
    q: NormOrder,
    draws: usize,
    split: &AlphaSplit,
    seed: u64,
    exec: Execution,
) -> Result<Threshold> {
    split.validate()?;
    let Some(alpha3) = split.alpha3 else {
        return Err(Error::InvalidArgument("the Rademacher threshold needs a three-way split".into()));
    };
    if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!(
            "responses must lie in [0, 1] (rescale first), found {bad}"
        )));
    }
    let est = mc_rademacher_expectation(x, y, q, draws, seed, exec)?;
    let unit = NoiseModel::Bounded { a: 0.0, b: 1.0 };
    let colnorm = column_norm_functional(x, q);
    let n = x.n();
    let terms = vec![
        TauTerm { name: "tau_alpha1".into(), tau: tau(&unit, colnorm, n, split.alpha1)?, weight: 1.0 },
        TauTerm { name: "tau_alpha2".into(), tau: tau(&unit, colnorm, n, split.alpha2)?, weight: 2.0 },
        TauTerm {
            name: "tau_alpha3".into(),
            tau: tau(&unit, colnorm, n, alpha3)?,
            weight: 4.0 / (draws as f64).sqrt(),
        },
    ];
    Ok(Threshold::assemble(ThresholdMethod::Rademacher, 2.0 * est.mean, 2.0 * est.std_error, terms, draws, seed))
}

/// Data-driven bound on an unknown noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaBound {
    pub bound: f64,
    pub c_n: f64,
    pub sigma_hat: f64,
    pub kappa: f64,
    /// True when the bound falls below `σ̂_Y`, which happens for every
    /// `κ < 1` because `Φ⁻¹(κ/2) < 0` enlarges the denominator.
    pub below_sigma_hat: bool,
}

/// `C_n = √(2/n)·Γ(n/2)/Γ((n−1)/2)`, evaluated through log-gamma.
pub fn c_n(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("C_n needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok((2.0 / nf).sqrt() * (ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0)).exp())
}

/// `B̄_κ = σ̂_Y / (C_n − Φ⁻¹(κ/2)/√n)` with `σ̂_Y² = (1/n)Σ(Y_i − Ȳ)²`.
pub fn sigma_upper_bound(y: &[f64], kappa: f64) -> Result<SigmaBound> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least two responses, got {n}")));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let sigma_hat = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf).sqrt();
    let c = c_n(n)?;
    let bound = sigma_hat / (c - normal_quantile(kappa / 2.0) / nf.sqrt());
    Ok(SigmaBound { bound, c_n: c, sigma_hat, kappa, below_sigma_hat: bound < sigma_hat })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMaxBounds {
    /// Reported only for `L ≥ 20`.
    pub lower: Option<f64>,
    pub upper: f64,
}

/// Bracket for `E‖(1/n)XᵀW‖_∞` with `W ~ N(0, I)`.
pub fn gaussian_max_bounds(x: &InstrumentMatrix) -> Result<GaussianMaxBounds> {
    let (n, l) = (x.n() as f64, x.l());
    if l < 2 {
        return Err(Error::InvalidArgument(format!("the upper bound needs L >= 2, got {l}")));
    }
    let ln_l = (l as f64).ln();
    let max_ss = x.column_sums_of_squares().into_iter().fold(0.0, f64::max);
    let upper = (2.0 * ln_l / (n * n) * max_ss).sqrt() + (8.0 / (n * n * ln_l) * max_ss).sqrt();
    let lower = (l >= 20).then(|| {
        let xs = x.as_slice();
        let mut min_d = f64::INFINITY;
        for j in 0..l {
            for k in j + 1..l {
                let d: f64 = xs.chunks_exact(l).map(|row| (row[j] - row[k]).powi(2)).sum();
                min_d = min_d.min(d);
            }
        }
        0.5 * (1.0 - (-1.0f64).exp()) * (ln_l / (4.0 * n * n) * min_d).sqrt()
    });
    Ok(GaussianMaxBounds { lower, upper })
}

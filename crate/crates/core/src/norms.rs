//! ℓ_q norms, the column-norm functional and instrument matrices.

use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Order `q` of an ℓ_q norm. `1`, `2` and `∞` are first class; other finite
/// orders `q > 1` go through the generic power-sum path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    One,
    Two,
    Inf,
    Finite(f64),
}

impl NormOrder {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            Ok(NormOrder::Inf)
        } else if q == 1.0 {
            Ok(NormOrder::One)
        } else if q == 2.0 {
            Ok(NormOrder::Two)
        } else if q.is_finite() && q > 1.0 {
            Ok(NormOrder::Finite(q))
        } else {
            Err(Error::InvalidArgument(format!("norm order must satisfy q >= 1, got {q}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NormOrder::One => 1.0,
            NormOrder::Two => 2.0,
            NormOrder::Inf => f64::INFINITY,
            NormOrder::Finite(q) => q,
        }
    }

    pub fn is_inf(self) -> bool {
        matches!(self, NormOrder::Inf)
    }

    /// Evaluates `‖v‖_q`.
    pub fn norm(self, v: &[f64]) -> f64 {
        lq_norm(v, self)
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Inf => write!(f, "inf"),
            q => write!(f, "{}", q.value()),
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormOrder::Inf => s.serialize_str("inf"),
            q => s.serialize_f64(q.value()),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let q = match Raw::deserialize(d)? {
            Raw::Num(q) => q,
            Raw::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => f64::INFINITY,
                other => other
                    .parse::<f64>()
                    .map_err(|_| serde::de::Error::custom(format!("invalid norm order `{t}`")))?,
            },
        };
        NormOrder::new(q).map_err(serde::de::Error::custom)
    }
}

/// `(Σ|v_i|^q)^{1/q}` for finite `q`, `max|v_i|` for `q = ∞`.
pub fn lq_norm(v: &[f64], q: NormOrder) -> f64 {
    match q {
        NormOrder::One => v.iter().map(|x| x.abs()).sum(),
        NormOrder::Two => {
            // Scaled to avoid overflow for large entries.
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if scale == 0.0 || !scale.is_finite() {
                return scale;
            }
            let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
            scale * s.sqrt()
        }
        NormOrder::Inf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        NormOrder::Finite(q) => {
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if scale == 0.0 || !scale.is_finite() {
                return scale;
            }
            let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(q)).sum();
            scale * s.powf(1.0 / q)
        }
    }
}

/// How columns are rescaled by [`normalize_columns`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnScaling {
    /// `(1/n) Σ_i X_ij² = 1`.
    #[default]
    MeanSquare,
    /// `Σ_i X_ij² = 1`, i.e. mean square `1/n`.
    UnitLength,
    /// Columns used as given.
    None,
}

/// The `n × L` instrument matrix `X = f(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentMatrix {
    x: Array2<f64>,
    names: Vec<String>,
    scaling: ColumnScaling,
    /// Factor each raw column was multiplied by.
    scale_factors: Vec<f64>,
}

impl InstrumentMatrix {
    /// Wraps a raw (unscaled) matrix.
    pub fn new(x: Array2<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, names)
    }

    pub fn with_names(x: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "instrument matrix must be at least 1×1, got {}×{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if names.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} instrument names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("instrument matrix has non-finite entries".into()));
        }
        let l = x.ncols();
        Ok(Self {
            x: x.as_standard_layout().into_owned(),
            names,
            scaling: ColumnScaling::None,
            scale_factors: vec![1.0; l],
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn l(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Row-major data, `n * L` entries.
    pub fn as_slice(&self) -> &[f64] {
        self.x.as_slice().expect("standard layout")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scaling(&self) -> ColumnScaling {
        self.scaling
    }

    /// True when every column has unit mean square.
    pub fn is_normalized(&self) -> bool {
        self.scaling == ColumnScaling::MeanSquare
    }

    pub fn scale_factors(&self) -> &[f64] {
        &self.scale_factors
    }

    /// `Σ_i X_ij²` for every column.
    pub fn column_sums_of_squares(&self) -> Vec<f64> {
        let l = self.l();
        let mut out = vec![0.0; l];
        for row in self.as_slice().chunks_exact(l) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * v;
            }
        }
        out
    }

    /// Computes `(1/n) Xᵀ v` into `out` (length L).
    pub fn moments(&self, v: &[f64], out: &mut [f64]) {
        let l = self.l();
        debug_assert_eq!(v.len(), self.n());
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, vi) in self.as_slice().chunks_exact(l).zip(v) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x * vi;
            }
        }
        let inv_n = 1.0 / self.n() as f64;
        out.iter_mut().for_each(|o| *o *= inv_n);
    }
}

/// `‖√((1/n) Σ_i X_i²)‖_q`, the scale that enters every deviation term.
pub fn column_norm_functional(x: &InstrumentMatrix, q: NormOrder) -> f64 {
    let n = x.n() as f64;
    let rms: Vec<f64> = x.column_sums_of_squares().iter().map(|s| (s / n).sqrt()).collect();
    lq_norm(&rms, q)
}

/// Rescales every column of `x` to the requested [`ColumnScaling`].
/// Scale factors compose with any earlier rescaling.
pub fn normalize_columns(x: &InstrumentMatrix, scaling: ColumnScaling) -> Result<InstrumentMatrix> {
    let n = x.n() as f64;
    let sums = x.column_sums_of_squares();
    let mut factors = vec![1.0; x.l()];
    if scaling != ColumnScaling::None {
        for (j, s) in sums.iter().enumerate() {
            if *s == 0.0 {
                return Err(Error::ZeroColumn(x.names[j].clone()));
            }
            let target = match scaling {
                ColumnScaling::MeanSquare => n,
                ColumnScaling::UnitLength => 1.0,
                ColumnScaling::None => unreachable!(),
            };
            factors[j] = (target / s).sqrt();
        }
    }
    let mut out = x.x.clone();
    for mut row in out.rows_mut() {
        for (v, f) in row.iter_mut().zip(&factors) {
            *v *= f;
        }
    }
    Ok(InstrumentMatrix {
        x: out,
        names: x.names.clone(),
        scaling,
        scale_factors: x.scale_factors.iter().zip(&factors).map(|(a, b)| a * b).collect(),
    })
}

/// A candidate replacement `ζ_q` for the ℓ_q norm in the test statistic.
pub trait SublinearFunctional: Sync {
    fn eval(&self, z: &[f64]) -> f64;
}

impl SublinearFunctional for NormOrder {
    fn eval(&self, z: &[f64]) -> f64 {
        lq_norm(z, *self)
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> SublinearFunctional for F {
    fn eval(&self, z: &[f64]) -> f64 {
        self(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    PositiveHomogeneity,
    Subadditivity,
    NormDomination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: PropertyKind,
    /// Sample indices involved (one for homogeneity / domination, two for subadditivity).
    pub samples: Vec<usize>,
    /// Amount by which the inequality or identity fails.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: PropertyKind) -> usize {
        self.violations.iter().filter(|v| v.property == kind).count()
    }
}

const HOMOGENEITY_SCALES: [f64; 4] = [0.25, 0.5, 2.0, 7.5];

/// Checks positive homogeneity, subadditivity and domination by `‖·‖_q` on
/// every sample and every ordered pair of samples.
pub fn validate_sublinear_functional(
    zeta: &dyn SublinearFunctional,
    q: NormOrder,
    samples: &[Vec<f64>],
) -> ValidationReport {
    let tol = |scale: f64| 1e-10 * (1.0 + scale.abs());
    let mut violations = Vec::new();
    let mut checks = 0;
    let values: Vec<f64> = samples.iter().map(|z| zeta.eval(z)).collect();

    for (i, z) in samples.iter().enumerate() {
        for a in HOMOGENEITY_SCALES {
            checks += 1;
            let scaled: Vec<f64> = z.iter().map(|v| a * v).collect();
            let excess = (zeta.eval(&scaled) - a * values[i]).abs();
            if excess > tol(a * values[i]) {
                violations.push(Violation {
                    property: PropertyKind::PositiveHomogeneity,
                    samples: vec![i],
                    excess,
                });
                break;
            }
        }
        checks += 1;
        let norm = lq_norm(z, q);
        let excess = values[i].abs() - norm;
        if excess > tol(norm) {
            violations.push(Violation { property: PropertyKind::NormDomination, samples: vec![i], excess });
        }
    }
    for (i, z) in samples.iter().enumerate() {
        for (j, w) in samples.iter().enumerate().skip(i) {
            if z.len() != w.len() {
                continue;
            }
            checks += 1;
            let sum: Vec<f64> = z.iter().zip(w).map(|(a, b)| a + b).collect();
            let bound = values[i] + values[j];
            let excess = zeta.eval(&sum) - bound;
            if excess > tol(bound) {
                violations.push(Violation { property: PropertyKind::Subadditivity, samples: vec![i, j], excess });
            }
        }
    }
    ValidationReport { checks, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn lq_norm_examples() {
        for q in [NormOrder::One, NormOrder::Two, NormOrder::Inf, NormOrder::Finite(3.0)] {
            assert_eq!(lq_norm(&[0.0, 0.0, 0.0], q), 0.0);
        }
        assert_abs_diff_eq!(lq_norm(&[3.0, -4.0], NormOrder::Two), 5.0, epsilon = 1e-15);
        assert_eq!(lq_norm(&[1.0, -2.0, 3.0], NormOrder::Inf), 3.0);
        assert_eq!(lq_norm(&[1.0, -2.0, 3.0], NormOrder::One), 6.0);
        assert_abs_diff_eq!(lq_norm(&[1.0, -2.0], NormOrder::Finite(3.0)), 9f64.cbrt(), epsilon = 1e-14);
    }

    #[test]
    fn column_norm_on_normalized_matrix() {
        let raw = Array2::from_shape_fn((7, 9), |(i, j)| ((i * 9 + j) as f64 * 0.731).sin() + 0.1);
        let x = normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::MeanSquare).unwrap();
        assert!(x.is_normalized());
        assert_abs_diff_eq!(column_norm_functional(&x, NormOrder::Two), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(column_norm_functional(&x, NormOrder::Inf), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(column_norm_functional(&x, NormOrder::One), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn column_norm_single_ones_column() {
        let x = InstrumentMatrix::new(array![[1.0], [1.0], [1.0]]).unwrap();
        assert_abs_diff_eq!(column_norm_functional(&x, NormOrder::Inf), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn normalize_examples() {
        let x = InstrumentMatrix::new(array![[2.0], [2.0]]).unwrap();
        let y = normalize_columns(&x, ColumnScaling::MeanSquare).unwrap();
        assert_eq!(y.matrix(), array![[1.0], [1.0]]);
        assert_eq!(y.scale_factors(), &[0.5]);

        let x = InstrumentMatrix::new(array![[1.0], [0.0], [0.0], [0.0]]).unwrap();
        let y = normalize_columns(&x, ColumnScaling::MeanSquare).unwrap();
        assert_eq!(y.matrix(), array![[2.0], [0.0], [0.0], [0.0]]);

        let z = normalize_columns(&y, ColumnScaling::MeanSquare).unwrap();
        assert_eq!(z.matrix(), y.matrix());

        let u = normalize_columns(&x, ColumnScaling::UnitLength).unwrap();
        assert_eq!(u.column_sums_of_squares(), vec![1.0]);
    }

    #[test]
    fn zero_column_is_named() {
        let x = InstrumentMatrix::with_names(array![[1.0, 0.0], [2.0, 0.0]], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(normalize_columns(&x, ColumnScaling::MeanSquare), Err(Error::ZeroColumn("b".into())));
    }

    #[test]
    fn norm_order_serde() {
        let q: NormOrder = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(q, NormOrder::Inf);
        let q: NormOrder = serde_json::from_str("2").unwrap();
        assert_eq!(q, NormOrder::Two);
        assert!(serde_json::from_str::<NormOrder>("0.5").is_err());
        assert_eq!(serde_json::to_string(&NormOrder::Inf).unwrap(), "\"inf\"");
    }

    fn sample_set() -> Vec<Vec<f64>> {
        (0..25)
            .map(|k| (0..4).map(|j| ((k * 4 + j) as f64 * 1.618).sin() * 3.0).collect())
            .collect()
    }

    #[test]
    fn validate_norm_itself() {
        for q in [NormOrder::One, NormOrder::Two, NormOrder::Inf] {
            let rep = validate_sublinear_functional(&q, q, &sample_set());
            assert!(rep.is_valid(), "{q}: {:?}", rep.violations);
        }
    }

    #[test]
    fn validate_signed_max() {
        let zeta = |z: &[f64]| z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rep = validate_sublinear_functional(&zeta, NormOrder::Inf, &sample_set());
        assert!(rep.is_valid(), "{:?}", rep.violations);
    }

    #[test]
    fn validate_affine_shift_fails_homogeneity() {
        let zeta = |z: &[f64]| lq_norm(z, NormOrder::Two) + 1.0;
        let rep = validate_sublinear_functional(&zeta, NormOrder::Two, &sample_set());
        assert!(rep.count(PropertyKind::PositiveHomogeneity) > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn triangle_and_homogeneity(
            a in proptest::collection::vec(-1e3..1e3f64, 5),
            b in proptest::collection::vec(-1e3..1e3f64, 5),
            s in -10.0..10.0f64,
        ) {
            for q in [NormOrder::One, NormOrder::Two, NormOrder::Inf, NormOrder::Finite(3.5)] {
                let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                prop_assert!(lq_norm(&sum, q) <= lq_norm(&a, q) + lq_norm(&b, q) + 1e-9);
                let scaled: Vec<f64> = a.iter().map(|x| s * x).collect();
                let lhs = lq_norm(&scaled, q);
                let rhs = s.abs() * lq_norm(&a, q);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
            }
        }

        #[test]
        fn normalized_column_norm_identity(
            data in proptest::collection::vec(0.1..5.0f64, 12),
        ) {
            let x = InstrumentMatrix::new(Array2::from_shape_vec((4, 3), data).unwrap()).unwrap();
            let y = normalize_columns(&x, ColumnScaling::MeanSquare).unwrap();
            prop_assert!((column_norm_functional(&y, NormOrder::Two) - 3f64.sqrt()).abs() < 1e-9);
            prop_assert!((column_norm_functional(&y, NormOrder::Inf) - 1.0).abs() < 1e-9);
            prop_assert!((column_norm_functional(&y, NormOrder::One) - 3.0).abs() < 1e-9);
        }
    }
}

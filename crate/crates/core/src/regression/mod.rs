//! Linear AFS model, cross-validation and significance testing.

mod cv;
mod ttest;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotation::PearsonError;
use crate::features::FeatureVector;

pub use cv::{cross_validate, render_cv_table, CvReport, FoldMetrics, Metrics};
pub use ttest::{paired_ttest, two_sided_p, TTest};

pub const DEFAULT_RIDGE: f64 = 1e-8;
pub const DEFAULT_FOLDS: usize = 10;
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("dataset has no features")]
    NoFeatures,
    #[error("{rows} rows cannot determine {params} parameters without a ridge penalty")]
    Underdetermined { rows: usize, params: usize },
    #[error("normal equations are singular")]
    Singular,
    #[error("ridge must be finite and nonnegative, got {0}")]
    BadRidge(f64),
    #[error("row `{pair_id}`: {message}")]
    BadRow { pair_id: String, message: String },
    #[error("feature mismatch: expected [{expected}], got [{got}]")]
    FeatureMismatch { expected: String, got: String },
    #[error("cross-validation needs 2 <= k <= rows, got k = {k} with {rows} rows")]
    BadFolds { k: usize, rows: usize },
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 paired observations, got {0}")]
    TooShort(usize),
    #[error(transparent)]
    Pearson(#[from] PearsonError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub pair_id: String,
    pub features: Vec<f64>,
    pub gold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_order: Vec<String>,
    pub rows: Vec<Row>,
}

impl Dataset {
    /// Checks widths, finiteness, unique pair ids and the gold range. Gold
    /// values may be any finite real when `afs_range` is false.
    pub fn new(feature_order: Vec<String>, rows: Vec<Row>, afs_range: bool) -> Result<Self, RegressionError> {
        let mut ids = BTreeSet::new();
        for r in &rows {
            let bad = |message: String| RegressionError::BadRow { pair_id: r.pair_id.clone(), message };
            if r.features.len() != feature_order.len() {
                return Err(bad(format!("{} values for {} features", r.features.len(), feature_order.len())));
            }
            if !r.features.iter().all(|v| v.is_finite()) || !r.gold.is_finite() {
                return Err(bad("non-finite value".into()));
            }
            if afs_range && !(0.0..=5.0).contains(&r.gold) {
                return Err(bad(format!("gold {} outside [0, 5]", r.gold)));
            }
            if !ids.insert(r.pair_id.as_str()) {
                return Err(bad("duplicate pair id".into()));
            }
        }
        Ok(Dataset { feature_order, rows })
    }

    /// Builds a dataset from feature vectors that must all carry the same
    /// names in the same order.
    pub fn from_vectors<'a>(rows: impl IntoIterator<Item = (&'a str, &'a FeatureVector, f64)>) -> Result<Self, RegressionError> {
        let mut order: Option<Vec<String>> = None;
        let mut out = Vec::new();
        for (pair_id, fv, gold) in rows {
            let names: Vec<String> = fv.names().map(String::from).collect();
            match &order {
                None => order = Some(names),
                Some(o) if *o != names => return Err(mismatch(o, &names)),
                Some(_) => {}
            }
            out.push(Row { pair_id: pair_id.to_string(), features: fv.values().collect(), gold });
        }
        Dataset::new(order.unwrap_or_default(), out, true)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_order.len()
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { feature_order: self.feature_order.clone(), rows: idx.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    /// SHA-256 over feature names, pair ids and the bit patterns of every
    /// value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_order {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
        }
        for r in &self.rows {
            h.update((r.pair_id.len() as u64).to_le_bytes());
            h.update(r.pair_id.as_bytes());
            for v in r.features.iter().chain([&r.gold]) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

fn mismatch(expected: &[String], got: &[String]) -> RegressionError {
    RegressionError::FeatureMismatch { expected: expected.join(", "), got: got.join(", ") }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfsModel {
    pub feature_order: Vec<String>,
    pub coefficients: BTreeMap<String, f64>,
    pub intercept: f64,
    pub ridge: f64,
    pub training_hash: String,
}

impl AfsModel {
    /// Coefficients in feature order.
    pub fn beta(&self) -> Vec<f64> {
        self.feature_order.iter().map(|n| self.coefficients[n]).collect()
    }

    pub fn predict_values(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.feature_order.len());
        self.intercept + self.feature_order.iter().zip(x).map(|(n, v)| self.coefficients[n] * v).sum::<f64>()
    }
}

/// Minimizes `|y - X b - c|^2 + ridge |b|^2` with the intercept `c`
/// unpenalized. Columns are centered first so the intercept drops out of
/// the linear system.
pub fn fit_linear(data: &Dataset, ridge: f64) -> Result<AfsModel, RegressionError> {
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(RegressionError::BadRidge(ridge));
    }
    let p = data.n_features();
    let n = data.len();
    if p == 0 {
        return Err(RegressionError::NoFeatures);
    }
    if n == 0 || (ridge == 0.0 && n < p + 1) {
        return Err(RegressionError::Underdetermined { rows: n, params: p + 1 });
    }

    let x = DMatrix::from_fn(n, p, |i, j| data.rows[i].features[j]);
    let y = DVector::from_iterator(n, data.rows.iter().map(|r| r.gold));
    let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let y_mean = y.mean();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - x_mean[j]);
    let yc = y.add_scalar(-y_mean);

    let mut a = xc.transpose() * &xc;
    for j in 0..p {
        a[(j, j)] += ridge;
    }
    let b = xc.transpose() * yc;
    let beta = match a.clone().cholesky() {
        // without a penalty, a pivot that collapsed to rounding noise means
        // the columns are collinear
        Some(ch) if ridge == 0.0 && (0..p).any(|j| ch.l_dirty()[(j, j)].powi(2) <= RANK_TOL * a[(j, j)]) => {
            return Err(RegressionError::Singular)
        }
        Some(ch) => ch.solve(&b),
        None => a.lu().solve(&b).ok_or(RegressionError::Singular)?,
    };
    if !beta.iter().all(|v| v.is_finite()) {
        return Err(RegressionError::Singular);
    }
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();

    Ok(AfsModel {
        feature_order: data.feature_order.clone(),
        coefficients: data.feature_order.iter().cloned().zip(beta.iter().copied()).collect(),
        intercept,
        ridge,
        training_hash: data.content_hash(),
    })
}

/// Raw (unclamped) model output.
pub fn predict(model: &AfsModel, fv: &FeatureVector) -> Result<f64, RegressionError> {
    let names: Vec<String> = fv.names().map(String::from).collect();
    if names != model.feature_order {
        return Err(mismatch(&model.feature_order, &names));
    }
    Ok(model.predict_values(&fv.values().collect::<Vec<_>>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Family;
    use proptest::prelude::*;

    fn dataset(xs: &[Vec<f64>], ys: &[f64]) -> Dataset {
        let p = xs.first().map_or(0, Vec::len);
        Dataset::new(
            (0..p).map(|j| format!("f{j}")).collect(),
            xs.iter().zip(ys).enumerate().map(|(i, (x, &y))| Row { pair_id: format!("r{i:03}"), features: x.clone(), gold: y }).collect(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn exact_line() {
        let xs: Vec<Vec<f64>> = (-5..=5).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0] + 1.0).collect();
        // the default penalty biases the slope by ridge * 3 / Sxx = 2.7e-10 here
        for ridge in [0.0, DEFAULT_RIDGE] {
            let m = fit_linear(&dataset(&xs, &ys), ridge).unwrap();
            assert!((m.coefficients["f0"] - 3.0).abs() < 1e-9);
            assert!((m.intercept - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_target() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 % 5.0]).collect();
        let m = fit_linear(&dataset(&xs, &[2.5; 8]), DEFAULT_RIDGE).unwrap();
        assert!(m.beta().iter().all(|b| b.abs() < 1e-12));
        assert!((m.intercept - 2.5).abs() < 1e-12);
    }

    #[test]
    fn singular_without_ridge() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let d = dataset(&xs, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(fit_linear(&d, 0.0), Err(RegressionError::Singular));
        assert!(fit_linear(&d, DEFAULT_RIDGE).is_ok());
        let tiny = dataset(&xs[..2], &[1.0, 2.0]);
        assert!(matches!(fit_linear(&tiny, 0.0), Err(RegressionError::Underdetermined { .. })));
        assert!(fit_linear(&tiny, 1.0).is_ok());
        assert_eq!(fit_linear(&d, -1.0), Err(RegressionError::BadRidge(-1.0)));
    }

    #[test]
    fn no_features_fails_at_training() {
        let d = Dataset::new(vec![], vec![Row { pair_id: "a".into(), features: vec![], gold: 1.0 }], true).unwrap();
        assert_eq!(fit_linear(&d, DEFAULT_RIDGE), Err(RegressionError::NoFeatures));
    }

    #[test]
    fn predict_examples() {
        let m = AfsModel {
            feature_order: vec!["f".into()],
            coefficients: [("f".to_string(), 2.0)].into(),
            intercept: 1.0,
            ridge: 0.0,
            training_hash: String::new(),
        };
        let fv = FeatureVector::from_pairs(Family::N, [("f", 3.0)]);
        assert_eq!(predict(&m, &fv), Ok(7.0));
        let zero = FeatureVector::from_pairs(Family::N, [("f", 0.0)]);
        assert_eq!(predict(&m, &zero), Ok(1.0));
        let other = FeatureVector::from_pairs(Family::N, [("g", 3.0)]);
        assert!(matches!(predict(&m, &other), Err(RegressionError::FeatureMismatch { .. })));
        assert!(predict(&m, &FeatureVector::new()).is_err());
    }

    #[test]
    fn dataset_validation() {
        let row = |id: &str, g: f64| Row { pair_id: id.into(), features: vec![1.0], gold: g };
        let names = vec!["f".to_string()];
        assert!(Dataset::new(names.clone(), vec![row("a", 6.0)], true).is_err());
        assert!(Dataset::new(names.clone(), vec![row("a", 6.0)], false).is_ok());
        assert!(Dataset::new(names.clone(), vec![row("a", 1.0), row("a", 2.0)], true).is_err());
        assert!(Dataset::new(names, vec![Row { pair_id: "a".into(), features: vec![], gold: 1.0 }], true).is_err());
    }

    fn arb_data() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (1usize..5, 8usize..30).prop_flat_map(|(p, n)| {
            (prop::collection::vec(prop::collection::vec(-3.0f64..3.0, p), n), prop::collection::vec(0.0f64..5.0, n))
        })
    }

    proptest! {
        #[test]
        fn ridge_shrinks(data in arb_data(), l1 in 0.0f64..2.0, extra in 0.0f64..5.0) {
            let d = dataset(&data.0, &data.1);
            let norm = |m: &AfsModel| m.beta().iter().map(|b| b * b).sum::<f64>();
            let a = fit_linear(&d, l1 + 1e-6).unwrap();
            let b = fit_linear(&d, l1 + 1e-6 + extra).unwrap();
            prop_assert!(norm(&b) <= norm(&a) * (1.0 + 1e-9) + 1e-12);
        }

        #[test]
        fn prediction_is_affine(data in arb_data(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let d = dataset(&data.0, &data.1);
            let m = fit_linear(&d, DEFAULT_RIDGE).unwrap();
            let (u, v) = (&d.rows[0].features, &d.rows[1].features);
            let w: Vec<f64> = u.iter().zip(v).map(|(a, b)| alpha * a + beta * b).collect();
            let p0 = |x: &[f64]| m.predict_values(x) - m.intercept;
            let lhs = m.predict_values(&w);
            let rhs = alpha * p0(u) + beta * p0(v) + m.intercept;
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }
}

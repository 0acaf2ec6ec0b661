use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_linear, Dataset, RegressionError};
use crate::annotation::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Pearson correlation of predictions with gold; 0 when undefined
    /// (constant predictions or gold), with `r_defined` false.
    pub r: f64,
    pub r_defined: bool,
    pub mae: f64,
    pub rms: f64,
    pub n: usize,
}

impl Metrics {
    pub fn compute(pred: &[f64], gold: &[f64]) -> Metrics {
        let n = pred.len();
        let r = pearson(pred, gold).ok();
        let err: Vec<f64> = pred.iter().zip(gold).map(|(p, g)| p - g).collect();
        Metrics {
            r: r.unwrap_or(0.0),
            r_defined: r.is_some(),
            mae: err.iter().map(|e| e.abs()).sum::<f64>() / n as f64,
            rms: (err.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub feature_order: Vec<String>,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub per_fold: Vec<FoldMetrics>,
    pub pooled_predictions: BTreeMap<String, f64>,
    pub seed: u64,
    pub k: usize,
    pub ridge: f64,
    pub training_hash: String,
}

impl CvReport {
    /// Absolute errors in `pair_ids` order, for paired comparisons.
    pub fn abs_errors(&self, gold: &BTreeMap<String, f64>, pair_ids: &[String]) -> Vec<f64> {
        pair_ids.iter().map(|p| (self.pooled_predictions[p] - gold[p]).abs()).collect()
    }
}

/// Row indices of each fold: a seeded shuffle cut into `k` contiguous runs
/// whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    folds
}

pub fn cross_validate(data: &Dataset, k: usize, seed: u64, ridge: f64) -> Result<CvReport, RegressionError> {
    let n = data.len();
    if k < 2 || n < k {
        return Err(RegressionError::BadFolds { k, rows: n });
    }
    let folds = fold_assignment(n, k, seed);

    let results: Vec<(Vec<(usize, f64)>, FoldMetrics)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; n];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let model = fit_linear(&data.subset(&train), ridge)?;
            let preds: Vec<(usize, f64)> = test.iter().map(|&i| (i, model.predict_values(&data.rows[i].features))).collect();
            let p: Vec<f64> = preds.iter().map(|x| x.1).collect();
            let g: Vec<f64> = test.iter().map(|&i| data.rows[i].gold).collect();
            Ok((preds, FoldMetrics { fold: f, n_train: train.len(), metrics: Metrics::compute(&p, &g) }))
        })
        .collect::<Result<_, RegressionError>>()?;

    let mut pooled = vec![f64::NAN; n];
    let mut per_fold = Vec::with_capacity(k);
    for (preds, fm) in results {
        for (i, p) in preds {
            pooled[i] = p;
        }
        per_fold.push(fm);
    }
    let gold: Vec<f64> = data.rows.iter().map(|r| r.gold).collect();
    Ok(CvReport {
        feature_order: data.feature_order.clone(),
        metrics: Metrics::compute(&pooled, &gold),
        per_fold,
        pooled_predictions: data.rows.iter().map(|r| r.pair_id.clone()).zip(pooled).collect(),
        seed,
        k,
        ridge,
        training_hash: data.content_hash(),
    })
}

/// One line per feature set: name, R, MAE, RMS.
pub fn render_cv_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a CvReport)>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>6} {:>6} {:>6}", "Feature Set", "R", "MAE", "RMS");
    for (name, r) in rows {
        let corr = if r.metrics.r_defined { format!("{:.2}", r.metrics.r) } else { "n/a".into() };
        let _ = writeln!(out, "{:<16} {:>6} {:>6.2} {:>6.2}", name, corr, r.metrics.mae, r.metrics.rms);
    }
    out
}

//! Crowd AFS judgments: loading, worker filtering, aggregation, and
//! correlation against gold scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{read_records, JsonlError};

pub const MAX_AFS: u8 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum PearsonError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("correlation undefined for a constant sequence")]
    Constant,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{file}:{line}: unknown pair `{pair_id}`")]
    UnknownPair { file: String, line: usize, pair_id: String },
    #[error("{file}:{line}: {message}")]
    Invalid { file: String, line: usize, message: String },
    #[error("gold standard has no score for judged pair `{0}`")]
    GoldMissing(String),
    #[error("pair `{0}` has no surviving judgments")]
    Unjudged(String),
    #[error("judgment references pair `{0}` outside the pair set")]
    StrayJudgment(String),
    #[error("invalid filter policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Pearson(#[from] PearsonError),
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, PearsonError> {
    if x.len() != y.len() {
        return Err(PearsonError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(PearsonError::TooShort(n));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(PearsonError::Constant);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(PearsonError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AfsJudgment {
    pub worker_id: String,
    pub pair_id: String,
    pub score: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldSource {
    Expert,
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub scores: BTreeMap<String, f64>,
    pub source: GoldSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationFloor {
    /// Fixed correlation value in [-1, 1].
    Absolute(f64),
    /// Percentile (0..=100) of the defined worker correlations, linearly
    /// interpolated.
    Percentile(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    pub min_hits: usize,
    pub hit_size: usize,
    pub correlation_floor: CorrelationFloor,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy { min_hits: 4, hit_size: 5, correlation_floor: CorrelationFloor::Absolute(0.0) }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        if self.min_hits < 1 || self.hit_size < 1 {
            return Err(AnnotationError::InvalidPolicy("min_hits and hit_size must be at least 1".into()));
        }
        match self.correlation_floor {
            CorrelationFloor::Absolute(f) if !(-1.0..=1.0).contains(&f) => {
                Err(AnnotationError::InvalidPolicy(format!("correlation floor {f} outside [-1, 1]")))
            }
            CorrelationFloor::Percentile(p) if !(0.0..=100.0).contains(&p) => {
                Err(AnnotationError::InvalidPolicy(format!("percentile {p} outside [0, 100]")))
            }
            _ => Ok(()),
        }
    }

    pub fn min_volume(&self) -> usize {
        self.min_hits * self.hit_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub worker_id: String,
    pub volume: usize,
    /// Correlation with gold over the worker's pairs; `None` when undefined.
    pub correlation: Option<f64>,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub floor: Option<f64>,
    pub min_volume: usize,
    pub workers: Vec<WorkerStats>,
    pub kept_judgments: usize,
    pub removed_judgments: usize,
}

impl FilterReport {
    pub fn removed(&self) -> impl Iterator<Item = &WorkerStats> {
        self.workers.iter().filter(|w| w.removed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let floor = self.floor.map_or("none".to_string(), |f| format!("{f:.3}"));
        let _ = writeln!(out, "min volume {}, correlation floor {floor}", self.min_volume);
        let _ = writeln!(out, "{:<16} {:>6} {:>8}  removed", "worker", "pairs", "r");
        for w in &self.workers {
            let r = w.correlation.map_or("undef".to_string(), |r| format!("{r:.3}"));
            let _ = writeln!(out, "{:<16} {:>6} {:>8}  {}", w.worker_id, w.volume, r, if w.removed { "yes" } else { "" });
        }
        let _ = writeln!(out, "kept {} judgments, removed {}", self.kept_judgments, self.removed_judgments);
        out
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Drops every judgment of a worker who is both low-volume and below the
/// correlation floor. An undefined correlation counts as below the floor.
pub fn filter_workers(
    judgments: &[AfsJudgment],
    gold: &GoldStandard,
    policy: &FilterPolicy,
) -> Result<(Vec<AfsJudgment>, FilterReport), AnnotationError> {
    policy.validate()?;
    let mut by_worker: BTreeMap<&str, Vec<&AfsJudgment>> = BTreeMap::new();
    for j in judgments {
        if !gold.scores.contains_key(&j.pair_id) {
            return Err(AnnotationError::GoldMissing(j.pair_id.clone()));
        }
        by_worker.entry(&j.worker_id).or_default().push(j);
    }

    let mut workers: Vec<WorkerStats> = by_worker
        .iter()
        .map(|(id, js)| {
            let mine: Vec<f64> = js.iter().map(|j| f64::from(j.score)).collect();
            let theirs: Vec<f64> = js.iter().map(|j| gold.scores[&j.pair_id]).collect();
            WorkerStats { worker_id: id.to_string(), volume: js.len(), correlation: pearson(&mine, &theirs).ok(), removed: false }
        })
        .collect();

    let floor = match policy.correlation_floor {
        CorrelationFloor::Absolute(f) => Some(f),
        CorrelationFloor::Percentile(p) => {
            let mut rs: Vec<f64> = workers.iter().filter_map(|w| w.correlation).collect();
            rs.sort_by(f64::total_cmp);
            (!rs.is_empty()).then(|| percentile(&rs, p))
        }
    };
    let removed: BTreeSet<String> = workers
        .iter_mut()
        .filter_map(|w| {
            let low_volume = w.volume < policy.min_volume();
            let low_r = match (w.correlation, floor) {
                (Some(r), Some(f)) => r < f,
                _ => true,
            };
            w.removed = low_volume && low_r;
            w.removed.then(|| w.worker_id.clone())
        })
        .collect();

    let kept: Vec<AfsJudgment> = judgments.iter().filter(|j| !removed.contains(&j.worker_id)).cloned().collect();
    let report = FilterReport {
        floor,
        min_volume: policy.min_volume(),
        workers,
        kept_judgments: kept.len(),
        removed_judgments: judgments.len() - kept.len(),
    };
    Ok((kept, report))
}

/// Mean score per pair over `pair_ids`; every listed pair needs at least one
/// judgment and every judgment must name a listed pair.
pub fn aggregate_afs(judgments: &[AfsJudgment], pair_ids: &[String]) -> Result<BTreeMap<String, f64>, AnnotationError> {
    let mut acc: BTreeMap<&str, (u32, u32)> = pair_ids.iter().map(|p| (p.as_str(), (0, 0))).collect();
    for j in judgments {
        let slot = acc.get_mut(j.pair_id.as_str()).ok_or_else(|| AnnotationError::StrayJudgment(j.pair_id.clone()))?;
        slot.0 += u32::from(j.score);
        slot.1 += 1;
    }
    acc.into_iter()
        .map(
            |(p, (sum, n))| {
                if n == 0 {
                    Err(AnnotationError::Unjudged(p.to_string()))
                } else {
                    Ok((p.to_string(), f64::from(sum) / f64::from(n)))
                }
            },
        )
        .collect()
}

/// Correlation between two score maps over their shared pairs, with the
/// number of shared pairs.
pub fn gold_correlation(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<(f64, usize), PearsonError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a.iter().filter_map(|(k, &x)| b.get(k).map(|&y| (x, y))).unzip();
    Ok((pearson(&xs, &ys)?, xs.len()))
}

fn check_pair(file: &str, line: usize, pair_id: &str, known: &BTreeSet<String>) -> Result<(), AnnotationError> {
    if known.contains(pair_id) {
        Ok(())
    } else {
        Err(AnnotationError::UnknownPair { file: file.to_string(), line, pair_id: pair_id.to_string() })
    }
}

/// Reads `judgments.jsonl`, checking the score scale, one judgment per
/// (worker, pair), and that every pair is in `known`.
pub fn load_judgments(path: &Path, known: &BTreeSet<String>) -> Result<Vec<AfsJudgment>, AnnotationError> {
    let file = path.display().to_string();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, j) in read_records::<AfsJudgment>(path)? {
        check_pair(&file, line, &j.pair_id, known)?;
        if j.score > MAX_AFS {
            return Err(AnnotationError::Invalid { file, line, message: format!("score {} outside 0..={MAX_AFS}", j.score) });
        }
        if !seen.insert((j.worker_id.clone(), j.pair_id.clone())) {
            return Err(AnnotationError::Invalid {
                file,
                line,
                message: format!("second judgment by `{}` for `{}`", j.worker_id, j.pair_id),
            });
        }
        out.push(j);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct GoldRecord {
    pair_id: String,
    score: f64,
}

pub fn load_gold(path: &Path, known: &BTreeSet<String>, source: GoldSource) -> Result<GoldStandard, AnnotationError> {
    let file = path.display().to_string();
    let mut scores = BTreeMap::new();
    for (line, g) in read_records::<GoldRecord>(path)? {
        check_pair(&file, line, &g.pair_id, known)?;
        if !(0.0..=f64::from(MAX_AFS)).contains(&g.score) {
            return Err(AnnotationError::Invalid { file, line, message: format!("gold score {} outside [0, {MAX_AFS}]", g.score) });
        }
        if scores.insert(g.pair_id.clone(), g.score).is_some() {
            return Err(AnnotationError::Invalid { file, line, message: format!("duplicate gold score for `{}`", g.pair_id) });
        }
    }
    Ok(GoldStandard { scores, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn j(worker: &str, pair: &str, score: u8) -> AfsJudgment {
        AfsJudgment { worker_id: worker.into(), pair_id: pair.into(), score }
    }

    fn pairs(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:02}")).collect()
    }

    fn gold_for(ps: &[String], f: impl Fn(usize) -> f64) -> GoldStandard {
        GoldStandard { scores: ps.iter().enumerate().map(|(i, p)| (p.clone(), f(i))).collect(), source: GoldSource::Expert }
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), Ok(1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]), Ok(-1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]), Ok(0.8));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(PearsonError::LengthMismatch(2, 1)));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(PearsonError::TooShort(1)));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(PearsonError::Constant));
    }

    #[test]
    fn aggregate_examples() {
        let ps = pairs(2);
        let js = [j("a", "p00", 3), j("b", "p00", 4), j("c", "p00", 5), j("d", "p00", 4), j("e", "p00", 4), j("a", "p01", 2)];
        let agg = aggregate_afs(&js, &ps).unwrap();
        assert_eq!(agg["p00"], 4.0);
        assert_eq!(agg["p01"], 2.0);
        let err = aggregate_afs(&js[..5], &ps).unwrap_err();
        assert!(matches!(err, AnnotationError::Unjudged(ref p) if p == "p01"));
        assert!(matches!(aggregate_afs(&js, &ps[..1]), Err(AnnotationError::StrayJudgment(_))));
    }

    #[test]
    fn high_volume_worker_is_kept_regardless_of_correlation() {
        let ps = pairs(25);
        let gold = gold_for(&ps, |i| (i % 6) as f64);
        let js: Vec<_> = ps.iter().enumerate().map(|(i, p)| j("w", p, 5 - (i % 6) as u8)).collect();
        let (kept, report) = filter_workers(&js, &gold, &FilterPolicy::default()).unwrap();
        assert_eq!(kept.len(), 25);
        assert!(report.workers[0].correlation.unwrap() < 0.0);
        assert!(!report.workers[0].removed);
    }

    #[test]
    fn low_volume_low_correlation_worker_is_removed() {
        let ps = pairs(10);
        let gold = gold_for(&ps, |i| (i % 6) as f64);
        // scores chosen so the correlation with gold is clearly negative
        let scores = [2u8, 1, 3, 0, 1, 2, 2, 1, 0, 1];
        let js: Vec<_> = ps.iter().zip(scores).map(|(p, s)| j("bad", p, s)).collect();
        let r = pearson(&scores.map(f64::from), &ps.iter().map(|p| gold.scores[p]).collect::<Vec<_>>()).unwrap();
        assert!(r < 0.0 && r > -1.0, "{r}");
        let mut all = js.clone();
        all.extend(ps.iter().enumerate().map(|(i, p)| j("good", p, (i % 6) as u8)));
        let (kept, report) = filter_workers(&all, &gold, &FilterPolicy::default()).unwrap();
        assert!(kept.iter().all(|k| k.worker_id == "good"));
        assert_eq!(report.removed().map(|w| w.worker_id.as_str()).collect::<Vec<_>>(), ["bad"]);
        assert_eq!(report.removed_judgments, 10);
    }

    #[test]
    fn constant_worker_counts_as_below_floor() {
        let ps = pairs(6);
        let gold = gold_for(&ps, |i| i as f64);
        let js: Vec<_> = ps.iter().map(|p| j("flat", p, 3)).collect();
        let (kept, report) = filter_workers(&js, &gold, &FilterPolicy::default()).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report.workers[0].correlation, None);
    }

    #[test]
    fn vacuous_filter_and_missing_gold() {
        let ps = pairs(4);
        let gold = gold_for(&ps, |i| i as f64);
        let js: Vec<_> = ps.iter().enumerate().map(|(i, p)| j("w", p, i as u8)).collect();
        let (kept, _) = filter_workers(&js, &gold, &FilterPolicy::default()).unwrap();
        assert_eq!(kept, js);
        let partial = gold_for(&ps[..2], |i| i as f64);
        assert!(matches!(filter_workers(&js, &partial, &FilterPolicy::default()), Err(AnnotationError::GoldMissing(_))));
    }

    #[test]
    fn percentile_floor() {
        assert_eq!(percentile(&[0.0, 1.0], 50.0), 0.5);
        assert_eq!(percentile(&[0.1, 0.4, 0.9], 0.0), 0.1);
        assert_eq!(percentile(&[0.1, 0.4, 0.9], 100.0), 0.9);
        let policy = FilterPolicy { correlation_floor: CorrelationFloor::Percentile(101.0), ..FilterPolicy::default() };
        assert!(policy.validate().is_err());
    }

    #[test]
    fn loaders_validate() {
        let dir = tempfile::tempdir().unwrap();
        let known: BTreeSet<String> = pairs(2).into_iter().collect();
        let path = dir.path().join("judgments.jsonl");
        std::fs::write(
            &path,
            "{\"worker_id\":\"a\",\"pair_id\":\"p00\",\"score\":3}\n\n{\"worker_id\":\"a\",\"pair_id\":\"p01\",\"score\":5}\n",
        )
        .unwrap();
        assert_eq!(load_judgments(&path, &known).unwrap().len(), 2);
        std::fs::write(&path, "{\"worker_id\":\"a\",\"pair_id\":\"p00\",\"score\":6}\n").unwrap();
        assert!(matches!(load_judgments(&path, &known), Err(AnnotationError::Invalid { line: 1, .. })));
        std::fs::write(
            &path,
            "{\"worker_id\":\"a\",\"pair_id\":\"p00\",\"score\":1}\n{\"worker_id\":\"a\",\"pair_id\":\"p00\",\"score\":2}\n",
        )
        .unwrap();
        assert!(matches!(load_judgments(&path, &known), Err(AnnotationError::Invalid { line: 2, .. })));
        std::fs::write(&path, "{\"worker_id\":\"a\",\"pair_id\":\"zz\",\"score\":1}\n").unwrap();
        assert!(matches!(load_judgments(&path, &known), Err(AnnotationError::UnknownPair { ref pair_id, .. }) if pair_id == "zz"));

        let gpath = dir.path().join("gold.jsonl");
        std::fs::write(&gpath, "{\"pair_id\":\"p00\",\"score\":2.5}\n").unwrap();
        assert_eq!(load_gold(&gpath, &known, GoldSource::Expert).unwrap().scores["p00"], 2.5);
        std::fs::write(&gpath, "{\"pair_id\":\"p00\",\"score\":5.5}\n").unwrap();
        assert!(load_gold(&gpath, &known, GoldSource::Expert).is_err());
    }

    fn arb_seq() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 3..30)
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_affine(x in arb_seq(), a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], b in -10.0f64..10.0) {
            let y: Vec<f64> = x.iter().rev().map(|v| v * 0.5 + 1.0).collect();
            if let (Ok(r1), Ok(r2)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert_eq!(r1, r2);
                prop_assert!((-1.0..=1.0).contains(&r1));
            }
            let z: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            if let Ok(r) = pearson(&x, &z) {
                prop_assert!((r - a.signum()).abs() < 1e-9);
            }
        }

        #[test]
        fn filter_is_subset_and_idempotent(
            scores in prop::collection::vec((0usize..5, 0usize..12, 0u8..6), 0..80),
            floor in -1.0f64..1.0,
        ) {
            let ps = pairs(12);
            let gold = gold_for(&ps, |i| (i * 7 % 6) as f64);
            let mut seen = BTreeSet::new();
            let js: Vec<_> = scores
                .into_iter()
                .filter(|&(w, p, _)| seen.insert((w, p)))
                .map(|(w, p, s)| j(&format!("w{w}"), &ps[p], s))
                .collect();
            let policy = FilterPolicy { correlation_floor: CorrelationFloor::Absolute(floor), ..FilterPolicy::default() };
            let (once, _) = filter_workers(&js, &gold, &policy).unwrap();
            prop_assert!(once.iter().all(|k| js.contains(k)));
            let (twice, _) = filter_workers(&once, &gold, &policy).unwrap();
            prop_assert_eq!(&twice, &once);
            let judged: Vec<String> = once.iter().map(|k| k.pair_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
            for (p, mean) in aggregate_afs(&once, &judged).unwrap() {
                let s: Vec<u8> = once.iter().filter(|k| k.pair_id == p).map(|k| k.score).collect();
                prop_assert!(mean >= f64::from(*s.iter().min().unwrap()) && mean <= f64::from(*s.iter().max().unwrap()));
            }
        }
    }
}

//! Shared fixtures and independent reference implementations for the
//! integration tests.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use afs_core::experiment::ExperimentConfig;
use afs_core::pyramid::ScuAnnotation;
use afs_core::textproc::stem;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

/// The bundled mini experiment with its output redirected to `out`.
pub fn mini_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&fixture_dir().join("experiment.toml")).expect("fixture config loads");
    cfg.paths.output = out.to_path_buf();
    cfg
}

/// Relative path -> contents for every file under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Usage matrix of the 11-row example pyramid (summaries 1..=5). Labels are
/// placeholders; only usage determines tiers.
pub const EXAMPLE_PYRAMID: [&[u32]; 11] = [
    &[1, 2, 3, 4, 5],
    &[1, 2, 3, 4, 5],
    &[1, 2, 3, 4, 5],
    &[1, 3, 4, 5],
    &[1, 2, 4, 5],
    &[2, 3, 4, 5],
    &[2, 4, 5],
    &[1, 2, 3],
    &[3, 4],
    &[2],
    &[1],
];

/// Tier column as printed next to the example pyramid.
pub const EXAMPLE_TIERS: [usize; 11] = [5, 5, 5, 4, 4, 4, 3, 3, 2, 1, 1];

pub fn example_scus() -> Vec<ScuAnnotation> {
    EXAMPLE_PYRAMID
        .iter()
        .enumerate()
        .map(|(i, used)| ScuAnnotation::new(&format!("row{:02}", i + 1), "dialog-2", &format!("label {}", i + 1), used.iter().copied()))
        .collect()
}

// ---- ROUGE reference -------------------------------------------------------

pub fn stems(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| stem(w).unwrap()).collect()
}

fn ngram_counts(t: &[String], n: usize) -> HashMap<Vec<String>, usize> {
    let mut m = HashMap::new();
    if t.len() >= n {
        for i in 0..=t.len() - n {
            *m.entry(t[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    m
}

fn f_score(hits: f64, len_a: f64, len_b: f64) -> f64 {
    if len_a == 0.0 || len_b == 0.0 {
        return 0.0;
    }
    let (p, r) = (hits / len_a, hits / len_b);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn rouge_n_oracle(a: &[String], b: &[String], n: usize) -> f64 {
    let (ca, cb) = (ngram_counts(a, n), ngram_counts(b, n));
    let hits: usize = ca.iter().map(|(g, &x)| x.min(*cb.get(g).unwrap_or(&0))).sum();
    f_score(hits as f64, ca.values().sum::<usize>() as f64, cb.values().sum::<usize>() as f64)
}

fn lcs_memo(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if i == a.len() || j == b.len() {
        return 0;
    }
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let v = if a[i] == b[j] {
        1 + lcs_memo(a, b, i + 1, j + 1, memo)
    } else {
        lcs_memo(a, b, i + 1, j, memo).max(lcs_memo(a, b, i, j + 1, memo))
    };
    memo.insert((i, j), v);
    v
}

pub fn rouge_l_oracle(a: &[String], b: &[String]) -> f64 {
    let l = lcs_memo(a, b, 0, 0, &mut HashMap::new());
    f_score(l as f64, a.len() as f64, b.len() as f64)
}

// ---- OLS reference ---------------------------------------------------------

/// Solves the uncentered normal equations of `[1 X]` with penalty
/// `diag(0, ridge, .., ridge)` by Gaussian elimination with partial
/// pivoting. Returns (coefficients, intercept).
pub fn ols_oracle(xs: &[Vec<f64>], ys: &[f64], ridge: f64) -> (Vec<f64>, f64) {
    let p = xs[0].len() + 1;
    let row = |x: &Vec<f64>| -> Vec<f64> { std::iter::once(1.0).chain(x.iter().copied()).collect() };
    let mut m = vec![vec![0.0; p + 1]; p];
    for (x, &y) in xs.iter().zip(ys) {
        let z = row(x);
        for i in 0..p {
            for j in 0..p {
                m[i][j] += z[i] * z[j];
            }
            m[i][p] += z[i] * y;
        }
    }
    for (i, r) in m.iter_mut().enumerate().skip(1) {
        r[i] += ridge;
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, pivot);
        for r in col + 1..p {
            let f = m[r][col] / m[col][col];
            for c in col..=p {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut sol = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| m[i][j] * sol[j]).sum();
        sol[i] = (m[i][p] - s) / m[i][i];
    }
    (sol[1..].to_vec(), sol[0])
}

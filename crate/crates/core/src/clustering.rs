//! Average-linkage clustering of proposition labels and within-cluster
//! pair generation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::sparse::{cosine, Counts};
use crate::textproc::{pos_tag, stem_surface, tokenize, Tagger};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("nothing to cluster")]
    EmptyInput,
    #[error("invalid cluster cut: {0}")]
    InvalidCut(String),
    #[error("distance matrix is {rows}x? but row {row} has {len} entries")]
    RaggedMatrix { rows: usize, row: usize, len: usize },
    #[error("clusters do not partition the labels: {0}")]
    NotAPartition(String),
}

/// Stemmed content-word counts for one label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermVector {
    pub weights: Counts,
    pub source_label: String,
}

impl TermVector {
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn vectorize_label(label: &str, tagger: &dyn Tagger) -> TermVector {
    let mut weights = Counts::new();
    for t in pos_tag(&tokenize(label), tagger) {
        if t.pos.is_content() {
            *weights.entry(stem_surface(&t.token.surface)).or_default() += 1;
        }
    }
    TermVector { weights, source_label: label.to_string() }
}

/// `1 - cos(u, v)`, or 1 when either vector is empty.
pub fn cosine_distance(u: &TermVector, v: &TermVector) -> f64 {
    cosine(&u.weights, &v.weights).map_or(1.0, |c| 1.0 - c)
}

/// Where to stop merging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ClusterCut {
    NClusters(usize),
    DistanceThreshold(f64),
}

impl ClusterCut {
    pub fn validate(&self) -> Result<(), ClusterError> {
        match *self {
            ClusterCut::NClusters(0) => Err(ClusterError::InvalidCut("n_clusters must be at least 1".into())),
            ClusterCut::DistanceThreshold(t) if !(0.0..=1.0).contains(&t) => {
                Err(ClusterError::InvalidCut(format!("distance threshold {t} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// One merge step. Clusters are named by their smallest member index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Member indices, each list ascending, lists ordered by first member.
    pub clusters: Vec<Vec<usize>>,
    pub merges: Vec<Merge>,
}

pub fn distance_matrix(vectors: &[TermVector]) -> Vec<Vec<f64>> {
    (0..vectors.len()).into_par_iter().map(|i| vectors.iter().map(|v| cosine_distance(&vectors[i], v)).collect()).collect()
}

pub fn agglomerate(vectors: &[TermVector], cut: ClusterCut) -> Result<Clustering, ClusterError> {
    let mergeable: Vec<bool> = vectors.iter().map(|v| !v.is_empty()).collect();
    agglomerate_matrix(&distance_matrix(vectors), &mergeable, cut)
}

/// UPGMA over a precomputed symmetric distance matrix. Items whose
/// `mergeable` flag is false stay singletons.
///
/// Cluster distances are kept as sums of member-pair distances and divided
/// on demand, so every average is computed the same way regardless of merge
/// history.
pub fn agglomerate_matrix(dist: &[Vec<f64>], mergeable: &[bool], cut: ClusterCut) -> Result<Clustering, ClusterError> {
    let n = dist.len();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    cut.validate()?;
    if let Some((row, r)) = dist.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(ClusterError::RaggedMatrix { rows: n, row, len: r.len() });
    }
    assert_eq!(mergeable.len(), n, "one mergeable flag per item");

    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut sums: Vec<Vec<f64>> = dist.to_vec();
    let mut merges = Vec::new();
    let mut active = n;

    loop {
        if let ClusterCut::NClusters(k) = cut {
            if active <= k {
                break;
            }
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            let Some(mi) = &members[i] else { continue };
            if !mergeable[i] {
                continue;
            }
            for j in i + 1..n {
                let Some(mj) = &members[j] else { continue };
                if !mergeable[j] {
                    continue;
                }
                let d = sums[i][j] / (mi.len() * mj.len()) as f64;
                // strict comparison keeps the earliest (i, j) on ties
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((d, i, j)) = best else { break };
        if let ClusterCut::DistanceThreshold(t) = cut {
            if d > t {
                break;
            }
        }
        let mut right = members[j].take().expect("active cluster");
        let left = members[i].as_mut().expect("active cluster");
        left.append(&mut right);
        left.sort_unstable();
        let size = left.len();
        for k in 0..n {
            if k != i && members[k].is_some() {
                sums[i][k] += sums[j][k];
                sums[k][i] = sums[i][k];
            }
        }
        merges.push(Merge { left: i, right: j, distance: d, size });
        active -= 1;
    }

    Ok(Clustering { clusters: members.into_iter().flatten().collect(), merges })
}

/// A labelled central proposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposition {
    pub id: String,
    pub dialog_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionPair {
    pub pair_id: String,
    pub id_a: String,
    pub id_b: String,
    pub label_a: String,
    pub label_b: String,
    pub source_cluster: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_afs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureVector>,
}

pub fn pair_id(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}|{b}")
    } else {
        format!("{b}|{a}")
    }
}

/// Every unordered pair inside each cluster, members ordered by id.
pub fn within_cluster_pairs(clusters: &[Vec<usize>], props: &[Proposition]) -> Result<Vec<PropositionPair>, ClusterError> {
    let mut seen = vec![false; props.len()];
    for &i in clusters.iter().flatten() {
        match seen.get_mut(i) {
            None => return Err(ClusterError::NotAPartition(format!("index {i} out of range"))),
            Some(true) => return Err(ClusterError::NotAPartition(format!("index {i} appears twice"))),
            Some(s) => *s = true,
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(ClusterError::NotAPartition(format!("index {i} is in no cluster")));
    }

    let mut pairs = Vec::new();
    for (c, cluster) in clusters.iter().enumerate() {
        for (x, &i) in cluster.iter().enumerate() {
            for &j in &cluster[x + 1..] {
                let (a, b) = if props[i].id <= props[j].id { (&props[i], &props[j]) } else { (&props[j], &props[i]) };
                pairs.push(PropositionPair {
                    pair_id: pair_id(&a.id, &b.id),
                    id_a: a.id.clone(),
                    id_b: b.id.clone(),
                    label_a: a.label.clone(),
                    label_b: b.label.clone(),
                    source_cluster: c,
                    gold_afs: None,
                    features: None,
                });
            }
        }
    }
    Ok(pairs)
}

/// Cluster id followed by its member labels, one block per cluster.
pub fn render_clusters(clusters: &[Vec<usize>], props: &[Proposition]) -> String {
    let mut out = String::new();
    for (c, cluster) in clusters.iter().enumerate() {
        let _ = writeln!(out, "cluster {c} ({} labels)", cluster.len());
        for &i in cluster {
            let _ = writeln!(out, "  {}\t{}", props[i].id, props[i].label);
        }
        out.push('\n');
    }
    out
}

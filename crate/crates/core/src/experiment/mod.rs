//! The staged experiment: select, pyramid, propositions, cluster, pairs,
//! ingest-judgments, featurize, train, evaluate, compare.
//!
//! Every stage reads its inputs from the artifacts of earlier stages in the
//! output directory and writes its own, so any stage can be rerun alone and
//! a resumed run skips stages whose artifact is already present.

mod config;
mod stages;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::AnnotationError;
use crate::clustering::ClusterError;
use crate::corpus::CorpusError;
use crate::features::{FeatureError, StsError};
use crate::jsonl::JsonlError;
use crate::pyramid::PyramidError;
use crate::regression::RegressionError;

pub use config::{CvConfig, ExperimentConfig, Paths, StsConfig};
pub use stages::{artifact_path, ClusterArtifact, FeatureRecord, SelectionArtifact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Select,
    Pyramid,
    Propositions,
    Cluster,
    Pairs,
    IngestJudgments,
    Featurize,
    Train,
    Evaluate,
    Compare,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Select,
        Stage::Pyramid,
        Stage::Propositions,
        Stage::Cluster,
        Stage::Pairs,
        Stage::IngestJudgments,
        Stage::Featurize,
        Stage::Train,
        Stage::Evaluate,
        Stage::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Select => "select",
            Stage::Pyramid => "pyramid",
            Stage::Propositions => "propositions",
            Stage::Cluster => "cluster",
            Stage::Pairs => "pairs",
            Stage::IngestJudgments => "ingest-judgments",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Compare => "compare",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| ExperimentError::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("dialog `{dialog_id}`: {source}")]
    Pyramid {
        dialog_id: String,
        #[source]
        source: PyramidError,
    },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("pair `{pair_id}`: {source}")]
    Feature {
        pair_id: String,
        #[source]
        source: FeatureError,
    },
    #[error("feature set {feature_set}: {source}")]
    Regression {
        feature_set: String,
        #[source]
        source: RegressionError,
    },
    #[error("resource: {0}")]
    Resource(String),
    #[error("no gold scores: configure judgments or an expert gold file")]
    NoGold,
    #[error("missing artifact {} (run the earlier stages first)", .0.display())]
    MissingArtifact(PathBuf),
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

impl StageError {
    fn is_missing_resource(&self) -> bool {
        match self {
            StageError::Resource(_) => true,
            StageError::Feature { source, .. } => matches!(
                source,
                FeatureError::MissingResource(_)
                    | FeatureError::MissingCategory(_)
                    | FeatureError::Resource { .. }
                    | FeatureError::Sts(StsError::OfflineCacheMiss { .. } | StsError::Network(_))
            ),
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing resource: {0}")]
    MissingResource(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl ExperimentError {
    /// 1 usage/config, 2 data, 3 missing resource.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::MissingResource(_) => 3,
            ExperimentError::Stage { source, .. } if source.is_missing_resource() => 3,
            ExperimentError::Stage { .. } => 2,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            ExperimentError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run only this stage instead of the whole pipeline.
    pub stage: Option<Stage>,
    /// Skip stages whose artifact already exists.
    pub resume: bool,
    /// Never contact the STS provider; only cached scores are used.
    pub offline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub feature_set: String,
    pub r: f64,
    pub r_defined: bool,
    pub mae: f64,
    pub rms: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// `None` when the error differences have zero variance.
    pub t: Option<f64>,
    pub p: f64,
    pub df: usize,
    pub mean_abs_error_difference: f64,
    pub degenerate_variance: bool,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldAgreement {
    pub r: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub dialogs_selected: usize,
    pub propositions: usize,
    pub clusters: usize,
    pub pairs: usize,
    pub judged_pairs: usize,
    pub gold_agreement: Option<GoldAgreement>,
    pub rows: Vec<ReportRow>,
    pub comparisons: Vec<Comparison>,
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

impl ExperimentReport {
    pub fn render(&self) -> String {
        stages::render_report(self)
    }
}

/// Runs the configured pipeline (or one stage of it). Returns the final
/// report when the compare stage has run or its artifact exists.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<Option<ExperimentReport>, ExperimentError> {
    config.validate()?;
    config.check_paths()?;
    let mut ctx = stages::Context::new(config, opts.offline)?;
    let selected: Vec<Stage> = match opts.stage {
        Some(s) => vec![s],
        None => Stage::ALL.to_vec(),
    };
    for stage in selected {
        let done = stages::artifact_path(config, stage).exists();
        if opts.resume && done {
            log::info!("{stage}: artifact present, skipping");
            continue;
        }
        log::info!("{stage}: running");
        ctx.run(stage).map_err(|source| ExperimentError::Stage { stage, source })?;
    }
    let report_path = stages::artifact_path(config, Stage::Compare);
    if report_path.exists() {
        stages::read_json(&report_path).map(Some).map_err(|source| ExperimentError::Stage { stage: Stage::Compare, source })
    } else {
        Ok(None)
    }
}

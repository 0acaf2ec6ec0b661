use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::annotation::FilterPolicy;
use crate::clustering::ClusterCut;
use crate::corpus::{SelectionCriteria, DEFAULT_SUMMARIES_PER_DIALOG};
use crate::features::{FamilySet, HttpStsProvider};
use crate::pyramid::DEFAULT_MIN_TIER;
use crate::regression::{DEFAULT_FOLDS, DEFAULT_RIDGE};

/// File locations. Relative paths are resolved against the directory of
/// the config file; unset resources fall back to the bundled ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub output: PathBuf,
    pub judgments: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub word_space: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub sts_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub k: usize,
    pub ridge: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { k: DEFAULT_FOLDS, ridge: DEFAULT_RIDGE }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case", deny_unknown_fields)]
pub enum StsConfig {
    /// Only cached scores are available.
    #[default]
    None,
    Constant {
        score: f64,
    },
    Http {
        endpoint: String,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        param_a: Option<String>,
        #[serde(default)]
        param_b: Option<String>,
    },
}

fn default_timeout() -> f64 {
    10.0
}

fn default_scale() -> f64 {
    1.0
}

impl StsConfig {
    pub fn http_provider(&self) -> Option<HttpStsProvider> {
        let StsConfig::Http { endpoint, timeout_secs, scale, param_a, param_b } = self else {
            return None;
        };
        let mut p = HttpStsProvider::new(endpoint.clone());
        p.timeout = Duration::from_secs_f64(*timeout_secs);
        p.scale = *scale;
        if let Some(a) = param_a {
            p.param_a = a.clone();
        }
        if let Some(b) = param_b {
            p.param_b = b.clone();
        }
        Some(p)
    }
}

fn default_feature_sets() -> Vec<FamilySet> {
    ["N", "U", "N-L-R-D-U"].iter().map(|s| s.parse().expect("static tags")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_summaries")]
    pub summaries_per_dialog: u32,
    #[serde(default = "default_min_tier")]
    pub min_tier: usize,
    #[serde(default = "default_feature_sets")]
    pub feature_sets: Vec<FamilySet>,
    pub paths: Paths,
    #[serde(default)]
    pub selection: SelectionCriteria,
    pub cluster: ClusterCut,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub filter: FilterPolicy,
    #[serde(default)]
    pub sts: StsConfig,
}

fn default_summaries() -> u32 {
    DEFAULT_SUMMARIES_PER_DIALOG
}

fn default_min_tier() -> usize {
    DEFAULT_MIN_TIER
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Reads a config file and anchors its relative paths at the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let ps = &mut self.paths;
        fix(&mut ps.corpus);
        fix(&mut ps.output);
        for p in [&mut ps.judgments, &mut ps.gold, &mut ps.lexicon, &mut ps.word_space, &mut ps.tags, &mut ps.stopwords, &mut ps.sts_cache]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if let Err(m) = self.selection.validate() {
            return bad(m);
        }
        if self.summaries_per_dialog == 0 {
            return bad("summaries_per_dialog must be at least 1".into());
        }
        if self.min_tier == 0 {
            return bad("min_tier must be at least 1".into());
        }
        if let Err(e) = self.cluster.validate() {
            return bad(e.to_string());
        }
        if self.cv.k < 2 {
            return bad(format!("cv.k must be at least 2, got {}", self.cv.k));
        }
        if !(self.cv.ridge.is_finite() && self.cv.ridge >= 0.0) {
            return bad(format!("cv.ridge must be nonnegative, got {}", self.cv.ridge));
        }
        if let Err(e) = self.filter.validate() {
            return bad(e.to_string());
        }
        if self.feature_sets.is_empty() {
            return bad("feature_sets is empty".into());
        }
        for (i, s) in self.feature_sets.iter().enumerate() {
            if self.feature_sets[..i].contains(s) {
                return bad(format!("feature set {s} listed twice"));
            }
        }
        match &self.sts {
            StsConfig::Constant { score } if !(0.0..=1.0).contains(score) => bad(format!("constant STS score {score} outside [0, 1]")),
            StsConfig::Http { timeout_secs, scale, .. } if !(*timeout_secs > 0.0 && *scale > 0.0) => {
                bad("STS timeout and scale must be positive".into())
            }
            _ => Ok(()),
        }
    }

    /// Every configured input path must exist. The STS cache may be absent
    /// (it is created on first write) and the output directory is created.
    pub fn check_paths(&self) -> Result<(), ExperimentError> {
        let ps = &self.paths;
        let required = [Some(&ps.corpus), ps.judgments.as_ref(), ps.gold.as_ref()];
        for p in required.into_iter().flatten() {
            if !p.exists() {
                return Err(ExperimentError::Config(format!("path does not exist: {}", p.display())));
            }
        }
        for p in [&ps.lexicon, &ps.word_space, &ps.tags, &ps.stopwords].into_iter().flatten() {
            if !p.exists() {
                return Err(ExperimentError::MissingResource(format!("resource file does not exist: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Union of all families requested by any feature set.
    pub fn all_families(&self) -> FamilySet {
        self.feature_sets.iter().fold(FamilySet::default(), |acc, s| acc.union(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [paths]
        corpus = "corpus"
        output = "out"

        [cluster]
        mode = "n_clusters"
        value = 4
    "#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.min_tier, 3);
        assert_eq!(c.cv.k, 10);
        assert_eq!(c.feature_sets.len(), 3);
        assert_eq!(c.sts, StsConfig::None);
        assert_eq!(c.cluster, ClusterCut::NClusters(4));
        c.validate().unwrap();
    }

    #[test]
    fn full_schema() {
        let c = ExperimentConfig::parse(
            r#"
            seed = 5
            min_tier = 2
            feature_sets = ["N", "N-L"]
            [paths]
            corpus = "c"
            output = "o"
            sts_cache = "cache.tsv"
            [selection]
            min_turns_per_conversant = 2
            max_words_per_turn = 100
            one_dialog_per_author_pair = false
            [cluster]
            mode = "distance_threshold"
            value = 0.4
            [cv]
            k = 5
            ridge = 0.01
            [filter]
            min_hits = 2
            hit_size = 5
            correlation_floor = { percentile = 10.0 }
            [sts]
            provider = "http"
            endpoint = "http://localhost:9/sts"
            scale = 5.0
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.http_provider_scale(), Some(5.0));
        let mut c2 = c.clone();
        c2.resolve_paths(Path::new("/base"));
        assert_eq!(c2.paths.sts_cache.unwrap(), Path::new("/base/cache.tsv"));
    }

    impl ExperimentConfig {
        fn http_provider_scale(&self) -> Option<f64> {
            self.sts.http_provider().map(|p| p.scale)
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("[paths]\ncorpus='c'\noutput='o'\n").is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}\n[extra]\nx=1\n")).is_err());
        let with = |extra: &str| ExperimentConfig::parse(&format!("{extra}\n{MINIMAL}")).unwrap();
        assert!(with("feature_sets = [\"N\", \"N\"]").validate().is_err());
        assert!(with("feature_sets = []").validate().is_err());
        assert!(ExperimentConfig::parse(&format!("feature_sets = [\"Q\"]\n{MINIMAL}")).is_err());
        assert!(with("min_tier = 0").validate().is_err());
    }
}

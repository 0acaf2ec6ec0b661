use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    Comparison, ExperimentConfig, ExperimentError, ExperimentReport, GoldAgreement, ReportRow, Stage, StageError, StsConfig,
    SIGNIFICANCE_LEVEL,
};
use crate::annotation::{
    aggregate_afs, filter_workers, gold_correlation, load_gold, load_judgments, FilterReport, GoldSource, GoldStandard,
};
use crate::clustering::{
    agglomerate, render_clusters, vectorize_label, within_cluster_pairs, ClusterCut, Merge, Proposition, PropositionPair,
};
use crate::corpus::{load_corpus_with, select_dialogs, Corpus, SelectionCriteria};
use crate::features::{
    external_sts, featurize, CategoryLexicon, ConstantStsProvider, Family, FamilySet, FeatureResources, FeatureVector, StsCache,
    StsProvider, StsSource, WordSpace,
};
use crate::jsonl::{read_records, write_records};
use crate::pyramid::{build_pyramid, Pyramid, ScuAnnotation};
use crate::regression::{cross_validate, fit_linear, paired_ttest, render_cv_table, CvReport, Dataset};
use crate::textproc::{LexiconTagger, StopWords, Tagger};

pub fn artifact_path(cfg: &ExperimentConfig, stage: Stage) -> PathBuf {
    let file = match stage {
        Stage::Select => "selected.json",
        Stage::Pyramid => "pyramids.json",
        Stage::Propositions => "propositions.jsonl",
        Stage::Cluster => "clusters.json",
        Stage::Pairs => "pairs.jsonl",
        Stage::IngestJudgments => "annotations.json",
        Stage::Featurize => "features.jsonl",
        Stage::Train => "models/index.json",
        Stage::Evaluate => "cv/index.json",
        Stage::Compare => "report.json",
    };
    cfg.paths.output.join(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub criteria: SelectionCriteria,
    pub input_dialogs: usize,
    pub dialog_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub cut: ClusterCut,
    /// Proposition ids per cluster.
    pub clusters: Vec<Vec<String>>,
    /// Propositions without content words, each left as a singleton.
    pub empty_labels: Vec<String>,
    pub merges: Vec<Merge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub pair_id: String,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AnnotationArtifact {
    raw_judgments: usize,
    kept_judgments: usize,
    training_gold: Option<GoldStandard>,
    expert_agreement: Option<GoldAgreement>,
    filter: Option<FilterReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    feature_set: String,
    file: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StageError {
    StageError::Artifact { path: path.display().to_string(), message: e.to_string() }
}

/// Writes via a sibling temp file so a crashed stage never leaves a
/// truncated artifact behind.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), StageError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub(super) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StageError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            StageError::MissingArtifact(path.to_path_buf())
        } else {
            io_err(path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), StageError> {
    let tmp = path.with_extension("tmp");
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    write_records(&tmp, records)?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StageError> {
    if !path.exists() {
        return Err(StageError::MissingArtifact(path.to_path_buf()));
    }
    Ok(read_records(path)?.into_iter().map(|(_, r)| r).collect())
}

pub(super) struct Context<'a> {
    cfg: &'a ExperimentConfig,
    offline: bool,
    corpus: Option<Corpus>,
    tagger: Option<Arc<dyn Tagger>>,
}

impl<'a> Context<'a> {
    pub(super) fn new(cfg: &'a ExperimentConfig, offline: bool) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(&cfg.paths.output)
            .map_err(|e| ExperimentError::Config(format!("cannot create output directory {}: {e}", cfg.paths.output.display())))?;
        Ok(Context { cfg, offline, corpus: None, tagger: None })
    }

    fn out(&self, file: &str) -> PathBuf {
        self.cfg.paths.output.join(file)
    }

    fn artifact(&self, stage: Stage) -> PathBuf {
        artifact_path(self.cfg, stage)
    }

    pub(super) fn run(&mut self, stage: Stage) -> Result<(), StageError> {
        match stage {
            Stage::Select => self.select(),
            Stage::Pyramid => self.pyramid(),
            Stage::Propositions => self.propositions(),
            Stage::Cluster => self.cluster(),
            Stage::Pairs => self.pairs(),
            Stage::IngestJudgments => self.ingest(),
            Stage::Featurize => self.featurize(),
            Stage::Train => self.train(),
            Stage::Evaluate => self.evaluate(),
            Stage::Compare => self.compare(),
        }
    }

    fn corpus(&mut self) -> Result<&Corpus, StageError> {
        if self.corpus.is_none() {
            self.corpus = Some(load_corpus_with(&self.cfg.paths.corpus, self.cfg.summaries_per_dialog)?);
        }
        Ok(self.corpus.as_ref().expect("loaded above"))
    }

    fn tagger(&mut self) -> Result<Arc<dyn Tagger>, StageError> {
        if self.tagger.is_none() {
            let t = match &self.cfg.paths.tags {
                Some(p) => LexiconTagger::load(p).map_err(|e| StageError::Resource(e.to_string()))?,
                None => LexiconTagger::bundled().clone(),
            };
            self.tagger = Some(Arc::new(t));
        }
        Ok(Arc::clone(self.tagger.as_ref().expect("loaded above")))
    }

    fn resources(&mut self, families: &FamilySet) -> Result<FeatureResources, StageError> {
        let ps = &self.cfg.paths;
        let resource = |e: &dyn std::fmt::Display| StageError::Resource(e.to_string());
        let stopwords = match &ps.stopwords {
            Some(p) => StopWords::load(p).map_err(|e| resource(&e))?,
            None => StopWords::bundled().clone(),
        };
        let lexicon = if families.contains(Family::L) {
            Some(match &ps.lexicon {
                Some(p) => CategoryLexicon::load(p).map_err(|e| resource(&e))?,
                None => CategoryLexicon::bundled().clone(),
            })
        } else {
            None
        };
        let word_space = if families.contains(Family::D) {
            Some(match &ps.word_space {
                Some(p) => WordSpace::load(p).map_err(|e| resource(&e))?,
                None => WordSpace::bundled().clone(),
            })
        } else {
            None
        };
        let sts = if families.contains(Family::U) {
            let cache = match &ps.sts_cache {
                Some(p) => StsCache::open(p).map_err(|e| resource(&e))?,
                None => StsCache::in_memory(),
            };
            let provider: Option<Box<dyn StsProvider>> = match (&self.cfg.sts, self.offline) {
                (_, true) | (StsConfig::None, _) => None,
                (StsConfig::Constant { score }, _) => Some(Box::new(ConstantStsProvider(*score))),
                (http @ StsConfig::Http { .. }, _) => Some(Box::new(http.http_provider().expect("http config"))),
            };
            Some(StsSource { cache, provider })
        } else {
            None
        };
        Ok(FeatureResources { stopwords, tagger: self.tagger()?, lexicon, word_space, sts })
    }

    fn select(&mut self) -> Result<(), StageError> {
        let criteria = self.cfg.selection.clone();
        let corpus = self.corpus()?;
        let kept = select_dialogs(&corpus.dialogs, &criteria);
        log::info!("selected {} of {} dialogs", kept.len(), corpus.dialogs.len());
        let artifact = SelectionArtifact {
            criteria,
            input_dialogs: corpus.dialogs.len(),
            dialog_ids: kept.into_iter().map(|d| d.dialog_id).collect(),
        };
        write_json(&self.artifact(Stage::Select), &artifact)
    }

    fn pyramid(&mut self) -> Result<(), StageError> {
        let sel: SelectionArtifact = read_json(&self.artifact(Stage::Select))?;
        let n = self.cfg.summaries_per_dialog;
        let corpus = self.corpus()?;
        let mut pyramids = Vec::new();
        for id in &sel.dialog_ids {
            let scus: Vec<ScuAnnotation> = corpus.scus_for(id).cloned().collect();
            if scus.is_empty() {
                log::warn!("dialog {id} has no SCU annotations");
                continue;
            }
            let p = build_pyramid(&scus, n).map_err(|source| StageError::Pyramid { dialog_id: id.clone(), source })?;
            pyramids.push(p);
        }
        let text: String = pyramids.iter().map(|p| p.render() + "\n").collect();
        write_atomic(&self.out("pyramids.txt"), text.as_bytes())?;
        write_json(&self.artifact(Stage::Pyramid), &pyramids)
    }

    fn propositions(&mut self) -> Result<(), StageError> {
        let pyramids: Vec<Pyramid> = read_json(&self.artifact(Stage::Pyramid))?;
        let props: Vec<Proposition> = pyramids
            .iter()
            .flat_map(|p| {
                p.central_entries(self.cfg.min_tier).map(|e| Proposition {
                    id: e.scu.scu_id.clone(),
                    dialog_id: e.scu.dialog_id.clone(),
                    label: e.scu.label.clone(),
                })
            })
            .collect();
        log::info!("{} central propositions at tier >= {}", props.len(), self.cfg.min_tier);
        write_jsonl(&self.artifact(Stage::Propositions), &props)
    }

    fn cluster(&mut self) -> Result<(), StageError> {
        let props: Vec<Proposition> = read_jsonl(&self.artifact(Stage::Propositions))?;
        let tagger = self.tagger()?;
        let vectors: Vec<_> = props.iter().map(|p| vectorize_label(&p.label, tagger.as_ref())).collect();
        let c = agglomerate(&vectors, self.cfg.cluster)?;
        let artifact = ClusterArtifact {
            cut: self.cfg.cluster,
            clusters: c.clusters.iter().map(|m| m.iter().map(|&i| props[i].id.clone()).collect()).collect(),
            empty_labels: props.iter().zip(&vectors).filter(|(_, v)| v.is_empty()).map(|(p, _)| p.id.clone()).collect(),
            merges: c.merges,
        };
        write_atomic(&self.out("clusters.txt"), render_clusters(&c.clusters, &props).as_bytes())?;
        write_json(&self.artifact(Stage::Cluster), &artifact)
    }

    fn pairs(&mut self) -> Result<(), StageError> {
        let props: Vec<Proposition> = read_jsonl(&self.artifact(Stage::Propositions))?;
        let artifact: ClusterArtifact = read_json(&self.artifact(Stage::Cluster))?;
        let index: BTreeMap<&str, usize> = props.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
        let clusters = artifact
            .clusters
            .iter()
            .map(|c| {
                c.iter()
                    .map(|id| {
                        index
                            .get(id.as_str())
                            .copied()
                            .ok_or_else(|| io_err(&self.artifact(Stage::Cluster), format!("unknown proposition `{id}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pairs = within_cluster_pairs(&clusters, &props)?;
        log::info!("{} within-cluster pairs from {} clusters", pairs.len(), clusters.len());
        write_jsonl(&self.artifact(Stage::Pairs), &pairs)
    }

    fn ingest(&mut self) -> Result<(), StageError> {
        let pairs: Vec<PropositionPair> = read_jsonl(&self.artifact(Stage::Pairs))?;
        let known: BTreeSet<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
        let expert = match &self.cfg.paths.gold {
            Some(p) => Some(load_gold(p, &known, GoldSource::Expert)?),
            None => None,
        };
        let judgments = match &self.cfg.paths.judgments {
            Some(p) => load_judgments(p, &known)?,
            None => Vec::new(),
        };
        let raw = judgments.len();
        let raw_judged: BTreeSet<String> = judgments.iter().map(|j| j.pair_id.clone()).collect();

        let (kept, filter) = match (&expert, judgments.is_empty()) {
            (Some(g), false) => {
                let (kept, report) = filter_workers(&judgments, g, &self.cfg.filter)?;
                (kept, Some(report))
            }
            (None, false) => {
                log::warn!("no expert gold configured; worker filtering skipped");
                (judgments, None)
            }
            (_, true) => (judgments, None),
        };
        // pairs that lost every judgment to filtering make aggregation fail
        let judged: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).filter(|id| raw_judged.contains(id)).collect();

        let training_gold = if !kept.is_empty() {
            Some(GoldStandard { scores: aggregate_afs(&kept, &judged)?, source: GoldSource::Aggregate })
        } else {
            expert.clone()
        };
        let expert_agreement = match (&training_gold, &expert) {
            (Some(t), Some(e)) if t.source == GoldSource::Aggregate => {
                gold_correlation(&t.scores, &e.scores).ok().map(|(r, n)| GoldAgreement { r, n })
            }
            _ => None,
        };
        if let Some(f) = &filter {
            write_atomic(&self.out("filter-report.txt"), f.render().as_bytes())?;
        }
        let artifact = AnnotationArtifact { raw_judgments: raw, kept_judgments: kept.len(), training_gold, expert_agreement, filter };
        write_json(&self.artifact(Stage::IngestJudgments), &artifact)
    }

    fn featurize(&mut self) -> Result<(), StageError> {
        let pairs: Vec<PropositionPair> = read_jsonl(&self.artifact(Stage::Pairs))?;
        let families = self.cfg.all_families();
        let res = self.resources(&families)?;
        let feature_err = |p: &PropositionPair, source| StageError::Feature { pair_id: p.pair_id.clone(), source };
        if let Some(first) = pairs.first() {
            res.check(&families).map_err(|e| feature_err(first, e))?;
        }
        // Fill the STS cache in pair order first, so cache appends do not
        // depend on thread scheduling.
        if let Some(sts) = &res.sts {
            for p in &pairs {
                external_sts(&p.label_a, &p.label_b, sts.provider.as_deref(), &sts.cache).map_err(|e| feature_err(p, e.into()))?;
            }
        }
        let records: Vec<FeatureRecord> = pairs
            .par_iter()
            .map(|p| {
                featurize((&p.label_a, &p.label_b), &families, &res)
                    .map(|features| FeatureRecord { pair_id: p.pair_id.clone(), features })
                    .map_err(|e| feature_err(p, e))
            })
            .collect::<Result<_, _>>()?;
        write_jsonl(&self.artifact(Stage::Featurize), &records)
    }

    fn training_gold(&self) -> Result<GoldStandard, StageError> {
        let a: AnnotationArtifact = read_json(&self.artifact(Stage::IngestJudgments))?;
        match a.training_gold {
            Some(g) if !g.scores.is_empty() => Ok(g),
            _ => Err(StageError::NoGold),
        }
    }

    /// Judged pairs in pair order, restricted to `set`.
    fn dataset(&self, set: &FamilySet, records: &[FeatureRecord], gold: &GoldStandard) -> Result<Dataset, StageError> {
        let restricted: Vec<(&str, FeatureVector, f64)> = records
            .iter()
            .filter_map(|r| gold.scores.get(&r.pair_id).map(|&g| (r.pair_id.as_str(), r.features.restrict(set), g)))
            .collect();
        if let Some((id, fv, _)) = restricted.iter().find(|(_, fv, _)| fv.len() != set.width()) {
            return Err(io_err(
                &self.artifact(Stage::Featurize),
                format!("pair `{id}` has {} features for set {set}, expected {}", fv.len(), set.width()),
            ));
        }
        Dataset::from_vectors(restricted.iter().map(|(id, fv, g)| (*id, fv, *g)))
            .map_err(|source| StageError::Regression { feature_set: set.to_string(), source })
    }

    fn train(&mut self) -> Result<(), StageError> {
        let records: Vec<FeatureRecord> = read_jsonl(&self.artifact(Stage::Featurize))?;
        let gold = self.training_gold()?;
        let mut index = Vec::new();
        for set in &self.cfg.feature_sets {
            let data = self.dataset(set, &records, &gold)?;
            let model =
                fit_linear(&data, self.cfg.cv.ridge).map_err(|source| StageError::Regression { feature_set: set.to_string(), source })?;
            let file = format!("{}.json", set_file_stem(set));
            write_json(&self.out("models").join(&file), &model)?;
            index.push(IndexEntry { feature_set: set.to_string(), file });
        }
        write_json(&self.artifact(Stage::Train), &index)
    }

    fn evaluate(&mut self) -> Result<(), StageError> {
        let records: Vec<FeatureRecord> = read_jsonl(&self.artifact(Stage::Featurize))?;
        let gold = self.training_gold()?;
        let mut index = Vec::new();
        let mut reports = Vec::new();
        for set in &self.cfg.feature_sets {
            let data = self.dataset(set, &records, &gold)?;
            let report = cross_validate(&data, self.cfg.cv.k, self.cfg.seed, self.cfg.cv.ridge)
                .map_err(|source| StageError::Regression { feature_set: set.to_string(), source })?;
            let file = format!("{}.json", set_file_stem(set));
            write_json(&self.out("cv").join(&file), &report)?;
            index.push(IndexEntry { feature_set: set.to_string(), file });
            reports.push((set.to_string(), report));
        }
        let table = render_cv_table(reports.iter().map(|(n, r)| (n.as_str(), r)));
        write_atomic(&self.out("cv-table.txt"), table.as_bytes())?;
        write_json(&self.artifact(Stage::Evaluate), &index)
    }

    fn compare(&mut self) -> Result<(), StageError> {
        let gold = self.training_gold()?;
        let index: Vec<IndexEntry> = read_json(&self.artifact(Stage::Evaluate))?;
        let mut reports: Vec<(String, CvReport)> = Vec::new();
        for set in &self.cfg.feature_sets {
            let name = set.to_string();
            let entry = index
                .iter()
                .find(|e| e.feature_set == name)
                .ok_or_else(|| io_err(&self.artifact(Stage::Evaluate), format!("no CV report for feature set {name}")))?;
            reports.push((name, read_json(&self.out("cv").join(&entry.file))?));
        }
        let pair_order: Vec<String> = reports.first().map(|(_, r)| r.pooled_predictions.keys().cloned().collect()).unwrap_or_default();

        let mut comparisons = Vec::new();
        for (i, (na, ra)) in reports.iter().enumerate() {
            for (nb, rb) in &reports[i + 1..] {
                let ea = ra.abs_errors(&gold.scores, &pair_order);
                let eb = rb.abs_errors(&gold.scores, &pair_order);
                let t = paired_ttest(&ea, &eb).map_err(|source| StageError::Regression { feature_set: format!("{na} vs {nb}"), source })?;
                comparisons.push(Comparison {
                    a: na.clone(),
                    b: nb.clone(),
                    t: t.t.is_finite().then_some(t.t),
                    p: t.p,
                    df: t.df,
                    mean_abs_error_difference: t.mean_difference,
                    degenerate_variance: t.degenerate_variance,
                    significant: t.p < SIGNIFICANCE_LEVEL,
                });
            }
        }

        let sel: SelectionArtifact = read_json(&self.artifact(Stage::Select))?;
        let props: Vec<Proposition> = read_jsonl(&self.artifact(Stage::Propositions))?;
        let clusters: ClusterArtifact = read_json(&self.artifact(Stage::Cluster))?;
        let pairs: Vec<PropositionPair> = read_jsonl(&self.artifact(Stage::Pairs))?;
        let annotations: AnnotationArtifact = read_json(&self.artifact(Stage::IngestJudgments))?;
        let report = ExperimentReport {
            seed: self.cfg.seed,
            dialogs_selected: sel.dialog_ids.len(),
            propositions: props.len(),
            clusters: clusters.clusters.len(),
            pairs: pairs.len(),
            judged_pairs: gold.scores.len(),
            gold_agreement: annotations.expert_agreement,
            rows: reports
                .iter()
                .map(|(name, r)| ReportRow {
                    feature_set: name.clone(),
                    r: r.metrics.r,
                    r_defined: r.metrics.r_defined,
                    mae: r.metrics.mae,
                    rms: r.metrics.rms,
                    n: r.metrics.n,
                })
                .collect(),
            comparisons,
        };
        write_json(&self.out("significance.json"), &report.comparisons)?;
        write_atomic(&self.out("report.txt"), render_report(&report).as_bytes())?;
        write_json(&self.artifact(Stage::Compare), &report)
    }
}

fn set_file_stem(set: &FamilySet) -> String {
    let s = set.to_string();
    if s.is_empty() {
        "none".into()
    } else {
        s
    }
}

pub(super) fn render_report(r: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} dialogs, {} central propositions, {} clusters, {} pairs, {} judged",
        r.dialogs_selected, r.propositions, r.clusters, r.pairs, r.judged_pairs
    );
    if let Some(g) = &r.gold_agreement {
        let _ = writeln!(out, "aggregate vs expert gold: r = {:.3} over {} pairs", g.r, g.n);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<16} {:>6} {:>6} {:>6}", "Feature Set", "R", "MAE", "RMS");
    for row in &r.rows {
        let corr = if row.r_defined { format!("{:.2}", row.r) } else { "n/a".into() };
        let _ = writeln!(out, "{:<16} {:>6} {:>6.2} {:>6.2}", row.feature_set, corr, row.mae, row.rms);
    }
    if !r.comparisons.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "paired t-tests on absolute errors (seed {})", r.seed);
        for c in &r.comparisons {
            let t = c.t.map_or("degenerate".to_string(), |t| format!("{t:.3}"));
            let mark = if c.significant { " *" } else { "" };
            let _ = writeln!(out, "  {} vs {}: t = {t}, df = {}, p = {:.4}{mark}", c.a, c.b, c.df, c.p);
        }
    }
    out
}

//! Dialog corpora: loading, cross-reference validation and dialog selection.
//!
//! A corpus directory holds three line-delimited JSON files:
//!
//! * `dialogs.jsonl`: `{dialog_id, thread_id, topic, turns: [{author_id, index, text}]}`
//! * `summaries.jsonl`: `{summary_id, dialog_id, writer_index, text}`
//! * `scus.jsonl`: `{scu_id, dialog_id, label, used_by: [int]}`
//!
//! Unknown fields are ignored. Worker judgments and gold scores reference
//! proposition pairs, which only exist after clustering; they are loaded by
//! [`crate::annotation`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{read_records, JsonlError};
use crate::pyramid::ScuAnnotation;

pub const DIALOGS_FILE: &str = "dialogs.jsonl";
pub const SUMMARIES_FILE: &str = "summaries.jsonl";
pub const SCUS_FILE: &str = "scus.jsonl";

/// Summaries collected per dialog unless configured otherwise.
pub const DEFAULT_SUMMARIES_PER_DIALOG: u32 = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{file}:{line}: unknown {kind} `{id}`")]
    Dangling { file: String, line: usize, kind: &'static str, id: String },
    #[error("{file}:{line}: {message}")]
    Invalid { file: String, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub author_id: String,
    pub index: u32,
    pub text: String,
    pub word_count: usize,
}

impl Turn {
    pub fn new(author_id: impl Into<String>, index: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        Turn { author_id: author_id.into(), index, word_count: text.split_whitespace().count(), text }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub dialog_id: String,
    pub thread_id: String,
    pub topic: String,
    pub turns: Vec<Turn>,
}

impl Dialog {
    /// The two conversants, ordered as first seen.
    pub fn authors(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for t in &self.turns {
            if !seen.contains(&t.author_id.as_str()) {
                seen.push(t.author_id.as_str());
            }
        }
        seen
    }

    pub fn turns_by(&self, author: &str) -> usize {
        self.turns.iter().filter(|t| t.author_id == author).count()
    }

    /// Unordered author pair, used as the de-duplication key within a thread.
    pub fn author_pair(&self) -> (String, String) {
        let a = self.authors();
        let (x, y) = (a.first().copied().unwrap_or(""), a.get(1).copied().unwrap_or(""));
        if x <= y {
            (x.to_string(), y.to_string())
        } else {
            (y.to_string(), x.to_string())
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.turns.is_empty() {
            return Err(format!("dialog `{}` has no turns", self.dialog_id));
        }
        for (i, t) in self.turns.iter().enumerate() {
            if t.index as usize != i + 1 {
                return Err(format!(
                    "dialog `{}`: turn indices must be contiguous from 1, found {} at position {}",
                    self.dialog_id,
                    t.index,
                    i + 1
                ));
            }
        }
        let authors = self.authors();
        if authors.len() != 2 {
            return Err(format!("dialog `{}` must have exactly 2 authors, found {}", self.dialog_id, authors.len()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub summary_id: String,
    pub dialog_id: String,
    pub writer_index: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub min_turns_per_conversant: usize,
    pub max_words_per_turn: usize,
    pub one_dialog_per_author_pair: bool,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria { min_turns_per_conversant: 3, max_words_per_turn: 250, one_dialog_per_author_pair: true }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_turns_per_conversant < 1 {
            return Err("min_turns_per_conversant must be at least 1".into());
        }
        if self.max_words_per_turn < 1 {
            return Err("max_words_per_turn must be at least 1".into());
        }
        Ok(())
    }

    fn admits(&self, d: &Dialog) -> bool {
        d.authors().iter().all(|a| d.turns_by(a) >= self.min_turns_per_conversant)
            && d.turns.iter().all(|t| t.word_count < self.max_words_per_turn)
    }
}

/// Keeps dialogs with enough turns per conversant and every turn strictly
/// under the word cap. With `one_dialog_per_author_pair`, only the first
/// qualifying dialog per (thread, unordered author pair) survives. Input
/// order is preserved.
pub fn select_dialogs(dialogs: &[Dialog], criteria: &SelectionCriteria) -> Vec<Dialog> {
    let mut seen = HashSet::new();
    dialogs
        .iter()
        .filter(|d| criteria.admits(d))
        .filter(|d| !criteria.one_dialog_per_author_pair || seen.insert((d.thread_id.clone(), d.author_pair())))
        .cloned()
        .collect()
}

/// A fully linked in-memory corpus. Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub dialogs: Vec<Dialog>,
    pub summaries: Vec<Summary>,
    pub scus: Vec<ScuAnnotation>,
}

impl Corpus {
    pub fn dialog(&self, id: &str) -> Option<&Dialog> {
        self.dialogs.iter().find(|d| d.dialog_id == id)
    }

    pub fn summaries_for<'a>(&'a self, dialog_id: &'a str) -> impl Iterator<Item = &'a Summary> + 'a {
        self.summaries.iter().filter(move |s| s.dialog_id == dialog_id)
    }

    pub fn scus_for<'a>(&'a self, dialog_id: &'a str) -> impl Iterator<Item = &'a ScuAnnotation> + 'a {
        self.scus.iter().filter(move |s| s.dialog_id == dialog_id)
    }
}

#[derive(Deserialize)]
struct RawTurn {
    author_id: String,
    index: u32,
    text: String,
}

#[derive(Deserialize)]
struct RawDialog {
    dialog_id: String,
    thread_id: String,
    #[serde(default)]
    topic: String,
    turns: Vec<RawTurn>,
}

/// Loads a corpus directory with the default of five summaries per dialog.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with(dir, DEFAULT_SUMMARIES_PER_DIALOG)
}

pub fn load_corpus_with(dir: &Path, summaries_per_dialog: u32) -> Result<Corpus, CorpusError> {
    let dialogs_path = dir.join(DIALOGS_FILE);
    let summaries_path = dir.join(SUMMARIES_FILE);
    let scus_path = dir.join(SCUS_FILE);
    let file = |p: &Path| p.display().to_string();

    let mut dialogs = Vec::new();
    let mut dialog_ids = HashSet::new();
    for (line, raw) in read_records::<RawDialog>(&dialogs_path)? {
        let invalid = |message: String| CorpusError::Invalid { file: file(&dialogs_path), line, message };
        let mut turns: Vec<Turn> = raw.turns.into_iter().map(|t| Turn::new(t.author_id, t.index, t.text)).collect();
        turns.sort_by_key(|t| t.index);
        let dialog = Dialog { dialog_id: raw.dialog_id, thread_id: raw.thread_id, topic: raw.topic, turns };
        dialog.validate().map_err(invalid)?;
        if !dialog_ids.insert(dialog.dialog_id.clone()) {
            return Err(invalid(format!("duplicate dialog_id `{}`", dialog.dialog_id)));
        }
        dialogs.push(dialog);
    }

    let mut summaries = Vec::new();
    let mut writers: HashMap<String, BTreeSet<u32>> = HashMap::new();
    let mut summary_ids = HashSet::new();
    for (line, s) in read_records::<Summary>(&summaries_path)? {
        if !dialog_ids.contains(&s.dialog_id) {
            return Err(CorpusError::Dangling { file: file(&summaries_path), line, kind: "dialog_id", id: s.dialog_id });
        }
        let invalid = |message: String| CorpusError::Invalid { file: file(&summaries_path), line, message };
        if s.writer_index < 1 || s.writer_index > summaries_per_dialog {
            return Err(invalid(format!("writer_index {} outside 1..={summaries_per_dialog}", s.writer_index)));
        }
        if !writers.entry(s.dialog_id.clone()).or_default().insert(s.writer_index) {
            return Err(invalid(format!("duplicate writer_index {} for dialog `{}`", s.writer_index, s.dialog_id)));
        }
        if !summary_ids.insert(s.summary_id.clone()) {
            return Err(invalid(format!("duplicate summary_id `{}`", s.summary_id)));
        }
        summaries.push(s);
    }

    let mut scus = Vec::new();
    let mut scu_ids = HashSet::new();
    for (line, scu) in read_records::<ScuAnnotation>(&scus_path)? {
        let dangling = |kind, id: String| CorpusError::Dangling { file: file(&scus_path), line, kind, id };
        if !dialog_ids.contains(&scu.dialog_id) {
            return Err(dangling("dialog_id", scu.dialog_id));
        }
        let invalid = |message: String| CorpusError::Invalid { file: file(&scus_path), line, message };
        scu.validate(summaries_per_dialog).map_err(|e| invalid(e.to_string()))?;
        let known = writers.get(&scu.dialog_id);
        if let Some(&w) = scu.used_by.iter().find(|w| !known.is_some_and(|k| k.contains(w))) {
            return Err(dangling("summary", format!("{}#{}", scu.dialog_id, w)));
        }
        if !scu_ids.insert(scu.scu_id.clone()) {
            return Err(invalid(format!("duplicate scu_id `{}`", scu.scu_id)));
        }
        scus.push(scu);
    }

    Ok(Corpus { dialogs, summaries, scus })
}

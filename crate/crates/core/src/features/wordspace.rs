//! Distributional neighbor table and per-class extended-vocabulary cosine.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::sparse::{cosine, Counts};
use crate::textproc::{stem_surface, tokenize, Pos, Tagger};

const BUNDLED_WORDSPACE: &str = include_str!("../../data/wordspace.tsv");

/// Neighbors added per content word.
pub const NEIGHBORS_PER_WORD: usize = 5;

/// Word to its neighbors, most similar first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WordSpace {
    neighbors: BTreeMap<String, Vec<(String, f64)>>,
}

static BUNDLED: LazyLock<WordSpace> =
    LazyLock::new(|| WordSpace::parse(BUNDLED_WORDSPACE, "<bundled wordspace.tsv>").expect("bundled word space is valid"));

impl WordSpace {
    pub fn bundled() -> &'static WordSpace {
        &BUNDLED
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FeatureError::Resource { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses `word<TAB>neighbor<TAB>similarity` lines. Neighbor lists are
    /// re-sorted by descending similarity (stable for ties).
    pub fn parse(text: &str, origin: &str) -> Result<Self, FeatureError> {
        let mut neighbors: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FeatureError::Parse { path: origin.to_string(), line: i + 1, message };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [word, neighbor, sim] = fields[..] else {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            if word.is_empty() || neighbor.is_empty() {
                return Err(err("empty word".into()));
            }
            let sim: f64 = sim.parse().map_err(|_| err(format!("bad similarity `{sim}`")))?;
            if !(0.0..=1.0).contains(&sim) {
                return Err(err(format!("similarity {sim} outside [0, 1]")));
            }
            let (word, neighbor) = (word.to_lowercase(), neighbor.to_lowercase());
            if word == neighbor {
                return Err(err(format!("`{word}` lists itself as a neighbor")));
            }
            neighbors.entry(word).or_default().push((neighbor, sim));
        }
        for list in neighbors.values_mut() {
            list.sort_by(|a, b| b.1.total_cmp(&a.1));
        }
        Ok(WordSpace { neighbors })
    }

    pub fn neighbors(&self, word: &str) -> &[(String, f64)] {
        self.neighbors.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn top(&self, word: &str, k: usize) -> impl Iterator<Item = &str> {
        self.neighbors(word).iter().take(k).map(|(w, _)| w.as_str())
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistributionalScores {
    pub noun: f64,
    pub verb: f64,
    pub adj: f64,
}

/// Stemmed counts of the words of class `pos` plus their top neighbors.
pub fn extended_vocabulary(text: &str, pos: Pos, ws: &WordSpace, tagger: &dyn Tagger) -> Counts {
    let mut counts = Counts::new();
    for tagged in tagger.tag(&tokenize(text)) {
        if tagged.pos != pos {
            continue;
        }
        let word = &tagged.token.surface;
        *counts.entry(stem_surface(word)).or_insert(0) += 1;
        for n in ws.top(word, NEIGHBORS_PER_WORD) {
            *counts.entry(stem_surface(n)).or_insert(0) += 1;
        }
    }
    counts
}

/// Cosine between the two texts' extended vocabularies, separately for
/// nouns, verbs and adjectives. A class missing on either side scores 0.
pub fn distributional_similarity(a: &str, b: &str, ws: &WordSpace, tagger: &dyn Tagger) -> DistributionalScores {
    let score = |pos| cosine(&extended_vocabulary(a, pos, ws, tagger), &extended_vocabulary(b, pos, ws, tagger)).unwrap_or(0.0);
    DistributionalScores { noun: score(Pos::Noun), verb: score(Pos::Verb), adj: score(Pos::Adj) }
}

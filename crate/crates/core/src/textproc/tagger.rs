use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::{TextError, Token};

const BUNDLED_TAGS: &str = include_str!("../../data/tags.tsv");

/// Coarse part of speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Other,
}

impl Pos {
    pub fn is_content(self) -> bool {
        !matches!(self, Pos::Other)
    }
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NOUN" => Ok(Pos::Noun),
            "VERB" => Ok(Pos::Verb),
            "ADJ" => Ok(Pos::Adj),
            "OTHER" => Ok(Pos::Other),
            other => Err(format!("unknown tag {other:?}")),
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Adj => "ADJ",
            Pos::Other => "OTHER",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub token: Token,
    pub pos: Pos,
}

/// Assigns a coarse tag to every token. Implementations must be
/// deterministic.
pub trait Tagger: Send + Sync {
    fn tag(&self, tokens: &[Token]) -> Vec<TaggedToken>;
}

/// Word-to-tag lookup table; words missing from the table are `OTHER`.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    tags: HashMap<String, Pos>,
}

static BUNDLED: LazyLock<LexiconTagger> =
    LazyLock::new(|| LexiconTagger::parse(BUNDLED_TAGS, "<bundled tags.tsv>").expect("bundled tag lexicon is valid"));

impl LexiconTagger {
    /// Parses `word TAB TAG` lines. Later duplicates override earlier ones.
    pub fn parse(text: &str, origin: &str) -> Result<Self, TextError> {
        let mut tags = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| TextError::Parse { path: origin.to_string(), line: i + 1, message };
            let (word, tag) = line.split_once('\t').ok_or_else(|| parse_err("expected `word<TAB>tag`".into()))?;
            let word = word.trim();
            if word.is_empty() {
                return Err(parse_err("empty word".into()));
            }
            let pos = tag.trim().parse::<Pos>().map_err(parse_err)?;
            tags.insert(word.to_lowercase(), pos);
        }
        Ok(LexiconTagger { tags })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn bundled() -> &'static LexiconTagger {
        &BUNDLED
    }

    pub fn lookup(&self, word: &str) -> Pos {
        self.tags.get(word).copied().unwrap_or(Pos::Other)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tags.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

impl Tagger for LexiconTagger {
    fn tag(&self, tokens: &[Token]) -> Vec<TaggedToken> {
        tokens.iter().map(|t| TaggedToken { token: t.clone(), pos: self.lookup(&t.surface) }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::tokenize;

    #[test]
    fn bundled_lookup() {
        let tagger = LexiconTagger::bundled();
        let tagged = tagger.tag(&tokenize("marriage zzqx"));
        assert_eq!(tagged[0].pos, Pos::Noun);
        assert_eq!(tagged[1].pos, Pos::Other);
        assert!(tagger.tag(&[]).is_empty());
    }

    #[test]
    fn later_duplicates_override() {
        let t = LexiconTagger::parse("run\tNOUN\nrun\tVERB\n", "t").unwrap();
        assert_eq!(t.lookup("run"), Pos::Verb);
    }

    #[test]
    fn malformed_lines_report_position() {
        let err = LexiconTagger::parse("ok\tNOUN\nbad line\n", "t.tsv").unwrap_err();
        assert!(matches!(err, TextError::Parse { line: 2, .. }), "{err}");
        let err = LexiconTagger::parse("x\tPRON\n", "t.tsv").unwrap_err();
        assert!(err.to_string().contains("PRON"));
        assert!(LexiconTagger::load(Path::new("/nonexistent/tags.tsv")).is_err());
    }
}

//! Text normalization shared by every feature extractor: tokenization,
//! Porter stemming, stop-word filtering, coarse part-of-speech tagging and
//! n-gram extraction.
//!
//! Everything here is a pure function of its inputs.

mod porter;
mod tagger;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tagger::{LexiconTagger, Pos, TaggedToken, Tagger};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot stem an empty word")]
    EmptyWord,
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

/// A lowercased token and its 0-based position in the token stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub position: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercases `text` and splits it on every character that is not a letter,
/// a digit, or an apostrophe flanked by word characters on both sides.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let keep = if is_word_char(c) {
            true
        } else if is_apostrophe(c) {
            !current.is_empty() && chars.get(i + 1).is_some_and(|&n| is_word_char(n))
        } else {
            false
        };
        if keep {
            if is_apostrophe(c) {
                current.push('\'');
            } else {
                current.extend(c.to_lowercase());
            }
        } else if !current.is_empty() {
            let position = tokens.len();
            tokens.push(Token { surface: std::mem::take(&mut current), position });
        }
    }
    if !current.is_empty() {
        let position = tokens.len();
        tokens.push(Token { surface: current, position });
    }
    tokens
}

/// Porter stem of a lowercased word.
pub fn stem(word: &str) -> Result<String, TextError> {
    if word.is_empty() {
        return Err(TextError::EmptyWord);
    }
    Ok(porter::porter_stem(word))
}

/// Stems a token surface; surfaces are never empty so this cannot fail.
pub(crate) fn stem_surface(surface: &str) -> String {
    porter::porter_stem(surface)
}

/// A fixed stop-word list, one lowercase word per line on disk.
#[derive(Debug, Clone, Default)]
pub struct StopWords {
    words: HashSet<String>,
}

static BUNDLED: LazyLock<StopWords> = LazyLock::new(|| StopWords::parse(BUNDLED_STOPWORDS));

impl StopWords {
    pub fn parse(text: &str) -> Self {
        let words = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_lowercase).collect();
        StopWords { words }
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextError::Io { path: path.display().to_string(), source })?;
        Ok(Self::parse(&text))
    }

    /// The bundled English list.
    pub fn bundled() -> &'static StopWords {
        &BUNDLED
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Multiset of n-grams: gram text to multiplicity.
pub type NgramBag = BTreeMap<String, usize>;

/// Normalized token sequence used for n-gram extraction: optionally
/// stop-filtered, optionally stemmed.
pub fn normalize(tokens: &[Token], apply_stemming: bool, stopwords: Option<&StopWords>) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| stopwords.is_none_or(|sw| !sw.contains(&t.surface)))
        .map(|t| if apply_stemming { stem_surface(&t.surface) } else { t.surface.clone() })
        .collect()
}

/// Counts contiguous `n`-grams of an already normalized sequence.
pub fn ngram_bag(terms: &[String], n: usize) -> NgramBag {
    let mut bag = NgramBag::new();
    if n == 0 || terms.len() < n {
        return bag;
    }
    for window in terms.windows(n) {
        *bag.entry(window.join(" ")).or_insert(0) += 1;
    }
    bag
}

/// Contiguous `n`-grams over `tokens`. Stop words (from the bundled list)
/// are dropped only when `n == 1` and `drop_stopwords` is set; longer grams
/// always keep them.
pub fn extract_ngrams(tokens: &[Token], n: usize, apply_stemming: bool, drop_stopwords: bool) -> Result<NgramBag, TextError> {
    extract_ngrams_with(tokens, n, apply_stemming, drop_stopwords.then(StopWords::bundled))
}

/// [`extract_ngrams`] with an explicit stop list.
pub fn extract_ngrams_with(tokens: &[Token], n: usize, apply_stemming: bool, stopwords: Option<&StopWords>) -> Result<NgramBag, TextError> {
    if n == 0 {
        return Err(TextError::InvalidOrder(n));
    }
    let filter = if n == 1 { stopwords } else { None };
    Ok(ngram_bag(&normalize(tokens, apply_stemming, filter), n))
}

/// Tags tokens with the given tagger.
pub fn pos_tag(tokens: &[Token], tagger: &dyn Tagger) -> Vec<TaggedToken> {
    tagger.tag(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(surfaces(&tokenize("Gay marriage, rights!")), ["gay", "marriage", "rights"]);
        assert_eq!(surfaces(&tokenize("Don't stop")), ["don't", "stop"]);
        assert_eq!(surfaces(&tokenize("'quoted' rock'n'roll 'tis")), ["quoted", "rock'n'roll", "tis"]);
        assert_eq!(surfaces(&tokenize("It\u{2019}s 1909-2015")), ["it's", "1909", "2015"]);
        let toks = tokenize("a  b\tc");
        assert_eq!(toks.iter().map(|t| t.position).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn stem_examples() {
        assert_eq!(stem("marriages").unwrap(), "marriag");
        assert_eq!(stem("running").unwrap(), "run");
        assert_eq!(stem("a").unwrap(), "a");
        assert!(matches!(stem(""), Err(TextError::EmptyWord)));
    }

    #[test]
    fn bundled_stopwords_loaded() {
        let sw = StopWords::bundled();
        assert!(sw.contains("the"));
        assert!(sw.contains("don't"));
        assert!(!sw.contains("marriage"));
        assert!(sw.len() > 100);
    }

    #[test]
    fn ngram_examples() {
        let toks = tokenize("a b c");
        let bag = extract_ngrams(&toks, 2, false, false).unwrap();
        assert_eq!(bag.into_iter().collect::<Vec<_>>(), [("a b".to_string(), 1), ("b c".to_string(), 1)]);

        let toks = tokenize("the cat sat");
        let bag = extract_ngrams(&toks, 1, true, true).unwrap();
        assert_eq!(bag.keys().collect::<Vec<_>>(), ["cat", "sat"]);

        // stop words survive in bigrams
        let bag = extract_ngrams(&toks, 2, true, true).unwrap();
        assert!(bag.contains_key("the cat"));

        assert!(extract_ngrams(&tokenize("one two"), 3, true, false).unwrap().is_empty());
        assert!(matches!(extract_ngrams(&toks, 0, false, false), Err(TextError::InvalidOrder(0))));
    }

    #[test]
    fn ngram_multiplicities() {
        let bag = extract_ngrams(&tokenize("rights rights rights"), 2, false, false).unwrap();
        assert_eq!(bag["rights rights"], 2);
    }

    proptest! {
        #[test]
        fn tokenize_join_round_trip(text in "[a-zA-Z0-9' ,.!?\\-]{0,60}") {
            let toks = tokenize(&text);
            let joined = toks.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(tokenize(&joined), toks.clone());
            for t in &toks {
                prop_assert!(!t.surface.is_empty());
                prop_assert!(!t.surface.chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn ngram_count_formula(text in "[a-e ]{0,40}", n in 1usize..4, drop in any::<bool>()) {
            let toks = tokenize(&text);
            let bag = extract_ngrams(&toks, n, true, drop).unwrap();
            let filtered = normalize(&toks, true, (drop && n == 1).then(StopWords::bundled));
            let total: usize = bag.values().sum();
            prop_assert_eq!(total, (filtered.len() + 1).saturating_sub(n));
        }
    }
}

//! LIWC-style category lexicon and per-category overlap counts.
//!
//! File format: a header delimited by lines containing only `%`, listing
//! `id<TAB>name` per category, followed by `pattern<TAB>id[,id...]` lines.
//! A pattern ending in `*` matches any word with that prefix. Category ids
//! may also be separated by tabs or spaces, as in the original dictionaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::textproc::{stem_surface, tokenize};

const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.dic");

/// Categories kept as features, in feature order.
pub const RETAINED_CATEGORIES: [&str; 9] = [
    "Biological Processes",
    "Causation",
    "Cognitive Processes",
    "Humans",
    "Negative Emotion",
    "Positive Emotion",
    "Religion",
    "Sexual",
    "Social Processes",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Literal(String),
    Prefix(String),
}

impl Pattern {
    pub fn parse(raw: &str) -> Self {
        let raw = raw.to_lowercase();
        match raw.strip_suffix('*') {
            Some(prefix) => Pattern::Prefix(prefix.to_string()),
            None => Pattern::Literal(raw),
        }
    }

    /// Patterns match the unstemmed surface form.
    pub fn matches(&self, word: &str) -> bool {
        match self {
            Pattern::Literal(w) => w == word,
            Pattern::Prefix(p) => word.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryLexicon {
    /// Category name to its patterns, in header order.
    categories: Vec<(String, Vec<Pattern>)>,
}

static BUNDLED: LazyLock<CategoryLexicon> =
    LazyLock::new(|| CategoryLexicon::parse(BUNDLED_LEXICON, "<bundled lexicon.dic>").expect("bundled lexicon is valid"));

impl CategoryLexicon {
    pub fn bundled() -> &'static CategoryLexicon {
        &BUNDLED
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FeatureError::Resource { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, FeatureError> {
        let err = |line: usize, message: String| FeatureError::Parse { path: origin.to_string(), line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let mut names: Vec<String> = Vec::new();
        let mut ids: HashMap<String, usize> = HashMap::new();

        match lines.find(|(_, l)| !l.trim().is_empty()) {
            Some((_, l)) if l.trim() == "%" => {}
            Some((n, _)) => return Err(err(n, "expected `%` header delimiter".into())),
            None => return Ok(Self::default()),
        }
        let mut closed = false;
        for (n, line) in lines.by_ref() {
            let line = line.trim();
            if line == "%" {
                closed = true;
                break;
            }
            if line.is_empty() {
                continue;
            }
            let (id, name) = line.split_once(char::is_whitespace).ok_or_else(|| err(n, "expected `id<TAB>name`".into()))?;
            let name = name.trim().to_string();
            if names.contains(&name) {
                return Err(err(n, format!("duplicate category name `{name}`")));
            }
            if ids.insert(id.to_string(), names.len()).is_some() {
                return Err(err(n, format!("duplicate category id `{id}`")));
            }
            names.push(name);
        }
        if !closed {
            return Err(err(text.lines().count(), "unterminated `%` header".into()));
        }

        let mut patterns: Vec<Vec<Pattern>> = vec![Vec::new(); names.len()];
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(['\t', ',', ' ']).filter(|f| !f.is_empty());
            let pattern = fields.next().ok_or_else(|| err(n, "missing pattern".into()))?;
            let mut any = false;
            for id in fields {
                let &cat = ids.get(id).ok_or_else(|| err(n, format!("unknown category id `{id}`")))?;
                patterns[cat].push(Pattern::parse(pattern));
                any = true;
            }
            if !any {
                return Err(err(n, format!("pattern `{pattern}` has no category")));
            }
        }
        Ok(CategoryLexicon { categories: names.into_iter().zip(patterns).collect() })
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(n, _)| n.as_str())
    }

    pub fn patterns(&self, category: &str) -> Option<&[Pattern]> {
        self.categories.iter().find(|(n, _)| n == category).map(|(_, p)| p.as_slice())
    }

    /// Distinct stemmed types of `text` that match any pattern of each category.
    pub fn category_types(&self, text: &str) -> Vec<BTreeSet<String>> {
        let tokens = tokenize(text);
        self.categories
            .iter()
            .map(|(_, pats)| {
                tokens.iter().filter(|t| pats.iter().any(|p| p.matches(&t.surface))).map(|t| stem_surface(&t.surface)).collect()
            })
            .collect()
    }
}

/// Per category, the number of distinct stemmed word types that both texts
/// contain and that match the category.
pub fn lexicon_overlap(a: &str, b: &str, lex: &CategoryLexicon) -> BTreeMap<String, usize> {
    let (ta, tb) = (lex.category_types(a), lex.category_types(b));
    lex.category_names().zip(ta.iter().zip(&tb)).map(|(name, (x, y))| (name.to_string(), x.intersection(y).count())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "%\n1\tReligion\n2\tHumans\n%\nchurch*\t1\ngod\t1\npray\t1\nman\t2\nmen\t2\n";

    #[test]
    fn religion_example() {
        let lex = CategoryLexicon::parse(SMALL, "t").unwrap();
        let counts = lexicon_overlap("church god", "churches pray", &lex);
        assert_eq!(counts["Religion"], 1);
        assert_eq!(counts["Humans"], 0);
    }

    #[test]
    fn no_hits_and_self_overlap() {
        let lex = CategoryLexicon::parse(SMALL, "t").unwrap();
        assert!(lexicon_overlap("blue sky", "church", &lex).values().all(|&c| c == 0));
        let counts = lexicon_overlap("god church churches men", "god church churches men", &lex);
        assert_eq!(counts["Religion"], 2);
        assert_eq!(counts["Humans"], 1);
    }

    #[test]
    fn bundled_has_retained_categories() {
        let lex = CategoryLexicon::bundled();
        for c in RETAINED_CATEGORIES {
            assert!(lex.patterns(c).is_some_and(|p| !p.is_empty()), "{c}");
        }
    }

    #[test]
    fn comma_and_tab_separated_ids() {
        let lex = CategoryLexicon::parse("%\n1\tA\n2\tB\n%\nx\t1,2\ny\t1\t2\n", "t").unwrap();
        assert_eq!(lex.patterns("A").unwrap().len(), 2);
        assert_eq!(lex.patterns("B").unwrap().len(), 2);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(CategoryLexicon::parse("%\n1\tA\n%\nx\t7\n", "t"), Err(FeatureError::Parse { line: 4, .. })));
        assert!(CategoryLexicon::parse("%\n1\tA\n", "t").is_err());
        assert!(CategoryLexicon::parse("x\t1\n", "t").is_err());
        assert!(CategoryLexicon::parse("%\n1\tA\n1\tB\n%\n", "t").is_err());
        assert!(CategoryLexicon::parse("%\n1\tA\n%\nlonely\n", "t").is_err());
    }
}

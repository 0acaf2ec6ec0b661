//! Similarity features for a pair of argument texts.
//!
//! Five families, always emitted in this order:
//!
//! | tag | family                         | features |
//! |-----|--------------------------------|----------|
//! | N   | stemmed n-gram overlap         | 3        |
//! | L   | category-lexicon overlap       | 9        |
//! | R   | ROUGE F-scores                 | 6        |
//! | D   | distributional cosine          | 3        |
//! | U   | external STS score             | 1        |
//!
//! Every feature is symmetric in the two texts.

mod lexicon;
mod ngram;
mod rouge;
mod sts;
mod wordspace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{lexicon_overlap, CategoryLexicon, Pattern, RETAINED_CATEGORIES};
pub use ngram::{clipped_overlap, ngram_overlap, ngram_overlap_with, NgramOverlap};
pub use rouge::{f1, lcs_len, rouge_all, rouge_f, rouge_f_terms, skip_bigrams_with_unigrams, RougeVariant, MAX_SKIP_GAP};
pub use sts::{external_sts, pair_key, ConstantStsProvider, HttpStsProvider, StsCache, StsError, StsProvider};
pub use wordspace::{distributional_similarity, extended_vocabulary, DistributionalScores, WordSpace, NEIGHBORS_PER_WORD};

use crate::textproc::{LexiconTagger, StopWords, Tagger};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature family {0} requested but its resource is not configured")]
    MissingResource(Family),
    #[error("category lexicon lacks retained category `{0}`")]
    MissingCategory(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Resource { path: String, message: String },
    #[error("unknown feature family `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Sts(#[from] StsError),
}

/// Feature family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    N,
    L,
    R,
    D,
    U,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::N, Family::L, Family::R, Family::D, Family::U];

    pub fn tag(self) -> char {
        match self {
            Family::N => 'N',
            Family::L => 'L',
            Family::R => 'R',
            Family::D => 'D',
            Family::U => 'U',
        }
    }

    pub fn width(self) -> usize {
        match self {
            Family::N => 3,
            Family::L => RETAINED_CATEGORIES.len(),
            Family::R => RougeVariant::ALL.len(),
            Family::D => 3,
            Family::U => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

/// A set of families, iterated in canonical N, L, R, D, U order. Parsed
/// from strings like `"N-L-R"`, `"NLR"` or `""` (empty set).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FamilySet(BTreeSet<Family>);

impl FamilySet {
    pub fn all() -> Self {
        FamilySet(Family::ALL.into_iter().collect())
    }

    pub fn contains(&self, f: Family) -> bool {
        self.0.contains(&f)
    }

    pub fn iter(&self) -> impl Iterator<Item = Family> + '_ {
        self.0.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &FamilySet) -> FamilySet {
        FamilySet(self.0.union(&other.0).copied().collect())
    }

    /// Number of features the set produces.
    pub fn width(&self) -> usize {
        self.iter().map(Family::width).sum()
    }
}

impl FromIterator<Family> for FamilySet {
    fn from_iter<I: IntoIterator<Item = Family>>(iter: I) -> Self {
        FamilySet(iter.into_iter().collect())
    }
}

impl FromStr for FamilySet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !matches!(c, '-' | '+' | ' ' | ','))
            .map(|c| match c.to_ascii_uppercase() {
                'N' => Ok(Family::N),
                'L' => Ok(Family::L),
                'R' => Ok(Family::R),
                'D' => Ok(Family::D),
                'U' => Ok(Family::U),
                other => Err(FeatureError::UnknownFamily(other.to_string())),
            })
            .collect()
    }
}

impl TryFrom<String> for FamilySet {
    type Error = FeatureError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FamilySet> for String {
    fn from(f: FamilySet) -> String {
        f.to_string()
    }
}

impl fmt::Display for FamilySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<String> = self.iter().map(|x| x.to_string()).collect();
        f.write_str(&tags.join("-"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub family: Family,
    pub value: f64,
}

/// Named features in a fixed order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub features: Vec<Feature>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from `(name, value)` pairs; mostly useful in tests and
    /// for hand-built models.
    pub fn from_pairs<'a>(family: Family, pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        FeatureVector { features: pairs.into_iter().map(|(name, value)| Feature { name: name.to_string(), family, value }).collect() }
    }

    pub fn push(&mut self, family: Family, name: impl Into<String>, value: f64) {
        debug_assert!(value.is_finite());
        self.features.push(Feature { name: name.into(), family, value });
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(|f| f.value)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|f| f.name == name).map(|f| f.value)
    }

    /// Family tag to feature names.
    pub fn families(&self) -> BTreeMap<Family, Vec<String>> {
        let mut m: BTreeMap<Family, Vec<String>> = BTreeMap::new();
        for f in &self.features {
            m.entry(f.family).or_default().push(f.name.clone());
        }
        m
    }

    /// The sub-vector belonging to `families`, order preserved.
    pub fn restrict(&self, families: &FamilySet) -> FeatureVector {
        FeatureVector { features: self.features.iter().filter(|f| families.contains(f.family)).cloned().collect() }
    }
}

/// Where external STS scores come from.
pub struct StsSource {
    pub cache: StsCache,
    /// `None` means offline: only cached pairs can be scored.
    pub provider: Option<Box<dyn StsProvider>>,
}

/// Everything the families need. Families whose resource is `None` cannot
/// be requested.
pub struct FeatureResources {
    pub stopwords: StopWords,
    pub tagger: Arc<dyn Tagger>,
    pub lexicon: Option<CategoryLexicon>,
    pub word_space: Option<WordSpace>,
    pub sts: Option<StsSource>,
}

impl FeatureResources {
    /// Bundled stop words, tagger, lexicon and word space; no STS source.
    pub fn bundled() -> Self {
        FeatureResources {
            stopwords: StopWords::bundled().clone(),
            tagger: Arc::new(LexiconTagger::bundled().clone()),
            lexicon: Some(CategoryLexicon::bundled().clone()),
            word_space: Some(WordSpace::bundled().clone()),
            sts: None,
        }
    }

    /// Fails if any requested family lacks its resource.
    pub fn check(&self, families: &FamilySet) -> Result<(), FeatureError> {
        for f in families.iter() {
            let present = match f {
                Family::N | Family::R => true,
                Family::L => self.lexicon.is_some(),
                Family::D => self.word_space.is_some(),
                Family::U => self.sts.is_some(),
            };
            if !present {
                return Err(FeatureError::MissingResource(f));
            }
        }
        if families.contains(Family::L) {
            let lex = self.lexicon.as_ref().expect("checked above");
            if let Some(missing) = RETAINED_CATEGORIES.iter().find(|c| lex.patterns(c).is_none()) {
                return Err(FeatureError::MissingCategory(missing.to_string()));
            }
        }
        Ok(())
    }
}

fn category_feature_name(category: &str) -> String {
    format!("liwc_{}", category.to_lowercase().replace(' ', "_"))
}

/// Names of the features `families` produce, in vector order.
pub fn feature_names(families: &FamilySet) -> Vec<String> {
    let mut names = Vec::new();
    for f in families.iter() {
        match f {
            Family::N => names.extend(["ngram_uni", "ngram_bi", "ngram_tri"].map(String::from)),
            Family::L => names.extend(RETAINED_CATEGORIES.iter().map(|c| category_feature_name(c))),
            Family::R => names.extend(RougeVariant::ALL.map(|v| v.feature_name().to_string())),
            Family::D => names.extend(["disco_noun", "disco_verb", "disco_adj"].map(String::from)),
            Family::U => names.push("sts".to_string()),
        }
    }
    names
}

/// Computes the requested families for one text pair.
pub fn featurize(pair: (&str, &str), families: &FamilySet, res: &FeatureResources) -> Result<FeatureVector, FeatureError> {
    res.check(families)?;
    let (a, b) = pair;
    let mut fv = FeatureVector::new();
    for family in families.iter() {
        match family {
            Family::N => {
                let o = ngram_overlap_with(a, b, &res.stopwords);
                fv.push(Family::N, "ngram_uni", o.uni as f64);
                fv.push(Family::N, "ngram_bi", o.bi as f64);
                fv.push(Family::N, "ngram_tri", o.tri as f64);
            }
            Family::L => {
                let lex = res.lexicon.as_ref().expect("checked");
                let counts = lexicon_overlap(a, b, lex);
                for c in RETAINED_CATEGORIES {
                    fv.push(Family::L, category_feature_name(c), counts[c] as f64);
                }
            }
            Family::R => {
                for (v, score) in RougeVariant::ALL.iter().zip(rouge_all(a, b)) {
                    fv.push(Family::R, v.feature_name(), score);
                }
            }
            Family::D => {
                let ws = res.word_space.as_ref().expect("checked");
                let d = distributional_similarity(a, b, ws, res.tagger.as_ref());
                fv.push(Family::D, "disco_noun", d.noun);
                fv.push(Family::D, "disco_verb", d.verb);
                fv.push(Family::D, "disco_adj", d.adj);
            }
            Family::U => {
                let sts = res.sts.as_ref().expect("checked");
                let score = external_sts(a, b, sts.provider.as_deref(), &sts.cache)?;
                fv.push(Family::U, "sts", score);
            }
        }
    }
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn resources_with_stub() -> FeatureResources {
        FeatureResources {
            sts: Some(StsSource { cache: StsCache::in_memory(), provider: Some(Box::new(ConstantStsProvider(0.5))) }),
            ..FeatureResources::bundled()
        }
    }

    #[test]
    fn family_cardinalities() {
        let res = resources_with_stub();
        let pair = ("gay couples want rights", "marriage rights for couples");
        let n = featurize(pair, &"N".parse().unwrap(), &res).unwrap();
        assert_eq!(n.len(), 3);
        let all = featurize(pair, &FamilySet::all(), &res).unwrap();
        assert_eq!(all.len(), 22);
        assert_eq!(all.names().map(String::from).collect::<Vec<_>>(), feature_names(&FamilySet::all()));
        assert_eq!(all.families()[&Family::L].len(), 9);
        assert!(featurize(pair, &FamilySet::default(), &res).unwrap().is_empty());
    }

    #[test]
    fn missing_resources_are_reported() {
        let res = FeatureResources::bundled();
        let err = featurize(("a", "b"), &"U".parse().unwrap(), &res).unwrap_err();
        assert!(matches!(err, FeatureError::MissingResource(Family::U)));
        let res = FeatureResources {
            lexicon: Some(CategoryLexicon::parse("%\n1\tReligion\n%\ngod\t1\n", "t").unwrap()),
            ..FeatureResources::bundled()
        };
        let err = featurize(("a", "b"), &"L".parse().unwrap(), &res).unwrap_err();
        assert!(matches!(err, FeatureError::MissingCategory(_)));
    }

    #[test]
    fn family_set_parsing() {
        let s: FamilySet = "N-L-R-D-U".parse().unwrap();
        assert_eq!(s, FamilySet::all());
        assert_eq!("ULN".parse::<FamilySet>().unwrap().to_string(), "N-L-U");
        assert!("".parse::<FamilySet>().unwrap().is_empty());
        assert!("N-X".parse::<FamilySet>().is_err());
        assert_eq!("N-L-R-D".parse::<FamilySet>().unwrap().width(), 21);
    }

    #[test]
    fn restrict_keeps_order() {
        let res = resources_with_stub();
        let all = featurize(("a cat", "a dog"), &FamilySet::all(), &res).unwrap();
        let nu = all.restrict(&"N-U".parse().unwrap());
        assert_eq!(nu.names().collect::<Vec<_>>(), ["ngram_uni", "ngram_bi", "ngram_tri", "sts"]);
    }

    const WORDS: &[&str] = &[
        "gay",
        "marriage",
        "marriages",
        "rights",
        "right",
        "the",
        "church",
        "churches",
        "religious",
        "couples",
        "children",
        "god",
        "bible",
        "sin",
        "love",
        "hate",
        "equal",
        "benefits",
        "law",
        "government",
        "should",
        "not",
        "be",
        "a",
        "of",
        "people",
        "disease",
        "aids",
        "married",
        "marry",
        "cause",
        "think",
        "tax",
        "vote",
    ];

    fn arb_text() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(WORDS), 0..14).prop_map(|w| w.join(" "))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn features_are_symmetric_bounded_and_deterministic(a in arb_text(), b in arb_text()) {
            let res = resources_with_stub();
            let fam = FamilySet::all();
            let ab = featurize((&a, &b), &fam, &res).unwrap();
            let ba = featurize((&b, &a), &fam, &res).unwrap();
            prop_assert_eq!(&ab, &ba);
            prop_assert_eq!(&ab, &featurize((&a, &b), &fam, &res).unwrap());
            for f in &ab.features {
                prop_assert!(f.value.is_finite());
                match f.family {
                    Family::R | Family::D | Family::U => prop_assert!((0.0..=1.0).contains(&f.value), "{}", f.name),
                    Family::N | Family::L => prop_assert!(f.value >= 0.0 && f.value.fract() == 0.0),
                }
            }
            let o = ngram_overlap(&a, &b);
            let own = |t: &str| ngram_overlap(t, t);
            let (sa, sb) = (own(&a), own(&b));
            prop_assert!(o.uni <= sa.uni.min(sb.uni));
            prop_assert!(o.bi <= sa.bi.min(sb.bi));
            prop_assert!(o.tri <= sa.tri.min(sb.tri));
        }

        #[test]
        fn single_token_r1(x in prop::sample::select(WORDS), y in prop::sample::select(WORDS)) {
            let expected = if crate::textproc::stem(x).unwrap() == crate::textproc::stem(y).unwrap() { 1.0 } else { 0.0 };
            prop_assert_eq!(rouge_f(x, y, RougeVariant::R1), expected);
        }
    }
}

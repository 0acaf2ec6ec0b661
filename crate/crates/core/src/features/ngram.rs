use serde::{Deserialize, Serialize};

use crate::textproc::{ngram_bag, normalize, tokenize, NgramBag, StopWords};

/// Shared stemmed n-gram counts between two texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NgramOverlap {
    pub uni: usize,
    pub bi: usize,
    pub tri: usize,
}

/// Clipped overlap: sum over shared gram types of the smaller multiplicity.
pub fn clipped_overlap(a: &NgramBag, b: &NgramBag) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter_map(|(g, &x)| large.get(g).map(|&y| x.min(y))).sum()
}

/// Stemmed unigram, bigram and trigram overlap. Stop words are removed for
/// unigrams only.
pub fn ngram_overlap(a: &str, b: &str) -> NgramOverlap {
    ngram_overlap_with(a, b, StopWords::bundled())
}

pub fn ngram_overlap_with(a: &str, b: &str, stopwords: &StopWords) -> NgramOverlap {
    let (ta, tb) = (tokenize(a), tokenize(b));
    let uni = clipped_overlap(&ngram_bag(&normalize(&ta, true, Some(stopwords)), 1), &ngram_bag(&normalize(&tb, true, Some(stopwords)), 1));
    let (sa, sb) = (normalize(&ta, true, None), normalize(&tb, true, None));
    NgramOverlap {
        uni,
        bi: clipped_overlap(&ngram_bag(&sa, 2), &ngram_bag(&sb, 2)),
        tri: clipped_overlap(&ngram_bag(&sa, 3), &ngram_bag(&sb, 3)),
    }
}

//! ROUGE F-scores between two texts.
//!
//! Texts are tokenized and Porter-stemmed; stop words are kept. Every
//! variant reports the balanced F1 of its precision and recall, so the score
//! does not depend on which text plays the reference.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ngram::clipped_overlap;
use crate::textproc::{ngram_bag, normalize, tokenize, NgramBag};

/// Largest number of tokens allowed between the two words of a skip-bigram.
pub const MAX_SKIP_GAP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RougeVariant {
    R1,
    R2,
    R3,
    R4,
    RL,
    RSU4,
}

impl RougeVariant {
    pub const ALL: [RougeVariant; 6] =
        [RougeVariant::R1, RougeVariant::R2, RougeVariant::R3, RougeVariant::R4, RougeVariant::RL, RougeVariant::RSU4];

    pub fn feature_name(self) -> &'static str {
        match self {
            RougeVariant::R1 => "rouge_1",
            RougeVariant::R2 => "rouge_2",
            RougeVariant::R3 => "rouge_3",
            RougeVariant::R4 => "rouge_4",
            RougeVariant::RL => "rouge_l",
            RougeVariant::RSU4 => "rouge_su4",
        }
    }
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for RougeVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RougeVariant::ALL.into_iter().find(|v| v.to_string().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown ROUGE variant {s:?}"))
    }
}

/// `2PR / (P + R)`, or 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f_from_counts(hits: usize, len_a: usize, len_b: usize) -> f64 {
    f1(ratio(hits, len_a), ratio(hits, len_b))
}

/// Length of the longest common subsequence, two-row dynamic program.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Skip-bigrams with at most [`MAX_SKIP_GAP`] intervening tokens, plus unigrams.
pub fn skip_bigrams_with_unigrams(terms: &[String]) -> NgramBag {
    let mut bag = ngram_bag(terms, 1);
    for i in 0..terms.len() {
        for j in (i + 1)..terms.len().min(i + MAX_SKIP_GAP + 2) {
            *bag.entry(format!("{} {}", terms[i], terms[j])).or_insert(0) += 1;
        }
    }
    bag
}

fn total(bag: &NgramBag) -> usize {
    bag.values().sum()
}

/// ROUGE F1 over already normalized term sequences.
pub fn rouge_f_terms(a: &[String], b: &[String], variant: RougeVariant) -> f64 {
    let by_order = |n| {
        let (ba, bb) = (ngram_bag(a, n), ngram_bag(b, n));
        f_from_counts(clipped_overlap(&ba, &bb), total(&ba), total(&bb))
    };
    match variant {
        RougeVariant::R1 => by_order(1),
        RougeVariant::R2 => by_order(2),
        RougeVariant::R3 => by_order(3),
        RougeVariant::R4 => by_order(4),
        RougeVariant::RL => f_from_counts(lcs_len(a, b), a.len(), b.len()),
        RougeVariant::RSU4 => {
            let (ba, bb) = (skip_bigrams_with_unigrams(a), skip_bigrams_with_unigrams(b));
            f_from_counts(clipped_overlap(&ba, &bb), total(&ba), total(&bb))
        }
    }
}

pub(crate) fn rouge_terms(text: &str) -> Vec<String> {
    normalize(&tokenize(text), true, None)
}

pub fn rouge_f(a: &str, b: &str, variant: RougeVariant) -> f64 {
    rouge_f_terms(&rouge_terms(a), &rouge_terms(b), variant)
}

/// All six variants in [`RougeVariant::ALL`] order.
pub fn rouge_all(a: &str, b: &str) -> [f64; 6] {
    let (ta, tb) = (rouge_terms(a), rouge_terms(b));
    RougeVariant::ALL.map(|v| rouge_f_terms(&ta, &tb, v))
}

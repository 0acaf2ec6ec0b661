//! Argument facet discovery over two-party ideological dialogs.
//!
//! The pipeline selects dialogs, scores pyramid annotations of their human
//! summaries to find central propositions, clusters those propositions into
//! candidate facets, and trains a linear model that predicts Argument Facet
//! Similarity (AFS, a 0 to 5 scale) for proposition pairs from five families
//! of similarity features.
//!
//! Module map:
//!
//! * [`corpus`]: dialogs, summaries and SCU annotation files; dialog selection.
//! * [`textproc`]: tokenizer, Porter stemmer, stop words, coarse tagger, n-grams.
//! * [`features`]: the N/L/R/D/U feature families and feature vectors.
//! * [`pyramid`]: SCU tiers and central propositions.
//! * [`clustering`]: average-linkage clustering and within-cluster pairs.
//! * [`annotation`]: worker judgments, worker filtering, gold aggregation.
//! * [`regression`]: ridge-stabilized least squares, k-fold CV, paired t-tests.
//! * [`experiment`]: configuration and the staged end-to-end run.

pub mod annotation;
pub mod clustering;
pub mod corpus;
pub mod experiment;
pub mod features;
pub mod jsonl;
pub mod pyramid;
pub mod regression;
pub mod sparse;
pub mod textproc;

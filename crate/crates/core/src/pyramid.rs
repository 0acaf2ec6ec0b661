//! Pyramid scoring of summary content units (SCUs).
//!
//! An SCU's tier is the number of summaries that contributed to it. Units at
//! tier 3 and above are the dialog's central propositions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default lowest tier counted as central.
pub const DEFAULT_MIN_TIER: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum PyramidError {
    #[error("SCU `{0}` is used by no summary")]
    EmptyUsage(String),
    #[error("SCU `{scu_id}` references summary {index}, outside 1..={n_summaries}")]
    IndexOutOfRange { scu_id: String, index: u32, n_summaries: u32 },
    #[error("SCU `{0}` has an empty label")]
    EmptyLabel(String),
    #[error("SCUs from different dialogs in one pyramid: `{0}` and `{1}`")]
    MixedDialogs(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScuAnnotation {
    pub scu_id: String,
    pub dialog_id: String,
    pub label: String,
    pub used_by: BTreeSet<u32>,
}

impl ScuAnnotation {
    pub fn new(scu_id: &str, dialog_id: &str, label: &str, used_by: impl IntoIterator<Item = u32>) -> Self {
        ScuAnnotation { scu_id: scu_id.into(), dialog_id: dialog_id.into(), label: label.into(), used_by: used_by.into_iter().collect() }
    }

    pub fn tier(&self) -> usize {
        self.used_by.len()
    }

    pub fn validate(&self, n_summaries: u32) -> Result<(), PyramidError> {
        if self.used_by.is_empty() {
            return Err(PyramidError::EmptyUsage(self.scu_id.clone()));
        }
        if self.label.trim().is_empty() {
            return Err(PyramidError::EmptyLabel(self.scu_id.clone()));
        }
        if let Some(&index) = self.used_by.iter().find(|&&w| w < 1 || w > n_summaries) {
            return Err(PyramidError::IndexOutOfRange { scu_id: self.scu_id.clone(), index, n_summaries });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyramidEntry {
    pub scu: ScuAnnotation,
    pub tier: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pyramid {
    pub dialog_id: String,
    pub n_summaries: u32,
    /// Descending tier, then ascending `scu_id`.
    pub entries: Vec<PyramidEntry>,
}

pub fn build_pyramid(scus: &[ScuAnnotation], n_summaries: u32) -> Result<Pyramid, PyramidError> {
    let dialog_id = scus.first().map(|s| s.dialog_id.clone()).unwrap_or_default();
    for scu in scus {
        if scu.dialog_id != dialog_id {
            return Err(PyramidError::MixedDialogs(dialog_id, scu.dialog_id.clone()));
        }
        scu.validate(n_summaries)?;
    }
    let mut entries: Vec<PyramidEntry> = scus.iter().map(|s| PyramidEntry { scu: s.clone(), tier: s.tier() }).collect();
    entries.sort_by(|a, b| b.tier.cmp(&a.tier).then_with(|| a.scu.scu_id.cmp(&b.scu.scu_id)));
    Ok(Pyramid { dialog_id, n_summaries, entries })
}

impl Pyramid {
    /// Entries at or above `min_tier`, in pyramid order.
    pub fn central_entries(&self, min_tier: usize) -> impl Iterator<Item = &PyramidEntry> {
        self.entries.iter().filter(move |e| e.tier >= min_tier)
    }

    /// Number of entries per tier, index 0 holding tier 1.
    pub fn tier_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_summaries as usize];
        for e in &self.entries {
            h[e.tier - 1] += 1;
        }
        h
    }

    /// Tabular rendering: label, one check column per summary, tier.
    pub fn render(&self) -> String {
        let width = self.entries.iter().map(|e| e.scu.label.chars().count()).max().unwrap_or(0).max(9);
        let mut out = String::new();
        let _ = writeln!(out, "Pyramid for {}", self.dialog_id);
        let _ = write!(out, "{:<width$}", "SCU Label");
        for w in 1..=self.n_summaries {
            let _ = write!(out, " {w:>2}");
        }
        let _ = writeln!(out, "  Tier");
        for e in &self.entries {
            let _ = write!(out, "{:<width$}", e.scu.label);
            for w in 1..=self.n_summaries {
                let _ = write!(out, " {:>2}", if e.scu.used_by.contains(&w) { "x" } else { "." });
            }
            let _ = writeln!(out, "  {:>4}", e.tier);
        }
        out
    }
}

/// Labels of entries with tier at least `min_tier`, in pyramid order.
pub fn central_propositions(p: &Pyramid, min_tier: usize) -> Vec<String> {
    p.central_entries(min_tier).map(|e| e.scu.label.clone()).collect()
}

//! Temporal theme identification.
//!
//! A keyword `k` of a target corpus gets weight `rec_pop(k) * dist(k)`:
//!
//! * `rec_pop` is a time-decayed term frequency, `Σ_p exp(-|p - now| / δ_k) · tf(k, p)`
//!   over the panes `p` of the target corpus;
//! * `dist` is an inverse corpus frequency over the context corpora,
//!   `ln((|D| + 1) / (df(k) + 1) + 1)`.
//!
//! The top `n` terms by weight form the corpus's [`KeywordSet`].

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::PaneIndex;
use crate::tokenize::TermCounts;

/// Ranked `(term, weight)` pairs, weight descending, ties by term.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub entries: Vec<(String, f64)>,
    pub computed_at: PaneIndex,
}

impl KeywordSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }
}

/// Per-pane term counts of a target corpus, borrowed from wherever they live.
#[derive(Clone, Debug)]
pub struct CorpusThemeStats<'a> {
    pub panes: Vec<(PaneIndex, &'a TermCounts)>,
    pub decay_factor: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContextStats {
    pub corpus_count: usize,
    pub document_frequency: HashMap<String, usize>,
}

impl ContextStats {
    pub fn df(&self, term: &str) -> usize {
        self.document_frequency.get(term).copied().unwrap_or(0)
    }

    /// Counts one more member corpus with the given vocabulary.
    pub fn add_corpus<'t>(&mut self, terms: impl IntoIterator<Item = &'t String>) {
        self.corpus_count += 1;
        for term in terms {
            match self.document_frequency.get_mut(term.as_str()) {
                Some(df) => *df += 1,
                None => {
                    self.document_frequency.insert(term.clone(), 1);
                }
            }
        }
    }
}

fn decay(pane: PaneIndex, now: PaneIndex, decay_factor: f64) -> f64 {
    (-((pane - now).abs() as f64) / decay_factor).exp()
}

/// Time-decayed frequency of `term` in the target corpus.
pub fn rec_pop(term: &str, stats: &CorpusThemeStats<'_>, now: PaneIndex) -> f64 {
    stats
        .panes
        .iter()
        .map(|&(pane, counts)| decay(pane, now, stats.decay_factor) * f64::from(counts.get(term)))
        .sum()
}

/// Inverse corpus frequency of `term` across the context corpora.
pub fn dist(term: &str, context: &ContextStats) -> f64 {
    let n = context.corpus_count as f64;
    let df = context.df(term) as f64;
    ((n + 1.0) / (df + 1.0) + 1.0).ln()
}

fn by_weight_then_term(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Top-`n` keywords of the target corpus within `context` at pane `now`.
pub fn thematic_keywords(
    target: &CorpusThemeStats<'_>,
    context: &ContextStats,
    now: PaneIndex,
    n: usize,
) -> KeywordSet {
    let mut rec_pops: HashMap<&str, f64> = HashMap::new();
    for &(pane, counts) in &target.panes {
        let w = decay(pane, now, target.decay_factor);
        for (term, &count) in counts.iter() {
            *rec_pops.entry(term.as_str()).or_insert(0.0) += w * f64::from(count);
        }
    }
    let mut entries: Vec<(String, f64)> = rec_pops
        .into_iter()
        .filter(|&(_, rp)| rp > 0.0)
        .map(|(term, rp)| (term.to_string(), rp * dist(term, context)))
        .collect();
    entries.sort_unstable_by(by_weight_then_term);
    entries.truncate(n);
    KeywordSet {
        entries,
        computed_at: now,
    }
}

/// Probability of each keyword among the keyword occurrences of a document.
/// All zeros when none of the keywords occurs.
#[derive(Clone, Debug, PartialEq)]
pub struct KeywordDistribution(pub Vec<f64>);

impl KeywordDistribution {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&p| p == 0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn keyword_distribution(term_counts: &TermCounts, keywords: &KeywordSet) -> KeywordDistribution {
    let raw: Vec<f64> = keywords.terms().map(|k| f64::from(term_counts.get(k))).collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return KeywordDistribution(vec![0.0; raw.len()]);
    }
    KeywordDistribution(raw.into_iter().map(|c| c / total).collect())
}

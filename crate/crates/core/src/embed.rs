//! Theme-aware article embedding and time-aware story embedding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PaneIndex, Vector};
use crate::summary::Pss;
use crate::theme::KeywordSet;
use crate::tokenize::TermCounts;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingStrategy {
    /// Sentences weighted by the keyword mass they carry.
    #[default]
    ThemSentMean,
    /// Plain mean of sentence vectors.
    IndSentMean,
}

/// Sentence pooling weights. They are non-negative and sum to one; an article
/// with no keyword occurrence falls back to uniform weights.
pub fn sentence_weights(
    sentence_terms: &[TermCounts],
    keywords: &KeywordSet,
    strategy: EmbeddingStrategy,
) -> Vec<f64> {
    let n = sentence_terms.len();
    let uniform = || vec![1.0 / n as f64; n];
    if strategy == EmbeddingStrategy::IndSentMean {
        return uniform();
    }
    let mass: Vec<f64> = sentence_terms
        .iter()
        .map(|terms| {
            keywords
                .entries
                .iter()
                .map(|(k, w)| f64::from(terms.get(k)) * w)
                .sum()
        })
        .collect();
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return uniform();
    }
    mass.into_iter().map(|m| m / total).collect()
}

/// Pools sentence vectors into an article representation for the theme
/// described by `keywords`.
pub fn embed_article(
    sentence_vectors: &[Vector],
    sentence_terms: &[TermCounts],
    keywords: &KeywordSet,
    strategy: EmbeddingStrategy,
) -> Result<Vector> {
    if sentence_vectors.len() != sentence_terms.len() {
        return Err(Error::LengthMismatch {
            left: sentence_vectors.len(),
            right: sentence_terms.len(),
        });
    }
    let first = sentence_vectors.first().ok_or(Error::EmptyArticle)?;
    let dim = first.dim();
    let weights = sentence_weights(sentence_terms, keywords, strategy);
    let mut out = Vector::zeros(dim);
    for (v, w) in sentence_vectors.iter().zip(weights) {
        v.ensure_dim(dim)?;
        if w != 0.0 {
            out.add_scaled(v, w);
        }
    }
    Ok(out)
}

fn time_weight(pane: PaneIndex, target: PaneIndex, decay: f64) -> f64 {
    (-((target - pane).abs() as f64) / decay).exp()
}

/// Story representation as seen from an article at `target_pane`: the
/// time-decayed mean of the story's frozen article representations, computed
/// from per-pane counts and sums alone.
pub fn embed_story(pss: &Pss, target_pane: PaneIndex) -> Result<Vector> {
    let (first, last) = pss.pane_span().ok_or(Error::EmptyStory { story: pss.story_id.0 })?;
    let decay = ((last - first) as f64).max(1.0);
    let mut numerator: Option<Vector> = None;
    let mut denominator = 0.0;
    for (&pane, summary) in pss.panes() {
        if summary.article_count == 0 {
            continue;
        }
        let w = time_weight(pane, target_pane, decay);
        numerator
            .get_or_insert_with(|| Vector::zeros(summary.vec_sum.dim()))
            .add_scaled(&summary.vec_sum, w);
        denominator += w * f64::from(summary.article_count);
    }
    match numerator {
        Some(mut v) if denominator > 0.0 => {
            v.scale(1.0 / denominator);
            Ok(v)
        }
        _ => Err(Error::EmptyStory { story: pss.story_id.0 }),
    }
}

/// Per-article form of [`embed_story`]: a softmax-style time-decayed mean over
/// the articles themselves, with the decay factor set to the story's pane span
/// (at least one).
pub fn embed_story_oracle(articles: &[(Vector, PaneIndex)], target_pane: PaneIndex) -> Result<Vector> {
    let first = articles.first().ok_or(Error::EmptyStory { story: 0 })?;
    let min = articles.iter().map(|a| a.1).min().unwrap_or(first.1);
    let max = articles.iter().map(|a| a.1).max().unwrap_or(first.1);
    let decay = ((max - min) as f64).max(1.0);
    let weights: Vec<f64> = articles
        .iter()
        .map(|&(_, pane)| time_weight(pane, target_pane, decay))
        .collect();
    let norm: f64 = weights.iter().sum();
    let mut out = Vector::zeros(first.0.dim());
    for ((v, _), w) in articles.iter().zip(weights) {
        v.ensure_dim(out.dim())?;
        out.add_scaled(v, w / norm);
    }
    Ok(out)
}

//! Pane-based story summaries.
//!
//! A story is never stored as a list of articles. For every in-window pane it
//! keeps a triplet: the number of member articles in that pane, their summed
//! term counts, and the sum of their frozen representations. Themes and
//! story embeddings are derived from these triplets alone, updates are
//! additive, and sliding the window only drops whole panes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PaneIndex, StoryId, Vector};
use crate::theme::{ContextStats, CorpusThemeStats, KeywordSet};
use crate::tokenize::TermCounts;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PaneSummary {
    pub article_count: u32,
    pub term_counts: TermCounts,
    /// Sum of member representations; not unit norm.
    pub vec_sum: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pss {
    pub story_id: StoryId,
    panes: BTreeMap<PaneIndex, PaneSummary>,
    /// Term counts summed over all retained panes.
    totals: TermCounts,
}

impl Pss {
    pub fn new(story_id: StoryId) -> Self {
        Self {
            story_id,
            panes: BTreeMap::new(),
            totals: TermCounts::new(),
        }
    }

    /// Folds one article into the triplet of `pane`.
    pub fn add(&mut self, pane: PaneIndex, article_repr: &Vector, article_terms: &TermCounts) {
        let summary = self.panes.entry(pane).or_insert_with(|| PaneSummary {
            article_count: 0,
            term_counts: TermCounts::new(),
            vec_sum: Vector::zeros(article_repr.dim()),
        });
        summary.article_count += 1;
        summary.term_counts.merge(article_terms);
        summary.vec_sum += article_repr;
        self.totals.merge(article_terms);
    }

    /// Drops every pane older than `oldest_live_pane`. Returns `true` when no
    /// pane remains, i.e. the story has expired.
    pub fn evict(&mut self, oldest_live_pane: PaneIndex) -> bool {
        let retained = self.panes.split_off(&oldest_live_pane);
        let expired = std::mem::replace(&mut self.panes, retained);
        for summary in expired.values() {
            self.totals.subtract(&summary.term_counts);
        }
        self.is_dead()
    }

    pub fn is_dead(&self) -> bool {
        self.article_count() == 0
    }

    pub fn panes(&self) -> impl Iterator<Item = (&PaneIndex, &PaneSummary)> {
        self.panes.iter()
    }

    pub fn pane(&self, pane: PaneIndex) -> Option<&PaneSummary> {
        self.panes.get(&pane)
    }

    pub fn pane_count(&self) -> usize {
        self.panes.len()
    }

    /// In-window article count.
    pub fn article_count(&self) -> usize {
        self.panes.values().map(|p| p.article_count as usize).sum()
    }

    /// Oldest and newest pane holding at least one article.
    pub fn pane_span(&self) -> Option<(PaneIndex, PaneIndex)> {
        let mut live = self.panes.iter().filter(|(_, s)| s.article_count > 0).map(|(&p, _)| p);
        let first = live.next()?;
        Some((first, live.next_back().unwrap_or(first)))
    }

    /// In-window term counts of the whole story.
    pub fn totals(&self) -> &TermCounts {
        &self.totals
    }
}

pub fn pss_add(pss: &mut Pss, pane: PaneIndex, article_repr: &Vector, article_terms: &TermCounts) {
    pss.add(pane, article_repr, article_terms);
}

pub fn pss_evict(pss: &mut Pss, oldest_live_pane: PaneIndex) -> bool {
    pss.evict(oldest_live_pane)
}

/// Theme inputs of a live story; the decay factor is the window length in panes.
pub fn pss_theme_stats(pss: &Pss, window_slides: u32) -> Result<CorpusThemeStats<'_>> {
    if pss.is_dead() {
        return Err(Error::EmptyStory { story: pss.story_id.0 });
    }
    Ok(CorpusThemeStats {
        panes: pss.panes.iter().map(|(&p, s)| (p, &s.term_counts)).collect(),
        decay_factor: f64::from(window_slides.max(1)),
    })
}

/// Live story plus the bookkeeping the engine needs around its summary.
#[derive(Clone, Debug)]
pub struct StoryState {
    pub id: StoryId,
    pub pss: Pss,
    pub cached_theme: KeywordSet,
    pub first_pane: PaneIndex,
    pub last_updated_pane: PaneIndex,
    /// Articles ever assigned, including ones whose panes have left the window.
    pub total_articles: usize,
}

impl StoryState {
    pub fn new(id: StoryId, pane: PaneIndex) -> Self {
        Self {
            id,
            pss: Pss::new(id),
            cached_theme: KeywordSet::default(),
            first_pane: pane,
            last_updated_pane: pane,
            total_articles: 0,
        }
    }

    pub fn add_article(&mut self, pane: PaneIndex, repr: &Vector, terms: &TermCounts, now: PaneIndex) {
        self.pss.add(pane, repr, terms);
        self.total_articles += 1;
        self.last_updated_pane = self.last_updated_pane.max(now);
    }

    pub fn expired_record(&self) -> ExpiredStoryRecord {
        ExpiredStoryRecord {
            story_id: self.id,
            first_pane: self.first_pane,
            last_pane: self.last_updated_pane,
            article_ids_count: self.total_articles,
            top_keywords: self.cached_theme.entries.clone(),
        }
    }
}

/// Context corpora made of stories: one corpus per story, a term counted once
/// per story whose in-window panes contain it.
pub fn context_stats<'a>(stories: impl IntoIterator<Item = &'a StoryState>) -> ContextStats {
    let mut ctx = ContextStats::default();
    for story in stories {
        if !story.pss.is_dead() {
            ctx.add_corpus(story.pss.totals().terms());
        }
    }
    ctx
}

/// One line of `expired.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpiredStoryRecord {
    pub story_id: StoryId,
    pub first_pane: PaneIndex,
    pub last_pane: PaneIndex,
    pub article_ids_count: usize,
    pub top_keywords: Vec<(String, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theme::thematic_keywords;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn tc(pairs: &[(&str, u32)]) -> TermCounts {
        pairs.iter().map(|&(t, c)| (t, c)).collect()
    }

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    #[test]
    fn add_to_empty_pane() {
        let mut pss = Pss::new(StoryId(0));
        pss_add(&mut pss, 3, &v(&[0.5, 0.5]), &tc(&[("a", 2)]));
        let p = pss.pane(3).unwrap();
        assert_eq!(p.article_count, 1);
        assert_eq!(p.term_counts, tc(&[("a", 2)]));
        assert_eq!(p.vec_sum, v(&[0.5, 0.5]));
    }

    #[test]
    fn adds_sum_componentwise() {
        let mut pss = Pss::new(StoryId(0));
        pss.add(1, &v(&[1.0, 2.0]), &tc(&[]));
        pss.add(1, &v(&[0.5, -1.0]), &tc(&[]));
        assert_eq!(pss.pane(1).unwrap().vec_sum, v(&[1.5, 1.0]));
        assert_eq!(pss.pane(1).unwrap().article_count, 2);
    }

    #[test]
    fn interleaved_adds_match_batch_build() {
        let articles: Vec<(PaneIndex, Vector, TermCounts)> = (0..12)
            .map(|i| {
                let pane = [4, 2, 3][i % 3];
                (pane, v(&[i as f64, 1.0 - i as f64]), tc(&[("t", i as u32 % 3 + 1), ("u", 1)]))
            })
            .collect();
        let mut pss = Pss::new(StoryId(0));
        for (p, r, t) in &articles {
            pss.add(*p, r, t);
        }
        for pane in [2, 3, 4] {
            let members: Vec<_> = articles.iter().filter(|a| a.0 == pane).collect();
            let mut sum = Vector::zeros(2);
            let mut terms = TermCounts::new();
            for (_, r, t) in &members {
                sum += r;
                terms.merge(t);
            }
            let got = pss.pane(pane).unwrap();
            assert_eq!(got.article_count as usize, members.len());
            assert_eq!(got.term_counts, terms);
            assert_eq!(got.vec_sum, sum);
        }
    }

    #[test]
    fn evict_below_minimum_is_noop() {
        let mut pss = Pss::new(StoryId(0));
        pss.add(5, &v(&[1.0]), &tc(&[("a", 1)]));
        let before = pss.clone();
        assert!(!pss_evict(&mut pss, 3));
        assert_eq!(pss, before);
    }

    #[test]
    fn evict_all_kills_story() {
        let mut pss = Pss::new(StoryId(0));
        pss.add(5, &v(&[1.0]), &tc(&[("a", 1)]));
        assert!(pss_evict(&mut pss, 6));
        assert!(pss.is_dead());
        assert!(pss.totals().is_empty());
        assert!(pss_theme_stats(&pss, 7).is_err());
    }

    #[test]
    fn sliding_seven_pane_window() {
        let window = 7;
        let mut pss = Pss::new(StoryId(0));
        for now in 0..9i64 {
            pss.add(now, &v(&[1.0]), &tc(&[("a", 1)]));
            pss.evict(now - window + 1);
            let retained: Vec<_> = pss.panes().map(|(p, _)| *p).collect();
            let lo = (now - window + 1).max(0);
            assert_eq!(retained, (lo..=now).collect::<Vec<_>>());
            assert!(pss.pane_count() <= window as usize);
        }
        // At pane 8 the pane added 8 slides earlier (pane 0) and pane 1 are gone.
        assert!(pss.pane(0).is_none() && pss.pane(1).is_none() && pss.pane(2).is_some());
        assert_eq!(pss.totals().get("a"), 7);
    }

    #[test]
    fn single_pane_theme_stats() {
        let mut pss = Pss::new(StoryId(0));
        pss.add(2, &v(&[1.0]), &tc(&[("a", 1)]));
        let stats = pss_theme_stats(&pss, 7).unwrap();
        assert_eq!(stats.panes.len(), 1);
        assert_eq!(stats.decay_factor, 7.0);
    }

    fn story(id: u64, terms: &[&str]) -> StoryState {
        let mut s = StoryState::new(StoryId(id), 0);
        s.add_article(0, &v(&[1.0]), &terms.iter().map(|&t| (t, 1)).collect(), 0);
        s
    }

    #[test]
    fn context_counts_stories_not_occurrences() {
        assert_eq!(context_stats(&[]).corpus_count, 0);
        let one = [story(0, &["k"])];
        assert_eq!(context_stats(&one).df("k"), 1);
        let three = [story(0, &["k", "x"]), story(1, &["k"]), story(2, &["y"])];
        let ctx = context_stats(&three);
        assert_eq!(ctx.corpus_count, 3);
        assert_eq!(ctx.df("k"), 2);
        assert_eq!(ctx.df("y"), 1);
    }

    #[test]
    fn expired_record_serializes_with_fixed_fields() {
        let mut s = story(3, &["k"]);
        s.cached_theme.entries = vec![("k".into(), 0.5)];
        let json = serde_json::to_string(&s.expired_record()).unwrap();
        assert_eq!(
            json,
            r#"{"story_id":3,"first_pane":0,"last_pane":0,"article_ids_count":1,"top_keywords":[["k",0.5]]}"#
        );
    }

    type RawArticle = (PaneIndex, u8, Vec<(u8, u32)>);

    fn raw_articles() -> impl Strategy<Value = Vec<RawArticle>> {
        proptest::collection::vec((0i64..8, 0u8..4, proptest::collection::vec((0u8..15, 1u32..4), 1..6)), 1..60)
    }

    fn terms_of(raw: &[(u8, u32)]) -> TermCounts {
        raw.iter().map(|&(t, c)| (format!("w{t}"), c)).collect()
    }

    proptest! {
        #[test]
        fn theme_from_summary_matches_recount(articles in raw_articles(), now in 7i64..10) {
            let window = 7u32;
            let oldest = now - i64::from(window) + 1;
            let mut stories: HashMap<u8, StoryState> = HashMap::new();
            for (pane, sid, terms) in &articles {
                stories.entry(*sid).or_insert_with(|| StoryState::new(StoryId(u64::from(*sid)), *pane))
                    .add_article(*pane, &v(&[1.0]), &terms_of(terms), *pane);
            }
            for s in stories.values_mut() {
                s.pss.evict(oldest);
            }
            let mut live: Vec<&StoryState> = stories.values().filter(|s| !s.pss.is_dead()).collect();
            live.sort_by_key(|s| s.id);
            let ctx = context_stats(live.iter().copied());

            // Brute force: recount from retained articles.
            let kept: Vec<&RawArticle> = articles.iter().filter(|a| a.0 >= oldest).collect();
            let mut df: HashMap<String, usize> = HashMap::new();
            for sid in 0u8..4 {
                let mut vocab: std::collections::HashSet<String> = Default::default();
                for a in kept.iter().filter(|a| a.1 == sid) {
                    vocab.extend(terms_of(&a.2).terms().cloned());
                }
                for t in vocab {
                    *df.entry(t).or_default() += 1;
                }
            }
            let live_ids: std::collections::HashSet<u8> = kept.iter().map(|a| a.1).collect();
            prop_assert_eq!(ctx.corpus_count, live_ids.len());
            prop_assert_eq!(&ctx.document_frequency, &df);

            for s in &live {
                let sid = s.id.0 as u8;
                let mut by_pane: std::collections::BTreeMap<PaneIndex, TermCounts> = Default::default();
                for a in kept.iter().filter(|a| a.1 == sid) {
                    by_pane.entry(a.0).or_default().merge(&terms_of(&a.2));
                }
                let oracle_stats = CorpusThemeStats { panes: by_pane.iter().map(|(p, c)| (*p, c)).collect(), decay_factor: 7.0 };
                let expected = thematic_keywords(&oracle_stats, &ctx, now, 5);
                let got = thematic_keywords(&pss_theme_stats(&s.pss, window).unwrap(), &ctx, now, 5);
                prop_assert_eq!(got, expected);
            }
        }

        #[test]
        fn pane_sum_is_order_independent(reprs in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..50), rot in 0usize..50) {
            let mut a = Pss::new(StoryId(0));
            let mut b = Pss::new(StoryId(0));
            for r in &reprs {
                a.add(0, &Vector::from_vec(r.clone()), &TermCounts::new());
            }
            let k = rot % reprs.len();
            for r in reprs[k..].iter().chain(&reprs[..k]).rev() {
                b.add(0, &Vector::from_vec(r.clone()), &TermCounts::new());
            }
            for (x, y) in a.pane(0).unwrap().vec_sum.as_slice().iter().zip(b.pane(0).unwrap().vec_sum.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

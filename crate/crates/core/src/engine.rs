//! Slide-by-slide orchestration.
//!
//! Each call to [`Engine::process_slide`]:
//!
//! 1. encodes the sentences of the incoming articles (once per article);
//! 2. slides the window, dropping expired panes from every story summary,
//!    expiring stories left without panes and discarding unassigned articles
//!    that fell out of the window;
//! 3. refreshes each live story's theme and scores every unassigned article
//!    against all stories, applying confident assignments;
//! 4. seeds new stories from the articles that remain unassigned.
//!
//! A failed encoding aborts the slide before any state is touched.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{assign_article, discover_seed_stories, initial_article_theme, AssignmentDecision, Candidate, ScoredAssignment, ScoringParams, StoryView};
use crate::config::{SimOptions, WindowConfig};
use crate::embed::embed_article;
use crate::encoder::SentenceEncoder;
use crate::error::{Error, Result};
use crate::model::{Article, PaneIndex, StoryId, Vector};
use crate::summary::{context_stats, pss_theme_stats, ExpiredStoryRecord, StoryState};
use crate::theme::{thematic_keywords, ContextStats, KeywordSet};
use crate::tokenize::{article_term_counts, TermCounts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewStory {
    pub story_id: StoryId,
    pub members: Vec<String>,
    pub top_keywords: Vec<(String, f64)>,
}

/// Everything that happened in one slide. One line of `stories.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlideReport {
    pub pane: PaneIndex,
    /// Ids of the articles ingested in this slide.
    pub arrivals: Vec<String>,
    /// One decision per unassigned article scored against existing stories.
    pub assignments: Vec<AssignmentDecision>,
    pub new_stories: Vec<NewStory>,
    pub expired_stories: Vec<StoryId>,
    /// Unassigned articles that left the window.
    pub discarded: Vec<String>,
    pub live_story_sizes: BTreeMap<StoryId, usize>,
}

/// An article waiting for a story. Keeps sentence vectors and term counts so
/// it can be re-embedded against each slide's themes.
#[derive(Clone, Debug)]
struct PoolEntry {
    id: String,
    pane: PaneIndex,
    sentence_vectors: Vec<Vector>,
    sentence_terms: Vec<TermCounts>,
    term_counts: TermCounts,
    /// Set only in poison mode, where assigned entries are kept with garbage
    /// buffers instead of being freed.
    assigned: bool,
}

impl PoolEntry {
    fn candidate(&self) -> Candidate<'_> {
        Candidate {
            id: &self.id,
            pane: self.pane,
            sentence_vectors: &self.sentence_vectors,
            sentence_terms: &self.sentence_terms,
            term_counts: &self.term_counts,
        }
    }

    fn poison(&mut self) {
        for v in &mut self.sentence_vectors {
            *v = Vector::from_vec(vec![f64::NAN; v.dim()]);
        }
        let garbage: TermCounts = [("\u{0}poison", 1_000_000u32)].into_iter().collect();
        for t in &mut self.sentence_terms {
            *t = garbage.clone();
        }
        self.term_counts = garbage;
        self.assigned = true;
    }
}

/// Per-pane article document frequencies over every ingested article,
/// assigned or not. This is the context for article-indicative themes.
#[derive(Clone, Debug, Default)]
struct PaneDocStats {
    articles: usize,
    df: HashMap<String, usize>,
}

#[derive(Debug, Default)]
pub struct EngineState {
    pub current_pane: Option<PaneIndex>,
    pub stories: BTreeMap<StoryId, StoryState>,
    pool: Vec<PoolEntry>,
    window_docs: BTreeMap<PaneIndex, PaneDocStats>,
    pub next_story_id: u64,
}

impl EngineState {
    /// Ids of articles currently waiting in the unassigned pool.
    pub fn unassigned_ids(&self) -> Vec<&str> {
        self.pool.iter().filter(|e| !e.assigned).map(|e| e.id.as_str()).collect()
    }

    fn window_context(&self) -> ContextStats {
        let mut ctx = ContextStats::default();
        for stats in self.window_docs.values() {
            ctx.corpus_count += stats.articles;
            for (term, &n) in &stats.df {
                match ctx.document_frequency.get_mut(term.as_str()) {
                    Some(df) => *df += n,
                    None => {
                        ctx.document_frequency.insert(term.clone(), n);
                    }
                }
            }
        }
        ctx
    }
}

pub struct Engine {
    config: WindowConfig,
    sim: SimOptions,
    encoder: Box<dyn SentenceEncoder>,
    state: EngineState,
    expired: Vec<ExpiredStoryRecord>,
    poison_assigned: bool,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("sim", &self.sim)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(config: WindowConfig, sim: SimOptions, encoder: Box<dyn SentenceEncoder>) -> Result<Self> {
        config.validate()?;
        if encoder.dim() != config.encoder_dim {
            return Err(Error::Config(format!(
                "encoder produces {}-dim vectors, window expects {}",
                encoder.dim(),
                config.encoder_dim
            )));
        }
        Ok(Self {
            config,
            sim,
            encoder,
            state: EngineState::default(),
            expired: Vec::new(),
            poison_assigned: false,
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    /// Test hook: instead of freeing assigned articles, overwrite their
    /// buffers with NaNs and garbage terms and keep them in memory. Output must
    /// not change.
    #[doc(hidden)]
    pub fn set_poison_assigned(&mut self, poison: bool) {
        self.poison_assigned = poison;
    }

    /// Expiry records accumulated since the last call.
    pub fn drain_expired(&mut self) -> Vec<ExpiredStoryRecord> {
        std::mem::take(&mut self.expired)
    }

    fn oldest_live(&self, pane: PaneIndex) -> PaneIndex {
        pane - i64::from(self.config.window_slides) + 1
    }

    fn scoring(&self) -> ScoringParams {
        ScoringParams {
            temperature: self.config.temperature,
            strategy: self.sim.strategy,
            jsd_mode: self.sim.jsd_mode,
        }
    }

    fn usable(article: &Article, pane: PaneIndex) -> bool {
        if article.pane() != pane {
            log::warn!("article {} belongs to pane {}, not {pane}; skipped", article.id, article.pane());
            return false;
        }
        if article.sentences.is_empty() || article.sentences.len() != article.sentence_terms.len() {
            log::warn!("article {} has no usable sentences; skipped", article.id);
            return false;
        }
        true
    }

    /// Processes the articles of one pane. `pane` must be later than every
    /// pane processed so far.
    pub fn process_slide(&mut self, pane: PaneIndex, new_articles: Vec<Article>) -> Result<SlideReport> {
        self.process_slide_inner(pane, new_articles)
            .map_err(|e| Error::Slide { pane, source: Box::new(e) })
    }

    fn process_slide_inner(&mut self, pane: PaneIndex, new_articles: Vec<Article>) -> Result<SlideReport> {
        if let Some(current) = self.state.current_pane {
            if pane <= current {
                return Err(Error::Config(format!("pane {pane} does not advance past {current}")));
            }
        }
        let articles: Vec<Article> = new_articles.into_iter().filter(|a| Self::usable(a, pane)).collect();

        // Encode before mutating anything so an encoder failure leaves the state intact.
        let sentences: Vec<String> = articles.iter().flat_map(|a| a.sentences.iter().cloned()).collect();
        let mut vectors = if sentences.is_empty() {
            Vec::new()
        } else {
            self.encoder.encode_batch(&sentences)?
        };
        if vectors.len() != sentences.len() {
            return Err(Error::LengthMismatch {
                left: sentences.len(),
                right: vectors.len(),
            });
        }
        for v in &vectors {
            v.ensure_dim(self.config.encoder_dim)?;
        }

        let mut report = SlideReport {
            pane,
            arrivals: articles.iter().map(|a| a.id.clone()).collect(),
            assignments: Vec::new(),
            new_stories: Vec::new(),
            expired_stories: Vec::new(),
            discarded: Vec::new(),
            live_story_sizes: BTreeMap::new(),
        };

        self.advance_window(pane, &mut report);

        let mut rest = vectors.drain(..);
        for article in articles {
            let sentence_vectors: Vec<Vector> = rest.by_ref().take(article.sentences.len()).collect();
            let term_counts = article_term_counts(&article);
            let docs = self.state.window_docs.entry(pane).or_default();
            docs.articles += 1;
            for term in term_counts.terms() {
                *docs.df.entry(term.clone()).or_insert(0) += 1;
            }
            self.state.pool.push(PoolEntry {
                id: article.id,
                pane,
                sentence_vectors,
                sentence_terms: article.sentence_terms,
                term_counts,
                assigned: false,
            });
        }

        if !self.state.stories.is_empty() {
            self.assign_pool(pane, &mut report)?;
        }
        self.seed_stories(pane, &mut report)?;

        report.live_story_sizes = self
            .state
            .stories
            .iter()
            .map(|(&id, s)| (id, s.pss.article_count()))
            .collect();
        Ok(report)
    }

    fn advance_window(&mut self, pane: PaneIndex, report: &mut SlideReport) {
        let oldest = self.oldest_live(pane);
        self.state.current_pane = Some(pane);

        let mut dead = Vec::new();
        for (&id, story) in self.state.stories.iter_mut() {
            if story.pss.evict(oldest) {
                dead.push(id);
            }
        }
        for id in dead {
            if let Some(story) = self.state.stories.remove(&id) {
                self.expired.push(story.expired_record());
                report.expired_stories.push(id);
            }
        }

        let (kept, gone): (Vec<_>, Vec<_>) = std::mem::take(&mut self.state.pool)
            .into_iter()
            .partition(|e| e.pane >= oldest);
        self.state.pool = kept;
        report.discarded = gone.into_iter().filter(|e| !e.assigned).map(|e| e.id).collect();

        self.state.window_docs = self.state.window_docs.split_off(&oldest);
    }

    fn refresh_themes(&mut self, now: PaneIndex) -> Result<()> {
        let ctx = context_stats(self.state.stories.values());
        let window = self.config.window_slides;
        let n = self.config.keywords_n;
        let themes: Vec<(StoryId, KeywordSet)> = self
            .state
            .stories
            .par_iter()
            .map(|(&id, story)| Ok((id, thematic_keywords(&pss_theme_stats(&story.pss, window)?, &ctx, now, n))))
            .collect::<Result<_>>()?;
        for (id, theme) in themes {
            if let Some(story) = self.state.stories.get_mut(&id) {
                story.cached_theme = theme;
            }
        }
        Ok(())
    }

    fn assign_pool(&mut self, now: PaneIndex, report: &mut SlideReport) -> Result<()> {
        self.refresh_themes(now)?;
        let params = self.scoring();
        let views: Vec<StoryView<'_>> = self.state.stories.values().map(StoryView::new).collect();
        let scored: Vec<(usize, ScoredAssignment)> = self
            .state
            .pool
            .par_iter()
            .enumerate()
            .filter(|(_, e)| !e.assigned)
            .map(|(i, e)| assign_article(&e.candidate(), &views, &params).map(|s| (i, s)))
            .collect::<Result<_>>()?;
        drop(views);

        // Apply the most confident placements first; every score used the
        // slide-start snapshot, so order only affects summation order.
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            scored[b]
                .1
                .decision
                .confidence
                .total_cmp(&scored[a].1.decision.confidence)
                .then(a.cmp(&b))
        });
        let mut assigned = vec![false; self.state.pool.len()];
        for &k in &order {
            let (idx, ref result) = scored[k];
            if let (Some(story_id), Some(repr)) = (result.decision.chosen_story, &result.repr) {
                let entry = &self.state.pool[idx];
                if let Some(story) = self.state.stories.get_mut(&story_id) {
                    story.add_article(entry.pane, repr, &entry.term_counts, now);
                    assigned[idx] = true;
                }
            }
        }
        report.assignments = scored.into_iter().map(|(_, s)| s.decision).collect();
        self.retire(&assigned);
        Ok(())
    }

    /// Frees (or, in poison mode, poisons) pool entries flagged in `retired`.
    fn retire(&mut self, retired: &[bool]) {
        if self.poison_assigned {
            for (entry, &r) in self.state.pool.iter_mut().zip(retired) {
                if r {
                    entry.poison();
                }
            }
        } else {
            let mut flags = retired.iter();
            self.state.pool.retain(|_| !flags.next().copied().unwrap_or(false));
        }
    }

    fn seed_stories(&mut self, now: PaneIndex, report: &mut SlideReport) -> Result<()> {
        let candidates: Vec<usize> = (0..self.state.pool.len()).filter(|&i| !self.state.pool[i].assigned).collect();
        if candidates.len() < self.config.min_story_size {
            return Ok(());
        }
        let ctx = self.state.window_context();
        let strategy = self.sim.strategy;
        let window = self.config.window_slides;
        let n = self.config.keywords_n;
        let pool = &self.state.pool;
        let initial: Vec<(String, Vector)> = candidates
            .par_iter()
            .map(|&i| {
                let e = &pool[i];
                let theme = initial_article_theme(&e.term_counts, e.pane, &ctx, now, window, n);
                Ok((e.id.clone(), embed_article(&e.sentence_vectors, &e.sentence_terms, &theme, strategy)?))
            })
            .collect::<Result<_>>()?;

        let seed = self.config.rng_seed ^ (now as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let clusters = discover_seed_stories(&initial, self.config.min_story_size, seed);
        if clusters.is_empty() {
            return Ok(());
        }

        let position: HashMap<&str, usize> = candidates
            .iter()
            .enumerate()
            .map(|(k, &i)| (pool[i].id.as_str(), k))
            .collect();
        let mut retired = vec![false; pool.len()];
        let mut created = Vec::with_capacity(clusters.len());
        for members in &clusters {
            let id = StoryId(self.state.next_story_id);
            self.state.next_story_id += 1;
            let mut story = StoryState::new(id, now);
            for member in members {
                let k = position[member.as_str()];
                let entry = &self.state.pool[candidates[k]];
                story.add_article(entry.pane, &initial[k].1, &entry.term_counts, now);
                retired[candidates[k]] = true;
            }
            story.first_pane = story.pss.pane_span().map(|(first, _)| first).unwrap_or(now);
            self.state.stories.insert(id, story);
            created.push((id, members.clone()));
        }
        self.retire(&retired);

        let ctx = context_stats(self.state.stories.values());
        for (id, members) in created {
            let story = self.state.stories.get_mut(&id).expect("just inserted");
            story.cached_theme = thematic_keywords(&pss_theme_stats(&story.pss, window)?, &ctx, now, n);
            report.new_stories.push(NewStory {
                story_id: id,
                members,
                top_keywords: story.cached_theme.entries.clone(),
            });
        }
        Ok(())
    }

    /// Replays a stream: sorts by time, groups by pane and processes every
    /// pane from the first to the last, including empty ones.
    pub fn run_stream(&mut self, articles: Vec<Article>) -> Result<Vec<SlideReport>> {
        let mut reports = Vec::new();
        self.run_stream_with(articles, |report, _| {
            reports.push(report.clone());
            Ok(())
        })?;
        Ok(reports)
    }

    /// Like [`Engine::run_stream`], handing each report and the stories that
    /// expired in that slide to `sink` as soon as the slide completes.
    pub fn run_stream_with<F>(&mut self, mut articles: Vec<Article>, mut sink: F) -> Result<()>
    where
        F: FnMut(&SlideReport, Vec<ExpiredStoryRecord>) -> Result<()>,
    {
        if articles.windows(2).any(|w| w[1].time.raw < w[0].time.raw) {
            log::warn!("input is not time-ordered; sorting");
        }
        articles.sort_by_key(|a| a.time.raw);
        let (Some(first), Some(last)) = (articles.first().map(Article::pane), articles.last().map(Article::pane)) else {
            return Ok(());
        };
        let mut by_pane: BTreeMap<PaneIndex, Vec<Article>> = BTreeMap::new();
        for a in articles {
            by_pane.entry(a.pane()).or_default().push(a);
        }
        let start = match self.state.current_pane {
            Some(current) => first.max(current + 1),
            None => first,
        };
        for pane in start..=last {
            let batch = by_pane.remove(&pane).unwrap_or_default();
            let report = self.process_slide(pane, batch)?;
            let expired = self.drain_expired();
            sink(&report, expired)?;
        }
        Ok(())
    }
}

//! Article-story similarity, confidence-based assignment and seed-story
//! discovery.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{embed_article, embed_story, EmbeddingStrategy};
use crate::error::{Error, Result};
use crate::model::{PaneIndex, StoryId, Vector};
use crate::summary::StoryState;
use crate::theme::{keyword_distribution, thematic_keywords, ContextStats, CorpusThemeStats, KeywordDistribution, KeywordSet};
use crate::tokenize::TermCounts;

/// Number of k-means++ restarts when seeding stories.
pub const SEED_RESTARTS: u64 = 8;
/// Iteration cap for spherical k-means after seeding.
pub const KMEANS_MAX_ITERS: usize = 50;

/// How the keyword-distribution factor enters the thematic similarity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JsdMode {
    /// `1 - JSD`, so identical distributions score 1.
    #[default]
    Similarity,
    /// The raw divergence.
    Divergence,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityBreakdown {
    pub cosine_part: f64,
    pub keyword_part: f64,
    pub thematic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDecision {
    pub article_id: String,
    pub chosen_story: Option<StoryId>,
    pub confidence: f64,
    pub threshold: f64,
}

/// Jensen-Shannon divergence with base-2 logarithms, in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            acc += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            acc += 0.5 * b * (b / m).log2();
        }
    }
    acc.clamp(0.0, 1.0)
}

pub fn thematic_similarity(
    article_repr: &Vector,
    story_repr: &Vector,
    article_dist: &KeywordDistribution,
    story_dist: &KeywordDistribution,
    mode: JsdMode,
) -> Result<SimilarityBreakdown> {
    if article_dist.len() != story_dist.len() {
        return Err(Error::KeywordLengthMismatch {
            left: article_dist.len(),
            right: story_dist.len(),
        });
    }
    article_repr.ensure_dim(story_repr.dim())?;
    let cosine_part = article_repr.cosine(story_repr).max(0.0);
    let keyword_part = if article_dist.is_zero() || story_dist.is_zero() {
        0.0
    } else {
        let jsd = js_divergence(article_dist.as_slice(), story_dist.as_slice());
        match mode {
            JsdMode::Similarity => 1.0 - jsd,
            JsdMode::Divergence => jsd,
        }
    };
    Ok(SimilarityBreakdown {
        cosine_part,
        keyword_part,
        thematic: cosine_part * keyword_part,
    })
}

/// Chance-adjusted assignment probability `1 - (1 - 1/n)^T`.
pub fn assignment_threshold(num_stories: usize, temperature: f64) -> f64 {
    let n = num_stories.max(1) as f64;
    1.0 - (1.0 - 1.0 / n).powf(temperature)
}

/// Softmax of `temperature * sims`.
pub fn confidence_scores(sims: &[f64], temperature: f64) -> Vec<f64> {
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|s| (temperature * (s - max)).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Read-only view of a story for scoring within one slide.
#[derive(Debug)]
pub struct StoryView<'a> {
    pub story: &'a StoryState,
    pub keyword_dist: KeywordDistribution,
    pub article_count: usize,
}

impl<'a> StoryView<'a> {
    pub fn new(story: &'a StoryState) -> Self {
        Self {
            keyword_dist: keyword_distribution(story.pss.totals(), &story.cached_theme),
            article_count: story.pss.article_count(),
            story,
        }
    }
}

/// An unassigned article as seen by the scorer.
#[derive(Clone, Copy, Debug)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub pane: PaneIndex,
    pub sentence_vectors: &'a [Vector],
    pub sentence_terms: &'a [TermCounts],
    pub term_counts: &'a TermCounts,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoringParams {
    pub temperature: f64,
    pub strategy: EmbeddingStrategy,
    pub jsd_mode: JsdMode,
}

#[derive(Clone, Debug)]
pub struct ScoredAssignment {
    pub decision: AssignmentDecision,
    /// The article's representation for the chosen story, frozen on assignment.
    pub repr: Option<Vector>,
    pub similarities: Vec<SimilarityBreakdown>,
}

/// Scores one article against every story and picks the most confident one
/// if its confidence reaches the chance-adjusted threshold.
pub fn assign_article(
    article: &Candidate<'_>,
    stories: &[StoryView<'_>],
    params: &ScoringParams,
) -> Result<ScoredAssignment> {
    let threshold = assignment_threshold(stories.len(), params.temperature);
    if stories.is_empty() {
        return Ok(ScoredAssignment {
            decision: AssignmentDecision {
                article_id: article.id.to_string(),
                chosen_story: None,
                confidence: 0.0,
                threshold,
            },
            repr: None,
            similarities: Vec::new(),
        });
    }
    let mut reprs = Vec::with_capacity(stories.len());
    let mut sims = Vec::with_capacity(stories.len());
    for view in stories {
        let theme = &view.story.cached_theme;
        let article_repr = embed_article(article.sentence_vectors, article.sentence_terms, theme, params.strategy)?;
        let story_repr = embed_story(&view.story.pss, article.pane)?;
        let article_dist = keyword_distribution(article.term_counts, theme);
        sims.push(thematic_similarity(&article_repr, &story_repr, &article_dist, &view.keyword_dist, params.jsd_mode)?);
        reprs.push(article_repr);
    }
    let scores: Vec<f64> = sims.iter().map(|s| s.thematic).collect();
    let keys: Vec<(usize, StoryId)> = stories.iter().map(|v| (v.article_count, v.story.id)).collect();
    let pick = pick_story(&scores, &keys, params.temperature);
    Ok(ScoredAssignment {
        decision: AssignmentDecision {
            article_id: article.id.to_string(),
            chosen_story: pick.chosen.map(|i| stories[i].story.id),
            confidence: pick.confidence,
            threshold: pick.threshold,
        },
        repr: pick.chosen.map(|i| reprs.swap_remove(i)),
        similarities: sims,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pick {
    pub chosen: Option<usize>,
    pub confidence: f64,
    pub threshold: f64,
}

/// Confidence-based choice among candidate stories given their thematic
/// similarities. `keys` holds each story's in-window size and id, used to
/// break confidence ties (larger story first, then smaller id).
pub fn pick_story(sims: &[f64], keys: &[(usize, StoryId)], temperature: f64) -> Pick {
    let threshold = assignment_threshold(sims.len(), temperature);
    if sims.is_empty() {
        return Pick { chosen: None, confidence: 0.0, threshold };
    }
    let conf = confidence_scores(sims, temperature);
    let best = (0..sims.len())
        .max_by(|&a, &b| {
            conf[a]
                .partial_cmp(&conf[b])
                .unwrap_or(Ordering::Equal)
                .then(keys[a].0.cmp(&keys[b].0))
                .then(keys[b].1.cmp(&keys[a].1))
        })
        .expect("non-empty sims");
    let confidence = conf[best];
    Pick {
        chosen: (confidence >= threshold).then_some(best),
        confidence,
        threshold,
    }
}

/// Article-indicative keywords: the article is the target corpus and all
/// in-window articles form the context.
pub fn initial_article_theme(
    article_terms: &TermCounts,
    article_pane: PaneIndex,
    window_context: &ContextStats,
    now: PaneIndex,
    window_slides: u32,
    keywords_n: usize,
) -> KeywordSet {
    let stats = CorpusThemeStats {
        panes: vec![(article_pane, article_terms)],
        decay_factor: f64::from(window_slides.max(1)),
    };
    thematic_keywords(&stats, window_context, now, keywords_n)
}

struct Clustering {
    labels: Vec<usize>,
    centers: Vec<Vector>,
    inertia: f64,
}

fn nearest(x: &Vector, centers: &[Vector]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let cos = x.dot(c);
        if cos > best.1 {
            best = (i, cos);
        }
    }
    best
}

/// k-means++ seeding under cosine distance. Stops early when every point
/// coincides with a chosen center.
fn kmeanspp_centers(points: &[Vector], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vector> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut dist2: Vec<f64> = points.iter().map(|p| (1.0 - p.dot(&centers[0])).max(0.0).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        if total <= 1e-24 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = dist2.len() - 1;
        for (i, &d) in dist2.iter().enumerate() {
            if d > 0.0 {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
        }
        while dist2[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        let c = points[pick].clone();
        for (d, p) in dist2.iter_mut().zip(points) {
            *d = d.min((1.0 - p.dot(&c)).max(0.0).powi(2));
        }
        centers.push(c);
    }
    centers
}

fn spherical_kmeans(points: &[Vector], mut centers: Vec<Vector>) -> Clustering {
    let dim = points[0].dim();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(points) {
            let (c, _) = nearest(p, &centers);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![Vector::zeros(dim); centers.len()];
        let mut sizes = vec![0usize; centers.len()];
        for (&l, p) in labels.iter().zip(points) {
            sums[l] += p;
            sizes[l] += 1;
        }
        // Empty or degenerate clusters lose their center; labels are remapped.
        let mut remap = vec![usize::MAX; centers.len()];
        let mut next = Vec::with_capacity(centers.len());
        for (i, (sum, size)) in sums.into_iter().zip(sizes).enumerate() {
            if size == 0 {
                continue;
            }
            if let Some(c) = sum.normalized() {
                remap[i] = next.len();
                next.push(c);
            }
        }
        if next.is_empty() {
            next.push(centers[0].clone());
            remap.iter_mut().for_each(|r| *r = 0);
        }
        for l in labels.iter_mut() {
            *l = remap[*l];
        }
        centers = next;
        // Members of a dropped center are reassigned on the next pass.
        for (label, p) in labels.iter_mut().zip(points) {
            if *label == usize::MAX {
                *label = nearest(p, &centers).0;
            }
        }
    }
    let inertia = labels
        .iter()
        .zip(points)
        .map(|(&l, p)| 1.0 - p.dot(&centers[l]))
        .sum();
    Clustering { labels, centers, inertia }
}

/// Seeds new stories from unassigned article representations.
///
/// The seed count is `floor(n / min_story_size)`. Each of [`SEED_RESTARTS`]
/// restarts runs k-means++ seeding under cosine distance followed by
/// spherical k-means; the restart with the lowest inertia
/// `Σ (1 - cos(x, center(x)))` wins. Only clusters with at least
/// `min_story_size` members are returned, ordered by their first member.
pub fn discover_seed_stories(
    reprs: &[(String, Vector)],
    min_story_size: usize,
    rng_seed: u64,
) -> Vec<Vec<String>> {
    let min_story_size = min_story_size.max(1);
    let k = reprs.len() / min_story_size;
    if k == 0 {
        return Vec::new();
    }
    let dim = reprs[0].1.dim();
    let points: Vec<Vector> = reprs
        .iter()
        .map(|(_, v)| v.normalized().unwrap_or_else(|| Vector::zeros(dim)))
        .collect();
    let best = (0..SEED_RESTARTS)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(restart);
            let centers = kmeanspp_centers(&points, k, &mut rng);
            spherical_kmeans(&points, centers)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|best, c| if c.inertia < best.inertia { c } else { best })
        .expect("at least one restart");

    // Clusters whose centroids coincide are the same seed.
    let mut canonical: Vec<usize> = (0..best.centers.len()).collect();
    for i in 0..best.centers.len() {
        for j in 0..i {
            if canonical[j] == j && same_direction(&best.centers[i], &best.centers[j]) {
                canonical[i] = j;
                break;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); best.centers.len()];
    for (idx, &label) in best.labels.iter().enumerate() {
        groups[canonical[label]].push(idx);
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_iter().filter(|g| g.len() >= min_story_size).collect();
    clusters.sort_by_key(|g| g[0]);
    clusters
        .into_iter()
        .map(|g| g.into_iter().map(|i| reprs[i].0.clone()).collect())
        .collect()
}

fn same_direction(a: &Vector, b: &Vector) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::StoryState;
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> KeywordDistribution {
        KeywordDistribution(p.to_vec())
    }

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    #[test]
    fn identical_inputs_score_one() {
        let a = v(&[0.6, 0.8]);
        let s = thematic_similarity(&a, &a, &dist(&[0.3, 0.7]), &dist(&[0.3, 0.7]), JsdMode::Similarity).unwrap();
        assert!((s.thematic - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_cosine_truncates() {
        let s = thematic_similarity(&v(&[1.0, 0.0]), &v(&[-1.0, 0.1]), &dist(&[1.0]), &dist(&[1.0]), JsdMode::Similarity).unwrap();
        assert_eq!(s.cosine_part, 0.0);
        assert_eq!(s.thematic, 0.0);
    }

    #[test]
    fn disjoint_support_jsd_is_one() {
        assert_eq!(js_divergence(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(js_divergence(&[0.25, 0.75], &[0.25, 0.75]), 0.0);
        let a = v(&[1.0, 0.0]);
        let s = thematic_similarity(&a, &a, &dist(&[1.0, 0.0]), &dist(&[0.0, 1.0]), JsdMode::Similarity).unwrap();
        assert_eq!(s.keyword_part, 0.0);
        assert_eq!(s.thematic, 0.0);
    }

    #[test]
    fn jsd_matches_direct_formula() {
        // p = (1/2, 1/2), q = (1, 0): m = (3/4, 1/4).
        let direct = 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2()) + 0.5 * (1.0f64 / 0.75).log2();
        assert!((js_divergence(&[0.5, 0.5], &[1.0, 0.0]) - direct).abs() < 1e-15);
    }

    #[test]
    fn zero_article_distribution_zeroes_keyword_part() {
        let a = v(&[1.0]);
        for mode in [JsdMode::Similarity, JsdMode::Divergence] {
            let s = thematic_similarity(&a, &a, &dist(&[0.0, 0.0]), &dist(&[0.5, 0.5]), mode).unwrap();
            assert_eq!(s.keyword_part, 0.0);
        }
        let s = thematic_similarity(&a, &a, &dist(&[1.0, 0.0]), &dist(&[0.0, 1.0]), JsdMode::Divergence).unwrap();
        assert_eq!(s.keyword_part, 1.0);
    }

    #[test]
    fn mismatched_distributions_error() {
        let a = v(&[1.0]);
        assert!(matches!(
            thematic_similarity(&a, &a, &dist(&[1.0]), &dist(&[0.5, 0.5]), JsdMode::Similarity),
            Err(Error::KeywordLengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn threshold_values() {
        assert_eq!(assignment_threshold(2, 2.0), 0.75);
        assert_eq!(assignment_threshold(1, 3.7), 1.0);
        assert_eq!(assignment_threshold(4, 2.0), 0.4375);
    }

    #[test]
    fn softmax_values() {
        assert_eq!(confidence_scores(&[0.3, 0.3, 0.3, 0.3], 2.0), vec![0.25; 4]);
        assert_eq!(confidence_scores(&[0.9], 2.0), vec![1.0]);
        let c = confidence_scores(&[0.8, 0.2], 2.0);
        let e = 1.6f64.exp() / (1.6f64.exp() + 0.4f64.exp());
        assert!((c[0] - e).abs() < 1e-12);
        assert!((c[0] - 0.7685).abs() < 1e-3 && (c[1] - 0.2315).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(sims in proptest::collection::vec(0.0f64..1.0, 1..8), shift in -5.0f64..5.0, t in 0.5f64..5.0) {
            let a = confidence_scores(&sims, t);
            let shifted: Vec<f64> = sims.iter().map(|s| s + shift).collect();
            let b = confidence_scores(&shifted, t);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn threshold_monotone(n in 2usize..50, t in 0.5f64..5.0, dt in 0.01f64..2.0) {
            prop_assert!(assignment_threshold(n, t + dt) > assignment_threshold(n, t));
            prop_assert!(assignment_threshold(n + 1, t) < assignment_threshold(n, t));
        }

        #[test]
        fn similarity_bounded(
            a in proptest::collection::vec(-1.0f64..1.0, 4),
            b in proptest::collection::vec(-1.0f64..1.0, 4),
            p in proptest::collection::vec(0.0f64..1.0, 3),
            q in proptest::collection::vec(0.0f64..1.0, 3),
        ) {
            let norm = |x: Vec<f64>| {
                let s: f64 = x.iter().sum();
                if s == 0.0 { x } else { x.into_iter().map(|y| y / s).collect() }
            };
            let (p, q) = (dist(&norm(p)), dist(&norm(q)));
            let s1 = thematic_similarity(&v(&a), &v(&b), &p, &q, JsdMode::Similarity).unwrap();
            prop_assert!((0.0..=1.0).contains(&s1.thematic));
            prop_assert!((s1.thematic - s1.cosine_part * s1.keyword_part).abs() < 1e-12);
            prop_assert!((js_divergence(p.as_slice(), q.as_slice()) - js_divergence(q.as_slice(), p.as_slice())).abs() < 1e-12);
        }
    }

    fn story(id: u64, pane: PaneIndex, repr: &Vector, terms: &[(&str, u32)], theme: &[(&str, f64)]) -> StoryState {
        let mut s = StoryState::new(StoryId(id), pane);
        let tc: TermCounts = terms.iter().map(|&(t, c)| (t, c)).collect();
        s.add_article(pane, repr, &tc, pane);
        s.cached_theme = KeywordSet {
            entries: theme.iter().map(|&(t, w)| (t.to_string(), w)).collect(),
            computed_at: pane,
        };
        s
    }

    fn params() -> ScoringParams {
        ScoringParams {
            temperature: 2.0,
            strategy: EmbeddingStrategy::ThemSentMean,
            jsd_mode: JsdMode::Similarity,
        }
    }

    #[test]
    fn pick_story_examples() {
        let keys = [(1, StoryId(1)), (1, StoryId(2))];
        let p = pick_story(&[0.8, 0.2], &keys, 2.0);
        assert_eq!(p.chosen, Some(0));
        assert!((p.confidence - 0.7685).abs() < 1e-3 && p.threshold == 0.75);
        let p = pick_story(&[0.5, 0.5], &keys, 2.0);
        assert_eq!((p.chosen, p.confidence), (None, 0.5));
        let p = pick_story(&[1.0], &keys[..1], 2.0);
        assert_eq!((p.chosen, p.confidence, p.threshold), (Some(0), 1.0, 1.0));
    }

    #[test]
    fn confidence_ties_prefer_larger_then_older_story() {
        // At T = 0.5 the 4-story threshold is 0.134, so a four-way tie still assigns.
        let keys = [(2, StoryId(5)), (7, StoryId(9)), (7, StoryId(3)), (1, StoryId(0))];
        assert_eq!(pick_story(&[0.4; 4], &keys, 0.5).chosen, Some(2));
        let keys = [(7, StoryId(9)), (7, StoryId(3))];
        let p = pick_story(&[0.4, 0.4], &keys, 0.5);
        assert_eq!(p.chosen, Some(1));
    }

    #[test]
    fn single_story_identical_theme_assigns_at_boundary() {
        let repr = v(&[1.0, 0.0]);
        let s = story(1, 0, &repr, &[("flood", 2)], &[("flood", 1.0)]);
        let views = [StoryView::new(&s)];
        let terms: TermCounts = [("flood", 1u32)].into_iter().collect();
        let cand = Candidate {
            id: "a",
            pane: 0,
            sentence_vectors: std::slice::from_ref(&repr),
            sentence_terms: std::slice::from_ref(&terms),
            term_counts: &terms,
        };
        let out = assign_article(&cand, &views, &params()).unwrap();
        assert_eq!(out.decision.confidence, 1.0);
        assert_eq!(out.decision.threshold, 1.0);
        assert_eq!(out.decision.chosen_story, Some(StoryId(1)));
        assert_eq!(out.repr.unwrap(), repr);
    }

    #[test]
    fn equal_confidence_below_threshold_stays_unassigned() {
        let repr = v(&[1.0, 0.0]);
        let s1 = story(1, 0, &repr, &[("flood", 2)], &[("flood", 1.0)]);
        let s2 = story(2, 0, &repr, &[("flood", 2)], &[("flood", 1.0)]);
        let views = [StoryView::new(&s1), StoryView::new(&s2)];
        let terms: TermCounts = [("flood", 1u32)].into_iter().collect();
        let cand = Candidate {
            id: "a",
            pane: 0,
            sentence_vectors: std::slice::from_ref(&repr),
            sentence_terms: std::slice::from_ref(&terms),
            term_counts: &terms,
        };
        let out = assign_article(&cand, &views, &params()).unwrap();
        assert_eq!(out.decision.confidence, 0.5);
        assert_eq!(out.decision.chosen_story, None);
        assert!(out.repr.is_none());
    }

    #[test]
    fn confident_story_chosen_over_weaker_one() {
        // Story 1 fully matches (sim 1); story 2 shares no keywords (sim 0).
        // conf = e^2 / (e^2 + 1) = 0.881 >= 0.75.
        let repr = v(&[1.0, 0.0]);
        let s1 = story(1, 0, &repr, &[("flood", 2)], &[("flood", 1.0)]);
        let s2 = story(2, 0, &v(&[0.0, 1.0]), &[("vote", 2)], &[("vote", 1.0)]);
        let views = [StoryView::new(&s1), StoryView::new(&s2)];
        let terms: TermCounts = [("flood", 1u32)].into_iter().collect();
        let cand = Candidate {
            id: "a",
            pane: 0,
            sentence_vectors: std::slice::from_ref(&repr),
            sentence_terms: std::slice::from_ref(&terms),
            term_counts: &terms,
        };
        let out = assign_article(&cand, &views, &params()).unwrap();
        assert_eq!(out.decision.chosen_story, Some(StoryId(1)));
        assert!((out.decision.confidence - 2f64.exp() / (2f64.exp() + 1.0)).abs() < 1e-12);
        assert_eq!(out.similarities[1].thematic, 0.0);
    }

    #[test]
    fn initial_theme_single_article_window() {
        let terms: TermCounts = [("flood", 3u32), ("rain", 1)].into_iter().collect();
        let mut ctx = ContextStats::default();
        ctx.add_corpus(terms.terms());
        let ks = initial_article_theme(&terms, 0, &ctx, 0, 7, 10);
        assert_eq!(ks.entries[0], ("flood".to_string(), 3.0 * 2f64.ln()));
        assert_eq!(ks.entries[1], ("rain".to_string(), 2f64.ln()));
    }

    #[test]
    fn initial_theme_unique_term_boost() {
        let terms: TermCounts = [("unique", 1u32)].into_iter().collect();
        let ctx = ContextStats {
            corpus_count: 100,
            document_frequency: [("unique".to_string(), 1)].into_iter().collect(),
        };
        let ks = initial_article_theme(&terms, 4, &ctx, 4, 7, 10);
        assert!((ks.entries[0].1 - (101.0f64 / 2.0 + 1.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn initial_theme_planted_terms_beat_boilerplate() {
        // 20 articles share boilerplate; the target also carries planted terms.
        let mut ctx = ContextStats::default();
        let boiler: Vec<String> = (0..6).map(|i| format!("boiler{i}")).collect();
        for i in 0..20 {
            let mut vocab = boiler.clone();
            vocab.push(format!("filler{i}"));
            ctx.add_corpus(vocab.iter());
        }
        let mut target: TermCounts = boiler.iter().map(|b| (b.as_str(), 3u32)).collect();
        for p in ["levee", "breach", "sandbag"] {
            target.add(p, 2);
        }
        let mut vocab: Vec<String> = boiler.clone();
        vocab.extend(["levee", "breach", "sandbag"].map(String::from));
        ctx.add_corpus(vocab.iter());
        // Brute force: boilerplate 3 * ln(22/22 + 1) = 2.079; planted 2 * ln(22/2 + 1) = 4.970.
        let top = initial_article_theme(&target, 0, &ctx, 0, 7, 3);
        let mut got: Vec<&str> = top.terms().collect();
        got.sort();
        assert_eq!(got, vec!["breach", "levee", "sandbag"]);
        assert!((top.entries[0].1 - 2.0 * 12f64.ln()).abs() < 1e-12);
    }

    fn bundle(axis: usize, dim: usize, n: usize, jitter: f64) -> Vec<Vector> {
        (0..n)
            .map(|i| {
                let mut x = vec![0.0; dim];
                x[axis] = 1.0;
                x[(axis + 1 + i % 2) % dim] += jitter * (i as f64 + 1.0) / n as f64;
                Vector::from_vec(x).normalized().unwrap()
            })
            .collect()
    }

    fn inertia_of(points: &[Vector], groups: &[Vec<usize>]) -> f64 {
        groups
            .iter()
            .filter(|g| !g.is_empty())
            .map(|g| {
                let mut sum = Vector::zeros(points[0].dim());
                for &i in g {
                    sum += &points[i];
                }
                let c = sum.normalized().unwrap();
                g.iter().map(|&i| 1.0 - points[i].dot(&c)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn too_few_articles_give_no_seeds() {
        let reprs: Vec<(String, Vector)> = bundle(0, 4, 3, 0.1).into_iter().enumerate().map(|(i, v)| (format!("a{i}"), v)).collect();
        assert!(discover_seed_stories(&reprs, 4, 1).is_empty());
    }

    #[test]
    fn recovers_two_orthogonal_bundles_like_exhaustive_search() {
        let m = 4;
        let mut points = bundle(0, 6, m, 0.2);
        points.extend(bundle(3, 6, m, 0.2));
        let n = points.len();
        // Exhaustive search over all 2-partitions for the minimum inertia.
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 1u32..(1 << (n - 1)) {
            let a: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let b: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
            let inertia = inertia_of(&points, &[a.clone(), b]);
            if best.as_ref().is_none_or(|(bi, _)| inertia < *bi) {
                best = Some((inertia, a));
            }
        }
        let (_, oracle_side) = best.unwrap();
        let reprs: Vec<(String, Vector)> = points.into_iter().enumerate().map(|(i, v)| (format!("a{i}"), v)).collect();
        let seeds = discover_seed_stories(&reprs, m, 11);
        assert_eq!(seeds.len(), 2);
        let mut got: Vec<Vec<String>> = seeds;
        got.sort();
        let mut side_a: Vec<String> = oracle_side.iter().map(|i| format!("a{i}")).collect();
        side_a.sort();
        let mut side_b: Vec<String> = (0..n).filter(|i| !oracle_side.contains(i)).map(|i| format!("a{i}")).collect();
        side_b.sort();
        let mut want = vec![side_a, side_b];
        want.sort();
        for g in got.iter_mut() {
            g.sort();
        }
        assert_eq!(got, want);
    }

    #[test]
    fn duplicates_collapse_into_one_seed() {
        let x = v(&[0.0, 1.0, 0.0]);
        let reprs: Vec<(String, Vector)> = (0..10).map(|i| (format!("d{i}"), x.clone())).collect();
        let seeds = discover_seed_stories(&reprs, 3, 5);
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].len(), 10);
    }

    proptest! {
        #[test]
        fn seeds_are_disjoint_and_large_enough(
            raw in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 5), 1..40),
            m in 1usize..6,
            seed in any::<u64>(),
        ) {
            let reprs: Vec<(String, Vector)> = raw.into_iter().enumerate().map(|(i, x)| (format!("a{i}"), Vector::from_vec(x))).collect();
            let seeds = discover_seed_stories(&reprs, m, seed);
            let mut seen = std::collections::HashSet::new();
            for cluster in &seeds {
                prop_assert!(cluster.len() >= m);
                for id in cluster {
                    prop_assert!(seen.insert(id.clone()));
                    prop_assert!(reprs.iter().any(|(r, _)| r == id));
                }
            }
            prop_assert_eq!(seeds.clone(), discover_seed_stories(&reprs, m, seed));
        }
    }
}

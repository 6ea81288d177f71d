//! Planted-story corpus generator.
//!
//! Every story owns a private vocabulary of pseudo-words; a global shared pool
//! supplies off-topic "noise" sentences. Each article carries
//! `sentences_per_article` sentences drawn from its story's vocabulary plus
//! `ceil(noise_ratio * sentences_per_article)` sentences from the shared pool,
//! shuffled. Word choice within a pool is Zipf-weighted so every story has a
//! few dominant keywords, as real coverage does.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{ArticleRecord, RecordTime};
use crate::model::SECONDS_PER_DAY;

/// 2023-01-01T00:00:00Z.
pub const DEFAULT_START_EPOCH: i64 = 1_672_531_200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub stories: usize,
    pub articles_per_story_per_pane: usize,
    pub panes: usize,
    /// Private vocabulary size per story.
    pub vocab_size: usize,
    pub noise_ratio: f64,
    pub sentences_per_article: usize,
    pub words_per_sentence: usize,
    pub noise_vocab_size: usize,
    pub slide_seconds: u64,
    pub start_epoch: i64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            stories: 4,
            articles_per_story_per_pane: 6,
            panes: 10,
            vocab_size: 60,
            noise_ratio: 0.3,
            sentences_per_article: 4,
            words_per_sentence: 8,
            noise_vocab_size: 400,
            slide_seconds: SECONDS_PER_DAY,
            start_epoch: DEFAULT_START_EPOCH,
            seed: 7,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid synthetic corpus spec: {0}")]
pub struct SyntheticError(String);

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let positive = [
            ("stories", self.stories),
            ("articles_per_story_per_pane", self.articles_per_story_per_pane),
            ("panes", self.panes),
            ("vocab_size", self.vocab_size),
            ("sentences_per_article", self.sentences_per_article),
            ("words_per_sentence", self.words_per_sentence),
            ("noise_vocab_size", self.noise_vocab_size),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(SyntheticError(format!("{name} must be positive")));
            }
        }
        if !(self.noise_ratio >= 0.0 && self.noise_ratio.is_finite()) {
            return Err(SyntheticError("noise_ratio must be a non-negative number".into()));
        }
        if self.slide_seconds == 0 {
            return Err(SyntheticError("slide_seconds must be positive".into()));
        }
        Ok(())
    }

    pub fn noise_sentences(&self) -> usize {
        (self.noise_ratio * self.sentences_per_article as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// A pronounceable pseudo-word, unique per `n`: three or more syllables
/// spelling `n` in base 80, ending in a consonant.
pub fn pseudo_word(n: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut digits = Vec::new();
    let mut rest = n;
    for _ in 0..3 {
        digits.push(rest % base);
        rest /= base;
    }
    while rest > 0 {
        digits.push(rest % base);
        rest /= base;
    }
    let mut word = String::new();
    for d in digits {
        word.push_str(ONSETS[d / VOWELS.len()]);
        word.push_str(VOWELS[d % VOWELS.len()]);
    }
    word.push('x');
    word
}

struct Pool {
    words: Vec<String>,
    dist: WeightedIndex<f64>,
}

impl Pool {
    fn new(first_id: usize, size: usize) -> Self {
        let words = (first_id..first_id + size).map(pseudo_word).collect();
        let weights: Vec<f64> = (1..=size).map(|r| 1.0 / r as f64).collect();
        Self {
            words,
            dist: WeightedIndex::new(weights).expect("positive weights"),
        }
    }

    fn sentence(&self, len: usize, rng: &mut ChaCha8Rng) -> String {
        let mut out = String::new();
        for i in 0..len {
            let w = &self.words[self.dist.sample(rng)];
            if i == 0 {
                let mut chars = w.chars();
                if let Some(c) = chars.next() {
                    out.extend(c.to_uppercase());
                    out.push_str(chars.as_str());
                }
            } else {
                out.push(' ');
                out.push_str(w);
            }
        }
        out.push('.');
        out
    }
}

/// Generates the corpus, sorted by time, with ids `a000000`, `a000001`, ….
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<ArticleRecord>, SyntheticError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let story_pools: Vec<Pool> = (0..spec.stories).map(|s| Pool::new(s * spec.vocab_size, spec.vocab_size)).collect();
    let noise_pool = Pool::new(spec.stories * spec.vocab_size, spec.noise_vocab_size);
    let n_noise = spec.noise_sentences();
    let slide = spec.slide_seconds as i64;

    let mut drafts: Vec<(i64, usize, Vec<String>)> = Vec::new();
    for pane in 0..spec.panes {
        for (story, pool) in story_pools.iter().enumerate() {
            for _ in 0..spec.articles_per_story_per_pane {
                let offset = rng.random_range(0..slide);
                let mut sentences: Vec<String> = (0..spec.sentences_per_article)
                    .map(|_| pool.sentence(spec.words_per_sentence, &mut rng))
                    .collect();
                sentences.extend((0..n_noise).map(|_| noise_pool.sentence(spec.words_per_sentence, &mut rng)));
                sentences.shuffle(&mut rng);
                drafts.push((spec.start_epoch + pane as i64 * slide + offset, story, sentences));
            }
        }
    }
    drafts.sort_by_key(|d| d.0);
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, (time, story, sentences))| ArticleRecord {
            id: format!("a{i:06}"),
            time: RecordTime::Epoch(time),
            title: None,
            text: None,
            sentences: Some(sentences),
            label: Some(format!("story-{story}")),
        })
        .collect())
}
